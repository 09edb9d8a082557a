"""Forward translation, dual reconstruction, and feature-zeroing generation.

Everything here is a pure composition of the bundle's encoders and decoders;
discriminators are never touched.
"""

from dataclasses import dataclass
from typing import Optional

import torch

from .errors import InputError
from .networks import FeaturePair, ModelBundle, _check_image

TRANSLATIONS = ("conditional", "unconditional")
RECONSTRUCTIONS = ("skip", "reencoded", "cycle")


@dataclass
class TranslationRecord:
    """All intermediates of one dual pass over a batch pair."""

    x_A: torch.Tensor
    x_B: torch.Tensor
    feat_A: FeaturePair
    feat_B: FeaturePair
    x_AB: torch.Tensor
    x_BA: torch.Tensor
    # filled in by reconstruct()
    feat_hat_AB: Optional[FeaturePair] = None  # e_B(x_AB): (content of A, style of B)
    feat_hat_BA: Optional[FeaturePair] = None  # e_A(x_BA): (content of B, style of A)
    x_hat_A: Optional[torch.Tensor] = None
    x_hat_B: Optional[torch.Tensor] = None

    def validate(self):
        batch = self.x_A.shape[0]
        for name in ("x_A", "x_B", "x_AB", "x_BA", "x_hat_A", "x_hat_B"):
            t = getattr(self, name)
            if t is None:
                continue
            if t.shape != self.x_A.shape:
                raise InputError(f"{name} shape {tuple(t.shape)} != {tuple(self.x_A.shape)}")
            if t.shape[0] != batch:
                raise InputError(f"{name} batch size mismatch")
            if not torch.isfinite(t).all():
                raise InputError(f"{name} contains non-finite values")
        return self


def _style_for_g_A(bundle: ModelBundle, ds: torch.Tensor) -> torch.Tensor:
    # In asymmetric mode the reverse decoder takes no conditional style.
    if bundle.mode == "asymmetric_A_to_B":
        return torch.zeros_like(ds)
    return ds


def translate(bundle: ModelBundle, x_A, x_B, translation: str = "conditional"):
    """Encode both inputs and produce the two cross-domain translations."""
    if translation not in TRANSLATIONS:
        raise InputError(f"translation must be one of {TRANSLATIONS}")
    _check_image(bundle.arch, x_A, "x_A")
    _check_image(bundle.arch, x_B, "x_B")
    if x_A.shape[0] != x_B.shape[0]:
        raise InputError(
            f"batch sizes differ: x_A has {x_A.shape[0]}, x_B has {x_B.shape[0]}"
        )
    di_A, ds_A = bundle.e_A(x_A)
    di_B, ds_B = bundle.e_B(x_B)
    feat_A = FeaturePair(di=di_A, ds=ds_A)
    feat_B = FeaturePair(di=di_B, ds=ds_B)
    if translation == "conditional":
        x_AB = bundle.g_B(feat_A.di, feat_B.ds)
        x_BA = bundle.g_A(feat_B.di, _style_for_g_A(bundle, feat_A.ds))
    else:
        # Unconditional dual translation: each image carries its own style.
        x_AB = bundle.g_B(feat_A.di, feat_A.ds)
        x_BA = bundle.g_A(feat_B.di, feat_B.ds)
    return x_AB, x_BA, feat_A, feat_B


def translate_forward(bundle: ModelBundle, x_A, x_B):
    """The conditional forward pass: x_AB keeps A's content and B's style."""
    return translate(bundle, x_A, x_B, "conditional")


def reconstruct(bundle: ModelBundle, record: TranslationRecord, reconstruction: str = "skip"):
    """Re-encode the translations and rebuild both inputs.

    Translations are re-encoded with the encoder of the domain they landed
    in. The default wiring feeds the decoders the re-extracted content maps
    together with the ORIGINAL style vectors from the record; "reencoded"
    swaps in the re-extracted style vectors, and "cycle" feeds each decoder
    both outputs of a single re-encoding.
    """
    if reconstruction not in RECONSTRUCTIONS:
        raise InputError(f"reconstruction must be one of {RECONSTRUCTIONS}")
    hat_di_A, hat_ds_B = bundle.e_B(record.x_AB)
    hat_di_B, hat_ds_A = bundle.e_A(record.x_BA)
    record.feat_hat_AB = FeaturePair(di=hat_di_A, ds=hat_ds_B)
    record.feat_hat_BA = FeaturePair(di=hat_di_B, ds=hat_ds_A)
    if reconstruction == "skip":
        ds_for_A = record.feat_A.ds
        ds_for_B = record.feat_B.ds
    elif reconstruction == "reencoded":
        ds_for_A = hat_ds_A
        ds_for_B = hat_ds_B
    else:  # cycle: decoders consume the re-encoding of their own translation
        ds_for_A = hat_ds_B
        ds_for_B = hat_ds_A
    record.x_hat_A = bundle.g_A(hat_di_A, _style_for_g_A(bundle, ds_for_A))
    record.x_hat_B = bundle.g_B(hat_di_B, ds_for_B)
    return record.x_hat_A, record.x_hat_B, record.feat_hat_AB, record.feat_hat_BA


def dual_pass(bundle: ModelBundle, x_A, x_B, translation="conditional",
              reconstruction="skip") -> TranslationRecord:
    """Run translation plus reconstruction and collect every intermediate."""
    x_AB, x_BA, feat_A, feat_B = translate(bundle, x_A, x_B, translation)
    record = TranslationRecord(x_A=x_A, x_B=x_B, feat_A=feat_A, feat_B=feat_B,
                               x_AB=x_AB, x_BA=x_BA)
    reconstruct(bundle, record, reconstruction)
    return record


def ablate_generate(bundle: ModelBundle, x_A, x_B, zero: str) -> torch.Tensor:
    """Forward translation with one feature kind zeroed out.

    zero="di" drops A's content (output driven by B's style alone);
    zero="ds" drops B's style (output driven by A's content alone).
    """
    if zero not in ("di", "ds"):
        raise InputError(f"zero must be 'di' or 'ds', got {zero!r}")
    _check_image(bundle.arch, x_A, "x_A")
    _check_image(bundle.arch, x_B, "x_B")
    di_A, _ = bundle.e_A(x_A)
    _, ds_B = bundle.e_B(x_B)
    if zero == "di":
        return bundle.g_B(torch.zeros_like(di_A), ds_B)
    return bundle.g_B(di_A, torch.zeros_like(ds_B))
