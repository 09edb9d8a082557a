"""Adversarial and dual reconstruction objectives.

Squared norms are reduced to a per-element mean and then a batch mean, so
loss magnitudes stay comparable across resolutions; the trainer's gradient
normalization absorbs the remaining scale differences.
"""

from dataclasses import dataclass, asdict

import torch

from .errors import InputError

PROB_EPS = 1e-7  # probabilities are clamped to [eps, 1-eps] before any log


@dataclass
class LossReport:
    """The four scalars tracked at every training step."""

    gan: float
    dual_im: float
    dual_di: float
    dual_ds: float

    def to_dict(self) -> dict:
        return asdict(self)

    def all_finite(self) -> bool:
        import math

        return all(math.isfinite(v) for v in (self.gan, self.dual_im, self.dual_di, self.dual_ds))


def _as_prob(p, name):
    t = torch.as_tensor(p)
    if not t.is_floating_point():
        t = t.float()
    if t.dim() == 0:
        t = t.reshape(1)
    if t.dim() != 1:
        raise InputError(f"{name} must be a per-sample probability vector")
    return torch.clamp(t, PROB_EPS, 1.0 - PROB_EPS)


def gan_loss(d_a_real, d_a_fake, d_b_real, d_b_fake) -> torch.Tensor:
    """Batch mean of log d_A(real) + log(1-d_A(fake)) + same for domain B.

    Discriminators ascend this value, encoders and decoders descend it.
    """
    pa_r = _as_prob(d_a_real, "d_a_real")
    pa_f = _as_prob(d_a_fake, "d_a_fake")
    pb_r = _as_prob(d_b_real, "d_b_real")
    pb_f = _as_prob(d_b_fake, "d_b_fake")
    sizes = {pa_r.shape[0], pa_f.shape[0], pb_r.shape[0], pb_f.shape[0]}
    if len(sizes) != 1:
        raise InputError(f"probability batches have mismatched sizes {sorted(sizes)}")
    return (
        torch.log(pa_r).mean()
        + torch.log(1.0 - pa_f).mean()
        + torch.log(pb_r).mean()
        + torch.log(1.0 - pb_f).mean()
    )


def generator_gan_objective(d_a_fake, d_b_fake, saturating: bool = False) -> torch.Tensor:
    """What the encoders/decoders minimize on the adversarial axis.

    The saturating form is the fake half of gan_loss (its real terms carry
    no generator gradient); the default non-saturating form maximizes
    log d(fake) instead, which keeps early gradients alive.
    """
    pa_f = _as_prob(d_a_fake, "d_a_fake")
    pb_f = _as_prob(d_b_fake, "d_b_fake")
    if saturating:
        return torch.log(1.0 - pa_f).mean() + torch.log(1.0 - pb_f).mean()
    return -(torch.log(pa_f).mean() + torch.log(pb_f).mean())


def _paired_mse(target, recon, name):
    if not torch.is_tensor(target) or not torch.is_tensor(recon):
        raise InputError(f"{name}: expected tensors")
    if target.shape != recon.shape:
        raise InputError(
            f"{name}: shape mismatch {tuple(target.shape)} vs {tuple(recon.shape)}"
        )
    return torch.mean((target - recon) ** 2)


def dual_image_loss(x_a, x_hat_a, x_b, x_hat_b) -> torch.Tensor:
    """Mean squared reconstruction error of both input images."""
    return _paired_mse(x_a, x_hat_a, "image pair A") + _paired_mse(x_b, x_hat_b, "image pair B")


def dual_di_loss(di_a, di_hat_a, di_b, di_hat_b) -> torch.Tensor:
    """Mean squared reconstruction error of both content feature maps."""
    return _paired_mse(di_a, di_hat_a, "content pair A") + _paired_mse(
        di_b, di_hat_b, "content pair B"
    )


def dual_ds_loss(ds_a, ds_hat_a, ds_b, ds_hat_b, mode: str = "symmetric") -> torch.Tensor:
    """Mean squared reconstruction error of the style vectors.

    In asymmetric_A_to_B mode the reverse direction has no conditional
    style to recover, so only the B term is kept.
    """
    b_term = _paired_mse(ds_b, ds_hat_b, "style pair B")
    if mode == "asymmetric_A_to_B":
        return b_term
    if mode != "symmetric":
        raise InputError(f"unknown mode {mode!r}")
    return _paired_mse(ds_a, ds_hat_a, "style pair A") + b_term
