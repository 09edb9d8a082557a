"""Metrics for the synthetic benchmark: content kept, style adopted, diversity.

A "translator" below is either a ModelBundle (run through the conditional
forward pass in evaluation mode) or any callable (x_A, x_B) -> x_AB over
batched image tensors, which lets hand-coded reference translators share
the same pipeline as trained models.
"""

import hashlib
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch

from . import data as data_mod
from .engine import translate_forward
from .errors import InputError
from .networks import ModelBundle


@dataclass
class EvalCase:
    """One held-out source image with its conditional(s) and ground truth."""

    index: int
    x_A: torch.Tensor  # (C,H,W)
    x_B: torch.Tensor  # (C,H,W)
    mask_A: np.ndarray  # ground-truth foreground of x_A
    conditionals: list = field(default_factory=list)  # extra x_B's for diversity


@dataclass
class EvalConfig:
    background: tuple = data_mod.DEFAULT_BACKGROUND
    mask_tol: float = data_mod.MASK_TOL
    n_conditionals: int = 5

    def config_hash(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha1(payload).hexdigest()[:12]


@dataclass
class EvalReport:
    shape_iou_mean: float
    color_adoption_rate: float
    diversity_score: float
    n_cases: int
    per_case: list

    def to_dict(self) -> dict:
        return asdict(self)


def model_translator(bundle: ModelBundle):
    """Wrap a bundle as an (x_A, x_B) -> x_AB callable in evaluation mode."""

    def fn(x_A, x_B):
        bundle.eval()
        with torch.no_grad():
            x_AB, _, _, _ = translate_forward(bundle, x_A, x_B)
        return x_AB

    return fn


def _as_translator(translator):
    if isinstance(translator, ModelBundle):
        return model_translator(translator)
    if callable(translator):
        return translator
    raise InputError("translator must be a ModelBundle or a callable")


def shape_iou(mask1, mask2) -> float:
    """Intersection over union of two binary masks; 1.0 when both are empty."""
    m1 = np.asarray(mask1, dtype=bool)
    m2 = np.asarray(mask2, dtype=bool)
    if m1.shape != m2.shape:
        raise InputError(f"mask shapes differ: {m1.shape} vs {m2.shape}")
    union = np.logical_or(m1, m2).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(m1, m2).sum() / union)


def _foreground_mean(image, background, tol):
    mask = data_mod.mask_of(image, background, tol)
    arr = image.detach().cpu().numpy() if torch.is_tensor(image) else np.asarray(image)
    if not mask.any():
        return None
    return arr[:, mask].mean(axis=1)


def color_adoption(x_AB, x_A, x_B, background, tol: float = data_mod.MASK_TOL):
    """Did the translation take its foreground color from the conditional?

    Returns (adopted, empty_foreground). Adopted requires the translated
    foreground mean color to be strictly closer to x_B's than to x_A's.
    """
    c_ab = _foreground_mean(x_AB, background, tol)
    c_a = _foreground_mean(x_A, background, tol)
    c_b = _foreground_mean(x_B, background, tol)
    if c_ab is None or c_a is None or c_b is None:
        return False, True
    to_a = float(np.linalg.norm(c_ab - c_a))
    to_b = float(np.linalg.norm(c_ab - c_b))
    return to_b < to_a, False


def diversity(translator, x_A, conditionals, background=data_mod.DEFAULT_BACKGROUND,
              tol: float = data_mod.MASK_TOL) -> float:
    """Mean pairwise distance between foreground colors across conditionals.

    Translations with an empty foreground fall back to their whole-image
    mean color so untrained models still yield a finite score.
    """
    if len(conditionals) < 2:
        raise InputError("diversity needs at least 2 conditional images")
    fn = _as_translator(translator)
    batch_a = x_A.unsqueeze(0).repeat(len(conditionals), 1, 1, 1)
    batch_b = torch.stack(list(conditionals))
    out = fn(batch_a, batch_b)
    colors = []
    for k in range(out.shape[0]):
        mean = _foreground_mean(out[k], background, tol)
        if mean is None:
            arr = out[k].detach().cpu().numpy()
            mean = arr.reshape(3, -1).mean(axis=1)
        colors.append(mean)
    dists = [
        float(np.linalg.norm(colors[i] - colors[j]))
        for i in range(len(colors))
        for j in range(i + 1, len(colors))
    ]
    return float(np.mean(dists))


def build_cases(ds_a, ds_b, truth, n_conditionals: int = 5) -> list:
    """Pair each held-out A image with B images deterministically."""
    if len(ds_a) == 0 or len(ds_b) == 0:
        raise InputError("both held-out domains must be non-empty")
    m = len(ds_b)
    cases = []
    for i in range(len(ds_a)):
        rel = f"domainA/{ds_a.items[i]}"
        mask = truth.mask_for(rel)
        conds = [ds_b.tensors[(i + j) % m] for j in range(min(n_conditionals, m))]
        cases.append(
            EvalCase(
                index=i,
                x_A=ds_a.tensors[i],
                x_B=ds_b.tensors[i % m],
                mask_A=mask,
                conditionals=conds,
            )
        )
    return cases


def evaluate(translator, cases, config: EvalConfig = None, report_path=None,
             checkpoint_id: str = "") -> EvalReport:
    """Aggregate the three headline metrics over all cases."""
    if not cases:
        raise InputError("empty test set")
    config = config or EvalConfig()
    fn = _as_translator(translator)

    batch_a = torch.stack([c.x_A for c in cases])
    batch_b = torch.stack([c.x_B for c in cases])
    out = fn(batch_a, batch_b)

    per_case = []
    ious = []
    adopted_flags = []
    diversities = []
    for k, case in enumerate(cases):
        x_ab = out[k]
        mask_ab = data_mod.mask_of(x_ab, config.background, config.mask_tol)
        iou = shape_iou(mask_ab, case.mask_A)
        adopted, empty_fg = color_adoption(
            x_ab, case.x_A, case.x_B, config.background, config.mask_tol
        )
        entry = {
            "index": case.index,
            "iou": iou,
            "adopted": bool(adopted),
            "empty_foreground": bool(empty_fg),
        }
        if len(case.conditionals) >= 2:
            div = diversity(fn, case.x_A, case.conditionals, config.background,
                            config.mask_tol)
            diversities.append(div)
            entry["diversity"] = div
        ious.append(iou)
        adopted_flags.append(adopted)
        per_case.append(entry)

    report = EvalReport(
        shape_iou_mean=float(np.mean(ious)),
        color_adoption_rate=float(np.mean(adopted_flags)),
        diversity_score=float(np.mean(diversities)) if diversities else 0.0,
        n_cases=len(cases),
        per_case=per_case,
    )
    if report_path is not None:
        payload = report.to_dict()
        payload["config_hash"] = config.config_hash()
        payload["checkpoint_id"] = checkpoint_id
        Path(report_path).parent.mkdir(parents=True, exist_ok=True)
        with open(report_path, "w") as fh:
            json.dump(payload, fh, indent=2)
    return report


def ablation_iou_means(bundle: ModelBundle, cases, config: EvalConfig = None) -> tuple:
    """Mean IoU against the source mask with style zeroed vs content zeroed.

    A model that separated the two factors keeps the source shape when only
    the style is dropped, so the first mean should exceed the second.
    """
    from .engine import ablate_generate

    config = config or EvalConfig()
    bundle.eval()
    batch_a = torch.stack([c.x_A for c in cases])
    batch_b = torch.stack([c.x_B for c in cases])
    with torch.no_grad():
        out_ds0 = ablate_generate(bundle, batch_a, batch_b, zero="ds")
        out_di0 = ablate_generate(bundle, batch_a, batch_b, zero="di")
    iou_ds0 = []
    iou_di0 = []
    for k, case in enumerate(cases):
        m_ds0 = data_mod.mask_of(out_ds0[k], config.background, config.mask_tol)
        m_di0 = data_mod.mask_of(out_di0[k], config.background, config.mask_tol)
        iou_ds0.append(shape_iou(m_ds0, case.mask_A))
        iou_di0.append(shape_iou(m_di0, case.mask_A))
    return float(np.mean(iou_ds0)), float(np.mean(iou_di0))
