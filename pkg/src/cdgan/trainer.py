"""Training loop: paired sampling, discriminator step, normalized generator step.

Each step runs the full dual pass, updates the discriminators by ascending
the adversarial objective, then computes one gradient per active loss per
generator-side network, rescales each to unit global L2 norm, sums them,
and applies Adam. Every variant is reachable through TrainConfig alone.
"""

import csv
import json
import time
from dataclasses import dataclass, asdict, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from . import checkpoint as ckpt_mod
from .engine import dual_pass
from .errors import ConfigError, InputError, TrainingError
from .losses import (
    LossReport,
    dual_di_loss,
    dual_image_loss,
    dual_ds_loss,
    gan_loss,
    generator_gan_objective,
)
from .networks import MODES, ModelBundle, _check_image

GRAD_NORM_THRESHOLD = 1e-12


@dataclass(frozen=True)
class VariantSpec:
    losses: tuple
    translation: str
    reconstruction: str


VARIANTS = {
    "cd-GAN": VariantSpec(("gan", "im", "di", "ds"), "conditional", "skip"),
    "cd-GAN-rec": VariantSpec(("gan", "im", "di", "ds"), "conditional", "reencoded"),
    "cd-GAN-nof": VariantSpec(("gan", "im"), "conditional", "skip"),
    "cd-GAN-nos": VariantSpec(("gan", "im", "di"), "conditional", "skip"),
    "cd-GAN-noi": VariantSpec(("gan", "im", "ds"), "conditional", "skip"),
    "GAN-c": VariantSpec(("gan",), "conditional", "skip"),
    "DualGAN-c": VariantSpec(("gan", "im"), "conditional", "cycle"),
    "DualGAN": VariantSpec(("gan", "im"), "unconditional", "cycle"),
}

CSV_COLUMNS = ("step", "gan", "dual_im", "dual_di", "dual_ds", "wall_time")


@dataclass
class TrainConfig:
    variant: str = "cd-GAN"
    mode: str = "symmetric"
    learning_rate: float = 2e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    batch_size: int = 16
    total_steps: int = 1000
    seed: int = 0
    saturating_gan: bool = False
    checkpoint_every: int = 1000

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(
                f"unknown variant {self.variant!r}; valid: {', '.join(VARIANTS)}"
            )
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; valid: {', '.join(MODES)}")
        if self.variant == "DualGAN" and self.mode != "symmetric":
            raise ConfigError("DualGAN has no conditional path; use symmetric mode")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.total_steps < 0:
            raise ConfigError("total_steps must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# Minibatch pairing


class EpochPairSampler:
    """Pairs two unpaired domains by independent per-domain epoch shuffles.

    Within one epoch every index of a domain is used exactly once; when an
    epoch is exhausted the permutation is redrawn, so over any window each
    image appears floor or ceil of draws/size times.
    """

    def __init__(self, n_a: int, n_b: int, rng: np.random.Generator):
        if n_a < 1 or n_b < 1:
            raise InputError("both datasets must be non-empty")
        self.n_a, self.n_b = n_a, n_b
        self.rng = rng
        self._perm_a = rng.permutation(n_a)
        self._perm_b = rng.permutation(n_b)
        self._pos_a = 0
        self._pos_b = 0

    def _take(self, which: str, k: int) -> np.ndarray:
        perm = getattr(self, f"_perm_{which}")
        pos = getattr(self, f"_pos_{which}")
        n = getattr(self, f"n_{which}")
        out = []
        while k > 0:
            if pos >= n:
                perm = self.rng.permutation(n)
                pos = 0
            grab = min(k, n - pos)
            out.append(perm[pos:pos + grab])
            pos += grab
            k -= grab
        setattr(self, f"_perm_{which}", perm)
        setattr(self, f"_pos_{which}", pos)
        return np.concatenate(out)

    def draw(self, k: int):
        return self._take("a", k), self._take("b", k)

    def state_dict(self) -> dict:
        return {
            "n_a": self.n_a,
            "n_b": self.n_b,
            "perm_a": self._perm_a.tolist(),
            "perm_b": self._perm_b.tolist(),
            "pos_a": self._pos_a,
            "pos_b": self._pos_b,
            "rng": self.rng.bit_generator.state,
        }

    @classmethod
    def from_state_dict(cls, state: dict) -> "EpochPairSampler":
        sampler = cls.__new__(cls)
        sampler.n_a = state["n_a"]
        sampler.n_b = state["n_b"]
        sampler.rng = np.random.default_rng()
        sampler.rng.bit_generator.state = state["rng"]
        sampler._perm_a = np.asarray(state["perm_a"], dtype=np.int64)
        sampler._perm_b = np.asarray(state["perm_b"], dtype=np.int64)
        sampler._pos_a = state["pos_a"]
        sampler._pos_b = state["pos_b"]
        return sampler


def sample_pairs(dataset_a, dataset_b, k: int, rng: np.random.Generator) -> list:
    """Draw k (x_A, x_B) pairs without replacement within per-domain epochs."""
    sampler = EpochPairSampler(len(dataset_a), len(dataset_b), rng)
    idx_a, idx_b = sampler.draw(k)
    return [(dataset_a.tensors[i], dataset_b.tensors[j]) for i, j in zip(idx_a, idx_b)]


# ---------------------------------------------------------------------------
# Gradient normalization


def normalize_and_sum(per_loss_grads: dict, threshold: float = GRAD_NORM_THRESHOLD) -> list:
    """Rescale each loss's gradient to unit global L2 norm, then sum.

    `per_loss_grads` maps a loss name to a list of per-parameter gradient
    tensors (None meaning zero) for ONE parameter group. Gradients whose
    global norm does not exceed `threshold` pass through unchanged.
    """
    names = list(per_loss_grads)
    if not names:
        raise InputError("no gradients to normalize")
    length = None
    summed = None
    for name in names:
        grads = per_loss_grads[name]
        if length is None:
            length = len(grads)
        elif len(grads) != length:
            raise InputError("gradient lists have mismatched lengths")
        sq = 0.0
        for g in grads:
            if g is None:
                continue
            if not torch.isfinite(g).all():
                raise TrainingError(f"non-finite gradient from loss {name!r}")
            sq += float(torch.sum(g.detach() ** 2, dtype=torch.float64))
        norm = sq ** 0.5
        scale = 1.0 / norm if norm > threshold else 1.0
        if summed is None:
            summed = [None] * length
        for i, g in enumerate(grads):
            if g is None:
                continue
            term = g * scale
            summed[i] = term if summed[i] is None else summed[i] + term
    return [torch.zeros(0) if s is None else s for s in summed]


# ---------------------------------------------------------------------------
# Trainer state


@dataclass
class TrainerState:
    optimizers: dict
    sampler: Optional[EpochPairSampler] = None
    step: int = 0
    history: list = field(default_factory=list)


def build_optimizers(bundle: ModelBundle, config: TrainConfig) -> dict:
    return {
        name: torch.optim.Adam(
            bundle.net(name).parameters(),
            lr=config.learning_rate,
            betas=(config.adam_beta1, config.adam_beta2),
        )
        for name in ModelBundle.GROUPS
    }


def init_trainer_state(bundle: ModelBundle, config: TrainConfig, n_a: int = 0,
                       n_b: int = 0) -> TrainerState:
    sampler = None
    if n_a and n_b:
        sampler = EpochPairSampler(n_a, n_b, np.random.default_rng(config.seed))
    return TrainerState(optimizers=build_optimizers(bundle, config), sampler=sampler)


# ---------------------------------------------------------------------------
# One training step


def _discriminator_substep(bundle: ModelBundle, optimizers: dict, record) -> float:
    """Ascend the adversarial objective over d_A/d_B only; returns its value."""
    p_a_real = bundle.d_A(record.x_A)
    p_a_fake = bundle.d_A(record.x_BA.detach())
    p_b_real = bundle.d_B(record.x_B)
    p_b_fake = bundle.d_B(record.x_AB.detach())
    value = gan_loss(p_a_real, p_a_fake, p_b_real, p_b_fake)
    if not torch.isfinite(value):
        raise TrainingError("non-finite adversarial loss in discriminator step")
    optimizers["d_A"].zero_grad(set_to_none=True)
    optimizers["d_B"].zero_grad(set_to_none=True)
    (-value).backward()
    optimizers["d_A"].step()
    optimizers["d_B"].step()
    return float(value.detach())


def _generator_substep(bundle: ModelBundle, optimizers: dict, record, config) -> dict:
    """Per-loss gradients over e_A/e_B/g_A/g_B, normalized, summed, applied."""
    variant = VARIANTS[config.variant]
    groups = {name: bundle.group_parameters(name) for name in ModelBundle.GENERATOR_GROUPS}
    flat_params = [p for name in ModelBundle.GENERATOR_GROUPS for p in groups[name]]
    offsets = {}
    start = 0
    for name in ModelBundle.GENERATOR_GROUPS:
        offsets[name] = (start, start + len(groups[name]))
        start += len(groups[name])

    losses = {}
    if "gan" in variant.losses:
        p_a_fake = bundle.d_A(record.x_BA)
        p_b_fake = bundle.d_B(record.x_AB)
        losses["gan"] = generator_gan_objective(p_a_fake, p_b_fake, config.saturating_gan)
    if "im" in variant.losses:
        losses["im"] = dual_image_loss(record.x_A, record.x_hat_A, record.x_B, record.x_hat_B)
    if "di" in variant.losses:
        losses["di"] = dual_di_loss(
            record.feat_A.di, record.feat_hat_AB.di, record.feat_B.di, record.feat_hat_BA.di
        )
    if "ds" in variant.losses:
        losses["ds"] = dual_ds_loss(
            record.feat_A.ds, record.feat_hat_BA.ds, record.feat_B.ds, record.feat_hat_AB.ds,
            mode=config.mode,
        )
    for name, value in losses.items():
        if not torch.isfinite(value):
            raise TrainingError(f"non-finite loss {name!r} in generator step")

    per_loss_flat = {
        name: torch.autograd.grad(
            value, flat_params, retain_graph=True, allow_unused=True
        )
        for name, value in losses.items()
    }
    for group_name in ModelBundle.GENERATOR_GROUPS:
        lo, hi = offsets[group_name]
        group_grads = {name: list(flat[lo:hi]) for name, flat in per_loss_flat.items()}
        summed = normalize_and_sum(group_grads)
        opt = optimizers[group_name]
        opt.zero_grad(set_to_none=True)
        for p, g in zip(groups[group_name], summed):
            p.grad = g if g.numel() else torch.zeros_like(p)
        opt.step()
    return {name: float(value.detach()) for name, value in losses.items()}


def train_step(bundle: ModelBundle, state: TrainerState, batch, config: TrainConfig) -> LossReport:
    """One full step of the training algorithm over one minibatch pair."""
    x_A, x_B = batch
    _check_image(bundle.arch, x_A, "x_A")
    _check_image(bundle.arch, x_B, "x_B")
    if x_A.shape[0] != x_B.shape[0]:
        raise InputError("batch sizes of the two domains differ")
    variant = VARIANTS[config.variant]
    bundle.train()
    record = dual_pass(bundle, x_A, x_B, variant.translation, variant.reconstruction)
    gan_value = _discriminator_substep(bundle, state.optimizers, record)
    gen_losses = _generator_substep(bundle, state.optimizers, record, config)
    state.step += 1
    report = LossReport(
        gan=gan_value,
        dual_im=gen_losses.get("im", 0.0),
        dual_di=gen_losses.get("di", 0.0),
        dual_ds=gen_losses.get("ds", 0.0),
    )
    if not report.all_finite():
        raise TrainingError(f"non-finite loss report at step {state.step}: {report}")
    return report


# ---------------------------------------------------------------------------
# Full runs with persistence


def _csv_init(path: Path, keep_up_to: int):
    """Start or truncate the loss history so it ends at `keep_up_to`."""
    rows = []
    if path.exists() and keep_up_to > 0:
        with open(path) as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header == list(CSV_COLUMNS):
                rows = [r for r in reader if r and int(r[0]) <= keep_up_to]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        writer.writerows(rows)


def _csv_append(path: Path, step: int, report: LossReport, wall_time: float):
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                step,
                f"{report.gan:.8e}",
                f"{report.dual_im:.8e}",
                f"{report.dual_di:.8e}",
                f"{report.dual_ds:.8e}",
                f"{wall_time:.3f}",
            ]
        )


def _write_diagnostic(out_dir: Path, step: int, config: TrainConfig, error: Exception):
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "step": step,
        "error": str(error),
        "config": config.to_dict(),
    }
    with open(out_dir / f"diagnostic_step{step:06d}.json", "w") as fh:
        json.dump(payload, fh, indent=2)


def train(bundle: ModelBundle, datasets, config: TrainConfig, out_dir=None,
          callbacks=None, resume_from=None):
    """Run `total_steps` steps; checkpoint, log, and optionally resume.

    Any callback may return a truthy value to stop early (a final checkpoint
    is still written). Returns (bundle, history of LossReports).
    """
    ds_a, ds_b = datasets
    if len(ds_a) == 0 or len(ds_b) == 0:
        raise InputError("both training domains must be non-empty")
    if bundle.mode != config.mode:
        raise ConfigError(
            f"bundle mode {bundle.mode!r} does not match config mode {config.mode!r}"
        )
    callbacks = callbacks or []
    out_dir = Path(out_dir) if out_dir is not None else None

    state = init_trainer_state(bundle, config, len(ds_a), len(ds_b))
    if resume_from is not None:
        ckpt = ckpt_mod.load_checkpoint(resume_from)
        if ckpt.arch != bundle.arch or ckpt.mode != bundle.mode:
            raise ConfigError("checkpoint arch/mode does not match the bundle")
        restored = ckpt_mod.restore_bundle(ckpt)
        for name in ModelBundle.GROUPS:
            bundle.net(name).load_state_dict(restored.net(name).state_dict())
        ckpt_mod.restore_optimizer_state(ckpt, bundle, state.optimizers)
        if ckpt.meta.get("sampler"):
            state.sampler = EpochPairSampler.from_state_dict(ckpt.meta["sampler"])
        state.step = ckpt.step

    csv_path = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / "loss_history.csv"
        _csv_init(csv_path, state.step)

    def write_checkpoint():
        if out_dir is None:
            return
        ckpt_mod.save_checkpoint(
            out_dir / f"checkpoint_{state.step:06d}.npz",
            bundle,
            step=state.step,
            optimizers=state.optimizers,
            sampler_state=state.sampler.state_dict(),
        )

    start_wall = time.monotonic()
    stop = False
    while state.step < config.total_steps and not stop:
        idx_a, idx_b = state.sampler.draw(config.batch_size)
        batch = (ds_a.tensors[idx_a], ds_b.tensors[idx_b])
        try:
            report = train_step(bundle, state, batch, config)
        except TrainingError as exc:
            if out_dir is not None:
                _write_diagnostic(out_dir, state.step, config, exc)
            raise
        state.history.append(report)
        if csv_path is not None:
            _csv_append(csv_path, state.step, report, time.monotonic() - start_wall)
        for cb in callbacks:
            if cb(state.step, report, bundle):
                stop = True
        if config.checkpoint_every and state.step % config.checkpoint_every == 0:
            write_checkpoint()
    if out_dir is not None and (
        not config.checkpoint_every or state.step % config.checkpoint_every != 0
    ):
        write_checkpoint()
    bundle.eval()
    return bundle, state.history
