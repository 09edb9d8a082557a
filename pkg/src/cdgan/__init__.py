"""Conditional two-domain image translation with dual reconstruction training."""

from .networks import ArchConfig, FeaturePair, ModelBundle, build_bundle, encode, decode, discriminate
from .engine import TranslationRecord, translate_forward, reconstruct, dual_pass, ablate_generate
from .losses import LossReport, gan_loss, dual_image_loss, dual_di_loss, dual_ds_loss
from .trainer import TrainConfig, VARIANTS, train, train_step, sample_pairs, normalize_and_sum

__all__ = [
    "ArchConfig",
    "FeaturePair",
    "ModelBundle",
    "build_bundle",
    "encode",
    "decode",
    "discriminate",
    "TranslationRecord",
    "translate_forward",
    "reconstruct",
    "dual_pass",
    "ablate_generate",
    "LossReport",
    "gan_loss",
    "dual_image_loss",
    "dual_di_loss",
    "dual_ds_loss",
    "TrainConfig",
    "VARIANTS",
    "train",
    "train_step",
    "sample_pairs",
    "normalize_and_sum",
]

__version__ = "0.1.0"
