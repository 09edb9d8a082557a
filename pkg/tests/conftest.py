import numpy as np
import pytest
import torch

from cdgan.data import SyntheticSpec, generate_synthetic
from cdgan.networks import ArchConfig, build_bundle

TINY_ARCH = ArchConfig(image_size=16, base_width=4, di_channels=8, ds_dim=4)
MINI_ARCH = ArchConfig(image_size=8, base_width=4, di_channels=8, ds_dim=4)


@pytest.fixture
def tiny_arch():
    return TINY_ARCH


@pytest.fixture
def tiny_bundle():
    return build_bundle(TINY_ARCH, seed=0)


@pytest.fixture
def mini_arch():
    return MINI_ARCH


def random_images(n, arch, seed=0):
    g = torch.Generator().manual_seed(seed)
    return (torch.rand(n, arch.image_channels, arch.image_size, arch.image_size,
                       generator=g) * 2 - 1)


@pytest.fixture(scope="session")
def small_synth(tmp_path_factory):
    """16+16 images of 16x16, both shapes, default palettes."""
    root = tmp_path_factory.mktemp("synth_small")
    spec = SyntheticSpec(image_size=16, count=16, seed=7)
    ds_a, ds_b, truth = generate_synthetic(spec, root)
    return ds_a, ds_b, truth, spec, root
