"""The six parametric networks: two encoders, two decoders, two discriminators.

Each encoder splits an image into a spatial feature map (content shared
across domains) and a flat style vector (what distinguishes the domain).
Decoders merge one of each back into an image; discriminators score domain
membership.
"""

import math
from dataclasses import dataclass, asdict

import torch
import torch.nn as nn

from .errors import ConfigError, InputError

MODES = ("symmetric", "asymmetric_A_to_B")
DOMAINS = ("A", "B")

# The encoder/decoder/discriminator each have four conv stages. Stage widths
# scale with base_width: shared convs go base -> 2*base -> 4*base, the style
# branch hidden layer is 16*base (1024 at the default width) and the
# discriminator head hidden layer is 8*base (512 at the default width).
DS_HIDDEN_FACTOR = 16
DISC_HIDDEN_FACTOR = 8


@dataclass(frozen=True)
class ArchConfig:
    """Sizes of every network, all derived from a handful of knobs."""

    image_size: int = 64
    image_channels: int = 3
    base_width: int = 64
    di_channels: int = 256
    ds_dim: int = 128
    leaky_slope: float = 0.2

    def __post_init__(self):
        n = self.image_size
        if n < 8 or (n & (n - 1)) != 0:
            raise ConfigError(f"image_size must be a power of two >= 8, got {n}")
        for name in ("image_channels", "base_width", "di_channels", "ds_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be strictly positive")
        if not 0.0 < self.leaky_slope < 1.0:
            raise ConfigError(f"leaky_slope must be in (0,1), got {self.leaky_slope}")

    @property
    def di_spatial(self) -> int:
        return max(1, self.image_size // 16)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FeaturePair:
    """Batched (content map, style vector) pair produced by an encoder."""

    di: torch.Tensor  # (B, di_channels, di_spatial, di_spatial)
    ds: torch.Tensor  # (B, ds_dim)


def stage_strides(arch: ArchConfig) -> list:
    """Strides of the four downsampling stages (2 = halve, 1 = keep).

    For image_size >= 16 every stage halves, landing exactly on di_spatial.
    At 8x8 the ratio is only 2^3, so the last stage keeps its size.
    """
    n_half = int(math.log2(arch.image_size // arch.di_spatial))
    return [2] * n_half + [1] * (4 - n_half)


def _conv(cin, cout, stride, bias=True):
    if stride == 2:
        return nn.Conv2d(cin, cout, 4, 2, 1, bias=bias)
    return nn.Conv2d(cin, cout, 3, 1, 1, bias=bias)


def _deconv(cin, cout, stride, bias=True):
    if stride == 2:
        return nn.ConvTranspose2d(cin, cout, 4, 2, 1, bias=bias)
    return nn.ConvTranspose2d(cin, cout, 3, 1, 1, bias=bias)


class Encoder(nn.Module):
    """Three shared convs, then a conv head (content) and an FC head (style).

    Batch norm everywhere except the first conv; the content head conv keeps
    its batch norm so both feature kinds live at comparable scales.
    """

    def __init__(self, arch: ArchConfig):
        super().__init__()
        b = arch.base_width
        slope = arch.leaky_slope
        strides = stage_strides(arch)
        s3 = arch.image_size // 8  # spatial side after the three shared convs
        self.shared = nn.Sequential(
            _conv(arch.image_channels, b, strides[0]),
            nn.LeakyReLU(slope, inplace=True),
            _conv(b, 2 * b, strides[1], bias=False),
            nn.BatchNorm2d(2 * b),
            nn.LeakyReLU(slope, inplace=True),
            _conv(2 * b, 4 * b, strides[2], bias=False),
            nn.BatchNorm2d(4 * b),
            nn.LeakyReLU(slope, inplace=True),
        )
        self.di_head = nn.Sequential(
            _conv(4 * b, arch.di_channels, strides[3], bias=False),
            nn.BatchNorm2d(arch.di_channels),
        )
        # Both heads end in batch norm so the two feature kinds reach the
        # decoders at comparable scale; without it the style branch can
        # satisfy its reconstruction loss by collapsing to a constant.
        self.ds_head = nn.Sequential(
            nn.Flatten(),
            nn.Linear(4 * b * s3 * s3, DS_HIDDEN_FACTOR * b),
            nn.LeakyReLU(slope, inplace=True),
            nn.Linear(DS_HIDDEN_FACTOR * b, arch.ds_dim, bias=False),
            nn.BatchNorm1d(arch.ds_dim),
        )

    def forward(self, x):
        h = self.shared(x)
        return self.di_head(h), self.ds_head(h)


class Decoder(nn.Module):
    """Four deconvs over the content map concatenated with the tiled style.

    ReLU activations, tanh at the output; batch norm on the middle two
    stages only.
    """

    def __init__(self, arch: ArchConfig):
        super().__init__()
        b = arch.base_width
        strides = stage_strides(arch)[::-1]  # mirror the encoder schedule
        cin = arch.di_channels + arch.ds_dim
        self.net = nn.Sequential(
            _deconv(cin, 4 * b, strides[0]),
            nn.ReLU(inplace=True),
            _deconv(4 * b, 2 * b, strides[1], bias=False),
            nn.BatchNorm2d(2 * b),
            nn.ReLU(inplace=True),
            _deconv(2 * b, b, strides[2], bias=False),
            nn.BatchNorm2d(b),
            nn.ReLU(inplace=True),
            _deconv(b, arch.image_channels, strides[3]),
            nn.Tanh(),
        )

    def forward(self, di, ds):
        tiled = ds[:, :, None, None].expand(-1, -1, di.shape[2], di.shape[3])
        return self.net(torch.cat([di, tiled], dim=1))


class Discriminator(nn.Module):
    """Four convs and two FC layers ending in a sigmoid probability."""

    def __init__(self, arch: ArchConfig):
        super().__init__()
        b = arch.base_width
        slope = arch.leaky_slope
        strides = stage_strides(arch)
        s = arch.di_spatial
        hidden = DISC_HIDDEN_FACTOR * b
        self.features = nn.Sequential(
            _conv(arch.image_channels, b, strides[0]),
            nn.LeakyReLU(slope, inplace=True),
            _conv(b, 2 * b, strides[1], bias=False),
            nn.BatchNorm2d(2 * b),
            nn.LeakyReLU(slope, inplace=True),
            _conv(2 * b, 4 * b, strides[2], bias=False),
            nn.BatchNorm2d(4 * b),
            nn.LeakyReLU(slope, inplace=True),
            _conv(4 * b, 8 * b, strides[3], bias=False),
            nn.BatchNorm2d(8 * b),
            nn.LeakyReLU(slope, inplace=True),
        )
        self.classifier = nn.Sequential(
            nn.Flatten(),
            nn.Linear(8 * b * s * s, hidden),
            nn.LeakyReLU(slope, inplace=True),
            nn.Linear(hidden, 1),
            nn.Sigmoid(),
        )

    def forward(self, x):
        return self.classifier(self.features(x)).squeeze(1)


class ModelBundle:
    """The six networks plus their architecture config and translation mode."""

    GROUPS = ("e_A", "e_B", "g_A", "g_B", "d_A", "d_B")
    GENERATOR_GROUPS = ("e_A", "e_B", "g_A", "g_B")

    def __init__(self, e_A, e_B, g_A, g_B, d_A, d_B, arch, mode="symmetric"):
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
        self.e_A, self.e_B = e_A, e_B
        self.g_A, self.g_B = g_A, g_B
        self.d_A, self.d_B = d_A, d_B
        self.arch = arch
        self.mode = mode

    def nets(self) -> dict:
        return {name: getattr(self, name) for name in self.GROUPS}

    def net(self, name: str) -> nn.Module:
        if name not in self.GROUPS:
            raise InputError(f"unknown network {name!r}")
        return getattr(self, name)

    def train(self):
        for net in self.nets().values():
            net.train()
        return self

    def eval(self):
        for net in self.nets().values():
            net.eval()
        return self

    def double(self):
        for net in self.nets().values():
            net.double()
        return self

    def parameter_count(self) -> int:
        return sum(p.numel() for net in self.nets().values() for p in net.parameters())

    def group_parameters(self, name: str) -> list:
        return list(self.net(name).parameters())


def _init_weights(net: nn.Module, gen: torch.Generator):
    """DCGAN-style init: N(0, 0.02) weights, N(1, 0.02) batch-norm scales."""
    with torch.no_grad():
        for m in net.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
                m.weight.normal_(0.0, 0.02, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()
            elif isinstance(m, (nn.BatchNorm1d, nn.BatchNorm2d)):
                m.weight.normal_(1.0, 0.02, generator=gen)
                m.bias.zero_()


def build_bundle(arch: ArchConfig, seed: int, mode: str = "symmetric") -> ModelBundle:
    """Construct and deterministically initialize all six networks."""
    gen = torch.Generator().manual_seed(int(seed))
    nets = {}
    for name in ModelBundle.GROUPS:
        kind = name[0]
        net = {"e": Encoder, "g": Decoder, "d": Discriminator}[kind](arch)
        _init_weights(net, gen)
        nets[name] = net
    bundle = ModelBundle(arch=arch, mode=mode, **nets)
    return bundle.eval()


def _check_image(arch: ArchConfig, x: torch.Tensor, what: str = "image"):
    if not torch.is_tensor(x) or x.dim() != 4:
        raise InputError(f"{what} must be a batched (B,C,H,W) tensor")
    expected = (arch.image_channels, arch.image_size, arch.image_size)
    if tuple(x.shape[1:]) != expected:
        raise InputError(f"{what} has shape {tuple(x.shape)}, expected (B,) + {expected}")


def _check_domain(domain: str):
    if domain not in DOMAINS:
        raise InputError(f"domain must be 'A' or 'B', got {domain!r}")


def encode(bundle: ModelBundle, domain: str, x: torch.Tensor) -> FeaturePair:
    """Split a batch of images into (content map, style vector) features."""
    _check_domain(domain)
    _check_image(bundle.arch, x)
    di, ds = bundle.net("e_" + domain)(x)
    return FeaturePair(di=di, ds=ds)


def decode(bundle: ModelBundle, domain: str, di: torch.Tensor, ds: torch.Tensor) -> torch.Tensor:
    """Merge a content map and a style vector back into an image batch."""
    _check_domain(domain)
    arch = bundle.arch
    s = arch.di_spatial
    if not torch.is_tensor(di) or tuple(di.shape[1:]) != (arch.di_channels, s, s):
        raise InputError(
            f"content map must be (B, {arch.di_channels}, {s}, {s}), got "
            f"{tuple(di.shape) if torch.is_tensor(di) else type(di)}"
        )
    if not torch.is_tensor(ds) or ds.dim() != 2 or ds.shape[1] != arch.ds_dim:
        raise InputError(f"style vector must be (B, {arch.ds_dim})")
    if di.shape[0] != ds.shape[0]:
        raise InputError("content map and style vector batch sizes differ")
    return bundle.net("g_" + domain)(di, ds)


def discriminate(bundle: ModelBundle, domain: str, x: torch.Tensor) -> torch.Tensor:
    """Per-sample probability that x is a natural image of the domain."""
    _check_domain(domain)
    _check_image(bundle.arch, x)
    return bundle.net("d_" + domain)(x)
