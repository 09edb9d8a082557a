"""Two-domain image datasets: folder ingestion and a synthetic benchmark.

The synthetic generator draws one flat-colored shape per image. Geometry
(shape, position, scale) is the factor shared across domains; the palette
color is what makes an image belong to its domain. Rasterization has no
anti-aliasing so the stored masks are exact.
"""

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .errors import ConfigError, DataError, InputError

SHAPE_NAMES = ("circle", "square", "triangle", "cross")
IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")

DEFAULT_PALETTE_A = ((1.0, -1.0, -1.0), (-1.0, -1.0, 1.0))  # red, blue
DEFAULT_PALETTE_B = ((-1.0, 1.0, -1.0), (1.0, -1.0, 1.0))  # green, magenta
DEFAULT_BACKGROUND = (1.0, 1.0, 1.0)  # white

SCALE_RANGE = (0.3, 0.6)  # shape extent as a fraction of the image side
MASK_TOL = 0.25


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one pair of synthetic domains."""

    shapes: tuple = ("circle", "square")
    palette_A: tuple = DEFAULT_PALETTE_A
    palette_B: tuple = DEFAULT_PALETTE_B
    image_size: int = 32
    count: int = 512
    seed: int = 0
    background: tuple = DEFAULT_BACKGROUND

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError("count must be >= 1")
        if self.image_size < 8:
            raise ConfigError("image_size must be >= 8")
        unknown = [s for s in self.shapes if s not in SHAPE_NAMES]
        if unknown:
            raise ConfigError(f"unknown shapes {unknown}; choose from {SHAPE_NAMES}")
        if not self.shapes:
            raise ConfigError("at least one shape is required")
        if not self.palette_A or not self.palette_B:
            raise ConfigError("both palettes need at least one color")
        for ca in self.palette_A:
            for cb in self.palette_B:
                d = float(np.linalg.norm(np.asarray(ca) - np.asarray(cb)))
                if d < 0.5:
                    raise ConfigError(
                        f"palettes overlap: colors {ca} and {cb} are only {d:.3f} apart "
                        "(need >= 0.5 in [-1,1] units)"
                    )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DomainDataset:
    """Eagerly loaded images of one domain, in [-1,1], lexicographic order."""

    root: Path
    domain: str
    items: list
    image_size: int
    tensors: torch.Tensor  # (N, C, S, S) float32

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        return self.tensors[i]


class GroundTruth:
    """Per-image factor records of a synthetic dataset plus its spec."""

    def __init__(self, root: Path, records: list, spec_dict: dict):
        self.root = Path(root)
        self.records = records
        self.spec = spec_dict
        self._by_file = {r["file"]: r for r in records}

    @property
    def background(self) -> tuple:
        return tuple(self.spec["background"])

    def record_for(self, file: str) -> dict:
        if file not in self._by_file:
            raise DataError(f"no ground-truth record for {file}")
        return self._by_file[file]

    def mask_for(self, file: str) -> np.ndarray:
        name = Path(file).name
        path = self.root / "masks" / name
        if not path.exists():
            raise DataError(f"missing ground-truth mask {path}")
        arr = np.asarray(Image.open(path).convert("L"))
        return arr > 127


# ---------------------------------------------------------------------------
# Rasterization (pixel centers at index + 0.5, no anti-aliasing)


def _grid(n):
    yy, xx = np.mgrid[0:n, 0:n]
    return xx + 0.5, yy + 0.5


def _raster_circle(n, cx, cy, extent):
    xx, yy = _grid(n)
    r = extent / 2.0
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r


def _raster_square(n, cx, cy, extent):
    xx, yy = _grid(n)
    h = extent / 2.0
    return (np.abs(xx - cx) <= h) & (np.abs(yy - cy) <= h)


def _raster_triangle(n, cx, cy, extent):
    # Upward equilateral triangle with side `extent`, centroid at (cx, cy).
    xx, yy = _grid(n)
    ht = extent * np.sqrt(3.0) / 2.0
    verts = [
        (cx, cy - 2.0 * ht / 3.0),
        (cx - extent / 2.0, cy + ht / 3.0),
        (cx + extent / 2.0, cy + ht / 3.0),
    ]
    mask = np.ones((n, n), dtype=bool)
    for i in range(3):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % 3]
        # interior lies on the non-positive side of every edge in image coords
        mask &= (x1 - x0) * (yy - y0) - (y1 - y0) * (xx - x0) <= 0
    return mask


def _raster_cross(n, cx, cy, extent):
    xx, yy = _grid(n)
    half = extent / 2.0
    arm = extent / 6.0
    horizontal = (np.abs(xx - cx) <= half) & (np.abs(yy - cy) <= arm)
    vertical = (np.abs(xx - cx) <= arm) & (np.abs(yy - cy) <= half)
    return horizontal | vertical


_RASTERIZERS = {
    "circle": _raster_circle,
    "square": _raster_square,
    "triangle": _raster_triangle,
    "cross": _raster_cross,
}


def rasterize_shape(shape: str, n: int, cx: float, cy: float, extent: float) -> np.ndarray:
    if shape not in _RASTERIZERS:
        raise InputError(f"unknown shape {shape!r}")
    return _RASTERIZERS[shape](n, cx, cy, extent)


# ---------------------------------------------------------------------------
# Tensor <-> 8-bit image conversion


def tensor_to_uint8(t) -> np.ndarray:
    """(C,H,W) in [-1,1] -> (H,W,C) uint8."""
    arr = t.detach().cpu().numpy() if torch.is_tensor(t) else np.asarray(t)
    hwc = np.transpose(arr, (1, 2, 0))
    return np.clip(np.rint((hwc + 1.0) * 127.5), 0, 255).astype(np.uint8)


def uint8_to_tensor(arr: np.ndarray) -> torch.Tensor:
    """(H,W,C) uint8 -> (C,H,W) float32 in [-1,1]."""
    chw = np.transpose(arr.astype(np.float32) / 127.5 - 1.0, (2, 0, 1))
    return torch.from_numpy(np.ascontiguousarray(chw))


def save_image_tensor(t, path):
    Image.fromarray(tensor_to_uint8(t)).save(path)


# ---------------------------------------------------------------------------
# Synthetic generation


def _bbox_of(mask: np.ndarray) -> list:
    ys, xs = np.nonzero(mask)
    return [int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1]


def generate_synthetic(spec: SyntheticSpec, root) -> tuple:
    """Write both domains plus ground truth under `root` and load them back.

    Layout: domainA/*.png, domainB/*.png, masks/*.png, truth.jsonl, and a
    spec.json echo of the generator recipe.
    """
    root = Path(root)
    (root / "domainA").mkdir(parents=True, exist_ok=True)
    (root / "domainB").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)

    n = spec.image_size
    bg = np.asarray(spec.background, dtype=np.float32)
    records = []
    for domain, palette, prefix, stream in (
        ("A", spec.palette_A, "a", 0),
        ("B", spec.palette_B, "b", 1),
    ):
        rng = np.random.default_rng([spec.seed, stream])
        for i in range(spec.count):
            shape = spec.shapes[int(rng.integers(len(spec.shapes)))]
            color_id = int(rng.integers(len(palette)))
            extent = float(rng.uniform(*SCALE_RANGE)) * n
            lo, hi = extent / 2.0 + 1.0, n - extent / 2.0 - 1.0
            cx = float(rng.uniform(lo, hi))
            cy = float(rng.uniform(lo, hi))
            mask = rasterize_shape(shape, n, cx, cy, extent)
            img = np.broadcast_to(bg, (n, n, 3)).copy()
            img[mask] = np.asarray(palette[color_id], dtype=np.float32)
            name = f"{prefix}_{i:04d}.png"
            rel = f"domain{domain}/{name}"
            u8 = np.clip(np.rint((img + 1.0) * 127.5), 0, 255).astype(np.uint8)
            Image.fromarray(u8).save(root / rel)
            Image.fromarray((mask * 255).astype(np.uint8)).save(root / "masks" / name)
            records.append(
                {
                    "file": rel,
                    "domain": domain,
                    "shape": shape,
                    "color_id": color_id,
                    "bbox": _bbox_of(mask),
                }
            )

    with open(root / "truth.jsonl", "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    with open(root / "spec.json", "w") as fh:
        json.dump(spec.to_dict(), fh, indent=2)

    ds_a = load_folder_dataset(root, "A", spec.image_size)
    ds_b = load_folder_dataset(root, "B", spec.image_size)
    return ds_a, ds_b, GroundTruth(root, records, spec.to_dict())


def load_truth(root) -> GroundTruth:
    root = Path(root)
    truth_path = root / "truth.jsonl"
    spec_path = root / "spec.json"
    if not truth_path.exists() or not spec_path.exists():
        raise DataError(
            f"{root} has no ground truth (truth.jsonl/spec.json); "
            "only synthetic datasets can be evaluated"
        )
    with open(truth_path) as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    with open(spec_path) as fh:
        spec_dict = json.load(fh)
    return GroundTruth(root, records, spec_dict)


# ---------------------------------------------------------------------------
# Folder ingestion


def load_image_file(path, image_size: int = None) -> torch.Tensor:
    """Decode one image to a (C,H,W) tensor in [-1,1], optionally resizing."""
    path = Path(path)
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from exc
    img = img.convert("RGB")
    if image_size is not None and img.size != (image_size, image_size):
        img = img.resize((image_size, image_size), Image.BILINEAR)
    return uint8_to_tensor(np.asarray(img))


def load_folder_dataset(root, domain: str, image_size: int) -> DomainDataset:
    """Load <root>/domain{A,B} as a sorted, normalized image stack."""
    if domain not in ("A", "B"):
        raise InputError(f"domain must be 'A' or 'B', got {domain!r}")
    root = Path(root)
    folder = root / f"domain{domain}"
    if not folder.is_dir():
        raise DataError(f"missing dataset directory {folder}")
    items = sorted(
        p.name for p in folder.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS
    )
    tensors = [load_image_file(folder / name, image_size) for name in items]
    stack = (
        torch.stack(tensors)
        if tensors
        else torch.zeros((0, 3, image_size, image_size))
    )
    return DomainDataset(
        root=root, domain=domain, items=items, image_size=image_size, tensors=stack
    )


# ---------------------------------------------------------------------------
# Foreground masks


def mask_of(image, background, tol: float = MASK_TOL) -> np.ndarray:
    """Pixels whose RGB distance to the background exceeds tol."""
    arr = image.detach().cpu().numpy() if torch.is_tensor(image) else np.asarray(image)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise InputError(f"expected a (3,H,W) image, got shape {arr.shape}")
    bg = np.asarray(background, dtype=arr.dtype).reshape(3, 1, 1)
    dist = np.sqrt(((arr - bg) ** 2).sum(axis=0))
    return dist > tol
