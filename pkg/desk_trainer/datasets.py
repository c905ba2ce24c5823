"""
desk_trainer/datasets.py - procedural grayscale image classification sets.

Class k is an oriented stroke at angle pi*k/C plus a soft blob in quadrant
k mod 4. synthA and synthB draw stroke width, length and placement from
disjoint ranges, so the two sets share labels but not appearance.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from desk_trainer.rng import make_rng
from errors import ValidationError

DEFAULT_CLASSES = 10
DEFAULT_SIZE = 28


@dataclass(frozen=True, eq=False)
class LabeledSet:
    images: np.ndarray
    labels: np.ndarray
    num_classes: int
    name: str = ""

    def __post_init__(self):
        if self.images.ndim != 3:
            raise ValidationError(f"images must be [N,H,W], got shape {list(self.images.shape)}")
        if self.labels.shape != (self.images.shape[0],):
            raise ValidationError("labels must be a vector with one entry per image")

    def __len__(self) -> int:
        return int(self.labels.size)

    @property
    def image_hw(self) -> Tuple[int, int]:
        return int(self.images.shape[1]), int(self.images.shape[2])


@dataclass(frozen=True)
class _Regime:
    width: Tuple[float, float]
    length: Tuple[float, float]
    offset: Tuple[float, float]
    blob_radius: Tuple[float, float]
    blob_spread: float


REGIMES = {
    "synthA": _Regime(width=(0.7, 1.2), length=(15.0, 19.0), offset=(0.0, 0.0), blob_radius=(1.8, 2.4), blob_spread=7.0),
    "synthB": _Regime(width=(1.7, 2.4), length=(10.0, 13.0), offset=(2.0, -2.0), blob_radius=(2.8, 3.6), blob_spread=5.0),
}
_QUADRANTS = np.array([[-1.0, -1.0], [-1.0, 1.0], [1.0, 1.0], [1.0, -1.0]])


def _col(v: np.ndarray) -> np.ndarray:
    return v[:, None, None]


def generate_dataset(
    dataset_id: str,
    split: str,
    n: int,
    seed: int,
    num_classes: int = DEFAULT_CLASSES,
    size: int = DEFAULT_SIZE,
) -> LabeledSet:
    if dataset_id not in REGIMES:
        raise ValidationError(f"unknown dataset {dataset_id!r}; expected one of {sorted(REGIMES)}")
    if split not in ("train", "test"):
        raise ValidationError(f"unknown split {split!r}")
    if n < num_classes:
        raise ValidationError(f"n={n} is smaller than the class count {num_classes}")
    regime = REGIMES[dataset_id]
    rng = make_rng(seed, f"dataset:{dataset_id}:{split}")

    labels = rng.permutation(np.arange(n) % num_classes).astype(np.int64)
    spacing = np.pi / num_classes
    angle = labels * spacing + rng.uniform(-0.35 * spacing, 0.35 * spacing, n)
    center = (size - 1) / 2.0 + np.asarray(regime.offset) + rng.uniform(-1.5, 1.5, (n, 2))
    half = rng.uniform(*regime.length, n) / 2.0
    width = rng.uniform(*regime.width, n)
    gain = rng.uniform(0.75, 1.0, n)

    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    dy, dx = yy[None] - _col(center[:, 0]), xx[None] - _col(center[:, 1])
    uy, ux = np.sin(angle), np.cos(angle)
    t = np.clip(dy * _col(uy) + dx * _col(ux), -_col(half), _col(half))
    dist2 = (dy - t * _col(uy)) ** 2 + (dx - t * _col(ux)) ** 2
    stroke = np.exp(-dist2 / (2.0 * _col(width) ** 2))

    quad = _QUADRANTS[labels % 4]
    blob_at = center + quad * regime.blob_spread + rng.uniform(-1.0, 1.0, (n, 2))
    radius = rng.uniform(*regime.blob_radius, n)
    bd2 = (yy[None] - _col(blob_at[:, 0])) ** 2 + (xx[None] - _col(blob_at[:, 1])) ** 2
    blob = 0.8 * np.exp(-bd2 / (2.0 * _col(radius) ** 2))

    images = np.maximum(stroke, blob) * _col(gain) + rng.normal(0.0, 0.02, (n, size, size))
    images = np.clip(images, 0.0, 1.0).astype(np.float32)
    return LabeledSet(images, labels, num_classes, f"{dataset_id}/{split}")


def resolve_dataset(spec: str, split: str, n: int, seed: int) -> LabeledSet:
    """synthA | synthB | idx:<images>,<labels> (n and seed are ignored for IDX)."""
    if spec.startswith("idx:"):
        from desk_trainer.idx import load_idx

        paths = spec[len("idx:"):].split(",")
        if len(paths) != 2:
            raise ValidationError(f"expected idx:<images>,<labels>, got {spec!r}")
        return load_idx(paths[0], paths[1])
    return generate_dataset(spec, split, n, seed)
