"""
desk_trainer/corruptions.py - procedural image corruptions at five severities.

Grayscale desk versions of the common-corruption families (noise, blur,
digital, plus brightness as a global shift). Every operator works on a
single [H,W] image or a batch [N,H,W] and clamps its output to [0,1].
"""
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np
from scipy import fft, ndimage

from desk_trainer.rng import make_rng
from errors import CorruptionSpecError, ValidationError

KINDS: Tuple[str, ...] = (
    "gaussian_noise",
    "shot_noise",
    "impulse_noise",
    "gaussian_blur",
    "motion_blur",
    "contrast",
    "brightness",
    "pixelate",
    "jpeg_proxy",
)

# Severity 1..5. shot_noise lists photons per unit intensity, so its
# distortion grows as the value falls; contrast lists the kept fraction.
SEVERITY_TABLES: Dict[str, Tuple[float, ...]] = {
    "gaussian_noise": (0.08, 0.16, 0.26, 0.38, 0.5),
    "shot_noise": (30.0, 12.0, 5.0, 2.0, 1.0),
    "impulse_noise": (0.03, 0.08, 0.14, 0.22, 0.3),
    "gaussian_blur": (0.6, 1.0, 1.5, 2.0, 2.6),
    "motion_blur": (5, 7, 9, 12, 15),
    "contrast": (0.5, 0.3, 0.18, 0.1, 0.05),
    "brightness": (0.1, 0.2, 0.3, 0.4, 0.5),
    "pixelate": (2, 3, 4, 6, 7),
    "jpeg_proxy": (16, 32, 56, 88, 120),
}


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str
    severity: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SEVERITY_TABLES:
            raise CorruptionSpecError(f"unknown corruption kind {self.kind!r}")
        if not isinstance(self.severity, int) or not 1 <= self.severity <= 5:
            raise CorruptionSpecError(f"severity must be an integer in 1..5, got {self.severity!r}")

    @property
    def parameter(self) -> float:
        return SEVERITY_TABLES[self.kind][self.severity - 1]

    @property
    def tag(self) -> str:
        return f"{self.kind}:{self.severity}"

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "CorruptionSpec":
        """"<kind>:<severity>", severity defaulting to 5."""
        kind, _, sev = text.partition(":")
        try:
            severity = int(sev) if sev else 5
        except ValueError:
            raise CorruptionSpecError(f"bad severity in {text!r}")
        return cls(kind, severity, seed)


# ============================================================================
# OPERATORS (x is float64 [N,H,W])
# ============================================================================
def _gaussian_noise(x, sigma, rng):
    return x + sigma * rng.standard_normal(x.shape)


def _shot_noise(x, photons, rng):
    return rng.poisson(x * photons) / photons


def _impulse_noise(x, fraction, rng):
    hit = rng.random(x.shape) < fraction
    salt = rng.random(x.shape) < 0.5
    return np.where(hit, salt.astype(x.dtype), x)


def _gaussian_blur(x, sigma, rng):
    return ndimage.gaussian_filter(x, sigma=(0, sigma, sigma), mode="nearest")


def _motion_blur(x, length, rng):
    length = int(length)
    return ndimage.convolve1d(x, np.full(length, 1.0 / length), axis=-1, mode="nearest")


def _contrast(x, factor, rng):
    mean = x.mean(axis=(-2, -1), keepdims=True)
    return (x - mean) * factor + mean


def _brightness(x, shift, rng):
    return x + shift


def _pad_to_multiple(x, block):
    h, w = x.shape[-2:]
    ph, pw = (-h) % block, (-w) % block
    return np.pad(x, ((0, 0), (0, ph), (0, pw)), mode="edge")


def _blocks(x, block):
    n, h, w = x.shape
    return x.reshape(n, h // block, block, w // block, block).transpose(0, 1, 3, 2, 4)


def _unblock(b):
    n, hb, wb, block, _ = b.shape
    return b.transpose(0, 1, 3, 2, 4).reshape(n, hb * block, wb * block)


def _pixelate(x, factor, rng):
    factor = int(factor)
    h, w = x.shape[-2:]
    coarse = _blocks(_pad_to_multiple(x, factor), factor).mean(axis=(-2, -1))
    up = np.repeat(np.repeat(coarse, factor, axis=1), factor, axis=2)
    return up[:, :h, :w]


def _jpeg_proxy(x, step, rng):
    h, w = x.shape[-2:]
    q = step / 255.0
    coeffs = fft.dctn(_blocks(_pad_to_multiple(x, 8), 8), axes=(-2, -1), norm="ortho")
    coeffs = np.round(coeffs / q) * q
    out = fft.idctn(coeffs, axes=(-2, -1), norm="ortho")
    return _unblock(out)[:, :h, :w]


OPERATORS: Dict[str, Callable[[np.ndarray, float, np.random.Generator], np.ndarray]] = {
    "gaussian_noise": _gaussian_noise,
    "shot_noise": _shot_noise,
    "impulse_noise": _impulse_noise,
    "gaussian_blur": _gaussian_blur,
    "motion_blur": _motion_blur,
    "contrast": _contrast,
    "brightness": _brightness,
    "pixelate": _pixelate,
    "jpeg_proxy": _jpeg_proxy,
}


def apply_corruption(kind: str, images: np.ndarray, parameter: float, rng: np.random.Generator) -> np.ndarray:
    """Run one operator with an explicit distortion parameter."""
    if kind not in OPERATORS:
        raise CorruptionSpecError(f"unknown corruption kind {kind!r}")
    x = np.asarray(images, dtype=np.float64)
    single = x.ndim == 2
    batch = x[None] if single else x
    if batch.ndim != 3:
        raise ValidationError(f"expected [H,W] or [N,H,W] images, got shape {list(x.shape)}")
    out = np.clip(OPERATORS[kind](batch, parameter, rng), 0.0, 1.0).astype(np.float32)
    return out[0] if single else out


def corrupt(images: np.ndarray, spec: CorruptionSpec) -> np.ndarray:
    x = np.asarray(images)
    if x.size and (x.min() < 0.0 or x.max() > 1.0):
        raise ValidationError("pixel values must lie in [0,1]")
    rng = make_rng(spec.seed, f"corrupt:{spec.kind}")
    return apply_corruption(spec.kind, x, spec.parameter, rng)
