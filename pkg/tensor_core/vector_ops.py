"""
tensor_core/vector_ops.py - flat-vector algebra.

Reductions accumulate in float64; axpy stays in float32.
"""
import math
from typing import Union

import numpy as np

from errors import DimensionError
from tensor_core.tensor import FlatVector

VectorLike = Union[FlatVector, np.ndarray]


def _values(v: VectorLike) -> np.ndarray:
    return v.values if isinstance(v, FlatVector) else np.asarray(v).reshape(-1)


def _check_lengths(a: np.ndarray, b: np.ndarray) -> None:
    if a.size != b.size:
        raise DimensionError(f"length mismatch: {a.size} vs {b.size}")


def dot(a: VectorLike, b: VectorLike) -> float:
    x, y = _values(a), _values(b)
    _check_lengths(x, y)
    return float(np.dot(x.astype(np.float64), y.astype(np.float64)))


def l2_norm(a: VectorLike) -> float:
    x = _values(a).astype(np.float64)
    return math.sqrt(float(np.dot(x, x)))


def cosine(a: VectorLike, b: VectorLike) -> float:
    """Cosine similarity; 0.0 when either vector is exactly zero."""
    x, y = _values(a), _values(b)
    _check_lengths(x, y)
    na, nb = l2_norm(x), l2_norm(y)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot(x, y) / (na * nb)


def axpy(alpha: float, x: VectorLike, y: VectorLike) -> VectorLike:
    """y + alpha * x in float32. Neither input is modified."""
    xv, yv = _values(x), _values(y)
    _check_lengths(xv, yv)
    if alpha == 0:
        out = yv.astype(np.float32, copy=True)
    else:
        out = yv.astype(np.float32) + np.float32(alpha) * xv.astype(np.float32)
    if isinstance(y, FlatVector):
        return y.with_values(out)
    return out
