"""
signature_engine/projection.py - residual of a robustifying direction after
removing its projection onto the base direction.

All projections run in float64; results are cast back to float32.
"""
import numpy as np
from scipy import linalg

RIDGE = 1e-8


def vector_residual(target: np.ndarray, base: np.ndarray) -> np.ndarray:
    """c - (<c,b>/<b,b>) b; identity when b is exactly zero."""
    b = base.astype(np.float64).reshape(-1)
    c = target.astype(np.float64).reshape(-1)
    bb = float(np.dot(b, b))
    if bb == 0.0:
        return target.astype(np.float32, copy=True)
    r = c - (np.dot(c, b) / bb) * b
    # second Gram-Schmidt pass
    r = r - (np.dot(r, b) / bb) * b
    return r.astype(np.float32).reshape(target.shape)


def as_matrix(arr: np.ndarray) -> np.ndarray:
    """Leading dimension x product of the remaining ones."""
    return arr.reshape(arr.shape[0], -1)


def matrix_residual(target: np.ndarray, base: np.ndarray) -> np.ndarray:
    """C - B X with (B^T B + eps I) X = B^T C, eps = 1e-8 * mean(diag(B^T B))."""
    B = as_matrix(base.astype(np.float64))
    C = as_matrix(target.astype(np.float64))
    gram = B.T @ B
    scale = float(np.mean(np.diag(gram)))
    if scale == 0.0:
        return target.astype(np.float32, copy=True)
    gram[np.diag_indices_from(gram)] += RIDGE * scale
    factor = linalg.cho_factor(gram, overwrite_a=True)
    X = linalg.cho_solve(factor, B.T @ C, overwrite_b=True)
    return (C - B @ X).astype(np.float32).reshape(target.shape)
