from .tensor import DTYPES, FlatVector, Segment, byte_width, dtype_code, make_tensor, widen
from .vector_ops import axpy, cosine, dot, l2_norm

__all__ = [
    "DTYPES",
    "FlatVector",
    "Segment",
    "axpy",
    "byte_width",
    "cosine",
    "dot",
    "dtype_code",
    "l2_norm",
    "make_tensor",
    "widen",
]
