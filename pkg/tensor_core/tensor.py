"""
tensor_core/tensor.py - validated tensors and flattened vectors.

A tensor is a read-only, C-contiguous, little-endian numpy array of one of
the four supported dtypes. float16 is storage-only: it is widened to
float32 whenever a tensor is flattened for arithmetic.
"""
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Tuple

import numpy as np

from errors import DimensionError, ValidationError

DTYPES: Dict[str, np.dtype] = {
    "F32": np.dtype("<f4"),
    "F16": np.dtype("<f2"),
    "I8": np.dtype("i1"),
    "I16": np.dtype("<i2"),
}


def dtype_code(arr: np.ndarray) -> str:
    dt = arr.dtype
    for code, target in DTYPES.items():
        if dt.kind == target.kind and dt.itemsize == target.itemsize:
            return code
    raise ValidationError(f"unsupported dtype {dt}")


def byte_width(code: str) -> int:
    return DTYPES[code].itemsize


def make_tensor(data, dtype: Optional[str] = None) -> np.ndarray:
    """Validate and freeze an array as a tensor.

    Rejects 0-d and zero-sized arrays. The returned array is a private
    read-only copy unless the input already satisfies every requirement.
    """
    arr = np.asarray(data)
    if dtype is not None:
        arr = arr.astype(DTYPES[dtype], copy=False)
    code = dtype_code(arr)
    if arr.ndim < 1:
        raise ValidationError("tensor must have at least one dimension")
    if arr.size == 0:
        raise ValidationError(f"zero-sized tensor of shape {list(arr.shape)}")
    target = DTYPES[code]
    if arr.dtype != target or not arr.flags.c_contiguous or arr.flags.writeable:
        arr = np.array(arr, dtype=target, order="C", copy=True)
        arr.flags.writeable = False
    return arr


def widen(arr: np.ndarray) -> np.ndarray:
    """float32 view of a tensor's values (exact for every supported dtype)."""
    return arr.astype(np.float32, copy=False).reshape(-1)


@dataclass(frozen=True)
class Segment:
    name: str
    length: int
    shape: Tuple[int, ...]
    dtype: str


@dataclass(frozen=True)
class FlatVector:
    """float32 values plus the ordered segments they were flattened from."""

    values: np.ndarray
    origin: Tuple[Segment, ...]

    def __post_init__(self):
        if self.values.dtype != np.float32 or self.values.ndim != 1:
            raise ValidationError("FlatVector values must be a 1-D float32 array")
        total = sum(seg.length for seg in self.origin)
        if total != self.values.size:
            raise DimensionError(
                f"segment lengths sum to {total} but vector has {self.values.size} values"
            )
        if self.values.flags.writeable:
            frozen = self.values.copy()
            frozen.flags.writeable = False
            object.__setattr__(self, "values", frozen)

    def __len__(self) -> int:
        return int(self.values.size)

    @classmethod
    def flatten(cls, tensors: Mapping[str, np.ndarray], names: Optional[Iterable[str]] = None) -> "FlatVector":
        """Concatenate tensors in the given order (default: mapping order)."""
        order = list(names) if names is not None else list(tensors)
        parts, origin = [], []
        for name in order:
            arr = tensors[name]
            parts.append(widen(arr))
            origin.append(Segment(name, int(arr.size), tuple(arr.shape), dtype_code(arr)))
        values = np.concatenate(parts) if parts else np.zeros(0, dtype=np.float32)
        return cls(values.astype(np.float32, copy=False), tuple(origin))

    def with_values(self, values: np.ndarray) -> "FlatVector":
        return FlatVector(np.asarray(values, dtype=np.float32), self.origin)

    def unflatten(self) -> Dict[str, np.ndarray]:
        """Inverse of flatten; every segment goes back to its source dtype."""
        out: Dict[str, np.ndarray] = {}
        offset = 0
        for seg in self.origin:
            chunk = self.values[offset:offset + seg.length].reshape(seg.shape)
            out[seg.name] = make_tensor(chunk.astype(DTYPES[seg.dtype]))
            offset += seg.length
        return out

    @staticmethod
    def concat(vectors: Iterable["FlatVector"]) -> "FlatVector":
        vectors = list(vectors)
        if not vectors:
            return FlatVector(np.zeros(0, dtype=np.float32), ())
        values = np.concatenate([v.values for v in vectors])
        origin = tuple(seg for v in vectors for seg in v.origin)
        return FlatVector(values, origin)
