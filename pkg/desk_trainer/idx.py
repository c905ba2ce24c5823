"""
desk_trainer/idx.py - IDX (MNIST-style) image/label loader.
"""
import struct

import numpy as np

from desk_trainer.datasets import LabeledSet
from errors import IdxFormatError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


def _read(path: str) -> bytes:
    with open(path, "rb") as f:
        return f.read()


def _header(data: bytes, magic: int, ndim: int, path: str):
    if len(data) < 4 + 4 * ndim:
        raise IdxFormatError(f"{path}: truncated header")
    (found,) = struct.unpack(">I", data[:4])
    if found != magic:
        raise IdxFormatError(f"{path}: bad magic 0x{found:08x}, expected 0x{magic:08x}")
    dims = struct.unpack(">" + "I" * ndim, data[4:4 + 4 * ndim])
    body = data[4 + 4 * ndim:]
    expected = int(np.prod(dims))
    if len(body) < expected:
        raise IdxFormatError(f"{path}: truncated data ({len(body)} of {expected} bytes)")
    if len(body) > expected:
        raise IdxFormatError(f"{path}: {len(body) - expected} trailing bytes")
    return dims, body


def load_idx(images_path: str, labels_path: str) -> LabeledSet:
    (n, rows, cols), pixels = _header(_read(images_path), IMAGE_MAGIC, 3, images_path)
    (m,), raw_labels = _header(_read(labels_path), LABEL_MAGIC, 1, labels_path)
    if n != m:
        raise IdxFormatError(f"count mismatch: {n} images but {m} labels")
    if n == 0:
        raise IdxFormatError(f"{images_path}: no images")
    images = np.frombuffer(pixels, dtype=np.uint8).reshape(n, rows, cols).astype(np.float32) / np.float32(255.0)
    labels = np.frombuffer(raw_labels, dtype=np.uint8).astype(np.int64)
    return LabeledSet(images, labels, int(labels.max()) + 1, f"idx:{images_path}")
