"""
analyzer/pgm.py - binary PGM (P5, maxval 255) read/write.
"""
import numpy as np

from errors import FormatError
from utils import safe_write_bytes


def write_pgm(path: str, pixels: np.ndarray) -> None:
    img = np.asarray(pixels, dtype=np.uint8)
    h, w = img.shape
    safe_write_bytes(path, b"P5\n%d %d\n255\n" % (w, h) + img.tobytes())


def _tokens(data: bytes, count: int):
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos + 1


def read_pgm(path: str) -> np.ndarray:
    """Grayscale image scaled to [0,1] as float32 [H,W]."""
    with open(path, "rb") as f:
        data = f.read()
    (magic, w, h, maxval), start = _tokens(data, 4)
    if magic != b"P5":
        raise FormatError(f"{path}: not a binary PGM (magic {magic!r})")
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise FormatError(f"{path}: malformed PGM header")
    if not 0 < maxval <= 255:
        raise FormatError(f"{path}: only 8-bit PGM is supported (maxval {maxval})")
    body = data[start:start + w * h]
    if len(body) != w * h:
        raise FormatError(f"{path}: truncated PGM data")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).astype(np.float32) / np.float32(maxval)
