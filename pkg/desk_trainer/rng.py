"""
desk_trainer/rng.py - reproducible counter-based random streams.

Every stream is numpy's Philox4x64-10 with counter 0 and a 64-bit key
derived as BLAKE2b-64(seed_le64 || tag_utf8 || index_le64), read as a
little-endian integer. The same (seed, tag, index) yields the same stream on
every platform.
"""
import hashlib
import struct

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seed(seed: int, tag: str, index: int = 0) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<Q", seed & MASK64))
    h.update(tag.encode("utf-8"))
    h.update(struct.pack("<Q", index & MASK64))
    return int.from_bytes(h.digest(), "little")


def make_rng(seed: int, tag: str, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=derive_seed(seed, tag, index)))
