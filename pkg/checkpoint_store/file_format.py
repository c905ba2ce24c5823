"""
checkpoint_store/file_format.py - the .ckpt / .rws container.

Layout: u64 little-endian header length H, H bytes of UTF-8 JSON, then the
little-endian row-major payloads in header key order with no padding.
"""
import json
import logging
import struct
from typing import Dict, List, Tuple

import numpy as np

from checkpoint_store.checkpoint import Checkpoint, SignatureFile, check_layer_order, match_group
from errors import CheckpointParseError, ValidationError
from tensor_core import DTYPES, dtype_code
from utils import safe_write_bytes

logger = logging.getLogger(__name__)

METADATA_KEY = "__metadata__"


def serialize_checkpoint(ckpt: Checkpoint) -> bytes:
    meta = dict(ckpt.metadata)
    meta["layer_order"] = ",".join(ckpt.layer_order)
    header: Dict[str, object] = {METADATA_KEY: {k: meta[k] for k in sorted(meta)}}
    chunks: List[bytes] = []
    offset = 0
    for name, arr in ckpt.tensors.items():
        code = dtype_code(arr)
        raw = np.ascontiguousarray(arr, dtype=DTYPES[code]).tobytes()
        header[name] = {
            "dtype": code,
            "shape": [int(d) for d in arr.shape],
            "data_offsets": [offset, offset + len(raw)],
        }
        chunks.append(raw)
        offset += len(raw)
    head = json.dumps(header, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    return struct.pack("<Q", len(head)) + head + b"".join(chunks)


def write_checkpoint(ckpt: Checkpoint, path: str) -> None:
    # Rebuilding validates every invariant before a single byte is written.
    Checkpoint(ckpt.tensors, ckpt.metadata, ckpt.layer_order)
    safe_write_bytes(path, serialize_checkpoint(ckpt))
    logger.debug("wrote %s (%d tensors)", path, len(ckpt.tensors))


def parse_checkpoint(data: bytes) -> Checkpoint:
    if len(data) < 8:
        raise CheckpointParseError("header_length", "truncated file: no header length")
    (hlen,) = struct.unpack("<Q", data[:8])
    if 8 + hlen > len(data):
        raise CheckpointParseError("header_length", "header overruns file")
    try:
        header = json.loads(data[8:8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointParseError("header", f"malformed header JSON: {e}")
    if not isinstance(header, dict):
        raise CheckpointParseError("header", "header is not a JSON object")

    meta = header.pop(METADATA_KEY, None)
    if not isinstance(meta, dict) or "layer_order" not in meta:
        raise CheckpointParseError("layer_order", "missing layer_order metadata")
    for key, value in meta.items():
        if not isinstance(value, str):
            raise CheckpointParseError(METADATA_KEY, f"metadata value for {key!r} is not a string")
    layer_order = meta["layer_order"].split(",") if meta["layer_order"] else []
    try:
        check_layer_order(layer_order)
    except ValidationError as e:
        raise CheckpointParseError("layer_order", str(e))

    payload = memoryview(data)[8 + hlen:]
    spans: List[Tuple[int, int, str]] = []
    tensors: Dict[str, np.ndarray] = {}
    for name, entry in header.items():
        if not isinstance(entry, dict):
            raise CheckpointParseError(name, f"entry for tensor {name!r} is not an object")
        code = entry.get("dtype")
        if code not in DTYPES:
            raise CheckpointParseError(f"{name}.dtype", f"unknown dtype {code!r} for tensor {name!r}")
        shape = entry.get("shape")
        if (
            not isinstance(shape, list)
            or not shape
            or not all(isinstance(d, int) and not isinstance(d, bool) and d > 0 for d in shape)
        ):
            raise CheckpointParseError(f"{name}.shape", f"invalid shape {shape!r} for tensor {name!r}")
        offsets = entry.get("data_offsets")
        if (
            not isinstance(offsets, list)
            or len(offsets) != 2
            or not all(isinstance(o, int) and not isinstance(o, bool) for o in offsets)
            or offsets[0] < 0
            or offsets[0] > offsets[1]
        ):
            raise CheckpointParseError(f"{name}.data_offsets", f"out-of-bounds data_offsets {offsets!r}")
        begin, end = offsets
        expected = int(np.prod(shape)) * DTYPES[code].itemsize
        if end - begin != expected:
            raise CheckpointParseError(
                f"{name}.data_offsets",
                f"out-of-bounds data_offsets: {end - begin} bytes for {expected}-byte tensor {name!r}",
            )
        if end > len(payload):
            raise CheckpointParseError(
                f"{name}.data_offsets", f"truncated file: tensor {name!r} ends at {end}, payload is {len(payload)}"
            )
        group = _group_or_raise(name, layer_order)
        spans.append((begin, end, name))
        arr = np.frombuffer(payload[begin:end], dtype=DTYPES[code]).reshape(shape)
        tensors[name] = arr
        logger.debug("tensor %s -> group %s", name, group)

    if not spans:
        raise CheckpointParseError("payload", "checkpoint holds no tensors")
    spans.sort()
    if spans[0][0] != 0:
        raise CheckpointParseError(f"{spans[0][2]}.data_offsets", f"payload gap: first tensor starts at {spans[0][0]}")
    for (b0, e0, n0), (b1, e1, n1) in zip(spans, spans[1:]):
        if b1 < e0:
            raise CheckpointParseError(f"{n1}.data_offsets", f"overlapping data_offsets: {n0!r} and {n1!r}")
        if b1 > e0:
            raise CheckpointParseError(f"{n1}.data_offsets", f"payload gap of {b1 - e0} bytes before {n1!r}")
    if spans[-1][1] != len(payload):
        raise CheckpointParseError("payload", "trailing bytes after last tensor")

    return Checkpoint(tensors, {k: v for k, v in meta.items() if k != "layer_order"}, tuple(layer_order))


def _group_or_raise(name: str, layer_order: List[str]) -> str:
    try:
        group = match_group(name, layer_order)
    except ValidationError as e:
        raise CheckpointParseError(name, str(e))
    if group is None:
        raise CheckpointParseError(name, f"orphan tensor {name!r} matches no layer group")
    return group


def read_checkpoint(path: str) -> Checkpoint:
    with open(path, "rb") as f:
        data = f.read()
    return parse_checkpoint(data)


def read_signature(path: str) -> SignatureFile:
    try:
        return SignatureFile.from_checkpoint(read_checkpoint(path))
    except ValidationError as e:
        raise CheckpointParseError("__metadata__", f"{path} is not a signature file: {e}")


def storage_bytes(ckpt: Checkpoint) -> int:
    """Payload bytes only; the header is excluded."""
    return int(sum(a.size * a.itemsize for a in ckpt.tensors.values()))
