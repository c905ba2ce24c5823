import json
import struct

import numpy as np
import pytest

from checkpoint_store import (
    Checkpoint,
    SignatureFile,
    parse_checkpoint,
    read_checkpoint,
    read_signature,
    serialize_checkpoint,
    storage_bytes,
    write_checkpoint,
)
from errors import ArchitectureMismatchError, CheckpointParseError, ValidationError
from quantizer import quantize
from tests.conftest import toy_checkpoint

DTYPE_CHOICES = (np.float32, np.float16, np.int8, np.int16)


def random_checkpoint(rng) -> Checkpoint:
    n_groups = int(rng.integers(1, 4))
    groups = [f"grp{i}" for i in range(n_groups)]
    tensors = {}
    for g in groups:
        for j in range(int(rng.integers(1, 4))):
            shape = tuple(int(d) for d in rng.integers(1, 5, size=int(rng.integers(1, 4))))
            dtype = DTYPE_CHOICES[int(rng.integers(len(DTYPE_CHOICES)))]
            tensors[f"{g}.t{j}"] = (rng.standard_normal(shape) * 20).astype(dtype)
    return Checkpoint(tensors, {"note": str(rng.integers(1000)), "empty": ""}, groups)


def build_raw(header: dict, payload: bytes) -> bytes:
    head = json.dumps(header).encode()
    return struct.pack("<Q", len(head)) + head + payload


def test_fifty_random_round_trips_are_bit_exact(tmp_path):
    rng = np.random.default_rng(2024)
    for i in range(50):
        ckpt = random_checkpoint(rng)
        path = tmp_path / f"c{i}.ckpt"
        write_checkpoint(ckpt, str(path))
        back = read_checkpoint(str(path))
        assert list(back.tensors) == list(ckpt.tensors)
        assert back.metadata == ckpt.metadata
        assert back.layer_order == ckpt.layer_order
        for name, arr in ckpt.tensors.items():
            assert back.tensors[name].dtype == arr.dtype
            assert back.tensors[name].tobytes() == arr.tobytes()
        assert serialize_checkpoint(back) == path.read_bytes()


def test_golden_two_tensor_file(tmp_path):
    ckpt = Checkpoint(
        {"conv1.weight": np.arange(6, dtype=np.float32).reshape(2, 3), "conv1.bias": np.ones(3, np.float32)},
        {},
        ("conv1",),
    )
    raw = serialize_checkpoint(ckpt)
    (hlen,) = struct.unpack("<Q", raw[:8])
    header = json.loads(raw[8:8 + hlen])
    assert list(header) == ["__metadata__", "conv1.weight", "conv1.bias"]
    assert header["__metadata__"] == {"layer_order": "conv1"}
    assert header["conv1.weight"] == {"dtype": "F32", "shape": [2, 3], "data_offsets": [0, 24]}
    assert header["conv1.bias"]["data_offsets"] == [24, 36]
    assert len(raw) == 8 + hlen + 36
    assert parse_checkpoint(raw).num_scalars == 9


def test_writing_twice_is_byte_identical(tmp_path, toy_trio):
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    write_checkpoint(toy_trio[0], str(a))
    write_checkpoint(toy_trio[0], str(b))
    assert a.read_bytes() == b.read_bytes()


def test_quantized_signature_round_trip(tmp_path, toy_signatures):
    q = quantize(toy_signatures[0], 8)
    path = tmp_path / "q.rws"
    write_checkpoint(q, str(path))
    back = read_signature(str(path))
    assert back.quant_bits == 8
    for name, arr in q.tensors.items():
        assert back.tensors[name].tobytes() == arr.tobytes()


def test_header_overruns_file():
    raw = struct.pack("<Q", 1000) + b"{}"
    with pytest.raises(CheckpointParseError, match="header overruns file"):
        parse_checkpoint(raw)


def test_orphan_tensor():
    header = {
        "__metadata__": {"layer_order": "conv1,fc1"},
        "misc.bias": {"dtype": "F32", "shape": [1], "data_offsets": [0, 4]},
    }
    with pytest.raises(CheckpointParseError, match="orphan tensor"):
        parse_checkpoint(build_raw(header, b"\x00" * 4))


def test_missing_layer_order():
    header = {"conv1.bias": {"dtype": "F32", "shape": [1], "data_offsets": [0, 4]}}
    with pytest.raises(CheckpointParseError, match="missing layer_order") as info:
        parse_checkpoint(build_raw(header, b"\x00" * 4))
    assert info.value.field == "layer_order"


@pytest.mark.parametrize(
    "entries,payload,message",
    [
        ({"a.x": {"dtype": "F64", "shape": [1], "data_offsets": [0, 8]}}, 8, "unknown dtype"),
        ({"a.x": {"dtype": "F32", "shape": [2], "data_offsets": [0, 8]}}, 4, "truncated file"),
        ({"a.x": {"dtype": "F32", "shape": [2], "data_offsets": [0, 4]}}, 4, "out-of-bounds data_offsets"),
        (
            {
                "a.x": {"dtype": "F32", "shape": [2], "data_offsets": [0, 8]},
                "a.y": {"dtype": "F32", "shape": [1], "data_offsets": [4, 8]},
            },
            8,
            "overlapping data_offsets",
        ),
        ({"a.x": {"dtype": "F32", "shape": [1], "data_offsets": [0, 4]}}, 6, "trailing bytes"),
        ({"a.x": {"dtype": "F32", "shape": [], "data_offsets": [0, 4]}}, 4, "invalid shape"),
        ({"a.x": {"dtype": "F32", "shape": [1], "data_offsets": [4, 8]}}, 8, "first tensor starts at 4"),
        (
            {
                "a.x": {"dtype": "F32", "shape": [1], "data_offsets": [0, 4]},
                "a.y": {"dtype": "F32", "shape": [1], "data_offsets": [8, 12]},
            },
            12,
            "payload gap of 4 bytes",
        ),
        ({}, 0, "holds no tensors"),
    ],
)
def test_malformed_entries(entries, payload, message):
    header = {"__metadata__": {"layer_order": "a"}, **entries}
    with pytest.raises(CheckpointParseError, match=message):
        parse_checkpoint(build_raw(header, b"\x00" * payload))


def test_truncated_before_header_length():
    with pytest.raises(CheckpointParseError, match="truncated file"):
        parse_checkpoint(b"\x01\x02")


def test_malformed_header_json():
    with pytest.raises(CheckpointParseError, match="malformed header JSON"):
        parse_checkpoint(struct.pack("<Q", 3) + b"{x}")


def test_checkpoint_invariants():
    with pytest.raises(ValidationError):
        Checkpoint({"b.w": np.ones(2, np.float32)}, {}, ("a",))
    with pytest.raises(ValidationError):
        Checkpoint({"a.w": np.ones(2, np.float32)}, {}, ("a", "a"))
    with pytest.raises(ValidationError):
        Checkpoint({"a.w": np.ones(2, np.float32)}, {"k": 1}, ("a",))


def test_write_validates_before_writing(tmp_path):
    ckpt = toy_checkpoint(0)
    object.__setattr__(ckpt, "layer_order", ("g1",))
    path = tmp_path / "bad.ckpt"
    with pytest.raises(ValidationError):
        write_checkpoint(ckpt, str(path))
    assert not path.exists()


def test_shape_compatibility():
    a, b = toy_checkpoint(0), toy_checkpoint(1)
    assert a.is_shape_compatible(b)
    assert a.arch_fingerprint == b.arch_fingerprint
    assert a.content_digest != b.content_digest
    other = toy_checkpoint(0, groups=("g1", "g2", "g3"))
    with pytest.raises(ArchitectureMismatchError, match="layer_order"):
        a.require_compatible(other)


def test_storage_bytes_examples():
    w = np.ones((10, 10), np.float32)
    ckpt = Checkpoint({"a.w": w}, {}, ("a",))
    assert storage_bytes(ckpt) == 400
    q = Checkpoint({"a.w": w.astype(np.int8), "a.w#scale": np.ones(1, np.float32)}, {}, ("a",))
    assert storage_bytes(q) == 104


def test_signature_requires_metadata(toy_trio):
    with pytest.raises(ValidationError, match="missing keys"):
        SignatureFile.from_checkpoint(toy_trio[0])


def test_read_signature_rejects_plain_checkpoint(ckpt_file):
    with pytest.raises(CheckpointParseError, match="not a signature file"):
        read_signature(str(ckpt_file))
