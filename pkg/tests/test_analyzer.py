import os

import numpy as np
import pytest

from analyzer import (
    cosine_matrix,
    cross_dataset_report,
    diversity,
    feature_map_dump,
    layer_norm_profile,
    normalize_map,
    per_layer_cosine,
    read_pgm,
    rws_relationship_matrix,
    transfer_gain_matrix,
    write_pgm,
)
from checkpoint_store import SignatureFile
from desk_trainer import DeskNet, EvalContext, NetSpec
from errors import FormatError, ValidationError
from quantizer import quantize
from signature_engine import PatchRecipe, patch
from tensor_core import FlatVector
from tests.conftest import GROUPS, toy_checkpoint


def full_signature(tensors, corruption="contrast", source="src"):
    meta = {
        "corruption": corruption,
        "mode": "vector",
        "layers_kept": str(len(GROUPS)),
        "quant_bits": "0",
        "source_fingerprint": source,
    }
    return SignatureFile(tensors, meta, GROUPS)


def shallow_signature(values, corruption, layers=("g1",)):
    tensors = {f"{g}.weight": np.asarray(values, np.float32) for g in layers}
    meta = {
        "corruption": corruption,
        "mode": "vector",
        "layers_kept": str(len(layers)),
        "quant_bits": "0",
        "source_fingerprint": "src",
    }
    return SignatureFile(tensors, meta, tuple(layers))


# ---------------------------------------------------------
# Norm profile
# ---------------------------------------------------------
def test_scaled_std_profile():
    std = toy_checkpoint(4)
    sig = full_signature({n: 0.1 * a for n, a in std.tensors.items()})
    table = layer_norm_profile([sig], std)
    assert table.column("group") == list(GROUPS)
    np.testing.assert_allclose(table.column("ratio_to_std"), 0.1, rtol=1e-5)
    assert all(np.isnan(v) for v in table.column("ratio_to_base"))
    assert table.column("cum_energy_share")[-1] == 1.0


def test_support_on_first_group_only():
    std = toy_checkpoint(4)
    tensors = {n: (a if n.startswith("g1.") else np.zeros_like(a)) for n, a in std.tensors.items()}
    table = layer_norm_profile([full_signature(tensors)], std)
    assert table.column("cum_energy_share") == [1.0] * 4
    assert table.column("cum_energy_share_squared") == [1.0] * 4


def test_profile_uses_base_direction_when_init_given(toy_trio):
    std, init, _ = toy_trio
    sig = full_signature({n: 0.1 * a for n, a in std.tensors.items()})
    table = layer_norm_profile([sig], std, init)
    assert all(v > 0 for v in table.column("ratio_to_base"))


def test_profile_rejects_shallow_signatures(toy_signatures, toy_trio):
    with pytest.raises(ValidationError):
        layer_norm_profile(toy_signatures, toy_trio[0])


def test_profile_rejects_mixed_sources():
    std = toy_checkpoint(4)
    a = full_signature(dict(std.tensors), source="one")
    b = full_signature(dict(std.tensors), source="two")
    with pytest.raises(ValidationError):
        layer_norm_profile([a, b], std)


# ---------------------------------------------------------
# Cosine structure
# ---------------------------------------------------------
def test_identical_signatures_give_all_ones():
    s = [shallow_signature([[1.0, 2.0], [3.0, 4.0]], k) for k in ("a", "b")]
    report = per_layer_cosine(s, "g1")
    np.testing.assert_allclose(report.values, 1.0, atol=1e-12)
    assert report.context == "layer:g1"


def test_orthogonal_signatures_give_zero_off_diagonal():
    s = [shallow_signature([1.0, 0.0], "a"), shallow_signature([0.0, 3.0], "b")]
    report = rws_relationship_matrix(s)
    assert report.values[0, 1] == 0.0
    assert diversity(report) == 1.0


def test_cosine_matrix_is_symmetric_with_unit_diagonal():
    rng = np.random.default_rng(0)
    vectors = [FlatVector.flatten({"x": rng.standard_normal(7).astype(np.float32)}) for _ in range(5)]
    m = cosine_matrix(vectors)
    np.testing.assert_array_equal(m, m.T)
    np.testing.assert_allclose(np.diag(m), 1.0, rtol=1e-12)


def test_per_layer_cosine_missing_layer(toy_signatures):
    with pytest.raises(ValidationError):
        per_layer_cosine(toy_signatures, "g4")


def test_relationship_needs_two_signatures(toy_signatures):
    with pytest.raises(ValidationError):
        rws_relationship_matrix(toy_signatures[:1])


def test_relationship_needs_same_coverage():
    a = shallow_signature([1.0, 2.0], "a")
    b = shallow_signature([1.0, 2.0], "b", layers=("g1", "g2"))
    with pytest.raises(ValidationError):
        rws_relationship_matrix([a, b])


def test_relationship_reads_quantized_signatures(toy_signatures):
    plain = rws_relationship_matrix(toy_signatures)
    quantized = rws_relationship_matrix([quantize(s, 16) for s in toy_signatures])
    np.testing.assert_allclose(quantized.values, plain.values, atol=1e-3)
    assert plain.context == "shallow-2 aggregate"


def test_cross_dataset_identical_sets(toy_signatures):
    table = cross_dataset_report(toy_signatures, toy_signatures)
    np.testing.assert_allclose(table.column("same_corruption_cosine"), 1.0, rtol=1e-9)
    assert table.column("corruption") == ["gaussian_noise", "impulse_noise", "contrast"]


def test_cross_dataset_name_mismatch(toy_signatures):
    other = [shallow_signature([1.0], "fog"), shallow_signature([2.0], "snow")]
    with pytest.raises(ValidationError):
        cross_dataset_report(toy_signatures, other)


def test_cross_dataset_duplicate_names():
    dup = [shallow_signature([1.0], "fog"), shallow_signature([2.0], "fog")]
    with pytest.raises(ValidationError):
        cross_dataset_report(dup, dup)


def test_cross_dataset_rejects_empty_sets():
    with pytest.raises(ValidationError, match="at least one signature"):
        cross_dataset_report([], [])


# ---------------------------------------------------------
# CSV output
# ---------------------------------------------------------
def test_csv_is_deterministic(tmp_path, toy_signatures):
    report = rws_relationship_matrix(toy_signatures)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    report.write_csv(str(a))
    rws_relationship_matrix(toy_signatures).write_csv(str(b))
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().split("\n")
    assert lines[0] == ",gaussian_noise,impulse_noise,contrast"
    assert lines[1].startswith("gaussian_noise,1")
    assert "\r" not in a.read_text()


# ---------------------------------------------------------
# PGM and feature maps
# ---------------------------------------------------------
def test_pgm_roundtrip(tmp_path):
    pixels = np.arange(12, dtype=np.uint8).reshape(3, 4) * 20
    path = str(tmp_path / "x.pgm")
    write_pgm(path, pixels)
    assert open(path, "rb").read().startswith(b"P5\n4 3\n255\n")
    np.testing.assert_allclose(read_pgm(path) * 255, pixels, atol=1e-4)


def test_pgm_header_comments(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# made by hand\n2 1\n255\n\x00\xff")
    np.testing.assert_allclose(read_pgm(str(path)), [[0.0, 1.0]])


@pytest.mark.parametrize("data", [b"P2\n1 1\n255\n\x00", b"P5\n2 2\n255\n\x00", b"P5\n1 1\n65535\n\x00\x00"])
def test_pgm_rejects_bad_files(tmp_path, data):
    path = tmp_path / "bad.pgm"
    path.write_bytes(data)
    with pytest.raises(FormatError):
        read_pgm(str(path))


def test_normalize_map():
    np.testing.assert_array_equal(normalize_map(np.array([[0.0, 0.5, 1.0]])), [[0, 128, 255]])
    assert not np.any(normalize_map(np.full((2, 2), 3.0)))


@pytest.fixture
def conv_model():
    return DeskNet.initialize(NetSpec.default("convnet", input_hw=(12, 12)), 0).to_checkpoint()


def test_zero_image_gives_zero_maps(tmp_path, conv_model):
    paths = feature_map_dump(conv_model, np.zeros((12, 12), np.float32), ["conv1"], str(tmp_path))
    assert [os.path.basename(p) for p in paths] == [f"conv1_{c}.pgm" for c in range(8)]
    for p in paths:
        assert not np.any(read_pgm(p))


def test_feature_dump_is_deterministic(tmp_path, conv_model):
    image = np.random.default_rng(1).random((12, 12)).astype(np.float32)
    first = feature_map_dump(conv_model, image, ["conv1", "conv2"], str(tmp_path / "a"))
    second = feature_map_dump(conv_model, image, ["conv1", "conv2"], str(tmp_path / "b"))
    assert len(first) == 8 + 16
    for p, q in zip(first, second):
        assert open(p, "rb").read() == open(q, "rb").read()


def test_feature_dump_rejects_dense_layer(tmp_path, conv_model):
    with pytest.raises(ValidationError):
        feature_map_dump(conv_model, np.zeros((12, 12), np.float32), ["fc1"], str(tmp_path))


def test_patch_on_second_group_leaves_first_group_maps_untouched(tmp_path, conv_model):
    rng = np.random.default_rng(5)
    tensors = {
        name: rng.standard_normal(arr.shape).astype(np.float32)
        for name, arr in conv_model.tensors.items()
        if name.startswith("conv2.")
    }
    meta = {
        "corruption": "contrast",
        "mode": "vector",
        "layers_kept": "1",
        "quant_bits": "0",
        "source_fingerprint": "src",
    }
    sig = SignatureFile(tensors, meta, ("conv2",))
    patched = patch(conv_model, PatchRecipe.for_target(conv_model, [(sig, 1.0)]))
    image = np.random.default_rng(2).random((12, 12)).astype(np.float32)
    std_paths = feature_map_dump(conv_model, image, ["conv1", "conv2"], str(tmp_path / "std"))
    patched_paths = feature_map_dump(patched, image, ["conv1", "conv2"], str(tmp_path / "patched"))
    same = [open(p, "rb").read() == open(q, "rb").read() for p, q in zip(std_paths, patched_paths)]
    assert all(same[:8])
    assert not all(same[8:])


# ---------------------------------------------------------
# Transfer
# ---------------------------------------------------------
def test_transfer_gain_of_standard_against_itself(tiny_models, tiny_test):
    _, std, robust = tiny_models
    ctx = EvalContext(tiny_test, ("gaussian_noise", "contrast"), 3)
    report = transfer_gain_matrix({"standard": std, "gaussian_noise": robust}, std, ctx)
    np.testing.assert_array_equal(report.values[0], 0.0)
    assert report.col_labels == ("gaussian_noise", "contrast")
    assert report.context == "transfer:severity-3"
