import numpy as np
import pytest

from checkpoint_store import SCALE_SUFFIX, Checkpoint, SignatureFile, storage_bytes
from errors import FormatError, QuantizationError, ValidationError
from quantizer import (
    dequantize,
    dequantize_array,
    q_max,
    quantize,
    quantize_array,
    quantize_checkpoint,
    round_half_away,
    storage_report,
)
from tests.conftest import toy_checkpoint

SIG_META = {
    "corruption": "gaussian_noise",
    "mode": "vector",
    "layers_kept": "1",
    "quant_bits": "0",
    "source_fingerprint": "abc",
}


def single_tensor_sig(values) -> SignatureFile:
    return SignatureFile({"a.w": np.asarray(values, np.float32)}, dict(SIG_META), ("a",))


def roundtrip_bound(x: np.ndarray, bits: int) -> None:
    """Every element within s/2 + spacing(float32(|x|)) of the original.

    The spacing term is one float32 ulp at the element's magnitude: the
    dequantized value q*s is stored as float32, which at 16 bits can push the
    error a hair past s/2.
    """
    q, s = quantize_array(x, bits)
    back = dequantize_array(q, s)
    assert np.all(np.abs(q.astype(np.int64)) <= q_max(bits))
    slack = np.float64(s) / 2 + np.spacing(np.abs(x).astype(np.float32)).astype(np.float64)
    assert np.all(np.abs(back.astype(np.float64) - x.astype(np.float64)) <= slack)


def test_hand_example_8bit():
    q = quantize(single_tensor_sig([-1.0, 0.5, 1.0]), 8)
    np.testing.assert_array_equal(q.tensors["a.w"], [-127, 64, 127])
    assert q.tensors["a.w"].dtype == np.int8
    assert q.tensors["a.w" + SCALE_SUFFIX][0] == np.float32(1.0 / 127)
    assert q.quant_bits == 8
    assert q.metadata["quant_scheme"] == "symmetric-per-tensor"


def test_round_half_away_from_zero():
    np.testing.assert_array_equal(round_half_away(np.array([0.5, 1.5, -0.5, -2.5, 2.4])), [1, 2, -1, -3, 2])


def test_all_zero_tensor():
    q = quantize(single_tensor_sig([0.0, 0.0, 0.0]), 16)
    assert q.tensors["a.w" + SCALE_SUFFIX][0] == 0.0
    assert not np.any(q.tensors["a.w"])
    assert not np.any(dequantize(q).tensors["a.w"])


@pytest.mark.parametrize("bits", [8, 16])
def test_roundtrip_bound_on_seeded_tensors(bits):
    rng = np.random.default_rng(bits)
    for i in range(100):
        shape = tuple(int(d) for d in rng.integers(1, 30, size=2))
        x = (rng.standard_normal(shape) * 10.0 ** rng.uniform(-4, 2)).astype(np.float32)
        roundtrip_bound(x, bits)


def test_roundtrip_bound_10k_16bit():
    x = np.random.default_rng(99).standard_normal(10_000).astype(np.float32)
    roundtrip_bound(x, 16)


def test_scale_equivariance():
    x = np.random.default_rng(5).standard_normal(64).astype(np.float32)
    q1, s1 = quantize_array(x, 8)
    q2, s2 = quantize_array(2 * x, 8)
    assert s2 == 2 * s1
    np.testing.assert_array_equal(q1, q2)


def test_double_quantization_refused():
    q = quantize(single_tensor_sig([1.0, 2.0]), 8)
    with pytest.raises(QuantizationError):
        quantize(q, 16)


def test_dequantizing_unquantized_refused():
    with pytest.raises(QuantizationError):
        dequantize(single_tensor_sig([1.0]))


def test_non_finite_values_refused():
    with pytest.raises(ValidationError):
        quantize(single_tensor_sig([1.0, np.inf]), 8)


def test_missing_scale_companion_is_format_error():
    q = quantize(single_tensor_sig([1.0, 2.0]), 8)
    # Bypass SignatureFile validation to model a damaged file.
    tensors = {"a.w": q.tensors["a.w"]}
    damaged = SignatureFile.__new__(SignatureFile)
    object.__setattr__(damaged, "tensors", tensors)
    object.__setattr__(damaged, "metadata", dict(q.metadata))
    object.__setattr__(damaged, "layer_order", ("a",))
    with pytest.raises(FormatError):
        dequantize(damaged)


def test_dequantize_restores_float_signature():
    sig = single_tensor_sig(np.linspace(-1, 1, 11))
    back = dequantize(quantize(sig, 16))
    assert back.quant_bits == 0
    assert "quant_scheme" not in back.metadata
    assert list(back.tensors) == ["a.w"]
    assert back.tensors["a.w"].dtype == np.float32


def test_storage_bytes_of_quantized_tensor():
    sig = single_tensor_sig(np.ones((10, 10)))
    assert storage_bytes(sig) == 400
    assert storage_bytes(quantize(sig, 8)) == 104


def test_full_copy_ensemble_is_twenty_times():
    std = toy_checkpoint(0)
    sigs = [single_tensor_sig([0.1 * i, 1.0]) for i in range(19)]
    rows = storage_report(std, sigs)
    ensemble = rows[-1]
    assert ensemble.ratio == 20.0
    assert ensemble.bytes == 20 * storage_bytes(std)
    assert rows[0].ratio == 1.0


def test_storage_report_rejects_weightless_standard():
    empty = Checkpoint({}, {}, ("a",))
    with pytest.raises(ValidationError, match="no weights"):
        storage_report(empty, [single_tensor_sig([1.0, 2.0])])


def test_shallow_8bit_desk_byte_count():
    # convnet conv1(1->8,3x3) + conv2(8->16,3x3) kept, 8-bit, one float32 scale per tensor
    from desk_trainer import DeskNet, NetSpec
    from signature_engine import extract_rws

    spec = NetSpec.default("convnet")
    init = DeskNet.initialize(spec, 0).to_checkpoint()
    std = DeskNet.initialize(spec, 1).to_checkpoint()
    robust = DeskNet.initialize(spec, 2).to_checkpoint(corruption="contrast")
    sig = extract_rws(std, init, robust, "vector", 2)
    conv_params = (8 * 1 * 9 + 8) + (16 * 8 * 9 + 16)
    expected = storage_bytes(std) + conv_params * 1 + 4 * 4
    rows = {r.configuration: r for r in storage_report(std, [sig])}
    assert rows["standard + 1 signatures (8-bit)"].bytes == expected
    assert rows["standard + 1 signatures (float32)"].bytes == storage_bytes(std) + 4 * conv_params


def test_quantize_checkpoint_keeps_dtypes_and_degrades_gracefully():
    ckpt = toy_checkpoint(3)
    fake = quantize_checkpoint(ckpt, 8)
    assert fake.metadata["weight_quant_bits"] == "8"
    for name, arr in ckpt.tensors.items():
        assert fake.tensors[name].dtype == arr.dtype
        s = np.max(np.abs(arr)) / 127
        assert np.max(np.abs(fake.tensors[name] - arr)) <= s / 2 + 1e-6


def test_quantize_array_rejects_bad_bits():
    with pytest.raises(ValidationError):
        quantize_array(np.ones(3, np.float32), 4)


def test_quantized_file_without_companion_is_invalid():
    with pytest.raises(ValidationError):
        SignatureFile({"a.w": np.ones(2, np.int8)}, dict(SIG_META, quant_bits="8"), ("a",))


def test_checkpoint_kept_separate_from_signature_type():
    assert not isinstance(toy_checkpoint(0), SignatureFile)
    assert isinstance(single_tensor_sig([1.0]), Checkpoint)
