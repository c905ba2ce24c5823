"""
quantizer/linear.py - symmetric per-tensor linear quantization.

scale s = max|x| / q_max with q_max = 2^(b-1) - 1, payload
q = clamp(round_half_away(x / s), -q_max, q_max), dequantized value q * s.
"""
import logging
from typing import Tuple

import numpy as np

from checkpoint_store import SCALE_SUFFIX, Checkpoint, SignatureFile
from errors import FormatError, QuantizationError, ValidationError

logger = logging.getLogger(__name__)

PAYLOAD_DTYPES = {8: np.int8, 16: np.int16}
SCHEME = "symmetric-per-tensor"
_TINY = np.finfo(np.float32).smallest_subnormal


def q_max(bits: int) -> int:
    return 2 ** (bits - 1) - 1


def round_half_away(values: np.ndarray) -> np.ndarray:
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def quantize_array(x: np.ndarray, bits: int) -> Tuple[np.ndarray, np.float32]:
    if bits not in PAYLOAD_DTYPES:
        raise ValidationError(f"bits must be 8 or 16, got {bits}")
    values = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValidationError("cannot quantize non-finite values")
    peak = float(np.max(np.abs(values)))
    dt = PAYLOAD_DTYPES[bits]
    if peak == 0.0:
        return np.zeros(values.shape, dtype=dt), np.float32(0.0)
    qm = q_max(bits)
    scale = max(np.float32(peak / qm), _TINY)
    q = np.clip(round_half_away(values / np.float64(scale)), -qm, qm)
    return q.astype(dt), np.float32(scale)


def dequantize_array(q: np.ndarray, scale: np.float32) -> np.ndarray:
    return (q.astype(np.float64) * np.float64(scale)).astype(np.float32)


def quantize(sig: SignatureFile, bits: int) -> SignatureFile:
    if sig.quant_bits:
        raise QuantizationError(f"{sig.corruption} signature is already quantized to {sig.quant_bits} bits")
    tensors = {}
    for name, arr in sig.tensors.items():
        payload, scale = quantize_array(arr, bits)
        tensors[name] = payload
        tensors[name + SCALE_SUFFIX] = np.array([scale], dtype=np.float32)
    meta = dict(sig.metadata, quant_bits=str(bits), quant_scheme=SCHEME)
    logger.debug("quantized %s signature to %d bits", sig.corruption, bits)
    return SignatureFile(tensors, meta, sig.layer_order)


def dequantize(sig: SignatureFile) -> SignatureFile:
    if not sig.quant_bits:
        raise QuantizationError(f"{sig.corruption} signature is not quantized")
    tensors = {}
    for name, arr in sig.tensors.items():
        if name.endswith(SCALE_SUFFIX):
            continue
        scale = sig.tensors.get(name + SCALE_SUFFIX)
        if scale is None:
            raise FormatError(f"tensor {name!r} has no {SCALE_SUFFIX} companion")
        tensors[name] = dequantize_array(arr, scale.reshape(-1)[0])
    meta = {k: v for k, v in sig.metadata.items() if k != "quant_scheme"}
    meta["quant_bits"] = "0"
    return SignatureFile(tensors, meta, sig.layer_order)


def quantize_checkpoint(ckpt: Checkpoint, bits: int) -> Checkpoint:
    """Fake-quantize every weight of a full model (quantize, then dequantize)."""
    tensors = {}
    for name, arr in ckpt.tensors.items():
        payload, scale = quantize_array(arr, bits)
        tensors[name] = dequantize_array(payload, scale).astype(arr.dtype)
    return ckpt.with_tensors(tensors, weight_quant_bits=str(bits))
