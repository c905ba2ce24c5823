"""
analyzer/common.py - signature access shared by the reports.
"""
from typing import List, Sequence

from checkpoint_store import SignatureFile
from errors import FingerprintMismatchError, ValidationError
from quantizer import dequantize


def real_valued(sigs: Sequence[SignatureFile]) -> List[SignatureFile]:
    return [dequantize(s) if s.quant_bits else s for s in sigs]


def require_same_source(sigs: Sequence[SignatureFile]) -> None:
    if not sigs:
        raise ValidationError("at least one signature is required")
    first = sigs[0].source_fingerprint
    for sig in sigs[1:]:
        if sig.source_fingerprint != first:
            raise FingerprintMismatchError(first, sig.source_fingerprint, f"{sig.corruption} signature")


def require_same_coverage(sigs: Sequence[SignatureFile]) -> None:
    if not sigs:
        raise ValidationError("at least one signature is required")
    first = sigs[0]
    for sig in sigs[1:]:
        if sig.layer_order != first.layer_order or sig.layers_kept != first.layers_kept:
            raise ValidationError(
                f"mismatched layer coverage: {list(first.layer_order)} vs {list(sig.layer_order)}"
            )
