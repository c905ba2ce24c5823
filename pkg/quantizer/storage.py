"""
quantizer/storage.py - storage accounting for standard model + signatures.
"""
from dataclasses import dataclass
from typing import List, Sequence

from checkpoint_store import Checkpoint, SignatureFile, storage_bytes
from errors import ValidationError
from quantizer.linear import dequantize, quantize


@dataclass(frozen=True)
class StorageRow:
    configuration: str
    bytes: int
    ratio: float


def storage_report(std: Checkpoint, sigs: Sequence[SignatureFile]) -> List[StorageRow]:
    base = storage_bytes(std)
    if base == 0:
        raise ValidationError("standard model holds no weights; storage ratios are undefined")
    real = [dequantize(s) if s.quant_bits else s for s in sigs]
    n = len(real)

    def row(name: str, total: int) -> StorageRow:
        return StorageRow(name, total, total / base)

    rows = [row("standard", base)]
    rows.append(row(f"standard + {n} signatures (float32)", base + sum(storage_bytes(s) for s in real)))
    for bits in (16, 8):
        total = base + sum(storage_bytes(quantize(s, bits)) for s in real)
        rows.append(row(f"standard + {n} signatures ({bits}-bit)", total))
    rows.append(row(f"full-copy ensemble (standard + {n} models)", base * (1 + n)))
    return rows
