from .linear import (
    dequantize,
    dequantize_array,
    q_max,
    quantize,
    quantize_array,
    quantize_checkpoint,
    round_half_away,
)
from .storage import StorageRow, storage_report

__all__ = [
    "StorageRow",
    "dequantize",
    "dequantize_array",
    "q_max",
    "quantize",
    "quantize_array",
    "quantize_checkpoint",
    "round_half_away",
    "storage_report",
]
