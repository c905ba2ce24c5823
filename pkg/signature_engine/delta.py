"""
signature_engine/delta.py - per-layer-group weight differences.
"""
from dataclasses import dataclass
from typing import Dict, Iterable, Optional

from checkpoint_store import Checkpoint
from tensor_core import FlatVector


@dataclass(frozen=True)
class WeightDelta:
    groups: Dict[str, FlatVector]
    arch_fingerprint: str

    def vector(self, groups: Optional[Iterable[str]] = None) -> FlatVector:
        names = list(self.groups) if groups is None else list(groups)
        return FlatVector.concat(self.groups[g] for g in names)


def delta(a: Checkpoint, b: Checkpoint) -> WeightDelta:
    """a - b, flattened per layer group in declared order."""
    a.require_compatible(b)
    groups = {}
    for g in a.layer_order:
        va, vb = a.flatten_group(g), b.flatten_group(g)
        groups[g] = va.with_values(va.values - vb.values)
    return WeightDelta(groups, a.arch_fingerprint)
