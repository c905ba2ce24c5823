"""
signature_engine/extract.py - robust weight signature extraction.

v_base = std - init, v_c = robust - init, signature = v_c minus its
projection onto v_base, restricted to the shallowest layers.
"""
import logging
from typing import Dict, List, Optional

import numpy as np

from checkpoint_store import PROJECTION_MODES, Checkpoint, SignatureFile, source_fingerprint
from errors import ValidationError
from signature_engine.delta import WeightDelta, delta
from signature_engine.projection import matrix_residual, vector_residual
from tensor_core import FlatVector

logger = logging.getLogger(__name__)

DEFAULT_LAYERS_KEPT = 5


def _segments_to_tensors(vec: FlatVector, values: np.ndarray) -> Dict[str, np.ndarray]:
    out, offset = {}, 0
    for seg in vec.origin:
        out[seg.name] = values[offset:offset + seg.length].astype(np.float32).reshape(seg.shape)
        offset += seg.length
    return out


def _residual_tensors(base: WeightDelta, robust: WeightDelta, mode: str, kept: List[str]) -> Dict[str, np.ndarray]:
    tensors: Dict[str, np.ndarray] = {}
    if mode == "vector":
        for g in kept:
            vb, vc = base.groups[g], robust.groups[g]
            tensors.update(_segments_to_tensors(vc, vector_residual(vc.values, vb.values)))
    elif mode == "global":
        vb, vc = base.vector(), robust.vector()
        whole = vector_residual(vc.values, vb.values)
        everything = _segments_to_tensors(vc, whole)
        for g in kept:
            for seg in robust.groups[g].origin:
                tensors[seg.name] = everything[seg.name]
    else:
        for g in kept:
            vb, vc = base.groups[g].unflatten(), robust.groups[g].unflatten()
            for name in vc:
                tensors[name] = matrix_residual(vc[name], vb[name])
    return tensors


def extract_rws(
    std: Checkpoint,
    init: Checkpoint,
    robust: Checkpoint,
    mode: str = "vector",
    layers_kept: int = DEFAULT_LAYERS_KEPT,
    corruption: Optional[str] = None,
) -> SignatureFile:
    if mode not in PROJECTION_MODES:
        raise ValidationError(f"unknown projection mode {mode!r}; expected one of {PROJECTION_MODES}")
    std.require_compatible(init)
    std.require_compatible(robust)
    n_groups = len(std.layer_order)
    if not 1 <= layers_kept <= n_groups:
        raise ValidationError(f"layers_kept={layers_kept} outside 1..{n_groups}")

    base = delta(std, init)
    robust_dir = delta(robust, init)
    kept = list(std.layer_order[:layers_kept])
    for g in kept:
        if not np.any(base.groups[g].values):
            logger.debug("zero base direction on %s; signature equals the robust direction", g)

    tensors = _residual_tensors(base, robust_dir, mode, kept)
    corruption = corruption or robust.metadata.get("corruption", "unknown")
    metadata = {
        "corruption": corruption,
        "mode": mode,
        "layers_kept": str(layers_kept),
        "quant_bits": "0",
        "source_fingerprint": source_fingerprint(std, init),
        "arch_fingerprint": std.arch_fingerprint,
    }
    logger.info("extracted %s signature (%s mode, %d/%d groups)", corruption, mode, layers_kept, n_groups)
    return SignatureFile(tensors, metadata, tuple(kept))


def layer_count_sweep(
    std: Checkpoint,
    init: Checkpoint,
    robust: Checkpoint,
    mode: str = "vector",
    max_layers: Optional[int] = None,
    corruption: Optional[str] = None,
) -> List[SignatureFile]:
    """One signature per k = 1..max_layers (default: all groups)."""
    max_layers = max_layers or len(std.layer_order)
    return [extract_rws(std, init, robust, mode, k, corruption) for k in range(1, max_layers + 1)]
