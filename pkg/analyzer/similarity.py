"""
analyzer/similarity.py - cosine structure among signatures.
"""
from typing import Dict, List, Sequence

import numpy as np

from analyzer.common import real_valued, require_same_coverage
from analyzer.tables import ReportTable, SimilarityReport
from checkpoint_store import SignatureFile
from errors import ValidationError
from tensor_core import FlatVector, cosine


def cosine_matrix(vectors: Sequence[FlatVector]) -> np.ndarray:
    """Symmetric by construction: the upper triangle is mirrored."""
    n = len(vectors)
    out = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i, n):
            out[i, j] = out[j, i] = cosine(vectors[i], vectors[j])
    return out


def per_layer_cosine(sigs: Sequence[SignatureFile], layer: str) -> SimilarityReport:
    for sig in sigs:
        if layer not in sig.layer_order:
            raise ValidationError(f"layer {layer!r} absent from {sig.corruption} signature")
    vectors = [s.flatten_group(layer) for s in real_valued(sigs)]
    labels = tuple(s.corruption for s in sigs)
    return SimilarityReport(labels, labels, cosine_matrix(vectors), f"layer:{layer}")


def rws_relationship_matrix(sigs: Sequence[SignatureFile]) -> SimilarityReport:
    if len(sigs) < 2:
        raise ValidationError("a relationship matrix needs at least two signatures")
    require_same_coverage(sigs)
    vectors = [s.flatten() for s in real_valued(sigs)]
    labels = tuple(s.corruption for s in sigs)
    return SimilarityReport(labels, labels, cosine_matrix(vectors), f"shallow-{sigs[0].layers_kept} aggregate")


def diversity(report: SimilarityReport) -> float:
    """1 - mean off-diagonal cosine."""
    return 1.0 - report.off_diagonal_mean()


def _by_corruption(sigs: Sequence[SignatureFile], side: str) -> Dict[str, SignatureFile]:
    out: Dict[str, SignatureFile] = {}
    for sig in sigs:
        if sig.corruption in out:
            raise ValidationError(f"duplicate corruption {sig.corruption!r} in set {side}")
        out[sig.corruption] = sig
    return out


def cross_dataset_report(sigs_a: Sequence[SignatureFile], sigs_b: Sequence[SignatureFile]) -> ReportTable:
    """Same-corruption cosine vs mean cosine to every other corruption of set B."""
    a, b = _by_corruption(real_valued(sigs_a), "a"), _by_corruption(real_valued(sigs_b), "b")
    if set(a) != set(b):
        raise ValidationError(f"corruption names differ: {sorted(set(a) ^ set(b))}")
    require_same_coverage(list(a.values()) + list(b.values()))
    arch = {s.target_arch for s in list(a.values()) + list(b.values())}
    if len(arch) > 1:
        raise ValidationError("signature sets come from different architectures")

    names: List[str] = [s.corruption for s in sigs_a]
    vec_a = {n: a[n].flatten() for n in names}
    vec_b = {n: b[n].flatten() for n in names}
    rows = []
    for name in names:
        same = cosine(vec_a[name], vec_b[name])
        others = [cosine(vec_a[name], vec_b[o]) for o in names if o != name]
        cross = float(np.mean(others)) if others else float("nan")
        rows.append((name, same, cross))
    return ReportTable(("corruption", "same_corruption_cosine", "cross_corruption_mean"), tuple(rows))
