"""
analyzer/norms.py - where signature magnitude lives across layers.

"Norm energy" of the first k groups is sum_{g<=k} |RWS_g| / sum_g |RWS_g|
(sum of norms); the squared-norm variant is emitted alongside.
"""
from typing import Optional, Sequence

import numpy as np

from analyzer.common import real_valued, require_same_source
from analyzer.tables import ReportTable
from checkpoint_store import Checkpoint, SignatureFile
from errors import FingerprintMismatchError, ValidationError
from signature_engine import delta
from tensor_core import l2_norm

PROFILE_HEADER = (
    "group",
    "mean_norm",
    "ratio_to_std",
    "ratio_to_base",
    "cum_energy_share",
    "cum_energy_share_squared",
)


def _cumulative_share(values: np.ndarray) -> np.ndarray:
    total = values.sum()
    if total == 0:
        return np.ones_like(values)
    share = np.minimum(np.cumsum(values) / total, 1.0)
    share[-1] = 1.0
    return share


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    return np.divide(num, den, out=np.full_like(num, np.nan), where=den > 0)


def layer_norm_profile(
    sigs: Sequence[SignatureFile],
    std: Checkpoint,
    init: Optional[Checkpoint] = None,
) -> ReportTable:
    """Per group: mean |RWS_g| normalized by |theta_std,g| (and |v_base,g| when init is given)."""
    require_same_source(sigs)
    sigs = real_valued(sigs)
    for sig in sigs:
        if sig.target_arch is not None and sig.target_arch != std.arch_fingerprint:
            raise FingerprintMismatchError(std.arch_fingerprint, sig.target_arch, f"{sig.corruption} signature")
        if sig.layer_order != std.layer_order:
            raise ValidationError(
                f"norm profile needs signatures over all {len(std.layer_order)} groups; "
                f"{sig.corruption} keeps {sig.layers_kept}"
            )
    base = delta(std, init) if init is not None else None

    groups = list(std.layer_order)
    norms = np.array([[l2_norm(s.flatten_group(g)) for g in groups] for s in sigs])
    mean_norm = norms.mean(axis=0)
    std_norm = np.array([l2_norm(std.flatten_group(g)) for g in groups])
    ratio_std = _safe_ratio(mean_norm, std_norm)
    if base is not None:
        ratio_base = _safe_ratio(mean_norm, np.array([l2_norm(base.groups[g]) for g in groups]))
    else:
        ratio_base = np.full(len(groups), np.nan)
    share = _cumulative_share(mean_norm)
    share_sq = _cumulative_share(mean_norm ** 2)
    rows = tuple(
        (g, float(mean_norm[j]), float(ratio_std[j]), float(ratio_base[j]), float(share[j]), float(share_sq[j]))
        for j, g in enumerate(groups)
    )
    return ReportTable(PROFILE_HEADER, rows)
