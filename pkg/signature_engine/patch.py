"""
signature_engine/patch.py - add scaled signatures to a standard model.

The standard checkpoint is never modified: removing a patch means
discarding the patched checkpoint and reusing the stored one.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from checkpoint_store import SCALE_SUFFIX, Checkpoint, SignatureFile
from errors import ArchitectureMismatchError, FingerprintMismatchError, ValidationError

logger = logging.getLogger(__name__)


def _check_alpha(alpha: float) -> float:
    if not math.isfinite(alpha):
        raise ValidationError(f"non-finite alpha {alpha!r}")
    return float(np.float32(alpha))


@dataclass(frozen=True)
class PatchRecipe:
    entries: Tuple[Tuple[SignatureFile, float], ...]
    target_fingerprint: str

    @classmethod
    def for_target(cls, target: Checkpoint, entries: Iterable[Tuple[SignatureFile, float]]) -> "PatchRecipe":
        recipe = cls(tuple((sig, _check_alpha(a)) for sig, a in entries), target.arch_fingerprint)
        recipe.validate(target)
        return recipe

    def validate(self, target: Checkpoint) -> None:
        if self.target_fingerprint != target.arch_fingerprint:
            raise FingerprintMismatchError(target.arch_fingerprint, self.target_fingerprint, "recipe")
        for sig, alpha in self.entries:
            _check_alpha(alpha)
            if sig.target_arch is not None and sig.target_arch != self.target_fingerprint:
                raise FingerprintMismatchError(self.target_fingerprint, sig.target_arch, f"{sig.corruption} signature")
            for group in sig.layer_order:
                if group not in target.layer_order:
                    raise ArchitectureMismatchError(f"signature group {group!r} not in target")
                names = sig.payload_names(group)
                if names != target.group_names(group):
                    raise ArchitectureMismatchError(f"signature group {group!r} covers {names}, target has {target.group_names(group)}")
                for name in names:
                    if sig.tensors[name].shape != target.tensors[name].shape:
                        raise ArchitectureMismatchError(
                            f"tensor {name!r}: shape {list(sig.tensors[name].shape)} vs {list(target.tensors[name].shape)}"
                        )


def _real_valued(sig: SignatureFile) -> SignatureFile:
    if sig.quant_bits:
        from quantizer import dequantize

        return dequantize(sig)
    return sig


def patch(std: Checkpoint, recipe: PatchRecipe) -> Checkpoint:
    """theta_std + sum_i alpha_i * RWS_i on the groups each signature covers."""
    recipe.validate(std)
    acc: Dict[str, np.ndarray] = {}
    applied: List[str] = []
    for sig, alpha in recipe.entries:
        if alpha == 0.0:
            continue
        sig = _real_valued(sig)
        for name, arr in sig.tensors.items():
            if name.endswith(SCALE_SUFFIX):
                continue
            term = np.float64(alpha) * arr.astype(np.float64)
            acc[name] = term if name not in acc else acc[name] + term
        applied.append(sig.corruption)
    if not acc:
        return std

    tensors = {}
    for name, arr in std.tensors.items():
        if name in acc:
            tensors[name] = (arr.astype(np.float64) + acc[name]).astype(arr.dtype)
        else:
            tensors[name] = arr
    logger.info("patched %d tensors with %s", len(acc), ",".join(applied))
    return std.with_tensors(tensors, patch_corruptions=",".join(applied), patch_count=str(len(applied)))


def rescale_sweep(std: Checkpoint, sig: SignatureFile, alphas: Sequence[float]) -> List[Checkpoint]:
    for a in alphas:
        _check_alpha(a)
    return [patch(std, PatchRecipe.for_target(std, [(sig, a)])) for a in alphas]
