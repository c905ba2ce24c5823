"""
desk_trainer/gradcheck.py - analytic vs central-difference gradients.

Runs in float64. A sampled parameter is skipped when either perturbation
changes a ReLU mask or a pooling argmax at every step of the shrink
schedule, so kinks never enter the estimate. Sampling walks a seeded
permutation of each group until enough parameters have been checked or
the group is exhausted.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from desk_trainer.network import DeskNet, NetSpec
from desk_trainer.rng import make_rng
from errors import ValidationError

logger = logging.getLogger(__name__)

SHRINK = (1.0, 0.1, 0.01)

GradientHook = Callable[[Dict[str, np.ndarray]], Dict[str, np.ndarray]]


@dataclass
class GradCheckReport:
    max_rel_error: float = 0.0
    checked: Dict[str, int] = field(default_factory=dict)
    skipped: Dict[str, int] = field(default_factory=dict)


def _same_pattern(a, b) -> bool:
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def _central_difference(net, param, idx, x, y, step, base_pattern) -> Optional[float]:
    orig = param[idx]
    for factor in SHRINK:
        h = step * factor
        param[idx] = orig + h
        plus, pattern_p = net.loss_and_pattern(x, y)
        param[idx] = orig - h
        minus, pattern_m = net.loss_and_pattern(x, y)
        param[idx] = orig
        if _same_pattern(base_pattern, pattern_p) and _same_pattern(base_pattern, pattern_m):
            return (plus - minus) / (2 * h)
    return None


def grad_check(
    spec: NetSpec,
    seed: int,
    batch: int = 3,
    samples_per_group: int = 20,
    step: float = 1e-3,
    gradient_hook: Optional[GradientHook] = None,
) -> GradCheckReport:
    """Max relative error |a - n| / max(|a| + |n|, 1e-8) over sampled parameters.

    Raises ValidationError when a group ends with fewer checked parameters
    than min(samples_per_group, group size).
    """
    net = DeskNet.initialize(spec, seed, dtype=np.float64)
    rng = make_rng(seed, "gradcheck")
    x = rng.random((batch, *spec.input_hw))
    y = rng.integers(spec.num_classes, size=batch)
    _, grads = net.loss_and_grads(x, y)
    if gradient_hook is not None:
        grads = gradient_hook(grads)
    _, base_pattern = net.loss_and_pattern(x, y)

    report = GradCheckReport()
    for group in spec.layer_order:
        names = [n for n in net.params if n.startswith(group + ".")]
        sizes = np.cumsum([net.params[n].size for n in names])
        checked = skipped = 0
        for flat in rng.permutation(int(sizes[-1])):
            if checked >= samples_per_group:
                break
            which = int(np.searchsorted(sizes, flat, side="right"))
            name = names[which]
            idx = int(flat - (sizes[which - 1] if which else 0))
            numeric = _central_difference(net, net.params[name].reshape(-1), idx, x, y, step, base_pattern)
            if numeric is None:
                skipped += 1
                continue
            analytic = float(grads[name].reshape(-1)[idx])
            err = abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1e-8)
            report.max_rel_error = max(report.max_rel_error, err)
            checked += 1
        report.checked[group] = checked
        report.skipped[group] = skipped
        logger.debug("%s: %d checked, %d skipped at kinks", group, checked, skipped)
        if checked < min(samples_per_group, int(sizes[-1])):
            raise ValidationError(
                f"gradient check covered {checked} parameters of {group!r}; "
                f"{skipped} sat at kinks, {min(samples_per_group, int(sizes[-1]))} required"
            )
    return report
