"""
analyze_step.py - structure of the extracted signatures, and transfer of
dataset-A signatures onto the dataset-B standard model.
"""
import logging
from typing import Any, Dict, Optional

import numpy as np

from analyzer import (
    ReportTable,
    cross_dataset_report,
    diversity,
    layer_norm_profile,
    per_layer_cosine,
    rws_relationship_matrix,
    transfer_gain_matrix,
)
from checkpoint_store import read_checkpoint
from pipeline_steps.common import (
    config_of,
    eval_context,
    layout_of,
    load_models,
    load_signatures,
    pipeline_step,
    points,
    require,
)
from pipeline_steps.evaluate_step import patched_with

logger = logging.getLogger(__name__)


def _pair_cosine(report, a: str, b: str) -> Optional[float]:
    labels = list(report.row_labels)
    if a not in labels or b not in labels:
        return None
    return float(report.values[labels.index(a), labels.index(b)])


def _gain(report, model: str, tested_on: str) -> Optional[float]:
    if model not in report.row_labels or tested_on not in report.col_labels:
        return None
    return float(report.values[report.row_labels.index(model), report.col_labels.index(tested_on)])


@pipeline_step
def analyze_step(inp: Dict[str, Any]) -> Dict[str, Any]:
    """
    Input: {"init_model", "std_a", "robust_a", "signatures"}
    Output: {"success": true, "outputs": {"analysis": {name: csv}}, "metrics": {structure checks}}
    """
    config, layout = config_of(inp), layout_of(inp)
    init_path, std_path, robust_paths, families = require(inp, "init_model", "std_a", "robust_a", "signatures")
    init, std = read_checkpoint(init_path), read_checkpoint(std_path)
    full_a = load_signatures(families["full_a"], config.kinds)
    full_b = load_signatures(families["full_b"], config.kinds)
    shallow = load_signatures(families["shallow"], config.kinds)
    paths: Dict[str, str] = {}

    norms = layer_norm_profile(full_a, std, init)
    paths["norms"] = layout.report("norms.csv")
    norms.write_csv(paths["norms"])

    groups = std.layer_order
    per_layer = {}
    for g in groups:
        per_layer[g] = per_layer_cosine(full_a, g)
        paths[f"layer_cosine_{g}"] = layout.report(f"layer_cosine_{g}.csv")
        per_layer[g].write_csv(paths[f"layer_cosine_{g}"])

    relationship = rws_relationship_matrix(shallow)
    paths["relationship"] = layout.report("relationship.csv")
    relationship.write_csv(paths["relationship"])

    cross = cross_dataset_report(full_a, full_b)
    paths["cross_dataset"] = layout.report("cross_dataset.csv")
    cross.write_csv(paths["cross_dataset"])

    gain = transfer_gain_matrix(load_models(robust_paths), std, eval_context(config, config.dataset_a))
    paths["transfer_gain"] = layout.report("transfer_gain.csv")
    gain.write_csv(paths["transfer_gain"])

    half = len(groups) // 2
    shares = norms.column("cum_energy_share")
    near = _pair_cosine(relationship, "gaussian_noise", "impulse_noise")
    far = _pair_cosine(relationship, "gaussian_noise", "contrast")
    diagonal = [_gain(gain, k, k) for k in gain.row_labels]
    to_impulse = _gain(gain, "gaussian_noise", "impulse_noise")
    to_contrast = _gain(gain, "gaussian_noise", "contrast")
    same = np.array(cross.column("same_corruption_cosine"))
    other = np.array(cross.column("cross_corruption_mean"))
    metrics = {
        "shallow_half_energy_share": float(shares[half - 1]),
        "diversity_by_group": {g: diversity(r) for g, r in per_layer.items()},
        "noise_pair_cosine": near,
        "noise_contrast_cosine": far,
        "transfer_diagonal": {k: d for k, d in zip(gain.row_labels, diagonal)},
        "checks": {
            "shallow_energy_majority": bool(shares[half - 1] > 0.5),
            "shallow_more_diverse": bool(diversity(per_layer[groups[0]]) >= diversity(per_layer[groups[-1]])),
            "noise_kinds_closer": None if near is None or far is None else bool(near > far),
            "cross_dataset_consistent": bool(np.all(same > other)),
            "transfer_diagonal_positive": all(d is not None and d > 0 for d in diagonal),
            "noise_transfer_closer": None if to_impulse is None or to_contrast is None else bool(to_impulse > to_contrast),
        },
    }
    logger.info("structure checks: %s", metrics["checks"])
    return {"success": True, "outputs": {"analysis": paths}, "metrics": metrics}


@pipeline_step
def transfer_step(inp: Dict[str, Any]) -> Dict[str, Any]:
    """
    Input: {"std_b", "signatures"}
    Output: {"success": true, "outputs": {"transfer": csv}, "metrics": {"mean_gain": points}}
    """
    config, layout = config_of(inp), layout_of(inp)
    std_path, families = require(inp, "std_b", "signatures")
    std_b = read_checkpoint(std_path)
    sigs = load_signatures(families["shallow"], config.kinds)
    ctx = eval_context(config, config.dataset_b)
    rows = []
    for sig in sigs:
        before = ctx.accuracy(std_b, sig.corruption)
        after = ctx.accuracy(patched_with(std_b, sig), sig.corruption)
        rows.append((sig.corruption, before, after, after - before))
    table = ReportTable(("corruption", "standard", "patched", "gain"), tuple(rows))
    path = layout.report("transfer.csv")
    table.write_csv(path)
    mean_gain = float(np.mean([r[3] for r in rows]))
    logger.info("transfer onto %s: mean RA gain %.2f points", config.dataset_b, 100.0 * mean_gain)
    return {
        "success": True,
        "outputs": {"transfer": path},
        "metrics": {"mean_gain": points(mean_gain), "ta_standard_b": points(ctx.accuracy(std_b))},
    }
