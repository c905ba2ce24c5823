"""
evaluate_step.py - robustness of patched models on dataset A.

Writes per_corruption.csv, summary.csv, storage.csv, alpha_sweep.csv,
composition.csv and layer_sweep.csv under <outdir>/reports/.
"""
import logging
from typing import Any, Dict, List

import numpy as np

from analyzer import ReportTable
from checkpoint_store import Checkpoint, SignatureFile, read_checkpoint, storage_bytes
from desk_trainer import EvalContext
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
from quantizer import quantize_checkpoint, storage_report
from signature_engine import PatchRecipe, layer_count_sweep, patch, rescale_sweep

logger = logging.getLogger(__name__)

PATCH_FAMILIES = (
    ("rws_full", "full_a"),
    ("rws_shallow", "shallow"),
    ("rws_shallow_16bit", "shallow_16bit"),
    ("rws_shallow_8bit", "shallow_8bit"),
)
GAIN_MARGIN = 5.0


def patched_with(std: Checkpoint, sig: SignatureFile, alpha: float = 1.0) -> Checkpoint:
    return patch(std, PatchRecipe.for_target(std, [(sig, alpha)]))


def _alpha_sweep(std, sigs, alphas, ctx: EvalContext, severities) -> ReportTable:
    rows = []
    contexts = {s: ctx if s == ctx.severity else EvalContext(ctx.test_set, ctx.kinds, s) for s in severities}
    for sig in sigs:
        for alpha, model in zip(alphas, rescale_sweep(std, sig, alphas)):
            ta = ctx.accuracy(model)
            for sev in severities:
                rows.append((sig.corruption, sev, alpha, ta, contexts[sev].accuracy(model, sig.corruption)))
    return ReportTable(("corruption", "severity", "alpha", "ta", "ra"), tuple(rows))


def best_alphas(sweep: ReportTable) -> Dict[str, Dict[int, float]]:
    """RA-maximizing alpha per corruption and severity; ties go to the smaller alpha."""
    best: Dict[str, Dict[int, tuple]] = {}
    for kind, sev, alpha, _, ra in sweep.rows:
        current = best.setdefault(kind, {}).get(sev)
        if current is None or ra > current[1] or (ra == current[1] and alpha < current[0]):
            best[kind][sev] = (alpha, ra)
    return {kind: {sev: a for sev, (a, _) in sorted(per.items())} for kind, per in best.items()}


def _non_decreasing(values: List[float]) -> bool:
    return all(x <= y for x, y in zip(values, values[1:]))


def _composition(std, by_kind: Dict[str, SignatureFile], pair, alphas, ctx: EvalContext) -> ReportTable:
    first, second = pair
    rows = []
    for a in alphas:
        for b in alphas:
            recipe = PatchRecipe.for_target(std, [(by_kind[first], a), (by_kind[second], b)])
            model = patch(std, recipe)
            rows.append((a, b, ctx.accuracy(model), ctx.accuracy(model, first), ctx.accuracy(model, second)))
    return ReportTable(("alpha_" + first, "alpha_" + second, "ta", "ra_" + first, "ra_" + second), tuple(rows))


def _layer_sweep(std, init, robust: Dict[str, Checkpoint], config, ctx: EvalContext) -> ReportTable:
    per_k: Dict[int, List] = {}
    for kind in config.kinds:
        for sig in layer_count_sweep(std, init, robust[kind], config.mode, corruption=kind):
            per_k.setdefault(sig.layers_kept, []).append((storage_bytes(sig), ctx.accuracy(patched_with(std, sig), kind)))
    rows = tuple(
        (k, int(sum(b for b, _ in vals)), float(np.mean([ra for _, ra in vals])))
        for k, vals in sorted(per_k.items())
    )
    return ReportTable(("layers_kept", "signature_bytes", "ra"), rows)


@pipeline_step
def evaluate_patches_step(inp: Dict[str, Any]) -> Dict[str, Any]:
    """
    Input: {"init_model", "std_a", "robust_a", "signatures", optional "augmented_a"}
    Output: {"success": true, "outputs": {"reports": {...}}, "metrics": {...}}
    """
    config, layout = config_of(inp), layout_of(inp)
    init_path, std_path, robust_paths, families = require(inp, "init_model", "std_a", "robust_a", "signatures")
    init, std = read_checkpoint(init_path), read_checkpoint(std_path)
    robust = load_models(robust_paths)
    augmented = read_checkpoint(inp["augmented_a"]) if "augmented_a" in inp else None
    sigs = {family: load_signatures(families[family], config.kinds) for _, family in PATCH_FAMILIES}
    ctx = eval_context(config, config.dataset_a)

    ta_std = ctx.accuracy(std)
    columns: Dict[str, List[float]] = {"standard": [], "dedicated": [], "augmented": []}
    ta_patched: Dict[str, List[float]] = {}
    for i, kind in enumerate(config.kinds):
        columns["standard"].append(ctx.accuracy(std, kind))
        columns["dedicated"].append(ctx.accuracy(robust[kind], kind))
        columns["augmented"].append(ctx.accuracy(augmented, kind) if augmented is not None else float("nan"))
        for label, family in PATCH_FAMILIES:
            model = patched_with(std, sigs[family][i])
            columns.setdefault(label, []).append(ctx.accuracy(model, kind))
            ta_patched.setdefault(label, []).append(ctx.accuracy(model))
        logger.info(
            "%s: std %.3f dedicated %.3f patched %.3f",
            kind, columns["standard"][-1], columns["dedicated"][-1], columns["rws_shallow"][-1],
        )
    order = ["standard", "dedicated", "augmented"] + [label for label, _ in PATCH_FAMILIES]
    per_corruption = ReportTable(
        ("corruption", *order),
        tuple((kind, *(columns[c][i] for c in order)) for i, kind in enumerate(config.kinds)),
    )

    base = storage_bytes(std)
    n = len(config.kinds)
    summary_rows = [
        ("standard", ta_std, float(np.mean(columns["standard"])), ta_std, base),
        ("all_models", ta_std, float(np.mean(columns["dedicated"])), ta_std, base * (1 + n)),
    ]
    if augmented is not None:
        ta_aug = ctx.accuracy(augmented)
        summary_rows.append(("data_augmentation", ta_aug, float(np.mean(columns["augmented"])), ta_aug, base))
    for label, family in PATCH_FAMILIES:
        size = base + sum(storage_bytes(s) for s in sigs[family])
        summary_rows.append((label, ta_std, float(np.mean(columns[label])), float(np.mean(ta_patched[label])), size))
    for bits in (16, 8):
        fake = quantize_checkpoint(std, bits)
        summary_rows.append((f"standard_weights_{bits}bit", ctx.accuracy(fake), ctx.robust_accuracy(fake), ctx.accuracy(fake), base))
    summary = ReportTable(("configuration", "ta", "ra", "ta_patched", "storage_bytes"), tuple(summary_rows))

    storage = ReportTable(
        ("configuration", "bytes", "ratio"),
        tuple((r.configuration, r.bytes, r.ratio) for r in storage_report(std, sigs["shallow"])),
    )
    by_kind = dict(zip(config.kinds, sigs["shallow"]))
    reports = {
        "per_corruption": per_corruption,
        "summary": summary,
        "storage": storage,
        "alpha_sweep": _alpha_sweep(std, sigs["shallow"], config.alphas, ctx, config.sweep_severities),
        "composition": _composition(std, by_kind, config.composition_pair, config.composition_alphas, ctx),
        "layer_sweep": _layer_sweep(std, init, robust, config, ctx),
    }
    paths = {}
    for name, table in reports.items():
        paths[name] = layout.report(f"{name}.csv")
        table.write_csv(paths[name])

    std_ra = np.array(columns["standard"])
    patched_ra = np.array(columns["rws_shallow"])
    dedicated_ra = np.array(columns["dedicated"])
    gap = float(dedicated_ra.mean() - std_ra.mean())
    best = best_alphas(reports["alpha_sweep"])
    metrics = {
        "ta_standard": points(ta_std),
        "per_corruption": {
            kind: {label: points(columns[label][i]) for label in order if label != "augmented" or augmented is not None}
            for i, kind in enumerate(config.kinds)
        },
        "kinds_gaining": int(np.sum(100.0 * (patched_ra - std_ra) >= GAIN_MARGIN)),
        "gap_recovery": float((patched_ra.mean() - std_ra.mean()) / gap) if gap > 0 else None,
        "quantization_loss_16bit": points(patched_ra.mean() - np.mean(columns["rws_shallow_16bit"])),
        "quantization_loss_8bit": points(patched_ra.mean() - np.mean(columns["rws_shallow_8bit"])),
        "best_alpha": {kind: {str(sev): a for sev, a in per.items()} for kind, per in best.items()},
        "best_alpha_non_decreasing": all(_non_decreasing(list(per.values())) for per in best.values()),
    }
    return {"success": True, "outputs": {"reports": paths}, "metrics": metrics}
