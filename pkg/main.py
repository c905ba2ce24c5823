#!/usr/bin/env python3
"""
main.py - command-line entry point for robust weight signatures.

Extract signatures from standard/robust checkpoint pairs, patch them onto
standard models, quantize them, report on their structure, and run the
desk-scale trainer that produces the checkpoints in the first place.

Exit codes: 0 success, 1 validation error or bad usage, 2 I/O or format error.
"""
import json
import logging
import math
import os
import sys
from typing import List, Optional, Sequence, Tuple

import click

from analyzer import (
    ReportTable,
    cross_dataset_report,
    feature_map_dump,
    layer_norm_profile,
    per_layer_cosine,
    read_pgm,
    rws_relationship_matrix,
    transfer_gain_matrix,
)
from checkpoint_store import (
    PROJECTION_MODES,
    Checkpoint,
    SignatureFile,
    parse_checkpoint,
    read_checkpoint,
    read_signature,
    write_checkpoint,
)
from command_plan import CommandPlan, manifest_beside, manifest_in
from desk_trainer import (
    KINDS,
    CorruptionSpec,
    EvalContext,
    NetSpec,
    TrainConfig,
    evaluate,
    grad_check,
    resolve_dataset,
    train_with_history,
)
from errors import FormatError, ValidationError
from experiments import ExperimentConfig, ReferenceExperiment
from quantizer import dequantize, quantize, storage_report
from signature_engine import DEFAULT_LAYERS_KEPT, PatchRecipe, extract_rws, patch, rescale_sweep
from utils import configure_logging, safe_write_bytes, write_json

logger = logging.getLogger("main")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_FORMAT = 2

REPORT_KINDS = ("norms", "layer-cosine", "relationship", "cross-dataset", "storage", "transfer")
DEFAULT_TEST_SIZE = 1000
DEFAULT_TEST_SEED = 2
DEFAULT_RUN_ROOT = "runs"


# ============================================================================
# FLAG PARSING HELPERS
# ============================================================================
def parse_sig_flag(text: str) -> Tuple[str, float]:
    """'<path>[:alpha]', alpha defaulting to 1.0."""
    path, sep, tail = text.rpartition(":")
    if sep:
        try:
            alpha = float(tail)
        except ValueError:
            return text, 1.0
        if not math.isfinite(alpha):
            raise ValidationError(f"non-finite alpha in --sig={text}")
        return path, alpha
    return text, 1.0


def parse_alphas(text: str) -> List[float]:
    try:
        alphas = [float(a) for a in text.split(",") if a.strip()]
    except ValueError:
        raise ValidationError(f"--alphas must be comma-separated numbers, got {text!r}")
    if not alphas:
        raise ValidationError("--alphas is empty")
    return alphas


def load_recipe(path: str) -> List[Tuple[str, float]]:
    """JSON list of {"path": ..., "alpha": ...}; relative paths resolve against the recipe's directory."""
    with open(path, "r", encoding="utf-8") as f:
        try:
            entries = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}: malformed recipe JSON: {e}")
    if not isinstance(entries, list):
        raise FormatError(f"{path}: recipe must be a JSON list")
    base = os.path.dirname(path)
    out = []
    for entry in entries:
        if not isinstance(entry, dict) or "path" not in entry:
            raise FormatError(f"{path}: every recipe entry needs a 'path'")
        alpha = entry.get("alpha", 1.0)
        if not isinstance(alpha, (int, float)) or isinstance(alpha, bool):
            raise ValidationError(f"{path}: alpha for {entry['path']} is not a number")
        out.append((os.path.join(base, entry["path"]), float(alpha)))
    return out


def parse_init(text: Optional[str], plan: CommandPlan):
    if text is None:
        return None
    if text.startswith("seed:"):
        try:
            return int(text[len("seed:"):])
        except ValueError:
            raise ValidationError(f"--init=seed:N needs an integer, got {text!r}")
    return read_checkpoint(plan.add_input(text))


def dataset_inputs(dataset: str, plan: CommandPlan) -> None:
    if dataset.startswith("idx:"):
        for p in dataset[len("idx:"):].split(","):
            plan.add_input(p)


def load_sigs(paths: Sequence[str], plan: CommandPlan) -> List[SignatureFile]:
    return [read_signature(plan.add_input(p)) for p in paths]


def finish(plan: CommandPlan, manifest_path: str) -> None:
    plan.write_manifest(manifest_path)
    logger.debug("manifest written to %s", manifest_path)


# ============================================================================
# CLI
# ============================================================================
@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--verbose", "-v", is_flag=True, help="Debug-level diagnostics on stderr")
def cli(verbose):
    """Robust weight signatures: extract, patch, quantize, analyze."""
    configure_logging(verbose)


@cli.command()
@click.option("--std", "std_path", required=True, help="Standard checkpoint")
@click.option("--init", "init_path", required=True, help="Common initialization checkpoint")
@click.option("--robust", "robust_path", required=True, help="Robust checkpoint for one corruption")
@click.option("--mode", type=click.Choice(PROJECTION_MODES), default="vector", show_default=True)
@click.option("--layers", type=click.IntRange(min=1), default=DEFAULT_LAYERS_KEPT, show_default=True,
              help="Shallowest layer groups to keep")
@click.option("--corruption", default=None, help="Recorded name (default: the robust model's metadata)")
@click.option("--out", required=True, help="Signature file to write")
@click.pass_context
def extract(ctx, std_path, init_path, robust_path, mode, layers, corruption, out):
    """Extract a robust weight signature."""
    plan = CommandPlan("extract", dict(ctx.params))
    std = read_checkpoint(plan.add_input(std_path))
    init = read_checkpoint(plan.add_input(init_path))
    robust = read_checkpoint(plan.add_input(robust_path))
    sig = extract_rws(std, init, robust, mode, layers, corruption)
    write_checkpoint(sig, plan.add_output(out))
    finish(plan, manifest_beside(out))


@cli.command("patch")
@click.option("--model", "model_path", required=True, help="Standard checkpoint")
@click.option("--sig", "sig_flags", multiple=True, help="<path>[:alpha], repeatable")
@click.option("--recipe", "recipe_path", default=None, help="JSON list of {path, alpha}")
@click.option("--out", required=True)
@click.pass_context
def patch_cmd(ctx, model_path, sig_flags, recipe_path, out):
    """Add scaled signatures to a standard model."""
    plan = CommandPlan("patch", dict(ctx.params))
    with open(plan.add_input(model_path), "rb") as f:
        raw = f.read()
    std = parse_checkpoint(raw)
    entries = [parse_sig_flag(s) for s in sig_flags]
    if recipe_path is not None:
        entries += load_recipe(plan.add_input(recipe_path))
    sigs = [(read_signature(plan.add_input(p)), a) for p, a in entries]
    patched = patch(std, PatchRecipe.for_target(std, sigs))
    if patched is std:
        safe_write_bytes(plan.add_output(out), raw)
    else:
        write_checkpoint(patched, plan.add_output(out))
    finish(plan, manifest_beside(out))


@cli.command()
@click.option("--model", "model_path", required=True)
@click.option("--sig", "sig_path", required=True)
@click.option("--alphas", default="0,0.3,0.6,0.9,1.0", show_default=True)
@click.option("--outdir", required=True)
@click.option("--dataset", default=None, help="Also report TA/RA per alpha on this dataset's test split")
@click.option("--severity", "severities", type=click.IntRange(1, 5), multiple=True, default=(5,), show_default=True)
@click.option("--test-size", type=click.IntRange(min=1), default=DEFAULT_TEST_SIZE, show_default=True)
@click.option("--test-seed", type=int, default=DEFAULT_TEST_SEED, show_default=True)
@click.pass_context
def sweep(ctx, model_path, sig_path, alphas, outdir, dataset, severities, test_size, test_seed):
    """Patch one signature at several strengths."""
    plan = CommandPlan("sweep", dict(ctx.params))
    alphas = parse_alphas(alphas)
    std = read_checkpoint(plan.add_input(model_path))
    sig = read_signature(plan.add_input(sig_path))
    models = rescale_sweep(std, sig, alphas)
    for alpha, model in zip(alphas, models):
        write_checkpoint(model, plan.add_output(os.path.join(outdir, f"alpha_{alpha:g}.ckpt")))
    if dataset is not None:
        dataset_inputs(dataset, plan)
        test = resolve_dataset(dataset, "test", test_size, test_seed)
        contexts = {s: EvalContext(test, (sig.corruption,), s) for s in severities}
        rows = []
        for alpha, model in zip(alphas, models):
            ta = contexts[severities[0]].accuracy(model)
            rows.extend((alpha, s, ta, contexts[s].accuracy(model, sig.corruption)) for s in severities)
        table = ReportTable(("alpha", "severity", "ta", "ra"), tuple(rows))
        table.write_csv(plan.add_output(os.path.join(outdir, "sweep.csv")))
        click.echo(table.to_markdown())
    finish(plan, manifest_in(outdir))


@cli.command("quantize")
@click.option("--sig", "sig_path", required=True)
@click.option("--bits", type=click.Choice(["8", "16"]), required=True)
@click.option("--out", required=True)
@click.pass_context
def quantize_cmd(ctx, sig_path, bits, out):
    """Linear symmetric per-tensor quantization of a signature."""
    plan = CommandPlan("quantize", dict(ctx.params))
    sig = read_signature(plan.add_input(sig_path))
    write_checkpoint(quantize(sig, int(bits)), plan.add_output(out))
    finish(plan, manifest_beside(out))


@cli.command("dequantize")
@click.option("--sig", "sig_path", required=True)
@click.option("--out", required=True)
@click.pass_context
def dequantize_cmd(ctx, sig_path, out):
    """Back to a float32 signature."""
    plan = CommandPlan("dequantize", dict(ctx.params))
    sig = read_signature(plan.add_input(sig_path))
    write_checkpoint(dequantize(sig), plan.add_output(out))
    finish(plan, manifest_beside(out))


def _need(value, flag: str, kind: str):
    if not value:
        raise click.UsageError(f"--kind={kind} needs {flag}")
    return value


@cli.command()
@click.option("--kind", type=click.Choice(REPORT_KINDS), required=True)
@click.option("--out", required=True, help="CSV file to write")
@click.option("--sig", "sig_paths", multiple=True, help="Signature file, repeatable")
@click.option("--sig-b", "sig_b_paths", multiple=True, help="Second signature set (cross-dataset)")
@click.option("--std", "std_path", default=None, help="Standard checkpoint")
@click.option("--init", "init_path", default=None, help="Initialization checkpoint (norms: v_base column)")
@click.option("--layer", default=None, help="Layer group (layer-cosine)")
@click.option("--model", "model_paths", multiple=True, help="Robust checkpoint, repeatable (transfer)")
@click.option("--dataset", default=None, help="Evaluation dataset (transfer)")
@click.option("--severity", type=click.IntRange(1, 5), default=5, show_default=True)
@click.option("--test-size", type=click.IntRange(min=1), default=DEFAULT_TEST_SIZE, show_default=True)
@click.option("--test-seed", type=int, default=DEFAULT_TEST_SEED, show_default=True)
@click.pass_context
def report(ctx, kind, out, sig_paths, sig_b_paths, std_path, init_path, layer, model_paths, dataset,
           severity, test_size, test_seed):
    """Write one analysis report as CSV."""
    plan = CommandPlan("report", dict(ctx.params))
    if kind == "norms":
        sigs = load_sigs(_need(sig_paths, "--sig", kind), plan)
        std = read_checkpoint(plan.add_input(_need(std_path, "--std", kind)))
        init = read_checkpoint(plan.add_input(init_path)) if init_path else None
        table = layer_norm_profile(sigs, std, init)
    elif kind == "layer-cosine":
        table = per_layer_cosine(load_sigs(_need(sig_paths, "--sig", kind), plan), _need(layer, "--layer", kind))
    elif kind == "relationship":
        table = rws_relationship_matrix(load_sigs(_need(sig_paths, "--sig", kind), plan))
    elif kind == "cross-dataset":
        table = cross_dataset_report(
            load_sigs(_need(sig_paths, "--sig", kind), plan), load_sigs(_need(sig_b_paths, "--sig-b", kind), plan)
        )
    elif kind == "storage":
        std = read_checkpoint(plan.add_input(_need(std_path, "--std", kind)))
        rows = storage_report(std, load_sigs(sig_paths, plan))
        table = ReportTable(("configuration", "bytes", "ratio"), tuple((r.configuration, r.bytes, r.ratio) for r in rows))
    else:
        std = read_checkpoint(plan.add_input(_need(std_path, "--std", kind)))
        models = {}
        for p in _need(model_paths, "--model", kind):
            ckpt = read_checkpoint(plan.add_input(p))
            models[ckpt.metadata.get("corruption", os.path.basename(p))] = ckpt
        dataset = _need(dataset, "--dataset", kind)
        dataset_inputs(dataset, plan)
        test = resolve_dataset(dataset, "test", test_size, test_seed)
        table = transfer_gain_matrix(models, std, EvalContext(test, KINDS, severity))
    table.write_csv(plan.add_output(out))
    finish(plan, manifest_beside(out))


@cli.command("train")
@click.option("--dataset", default=None, help="synthA | synthB | idx:<images>,<labels>")
@click.option("--corruption", "corruptions", multiple=True, help="<kind>:<severity>; repeat for mixed augmentation")
@click.option("--init", "init_flag", default=None, help="<checkpoint path> | seed:N")
@click.option("--config", "config_path", default=None, help="TrainConfig JSON")
@click.option("--arch", type=click.Choice(["mlp", "convnet"]), default="convnet", show_default=True)
@click.option("--epochs", type=click.IntRange(min=0), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--lr", "learning_rate", type=float, default=None)
@click.option("--batch-size", type=click.IntRange(min=1), default=None)
@click.option("--train-size", type=click.IntRange(min=1), default=None)
@click.option("--out", required=True)
@click.pass_context
def train_cmd(ctx, dataset, corruptions, init_flag, config_path, arch, epochs, seed, learning_rate,
              batch_size, train_size, out):
    """Train a desk-scale model (standard, robust or augmented)."""
    plan = CommandPlan("train", dict(ctx.params))
    config = TrainConfig.from_json(plan.add_input(config_path)) if config_path else TrainConfig()
    overrides = {
        "dataset": dataset,
        "epochs": epochs,
        "seed": seed,
        "learning_rate": learning_rate,
        "batch_size": batch_size,
        "train_size": train_size,
    }
    config = config.replace(**{k: v for k, v in overrides.items() if v is not None})
    dataset_inputs(config.dataset, plan)
    init = parse_init(init_flag, plan)
    specs = [CorruptionSpec.parse(c) for c in corruptions]
    corruption = specs[0] if len(specs) == 1 else (specs or None)
    data = resolve_dataset(config.dataset, "train", config.train_size, config.data_seed)
    spec = None
    if not isinstance(init, Checkpoint):
        spec = NetSpec.default(arch, input_hw=data.image_hw, num_classes=data.num_classes)
    ckpt, history = train_with_history(config, init, corruption, spec, data)
    write_checkpoint(ckpt, plan.add_output(out))
    if history:
        logger.info("final training loss %.4f", history[-1])
    finish(plan, manifest_beside(out))


@cli.command("eval")
@click.option("--model", "model_path", required=True)
@click.option("--dataset", required=True)
@click.option("--corruption", default=None, help="<kind>:<severity>; clean accuracy when omitted")
@click.option("--ra", "robust", is_flag=True, help="Mean accuracy over every corruption kind")
@click.option("--severity", type=click.IntRange(1, 5), default=5, show_default=True)
@click.option("--size", type=click.IntRange(min=1), default=DEFAULT_TEST_SIZE, show_default=True)
@click.option("--seed", type=int, default=DEFAULT_TEST_SEED, show_default=True)
@click.option("--out", default=None, help="JSON result file; <run-dir>/result.json when omitted")
@click.option("--run-dir", default=os.path.join(DEFAULT_RUN_ROOT, "eval"), show_default=True)
@click.pass_context
def eval_cmd(ctx, model_path, dataset, corruption, robust, severity, size, seed, out, run_dir):
    """Accuracy on the clean or corrupted test split."""
    plan = CommandPlan("eval", dict(ctx.params))
    model = read_checkpoint(plan.add_input(model_path))
    dataset_inputs(dataset, plan)
    test = resolve_dataset(dataset, "test", size, seed)
    result = {"dataset": dataset}
    if robust:
        ctx_eval = EvalContext(test, KINDS, severity)
        per_kind = {k: ctx_eval.accuracy(model, k) for k in KINDS}
        result.update(per_kind=per_kind, ra=sum(per_kind.values()) / len(per_kind), severity=severity)
        for k, acc in per_kind.items():
            click.echo(f"{k}\t{acc:.6f}")
        click.echo(f"ra\t{result['ra']:.6f}")
    else:
        spec = CorruptionSpec.parse(corruption) if corruption else None
        result.update(corruption=spec.tag if spec else "none", accuracy=evaluate(model, test, spec))
        click.echo(f"{result['corruption']}\t{result['accuracy']:.6f}")
    if out is not None:
        write_json(plan.add_output(out), result)
        finish(plan, manifest_beside(out))
    else:
        write_json(plan.add_output(os.path.join(run_dir, "result.json")), result)
        finish(plan, manifest_in(run_dir))


@cli.command("dump-features")
@click.option("--model", "model_path", required=True)
@click.option("--input", "input_path", required=True, help="Grayscale PGM matching the model input")
@click.option("--layers", required=True, help="Comma-separated convolutional groups")
@click.option("--outdir", required=True)
@click.pass_context
def dump_features(ctx, model_path, input_path, layers, outdir):
    """Write feature maps as PGM images, one per channel."""
    plan = CommandPlan("dump-features", dict(ctx.params))
    model = read_checkpoint(plan.add_input(model_path))
    image = read_pgm(plan.add_input(input_path))
    groups = [g for g in layers.split(",") if g]
    for path in feature_map_dump(model, image, groups, outdir):
        plan.add_output(path)
    finish(plan, manifest_in(outdir))


@cli.command("grad-check")
@click.option("--arch", type=click.Choice(["mlp", "convnet"]), default="convnet", show_default=True)
@click.option("--activation", type=click.Choice(["relu", "identity"]), default="relu", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--samples", type=click.IntRange(min=1), default=20, show_default=True, help="Parameters per group")
@click.option("--tolerance", type=float, default=1e-4, show_default=True)
@click.option("--run-dir", default=os.path.join(DEFAULT_RUN_ROOT, "grad-check"), show_default=True)
@click.pass_context
def grad_check_cmd(ctx, arch, activation, seed, samples, tolerance, run_dir):
    """Compare analytic gradients with central differences."""
    plan = CommandPlan("grad-check", dict(ctx.params))
    spec = NetSpec.default(arch, input_hw=(12, 12), num_classes=5, activation=activation)
    report = grad_check(spec, seed, samples_per_group=samples)
    error = report.max_rel_error
    result = {"max_rel_error": error, "checked": report.checked, "skipped": report.skipped, "tolerance": tolerance}
    write_json(plan.add_output(os.path.join(run_dir, "grad_check.json")), result)
    finish(plan, manifest_in(run_dir))
    click.echo(f"max relative error {error:.3e}")
    if error > tolerance:
        raise ValidationError(f"gradient check failed: {error:.3e} > {tolerance:.1e}")


@cli.command()
@click.option("--outdir", required=True)
@click.option("--config", "config_path", default=None, help="ExperimentConfig JSON")
@click.option("--explain", is_flag=True, help="Describe the steps without running them")
@click.pass_context
def experiment(ctx, outdir, config_path, explain):
    """Run the desk-scale reference experiment end to end."""
    plan = CommandPlan("experiment", dict(ctx.params))
    config = ExperimentConfig.from_json(plan.add_input(config_path)) if config_path else ExperimentConfig()
    runner = ReferenceExperiment(config, outdir)
    if explain:
        click.echo(runner.explain())
        return EXIT_OK
    outcome = runner.run()
    for root, _, files in sorted(os.walk(outdir)):
        for name in sorted(files):
            path = os.path.join(root, name)
            if path != manifest_in(outdir):
                plan.add_output(path)
    finish(plan, manifest_in(outdir))
    if outcome["status"] != "SUCCESS":
        click.echo(f"error: experiment failed: {outcome['error']}", err=True)
        return EXIT_VALIDATION
    return EXIT_OK


# ============================================================================
# ENTRY POINT
# ============================================================================
def run(argv: Optional[Sequence[str]] = None) -> int:
    try:
        rv = cli.main(args=list(argv) if argv is not None else None, prog_name="rws", standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return EXIT_VALIDATION
    except click.ClickException as e:
        e.show()
        return EXIT_VALIDATION
    except click.exceptions.Abort:
        return EXIT_VALIDATION
    except ValidationError as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_VALIDATION
    except (FormatError, OSError) as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_FORMAT
    return rv if isinstance(rv, int) else EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
