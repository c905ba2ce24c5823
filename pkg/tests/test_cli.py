import json

import numpy as np
import pytest

from analyzer import write_pgm
from checkpoint_store import read_checkpoint, read_signature, write_checkpoint
from desk_trainer import DeskNet, NetSpec
from main import parse_sig_flag, run
from tests.conftest import toy_checkpoint


@pytest.fixture
def trio_files(tmp_path, toy_trio):
    paths = {}
    for name, ckpt in zip(("std", "init", "robust"), toy_trio):
        paths[name] = str(tmp_path / f"{name}.ckpt")
        write_checkpoint(ckpt, paths[name])
    return paths


@pytest.fixture
def sig_file(tmp_path, trio_files):
    out = str(tmp_path / "gauss.rws")
    assert run([
        "extract", "--std", trio_files["std"], "--init", trio_files["init"],
        "--robust", trio_files["robust"], "--layers", "2", "--out", out,
    ]) == 0
    return out


def test_parse_sig_flag():
    assert parse_sig_flag("a/b.rws") == ("a/b.rws", 1.0)
    assert parse_sig_flag("a/b.rws:0.5") == ("a/b.rws", 0.5)
    assert parse_sig_flag("C:/x.rws") == ("C:/x.rws", 1.0)


def test_extract_writes_signature_and_manifest(sig_file, trio_files):
    sig = read_signature(sig_file)
    assert sig.corruption == "gaussian_noise"
    assert sig.layer_order == ("g1", "g2")
    manifest = json.loads(open(sig_file + ".manifest.json").read())
    assert manifest["subcommand"] == "extract"
    assert set(manifest["inputs"]) == set(trio_files.values())
    assert list(manifest["outputs"]) == [sig_file]


def test_manifest_is_idempotent(sig_file, trio_files):
    first = open(sig_file + ".manifest.json", "rb").read()
    assert run([
        "extract", "--std", trio_files["std"], "--init", trio_files["init"],
        "--robust", trio_files["robust"], "--layers", "2", "--out", sig_file,
    ]) == 0
    assert open(sig_file + ".manifest.json", "rb").read() == first


def test_patch_with_signature(tmp_path, sig_file, trio_files):
    out = str(tmp_path / "patched.ckpt")
    assert run(["patch", "--model", trio_files["std"], "--sig", f"{sig_file}:0.5", "--out", out]) == 0
    std, patched = read_checkpoint(trio_files["std"]), read_checkpoint(out)
    sig = read_signature(sig_file)
    np.testing.assert_allclose(patched.tensors["g1.weight"], std.tensors["g1.weight"] + 0.5 * sig.tensors["g1.weight"], rtol=1e-6)
    np.testing.assert_array_equal(patched.tensors["g4.weight"], std.tensors["g4.weight"])


def test_empty_patch_is_byte_identical(tmp_path, trio_files):
    out = tmp_path / "same.ckpt"
    assert run(["patch", "--model", trio_files["std"], "--out", str(out)]) == 0
    assert out.read_bytes() == open(trio_files["std"], "rb").read()


def test_zero_alpha_recipe_is_byte_identical(tmp_path, sig_file, trio_files):
    recipe = tmp_path / "recipe.json"
    recipe.write_text(json.dumps([{"path": "gauss.rws", "alpha": 0.0}]))
    out = tmp_path / "same.ckpt"
    assert run(["patch", "--model", trio_files["std"], "--recipe", str(recipe), "--out", str(out)]) == 0
    assert out.read_bytes() == open(trio_files["std"], "rb").read()


def test_fingerprint_mismatch_exits_1(tmp_path, sig_file, capsys):
    other = toy_checkpoint(0, groups=("g1", "g2", "g3", "g5"))
    other_path = str(tmp_path / "other.ckpt")
    write_checkpoint(other, other_path)
    code = run(["patch", "--model", other_path, "--sig", sig_file, "--out", str(tmp_path / "x.ckpt")])
    assert code == 1
    err = capsys.readouterr().err
    assert other.arch_fingerprint in err
    assert read_signature(sig_file).target_arch in err
    assert not (tmp_path / "x.ckpt").exists()


def test_bad_flag_exits_1(trio_files):
    assert run(["extract", "--bogus", "1"]) == 1
    assert run(["extract", "--std", trio_files["std"]]) == 1
    assert run(["quantize", "--sig", "x", "--bits", "4", "--out", "y"]) == 1


def test_missing_file_exits_2(tmp_path, trio_files):
    code = run([
        "extract", "--std", str(tmp_path / "nope.ckpt"), "--init", trio_files["init"],
        "--robust", trio_files["robust"], "--out", str(tmp_path / "s.rws"),
    ])
    assert code == 2


def test_corrupt_file_exits_2(tmp_path, trio_files):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"\x05\x00")
    assert run(["patch", "--model", str(bad), "--out", str(tmp_path / "o.ckpt")]) == 2


def test_checkpoint_is_not_a_signature(tmp_path, trio_files):
    assert run(["quantize", "--sig", trio_files["std"], "--bits", "8", "--out", str(tmp_path / "q.rws")]) == 2


def test_quantize_then_dequantize(tmp_path, sig_file):
    q, d = str(tmp_path / "q.rws"), str(tmp_path / "d.rws")
    assert run(["quantize", "--sig", sig_file, "--bits", "8", "--out", q]) == 0
    assert run(["dequantize", "--sig", q, "--out", d]) == 0
    assert read_signature(q).quant_bits == 8
    assert read_signature(d).quant_bits == 0
    assert run(["quantize", "--sig", q, "--bits", "16", "--out", str(tmp_path / "qq.rws")]) == 1


def test_sweep_writes_one_model_per_alpha(tmp_path, sig_file, trio_files):
    outdir = tmp_path / "sweep"
    assert run(["sweep", "--model", trio_files["std"], "--sig", sig_file, "--alphas", "0,0.5,1", "--outdir", str(outdir)]) == 0
    names = sorted(p.name for p in outdir.iterdir())
    assert names == ["alpha_0.5.ckpt", "alpha_0.ckpt", "alpha_1.ckpt", "run_manifest.json"]
    std = read_checkpoint(trio_files["std"])
    zero = read_checkpoint(str(outdir / "alpha_0.ckpt"))
    for name, arr in std.tensors.items():
        np.testing.assert_array_equal(zero.tensors[name], arr)


def test_report_relationship_and_storage(tmp_path, toy_signatures, trio_files):
    paths = []
    for sig in toy_signatures:
        paths.append(str(tmp_path / f"{sig.corruption}.rws"))
        write_checkpoint(sig, paths[-1])
    sig_args = [a for p in paths for a in ("--sig", p)]
    rel = tmp_path / "rel.csv"
    assert run(["report", "--kind", "relationship", *sig_args, "--out", str(rel)]) == 0
    assert rel.read_text().startswith(",gaussian_noise,impulse_noise,contrast\n")
    storage = tmp_path / "storage.csv"
    assert run(["report", "--kind", "storage", "--std", trio_files["std"], *sig_args, "--out", str(storage)]) == 0
    assert storage.read_text().splitlines()[1].startswith("standard,")
    assert run(["report", "--kind", "layer-cosine", *sig_args, "--out", str(tmp_path / "l.csv")]) == 1
    assert run(["report", "--kind", "layer-cosine", *sig_args, "--layer", "g1", "--out", str(tmp_path / "l.csv")]) == 0


def test_dump_features(tmp_path):
    model = DeskNet.initialize(NetSpec.default("convnet", input_hw=(12, 12)), 0).to_checkpoint()
    model_path = str(tmp_path / "conv.ckpt")
    write_checkpoint(model, model_path)
    image = str(tmp_path / "in.pgm")
    write_pgm(image, (np.arange(144).reshape(12, 12) % 256).astype(np.uint8))
    outdir = tmp_path / "maps"
    assert run(["dump-features", "--model", model_path, "--input", image, "--layers", "conv1", "--outdir", str(outdir)]) == 0
    assert len(list(outdir.glob("conv1_*.pgm"))) == 8
    assert run(["dump-features", "--model", model_path, "--input", image, "--layers", "fc1", "--outdir", str(outdir)]) == 1


def test_grad_check_command(tmp_path, capsys):
    run_dir = str(tmp_path / "gc")
    assert run(["grad-check", "--arch", "mlp", "--samples", "5", "--run-dir", run_dir]) == 0
    assert "max relative error" in capsys.readouterr().out
    result = json.loads((tmp_path / "gc" / "grad_check.json").read_text())
    assert set(result["checked"]) == {"fc1", "fc2", "fc3", "fc4"}
    manifest = json.loads((tmp_path / "gc" / "run_manifest.json").read_text())
    assert manifest["subcommand"] == "grad-check"
    assert list(manifest["outputs"]) == [str(tmp_path / "gc" / "grad_check.json")]
    assert run(["grad-check", "--arch", "mlp", "--samples", "5", "--tolerance", "0", "--run-dir", run_dir]) == 1


def test_train_and_eval(tmp_path, capsys):
    init, std, robust = (str(tmp_path / f"{n}.ckpt") for n in ("init", "std", "robust"))
    common = ["--arch", "mlp", "--epochs", "1", "--train-size", "100", "--dataset", "synthA"]
    assert run(["train", *common, "--init", "seed:3", "--out", init]) == 0
    assert run(["train", *common, "--init", init, "--out", std]) == 0
    assert run(["train", *common, "--init", init, "--corruption", "gaussian_noise:5", "--out", robust]) == 0
    assert read_checkpoint(robust).metadata["corruption"] == "gaussian_noise"

    capsys.readouterr()
    result = str(tmp_path / "eval.json")
    assert run(["eval", "--model", std, "--dataset", "synthA", "--size", "50", "--corruption", "contrast:3", "--out", result]) == 0
    assert capsys.readouterr().out.startswith("contrast:3\t")
    assert json.loads(open(result).read())["corruption"] == "contrast:3"
    assert (tmp_path / "eval.json.manifest.json").exists()

    sig = str(tmp_path / "robust.rws")
    assert run(["extract", "--std", std, "--init", init, "--robust", robust, "--layers", "2", "--out", sig]) == 0
    patched = str(tmp_path / "patched.ckpt")
    assert run(["patch", "--model", std, "--sig", sig, "--out", patched]) == 0
    assert run(["eval", "--model", patched, "--dataset", "synthA", "--size", "50", "--ra", "--severity", "3", "--run-dir", str(tmp_path / "ra")]) == 0
    assert capsys.readouterr().out.splitlines()[-1].startswith("ra\t")
    manifest = json.loads((tmp_path / "ra" / "run_manifest.json").read_text())
    assert manifest["subcommand"] == "eval"
    assert patched in manifest["inputs"]
    assert json.loads((tmp_path / "ra" / "result.json").read_text())["severity"] == 3


def test_bad_corruption_spec_exits_1(tmp_path):
    out = str(tmp_path / "m.ckpt")
    assert run(["train", "--arch", "mlp", "--epochs", "0", "--train-size", "20", "--corruption", "fog:3", "--out", out]) == 1


def test_experiment_explain(tmp_path, capsys):
    assert run(["experiment", "--outdir", str(tmp_path), "--explain"]) == 0
    assert "evaluate_patches" in capsys.readouterr().out


def test_storage_report_on_header_only_checkpoint_is_a_format_error(tmp_path, sig_file):
    head = json.dumps({"__metadata__": {"layer_order": "conv1,fc1"}}).encode()
    empty = tmp_path / "empty.ckpt"
    empty.write_bytes(len(head).to_bytes(8, "little") + head)
    out = str(tmp_path / "storage.csv")
    assert run(["report", "--kind", "storage", "--std", str(empty), "--sig", sig_file, "--out", out]) == 2
