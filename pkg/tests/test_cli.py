import json
import os

import pytest

from depsem import cli
from depsem.errors import TrainingError
from depsem.heatmap import read_pgm

MODEL = {"d_model": 16, "n_heads": 2, "d_ff": 32, "n_enc_layers": 2, "n_dec_layers": 1, "dropout": 0.1}


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    root = tmp_path_factory.mktemp("ws")
    spec = root / "grammar.json"
    spec.write_text(json.dumps({"version": 1, "seed": 0, "train": 40, "dev": 10, "test": 10}))
    assert cli.main(["gen-data", "--spec", str(spec), "--out", str(root / "data"), "--test-sources"]) == 0
    config = root / "run.json"
    config.write_text(json.dumps({
        "version": 1, "run_id": "small",
        "data": {"train": "data/train.tsv", "dev": "data/dev.tsv"},
        "model": MODEL,
        "train": {"epochs": 2, "batch_size": 8, "lr": 0.003, "seed": 0},
        "sawr": {"dim": 8, "emb_dim": 8, "arc_dim": 8, "epochs": 2},
    }))
    return root


def test_gen_data_outputs(ws):
    names = set(os.listdir(ws / "data"))
    assert {"train.tsv", "dev.tsv", "test.tsv", "train.conll", "dev.conll", "test.conll",
            "test.src.tsv", "manifest.json"} <= names
    manifest = json.loads((ws / "data" / "manifest.json").read_text())
    assert manifest["command"] == "gen-data" and manifest["seed"] == 0


def test_train_pascal_ca_then_eval(ws):
    out = ws / "runs"
    assert cli.main(["train", "--config", str(ws / "run.json"), "--out", str(out), "--pascal", "--ca"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["variants"] == {"pascal": True, "sawrs": False, "ca": True}
    assert manifest["tool_version"] and manifest["config_paths"] and manifest["dataset_paths"]
    run = out / "small"
    assert {"best.ckpt", "epoch_1.ckpt", "metrics.jsonl", "timing.jsonl"} <= set(os.listdir(run))

    ev = ws / "eval"
    assert cli.main(["eval", "--checkpoint", str(run / "best.ckpt"), "--data", str(ws / "data" / "test.tsv"),
                     "--out", str(ev)]) == 0
    report = json.loads((ev / "report.json").read_text())
    assert "exact_match" in report and "tree_match" in report
    assert report["tree_match"] >= report["exact_match"]
    assert len(report["per_sentence"]) == 10


def test_heatmap_inventory_for_ca_model(ws):
    ckpt = ws / "runs" / "small" / "best.ckpt"
    if not ckpt.exists():
        pytest.skip("depends on test_train_pascal_ca_then_eval")
    out = ws / "heat"
    assert cli.main(["heatmap", "--checkpoint", str(ckpt), "--data", str(ws / "data" / "test.tsv"),
                     "--index", "2", "--out", str(out)]) == 0
    names = set(os.listdir(out))
    for base in ("layer0_head0", "layer0_head1", "layer0_mean", "layer1_mean", "D", "D_sym",
                 "C_layer0", "C_layer1"):
        assert f"{base}.json" in names and f"{base}.pgm" in names
    d = json.loads((out / "D.json").read_text())
    n = len(d["rows"])
    assert d["shape"] == [n, n]
    assert read_pgm(out / "D.pgm").shape == (8 * n, 8 * n)
    assert cli.main(["heatmap", "--checkpoint", str(ckpt), "--data", str(ws / "data" / "test.tsv"),
                     "--index", "99", "--out", str(out)]) == 2


def test_predict_writes_sources_and_outputs(ws):
    ckpt = ws / "runs" / "small" / "best.ckpt"
    if not ckpt.exists():
        pytest.skip("depends on test_train_pascal_ca_then_eval")
    out = ws / "pred"
    assert cli.main(["predict", "--checkpoint", str(ckpt), "--input", str(ws / "data" / "test.src.tsv"),
                     "--out", str(out)]) == 0
    lines = (out / "predictions.tsv").read_text().splitlines()
    assert len(lines) == 10 and all("\t" in line for line in lines)


def test_sawrs_training_through_cli(ws):
    out = ws / "sawr_runs"
    assert cli.main(["train", "--config", str(ws / "run.json"), "--out", str(out), "--sawrs",
                     "--epochs", "1"]) == 0
    summary = json.loads((out / "small" / "summary.json").read_text())
    assert summary["variant"] == "sawrs" and "sawr_heldout_uas" in summary
    ev = ws / "sawr_eval"
    assert cli.main(["eval", "--checkpoint", str(out / "small" / "best.ckpt"),
                     "--data", str(ws / "data" / "dev.tsv"), "--out", str(ev)]) == 0


def test_tel_refuses_gold_test_labels(ws, capsys):
    ckpt = ws / "runs" / "small" / "best.ckpt"
    if not ckpt.exists():
        pytest.skip("depends on test_train_pascal_ca_then_eval")
    args = ["tel", "--checkpoints", str(ckpt), str(ws / "runs" / "small" / "epoch_1.ckpt"),
            "--dev", str(ws / "data" / "dev.tsv"), "--epochs", "1", "--out", str(ws / "tel")]
    assert cli.main(args + ["--test-inputs", str(ws / "data" / "test.tsv")]) == 2
    assert "test.tsv" in capsys.readouterr().err
    assert cli.main(args + ["--test-inputs", str(ws / "data" / "test.src.tsv")]) == 0
    audit = json.loads((ws / "tel" / "tel_audit.json").read_text())
    assert audit["corpus_size"] == (10 + 10) * 2
    assert (ws / "tel" / "manifest.json").exists() and (ws / "tel" / "tel.ckpt").exists()


def test_replay_reproduces_metrics(ws):
    out = ws / "det"
    assert cli.main(["train", "--config", str(ws / "run.json"), "--out", str(out), "--ca"]) == 0
    assert cli.main(["replay", "--manifest", str(out / "manifest.json"), "--out", str(ws / "det2")]) == 0
    first = (out / "small" / "metrics.jsonl").read_bytes()
    assert first and first == (ws / "det2" / "small" / "metrics.jsonl").read_bytes()


def test_unknown_flag_is_a_usage_error(capsys):
    assert cli.main(["train", "--bogus"]) == 1
    assert "usage:" in capsys.readouterr().err
    assert cli.main([]) == 1
    assert cli.main(["frobnicate"]) == 1


def test_config_errors_name_the_field(ws, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"version": 2, "data": {"train": "x.tsv"}}))
    assert cli.main(["train", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "version" in capsys.readouterr().err
    bad.write_text(json.dumps({"version": 1, "data": {"train": "x.tsv"}, "model": {"width": 3}}))
    assert cli.main(["train", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "model.width" in capsys.readouterr().err
    assert cli.main(["train", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 2
    bad.write_text(json.dumps({"version": 1, "data": {"train": str(ws / "data" / "train.tsv")},
                               "model": {**MODEL, "d_model": 15}}))
    assert cli.main(["train", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "d_model" in capsys.readouterr().err


def test_runtime_failures_exit_3(ws, tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise TrainingError("loss became nan")

    monkeypatch.setattr(cli, "train", boom)
    assert cli.main(["train", "--config", str(ws / "run.json"), "--out", str(tmp_path / "o")]) == 3
