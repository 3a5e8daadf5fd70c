import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from purets._io import atomic_open
from purets.cli import main
from purets.model import build_model, load_checkpoint
from purets.profile import count_macs, count_parameters

SINE = ["--dataset", "sine", "--sine-points", "2000", "--sine-step", "0.1"]


def _train(out, *extra):
    return main(["train", *SINE, "--window", "64", "--horizon", "1", "--depth", "1", "--epochs", "20",
                 "--output-dir", str(out), *extra])


def test_train_sine_single_step(tmp_path, capsys):
    assert _train(tmp_path) == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["mse"] < 1e-6
    assert (tmp_path / "trace.csv").read_text().startswith("epoch,train_loss,val_loss,seconds\n")
    rows = list(csv.reader((tmp_path / "predictions.csv").open()))
    assert rows[0] == ["step", "sin_truth", "sin_pred"] and len(rows) == 2
    model, record = load_checkpoint(tmp_path / "model.npz")
    assert model.horizon == 1 and record["dataset"] == "sine"
    assert "trained" in capsys.readouterr().out


def test_metric_files_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _train(a, "--seed", "5") == 0
    assert _train(b, "--seed", "5") == 0
    assert (a / "metrics.json").read_bytes() == (b / "metrics.json").read_bytes()
    with np.load(a / "model.npz") as x, np.load(b / "model.npz") as y:
        for k in x.files:
            np.testing.assert_array_equal(x[k], y[k])


def test_missing_dataset_exit_code(tmp_path, capsys):
    rc = main(["train", "--dataset", "nope", "--horizon", "4", "--data-dir", str(tmp_path),
               "--output-dir", str(tmp_path)])
    assert rc == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert err == ["error: dataset not found: nope"]


def test_module_entry_point_exit_code(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "purets", "train", "--dataset", "nope", "--horizon", "4",
         "--output-dir", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 2
    assert proc.stderr.strip() == "error: dataset not found: nope"


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["train", "--model", "Transformer"])
    assert exc.value.code == 2


def test_bad_config_values(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("bogus = 1\n")
    assert main(["train", "--config", str(cfg)]) == 2
    cfg.write_text("epochs = many\n")
    assert main(["train", "--config", str(cfg)]) == 2
    cfg.write_text("no equals sign\n")
    assert main(["train", "--config", str(cfg)]) == 2
    assert main(["train", *SINE, "--horizon", "4", "--lr", "-1", "--output-dir", str(tmp_path)]) == 2


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# sine run\n"
        "dataset = sine\nsine-points = 1500\nsine_step = 0.1\n"
        "window = 32\nhorizon = 8\ndepth = 2\nepochs = 2\nmodel = PureTS_S\n"
        f"output_dir = {tmp_path / 'from_file'}\n"
    )
    assert main(["train", "--config", str(cfg), "--horizon", "4"]) == 0
    model, record = load_checkpoint(tmp_path / "from_file" / "model.npz")
    assert (model.input_window, model.horizon, model.depth, model.kind) == (32, 4, 2, "PureTS_S")
    assert record["sine_points"] == 1500 and record["epochs"] == 2


def test_eval_restores_data_from_checkpoint(tmp_path):
    assert _train(tmp_path) == 0
    assert main(["eval", "--checkpoint", str(tmp_path / "model.npz"), "--output-dir", str(tmp_path)]) == 0
    a = json.loads((tmp_path / "metrics.json").read_text())
    b = json.loads((tmp_path / "eval_metrics.json").read_text())
    assert a == b
    assert main(["eval", "--checkpoint", str(tmp_path / "missing.npz")]) == 2


def test_profile_scatter(tmp_path):
    assert main(["profile", "--repeats", "5", "--output-dir", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "scatter.csv").open()))
    assert [int(r["horizon"]) for r in rows] == [48, 168, 336, 720]
    params = [int(r["parameters"]) for r in rows]
    assert params == sorted(params) and len(set(params)) == 4
    assert all(r["mse"] == "" for r in rows)
    reports = json.loads((tmp_path / "profile.json").read_text())
    for rep in reports:
        m = build_model("PureTS", 336, rep["horizon"], 7)
        assert rep["parameter_count"] == count_parameters(m)
        assert rep["mac_count"] == count_macs(m)


def test_profile_with_training_fills_mse(tmp_path):
    rc = main(["profile", *SINE, "--window", "32", "--horizons", "4,8", "--epochs", "2", "--repeats", "5",
               "--output-dir", str(tmp_path)])
    assert rc == 0
    rows = list(csv.DictReader((tmp_path / "scatter.csv").open()))
    assert len(rows) == 2 and all(float(r["mse"]) >= 0 for r in rows)


def test_bench(tmp_path):
    assert main(["bench", "--horizon", "24", "--window", "48", "--features", "3", "--repeats", "5",
                 "--output-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "bench.json").read_text())
    assert len(rep["samples"]) == 5
    assert rep["mac_count"] == count_macs(build_model("PureTS", 48, 24, 3))


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("PURETS_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["bench", "--horizon", "4", "--repeats", "5"]) == 0
    assert (tmp_path / "env" / "bench.json").exists()


def test_atomic_write_leaves_old_file_on_failure(tmp_path):
    target = tmp_path / "metrics.json"
    target.write_text("old")
    with pytest.raises(RuntimeError):
        with atomic_open(target) as fh:
            fh.write("partial")
            raise RuntimeError("killed")
    assert target.read_text() == "old"
    assert [p.name for p in tmp_path.iterdir()] == ["metrics.json"]


def test_figure3_artifacts(tmp_path):
    assert main(["figure3", "--output-dir", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["conditions"]["1"]["mse"] < 1e-6
    for k in "12345":
        for suffix in ("_predictions.csv", "_trace.csv", ".svg"):
            assert (tmp_path / f"condition{k}{suffix}").exists()
    assert (tmp_path / "convergence.svg").exists()


def test_train_per_channel_flag(tmp_path):
    assert main(["train", *SINE, "--window", "16", "--horizon", "4", "--epochs", "1", "--per-channel",
                 "--output-dir", str(tmp_path)]) == 0
    model, _ = load_checkpoint(tmp_path / "model.npz")
    assert model.per_channel
