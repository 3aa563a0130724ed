import json

import pytest

from nisac import dataset_io as dio
from nisac.cli import main
from nisac.experiments import read_sweep

from conftest import CONFIG_DIR

DESK = str(CONFIG_DIR / "desk.toml")
FAST = ["--set", "train.epochs=1", "--set", "dataset.n_samples=24"]


def test_gen_default_config_100(tmp_path):
    out = tmp_path / "d.nisac"
    assert main(["gen", "--out", str(out), "-n", "100"]) == 0
    assert dio.read_header(out)["n_records"] == 100


def test_gen_count_precedence(tmp_path):
    assert main(["gen", "--config", DESK, "--set", "dataset.n_samples=7", "--out", str(tmp_path / "a")]) == 0
    assert dio.read_header(tmp_path / "a")["n_records"] == 7
    assert main(["gen", "--config", DESK, "--set", "dataset.n_samples=7", "-n", "3",
                 "--out", str(tmp_path / "b")]) == 0
    assert dio.read_header(tmp_path / "b")["n_records"] == 3


def test_missing_config_exit_1(tmp_path, capsys):
    assert main(["gen", "--config", str(tmp_path / "none.toml"), "--out", str(tmp_path / "x")]) == 1
    assert "config error" in capsys.readouterr().err


def test_bad_override_exit_1(tmp_path):
    assert main(["gen", "--set", "train.nope=1", "--out", str(tmp_path / "x")]) == 1
    assert main(["gen", "--set", "novalue", "--out", str(tmp_path / "x")]) == 1


def test_io_error_exit_2(tmp_path):
    assert main(["gen", "-n", "1", "--out", str(tmp_path / "no" / "dir" / "x.nisac")]) == 2
    assert main(["eval", "--data", str(tmp_path / "missing"), "--model", str(tmp_path / "m")]) == 2


def test_train_eval_round(tmp_path):
    data, model = tmp_path / "d.nisac", tmp_path / "m.ckpt"
    assert main(["gen", "--config", DESK, *FAST, "--out", str(data)]) == 0
    assert main(["train", "--config", DESK, *FAST, "--data", str(data), "--out", str(model)]) == 0
    assert (tmp_path / "m.history.csv").read_text().startswith("epoch,train_loss,val_loss\n")
    assert main(["eval", "--data", str(data), "--model", str(model), "--out", str(tmp_path / "r.json")]) == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    assert 0.0 <= rep["metrics"]["accuracy"] <= 1.0
    assert rep["config"]["train"]["epochs"] == 1  # config echoed


def test_train_refuses_mismatched_dataset(tmp_path):
    data = tmp_path / "d.nisac"
    assert main(["gen", "--config", DESK, *FAST, "--out", str(data)]) == 0
    assert main(["train", "--config", DESK, *FAST, "--seed", "5", "--data", str(data),
                 "--out", str(tmp_path / "m")]) == 1


def test_verify_exit_codes(tmp_path):
    assert main(["verify", "lemma1", "--n0", "0", "--out", str(tmp_path / "v.json")]) == 0
    rep = json.loads((tmp_path / "v.json").read_text())
    assert rep["passed"] and all("threshold" in c for c in rep["checks"])
    assert main(["verify", "prop9"]) == 1
    assert main(["verify", "clt", "--n0", "1"]) == 1


def test_verify_ls_bias_suite_passes(tmp_path):
    assert main(["verify", "prop1", "--out", str(tmp_path / "v.json")]) == 0


def test_sweep_invalid_axis():
    assert main(["sweep", "--axis", "colour", "--values", "1", "--out", "/tmp/unused.csv"]) == 1
    assert main(["sweep", "--axis", "cells_per_side", "--values", "two", "--out", "/tmp/unused.csv"]) == 1


def test_sweep_rows_and_resume(tmp_path):
    out = tmp_path / "s.csv"
    args = ["sweep", "--config", DESK, *FAST, "--axis", "cells_per_side", "--values", "2,3",
            "--seeds", "0,1", "--out", str(out)]
    assert main(args) == 0
    cfg, rows = read_sweep(out)
    assert cfg["train"]["epochs"] == 1
    acc = [r for r in rows if r["metric"] == "accuracy"]
    assert len(acc) == 2 * 2
    assert {(r["value"], r["seed"]) for r in acc} == {("2", 0), ("2", 1), ("3", 0), ("3", 1)}
    first = out.read_bytes()
    assert main(args) == 0  # resumes from parts; same bytes
    assert out.read_bytes() == first
