"""Tests for the command-line front end."""

import csv
import json

import numpy as np
import pytest

from ofdmchest.cli import main
from ofdmchest.rnn import load_model
from ofdmchest.training import load_dataset

TINY_PROFILE = {
    "delays_samples": [0, 1],
    "powers": [0.7, 0.3],
    "powers_unit": "linear",
    "doppler_hz": 0.0,
    "symbol_duration_s": 8e-06,
    "fft_size": 16,
    "active_bins": [12, 13, 14, 15, 1, 2, 3, 4],
}


@pytest.fixture
def profile_path(tmp_path):
    path = tmp_path / "profile.json"
    path.write_text(json.dumps(TINY_PROFILE))
    return str(path)


def run(argv):
    return main(argv)


class TestComplexityCommand:
    def test_writes_table_csv_and_config(self, tmp_path, capsys):
        code = run(["complexity", "--outdir", str(tmp_path), "--json"])
        assert code == 0
        out = capsys.readouterr().out
        assert "als-bi-gru" in out
        assert (tmp_path / "complexity.csv").exists()
        assert (tmp_path / "complexity.json").exists()
        cfg = json.loads((tmp_path / "complexity.config.json").read_text())
        assert cfg["kon"] == 52 and cfg["hidden"] == 32 and cfg["pilots"] == 3

    def test_kon_override(self, tmp_path):
        run(["complexity", "--kon", "26", "--outdir", str(tmp_path), "--json"])
        data = json.loads((tmp_path / "complexity.json").read_text())
        assert data["parameters"]["k_on"] == 26
        assert data["parameters"]["n_in"] == 2 * 26 * 100


class TestGenDatasetCommand:
    def test_smoke_run(self, tmp_path, profile_path):
        code = run(
            [
                "gen-dataset",
                "--frames",
                "4",
                "--symbols",
                "12",
                "--scenario",
                "very_high",
                "--scheme",
                "qpsk",
                "--profile",
                profile_path,
                "--seed",
                "5",
                "--outdir",
                str(tmp_path),
                "--out",
                "smoke",
            ]
        )
        assert code == 0
        ds = load_dataset(tmp_path / "smoke.train.ds")
        assert len(ds) == 4
        assert ds.k_on == 8
        assert not (tmp_path / "smoke.test.ds").exists()

    def test_train_and_test_splits(self, tmp_path, profile_path):
        run(
            [
                "gen-dataset",
                "--train-frames",
                "5",
                "--test-frames",
                "3",
                "--symbols",
                "10",
                "--profile",
                profile_path,
                "--outdir",
                str(tmp_path),
            ]
        )
        assert len(load_dataset(tmp_path / "dataset.train.ds")) == 5
        assert len(load_dataset(tmp_path / "dataset.test.ds")) == 3

    def test_rerun_byte_identical(self, tmp_path, profile_path):
        args = [
            "gen-dataset",
            "--frames",
            "3",
            "--symbols",
            "10",
            "--profile",
            profile_path,
            "--seed",
            "9",
        ]
        outdir = tmp_path / "a"
        run(args + ["--outdir", str(outdir)])
        names = ("dataset.train.ds", "dataset.train.ds.json", "dataset.config.json")
        first = {name: (outdir / name).read_bytes() for name in names}
        run(args + ["--outdir", str(outdir)])
        for name in names:
            assert (outdir / name).read_bytes() == first[name]


@pytest.fixture
def small_dataset(tmp_path, profile_path):
    run(
        [
            "gen-dataset",
            "--train-frames",
            "12",
            "--test-frames",
            "4",
            "--symbols",
            "12",
            "--scheme",
            "qpsk",
            "--profile",
            profile_path,
            "--seed",
            "11",
            "--outdir",
            str(tmp_path),
            "--out",
            "ds",
        ]
    )
    return tmp_path


class TestTrainCommand:
    def test_smoke_training_run(self, small_dataset, tmp_path):
        code = run(
            [
                "train",
                "--train",
                str(small_dataset / "ds.train.ds"),
                "--val",
                str(small_dataset / "ds.test.ds"),
                "--cell",
                "gru",
                "--hidden",
                "6",
                "--epochs",
                "2",
                "--batch-size",
                "8",
                "--outdir",
                str(tmp_path),
                "--out",
                "m",
            ]
        )
        assert code == 0
        model = load_model(tmp_path / "m.weights")
        assert model.kind == "gru"
        assert model.hidden_size == 6
        assert model.meta["k_on"] == 8
        history = list(csv.DictReader((tmp_path / "m.history.csv").open()))
        assert len(history) == 2
        assert float(history[0]["val_mse"]) > 0

    def test_missing_dataset_is_error(self, tmp_path):
        assert run(["train", "--outdir", str(tmp_path)]) == 2

    def test_cell_variants(self, small_dataset, tmp_path):
        for cell in ("lstm", "srnn"):
            code = run(
                [
                    "train",
                    "--train",
                    str(small_dataset / "ds.train.ds"),
                    "--cell",
                    cell,
                    "--hidden",
                    "4",
                    "--epochs",
                    "1",
                    "--batch-size",
                    "8",
                    "--outdir",
                    str(tmp_path),
                    "--out",
                    cell,
                ]
            )
            assert code == 0
            assert load_model(tmp_path / f"{cell}.weights").kind == cell


class TestEvaluateCommand:
    def test_sweep_with_model(self, small_dataset, tmp_path, profile_path):
        run(
            [
                "train",
                "--train",
                str(small_dataset / "ds.train.ds"),
                "--hidden",
                "4",
                "--epochs",
                "1",
                "--batch-size",
                "8",
                "--outdir",
                str(tmp_path),
                "--out",
                "m",
            ]
        )
        code = run(
            [
                "evaluate",
                "--scenario",
                "very_high",
                "--scheme",
                "qpsk",
                "--snr",
                "0:20:40",
                "--frames",
                "4",
                "--symbols",
                "12",
                "--profile",
                profile_path,
                "--estimator",
                "perfect",
                "--estimator",
                "als-wi",
                "--estimator",
                f"bi-gru:{tmp_path / 'm.weights'}",
                "--workers",
                "1",
                "--emit-plot-script",
                "--outdir",
                str(tmp_path),
            ]
        )
        assert code == 0
        rows = list(csv.DictReader((tmp_path / "sweep.csv").open()))
        assert len(rows) == 3 * 3  # estimators x SNR points
        assert {r["estimator"] for r in rows} == {"perfect", "als-wi", "bi-gru"}
        assert (tmp_path / "sweep_plot.py").exists()

    def test_perfect_needs_no_weights(self, tmp_path, profile_path):
        code = run(
            [
                "evaluate",
                "--snr",
                "10",
                "--frames",
                "2",
                "--symbols",
                "10",
                "--scheme",
                "qpsk",
                "--profile",
                profile_path,
                "--estimator",
                "perfect",
                "--outdir",
                str(tmp_path),
            ]
        )
        assert code == 0

    def test_unknown_estimator_is_error(self, tmp_path):
        assert run(["evaluate", "--estimator", "wizard", "--outdir", str(tmp_path)]) == 2


class TestGradcheckCommand:
    def test_passes_at_default_dims(self, tmp_path, capsys):
        code = run(["gradcheck", "--outdir", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 3

    def test_tolerance_failure_sets_exit_code(self, tmp_path, capsys):
        code = run(["gradcheck", "--tol", "1e-18", "--outdir", str(tmp_path)])
        assert code == 1
        assert "FAIL" in capsys.readouterr().out


class TestConfigFile:
    def test_flags_win_over_config(self, tmp_path):
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps({"kon": 26, "hidden": 64}))
        run(
            [
                "complexity",
                "--config",
                str(cfg_path),
                "--kon",
                "13",
                "--json",
                "--outdir",
                str(tmp_path),
            ]
        )
        data = json.loads((tmp_path / "complexity.json").read_text())
        assert data["parameters"]["k_on"] == 13  # flag beats config
        assert data["parameters"]["hidden"] == 64  # config beats default
        echoed = json.loads((tmp_path / "complexity.config.json").read_text())
        assert echoed["kon"] == 13 and echoed["hidden"] == 64

    def test_unknown_config_key_is_error(self, tmp_path):
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps({"quantum": 1}))
        assert run(["complexity", "--config", str(cfg_path), "--outdir", str(tmp_path)]) == 2
