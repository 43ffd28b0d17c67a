import json

import pandas as pd
import pytest

from cli import main
from services.market_data import write_candles


@pytest.fixture
def candles_csv(losing_series, tmp_path):
    return str(write_candles(losing_series, tmp_path / "candles.csv"))


def hourly(candles_csv):
    return ["--candles", candles_csv, "--input-period", "3600", "--period", "3600"]


def test_show_config_precedence(tmp_path, capsys, candles_csv):
    config = tmp_path / "run.yaml"
    config.write_text("seed: 1\ntraining:\n  top: 9\nsimulation:\n  rounds: 50\n", encoding="utf-8")
    code = main(["--seed", "3", "--config", str(config), "--show-config",
                 "train", *hourly(candles_csv), "--top", "4"])
    assert code == 0
    shown = json.loads(capsys.readouterr().out)
    assert shown["seed"] == 3       # flag beats file
    assert shown["top"] == 4
    assert shown["rounds"] == 50    # file beats default
    assert shown["fees_bps"] == 0


@pytest.mark.parametrize("argv", [
    ["train", "--bogus"],
    ["simulate"],
    [],
])
def test_bad_arguments_exit_2(argv, tmp_path):
    assert main(["--out", str(tmp_path), *argv]) == 2


def test_unknown_config_key_exits_2(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"training": {"topk": 3}}), encoding="utf-8")
    assert main(["--config", str(config), "--show-config"]) == 2


def test_simulate_needs_a_configuration(tmp_path, candles_csv):
    assert main(["--out", str(tmp_path), "simulate", *hourly(candles_csv)]) == 2


def test_bad_data_exits_3(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("timestamp,close\n0,1\n60,oops\n", encoding="utf-8")
    assert main(["--out", str(tmp_path), "periods", "--candles", str(bad)]) == 3
    assert main(["--out", str(tmp_path), "periods", "--candles", str(tmp_path / "missing.csv")]) == 3

    binary = tmp_path / "binary.csv"
    binary.write_bytes(b"\xff\xfe")
    assert main(["--out", str(tmp_path), "periods", "--candles", str(binary)]) == 3
    huge = tmp_path / "huge.csv"
    huge.write_text("timestamp,close\n0,1\n60,1e30\n", encoding="utf-8")
    assert main(["--out", str(tmp_path), "periods", "--candles", str(huge)]) == 3


def test_ingest_synthetic(tmp_path):
    assert main(["--seed", "5", "--out", str(tmp_path), "ingest", "--synthetic", "48"]) == 0
    summary = json.loads((tmp_path / "ingest.json").read_text(encoding="utf-8"))
    assert summary["candles"] == 48
    assert (tmp_path / "manifest_ingest.json").exists()


def test_periods(tmp_path, candles_csv):
    assert main(["--out", str(tmp_path), "periods", *hourly(candles_csv)]) == 0
    data = json.loads((tmp_path / "periods.json").read_text(encoding="utf-8"))
    assert len(data["train"]) >= len(data["test"]) > 0
    assert all(w["role"] == "Train" for w in data["train"])


def test_train_evaluate_and_replay(tmp_path, candles_csv):
    out = tmp_path / "out"
    assert main(["--out", str(out), "train", *hourly(candles_csv), "--method", "avg", "--top", "3"]) == 0
    table = pd.read_csv(out / "training_avg.csv")
    assert list(table.columns) == ["config", "max", "min", "mean", "stddev"]
    assert table["config"].tolist()[-1] == "overall"
    assert len(table) == 4

    assert main(["--out", str(out), "evaluate", *hourly(candles_csv),
                 "--ranking", str(out / "training_avg.json")]) == 0
    testing = pd.read_csv(out / "testing_avg.csv")
    assert testing["config"].tolist() == table["config"].tolist()

    manifest = out / "manifest_train.json"
    assert main(["report", "--manifest", str(manifest)]) == 0

    data = json.loads(manifest.read_text(encoding="utf-8"))
    data["outputs"]["training_avg.csv"] = "0" * 64
    manifest.write_text(json.dumps(data), encoding="utf-8")
    assert main(["report", "--manifest", str(manifest)]) == 3


def test_simulate_is_deterministic(tmp_path, candles_csv):
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = main(["--seed", "11", "--out", str(out), "simulate", *hourly(candles_csv),
                     "--params", "5.1.0.0", "--rounds", "30", "--users", "20", "--deposit", "1000"])
        assert code == 0
        runs.append(out)
    for name in ("epoch_report.json", "settlement.csv", "trace.jsonl", "trace_full.jsonl",
                 "ledger.csv", "latency_samples.csv"):
        assert (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes()

    report = json.loads((runs[0] / "epoch_report.json").read_text(encoding="utf-8"))
    assert report["rounds"] == 30
    assert report["users"] == 20
    assert report["initial_pool"] == 20 * 100_000
    settlement = pd.read_csv(runs[0] / "settlement.csv")
    assert len(settlement) == 20

    assert main(["report", "--manifest", str(runs[0] / "manifest_simulate.json")]) == 0
    summary_out = tmp_path / "summary"
    assert main(["--out", str(summary_out), "report", "--epoch", str(runs[0] / "epoch_report.json")]) == 0
    assert (summary_out / "epoch_summary.txt").read_text(encoding="utf-8").startswith("config 5.1.0.0  rounds 30")
    manifest = json.loads((summary_out / "manifest_report.json").read_text(encoding="utf-8"))
    assert list(manifest["outputs"]) == ["epoch_summary.txt"]
    assert str(runs[0] / "epoch_report.json") in manifest["inputs"]
    assert main(["report", "--manifest", str(summary_out / "manifest_report.json")]) == 0


def test_frequency(tmp_path, candles_csv):
    code = main(["--out", str(tmp_path), "frequency", "--candles", candles_csv, "--input-period", "3600",
                 "--periods", "3600,7200", "--top", "1", "--workers", "1"])
    assert code == 0
    combined = pd.read_csv(tmp_path / "frequency_combined.csv")
    assert list(combined.columns) == ["period", "config", "max", "min", "mean", "stddev"]
    assert sorted(set(combined["period"])) == [3600, 7200]
    assert (tmp_path / "frequency_7200.json").exists()


def test_bad_periods_argument(tmp_path, candles_csv):
    assert main(["--out", str(tmp_path), "frequency", "--candles", candles_csv, "--periods", "0"]) == 2
    assert main(["--out", str(tmp_path), "frequency", "--candles", candles_csv, "--periods", "hourly"]) == 2


def test_zero_rounds_exit_2(tmp_path, candles_csv):
    assert main(["--out", str(tmp_path), "simulate", *hourly(candles_csv),
                 "--params", "5.1.0.0", "--rounds", "0"]) == 2
