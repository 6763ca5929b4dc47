from __future__ import annotations

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from phoenixr.cli import main
from phoenixr.model import PhoenixRModel, ShockParams, simulate

MODEL = PhoenixRModel((ShockParams(0, 3000, 0.7 / 3000, 0.15, 0.9),))


@pytest.fixture
def files(tmp_path):
    model = tmp_path / "model.json"
    model.write_text(json.dumps(MODEL.to_json()))
    series = tmp_path / "one.txt"
    series.write_text("\n".join(repr(float(v)) for v in simulate(MODEL, 120).popularity.values))
    return tmp_path, model, series


def run(*argv):
    return main([str(a) for a in argv])


def test_help_and_version(capsys):
    assert run("--help") == 0
    assert run("--version") == 0
    assert run("fit", "--help") == 0


def test_usage_errors(files):
    tmp, _, series = files
    assert run() == 1
    assert run("frobnicate") == 1
    assert run("fit", "--series", series) == 1
    assert run("fit", "--series", series, "--out", tmp / "f.json", "--jobs", "0") == 1


def test_missing_input_is_exit_2(tmp_path):
    assert run("fit", "--series", tmp_path / "nope.txt", "--out", tmp_path / "f.json") == 2


def test_bad_data_is_exit_2(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("1\n-4\n")
    assert run("fit", "--series", bad, "--out", tmp_path / "f.json") == 2


def test_simulate_outputs(files, validate):
    tmp, model, _ = files
    assert run("simulate", "--model", model, "--n", 50, "--out", tmp / "s.json") == 0
    obj = validate("series", tmp / "s.json")
    assert len(obj["values"]) == 50
    assert run("simulate", "--model", model, "--n", 50, "--out", tmp / "s.csv",
               "--emit", "audience,revisits") == 0
    rows = list(csv.reader(open(tmp / "s.csv")))
    assert len(rows[0]) == 4 and len(rows) == 51


def test_peaks(files, validate):
    tmp, _, series = files
    assert run("peaks", "--series", series, "--out", tmp / "p.json") == 0
    obj = validate("peaks", tmp / "p.json")
    assert obj["starts"][0] == 0


def test_fit_json_validates(files, validate):
    tmp, _, series = files
    assert run("fit", "--series", series, "--out", tmp / "f.json") == 0
    obj = validate("fit", tmp / "f.json")
    assert len(obj["model"]["shocks"]) == 1
    assert obj["rmse"] <= 0.01 * max(simulate(MODEL, 120).popularity.values)


def test_fit_is_byte_reproducible(files):
    tmp, _, series = files
    run("fit", "--series", series, "--seed", 7, "--out", tmp / "a.json")
    run("fit", "--series", series, "--seed", 7, "--out", tmp / "b.json")
    assert (tmp / "a.json").read_bytes() == (tmp / "b.json").read_bytes()


def test_fit_csv_table(files):
    tmp, _, series = files
    assert run("fit", "--series", series, "--out", tmp / "f.csv") == 0
    rows = list(csv.reader(open(tmp / "f.csv")))
    assert rows[0] == ["s", "S0", "beta", "gamma", "omega"] and len(rows) == 2


def test_fit_batch(files, validate):
    tmp, _, series = files
    bad = tmp / "bad.txt"
    bad.write_text("x\n")
    lst = tmp / "list.txt"
    lst.write_text(f"{series.name}\n")
    assert run("fit-batch", "--list", lst, "--out", tmp / "fits") == 0
    summary = validate("summary", tmp / "fits" / "summary.json")
    validate("fit", tmp / "fits" / summary["fits"][0]["fit"])
    lst.write_text(f"{series.name}\n{bad.name}\n")
    assert run("fit-batch", "--list", lst, "--out", tmp / "fits2") == 2
    summary = json.loads((tmp / "fits2" / "summary.json").read_text())
    assert summary["fits"][1]["error"] and summary["fits"][1]["fit"] is None


def test_characterize(tmp_path, validate):
    ev = tmp_path / "ev.csv"
    rows = ["timestamp,user_id,object_id"]
    rng = np.random.default_rng(0)
    for i in range(3000):
        rows.append(f"{int(rng.integers(0, 30 * 86400))},u{rng.integers(50)},o{rng.integers(3)}")
    ev.write_text("\n".join(rows) + "\n")
    out = tmp_path / "c.json"
    assert run("characterize", "--events", ev, "--windows", "1h,1d", "--min-pop", 100,
               "--out", out, "--ccdf-csv", tmp_path / "ccdf.csv") == 0
    obj = validate("characterize", out)
    assert [w["window"] for w in obj["windowed"]] == ["1h", "1d"]
    assert obj["windowed"][0]["median"] is None  # about one event per hourly cell
    assert obj["windowed"][1]["windows_counted"] > 0
    assert open(tmp_path / "ccdf.csv").readline().strip() == "threshold,fraction"
    assert run("characterize", "--events", ev, "--windows", "1y", "--out", out) == 2


def test_gen_synthetic_and_evaluate(files, validate):
    tmp, model, _ = files
    paths = []
    for k in range(2):
        out = tmp / f"syn{k}.json"
        assert run("gen-synthetic", "--model", model, "--n", 120, "--noise", 0.05, "--seed", k,
                   "--out", out, "--truth", tmp / f"truth{k}.json") == 0
        validate("series", out)
        validate("truth", tmp / f"truth{k}.json")
        paths.append(out.name)
    lst = tmp / "list.txt"
    lst.write_text("\n".join(paths) + "\n")
    rep = tmp / "rep.json"
    assert run("evaluate", "--list", lst, "--splits", "0.5", "--deltas", "1,7", "--models", "td",
               "--out", rep) == 0
    obj = validate("forecast", rep)
    assert len(obj["per_series"]) == 4
    rows = list(csv.reader(open(tmp / "rep.csv")))
    assert rows[0] == ["series", "model", "split", "delta", "rmse"] and len(rows) == 5
    assert run("evaluate", "--list", lst, "--models", "arima", "--out", rep) == 1


def test_console_script_entry_point():
    done = subprocess.run([sys.executable, "-m", "phoenixr.cli", "--version"],
                          capture_output=True, text=True)
    assert done.returncode == 0 and done.stdout.strip()
