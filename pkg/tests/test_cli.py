import csv
import json
import subprocess
import sys

import pytest

from opmkit import cli

SMALL = ["simulate", "--runs", "2", "--steps", "15", "--seed", "5", "--pd", "0.9", "0.7"]


def test_simulate_csv_columns(tmp_path):
    out = tmp_path / "r.csv"
    assert cli.main(SMALL + ["--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["method", "p_d", "rmse", "assoc_error", "runs", "seed"]
    assert [(r["method"], r["p_d"]) for r in rows] == [
        ("opm", "0.9"), ("probabilistic", "0.9"), ("opm", "0.7"), ("probabilistic", "0.7")]
    assert all(r["runs"] == "2" and r["seed"] == "5" for r in rows)


def test_json_mirrors_csv(tmp_path):
    c, j = tmp_path / "a.csv", tmp_path / "a.json"
    cli.main(SMALL + ["--out", str(c)])
    cli.main(SMALL + ["--out", str(j), "--format", "json"])
    rows = list(csv.DictReader(c.open()))
    data = json.loads(j.read_text())
    assert [set(d) for d in data] == [set(r) for r in rows]
    for d, r in zip(data, rows):
        assert d["rmse"] == float(r["rmse"]) and d["method"] == r["method"]


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("pd: [0.8]\nruns: 1\nsteps: 10\nseed: 3\nalpha: 0.1\n")
    out = tmp_path / "o.csv"
    assert cli.main(["simulate", "--config", str(cfg), "--seed", "4", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert {r["p_d"] for r in rows} == {"0.8"} and {r["seed"] for r in rows} == {"4"}


def test_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("bogus: 1\n")
    with pytest.raises(SystemExit):
        cli.main(["simulate", "--config", str(cfg)])


def test_invalid_parameters_exit_nonzero(capsys):
    assert cli.main(["simulate", "--runs", "1", "--steps", "5", "--pd", "1.5"]) != 0
    assert cli.main(["simulate", "--runs", "1", "--steps", "5", "--alpha", "1.0"]) != 0


def test_repeated_invocations_are_byte_identical(tmp_path):
    outs = []
    for i in range(2):
        p = tmp_path / f"{i}.csv"
        subprocess.run([sys.executable, "-m", "opmkit.cli"] + SMALL + ["--out", str(p)], check=True)
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_bandit_demo_runs(capsys):
    assert cli.main(["bandit-demo", "--plays", "4", "--seed", "1"]) == 0
    text = capsys.readouterr().out
    assert text.count("play ") == 4 and "counts" in text


def test_validate_quick(capsys):
    assert cli.main(["validate", "--quick"]) == 0
    assert capsys.readouterr().out.count("PASS") == 3
