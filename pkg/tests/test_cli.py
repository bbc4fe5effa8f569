import csv
import json
import subprocess
import sys

import pytest

from berrt.cli import main


def test_csv_to_file(tmp_path):
    out = tmp_path / "r.csv"
    rc = main(["--scenario", "empty", "--samples", "50,80", "--batch", "1", "10",
               "--trials", "2", "--out", str(out), "--quiet"])
    assert rc == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 2 * 2 * 2
    assert {r["n_samples"] for r in rows} == {"50", "80"}


def test_json_and_summary(tmp_path):
    out, summ = tmp_path / "r.json", tmp_path / "s.csv"
    rc = main(["--scenario", "empty", "--samples", "60", "--backend", "serial,parallel",
               "--workers", "2", "--trials", "1", "--format", "json", "--out", str(out),
               "--summary", str(summ), "--validate", "--quiet"])
    assert rc == 0
    recs = json.loads(out.read_text())
    assert [r["backend"] for r in recs] == ["serial", "parallel"]
    assert recs[0]["seed"] != recs[1]["seed"]  # backend id is part of the cell seed
    rows = list(csv.DictReader(summ.open()))
    assert {r["backend"] for r in rows} == {"serial", "parallel"}


def test_scenario_file_path(tmp_path):
    doc = {"bounds": {"xmin": 0, "ymin": 0, "xmax": 2, "ymax": 1}, "obstacles": [],
           "init": [0.1, 0.5], "goal": [1.9, 0.5]}
    p = tmp_path / "w.json"
    p.write_text(json.dumps(doc))
    assert main(["--scenario", str(p), "--samples", "30", "--trials", "1",
                 "--out", str(tmp_path / "o.csv"), "--quiet"]) == 0


def test_invalid_scenario_names_the_field(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"bounds": {"xmin": 0, "ymin": 0, "xmax": 1}, "obstacles": [],
                             "init": [0, 0], "goal": [1, 1]}))
    assert main(["--scenario", str(p), "--samples", "10"]) != 0
    assert "bounds.ymax" in capsys.readouterr().err


def test_missing_scenario(capsys):
    assert main(["--scenario", "nowhere", "--samples", "10"]) != 0
    assert "error" in capsys.readouterr().err


def test_unwritable_output(tmp_path, capsys):
    rc = main(["--scenario", "empty", "--samples", "10", "--trials", "1", "--quiet",
               "--out", str(tmp_path / "no" / "dir.csv")])
    assert rc != 0


@pytest.mark.parametrize("argv", [["--samples", "10"],
                                  ["--scenario", "empty", "--samples", "ten"],
                                  ["--scenario", "empty", "--samples", "10", "--backend", "gpu"]])
def test_bad_arguments_exit_nonzero(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code != 0


@pytest.mark.parametrize("argv", [["--trials", "0"], ["--seed", "-1"], ["--workers", "0"],
                                  ["--epsilon", "-1"]])
def test_bad_values_exit_nonzero(argv, capsys):
    assert main(["--scenario", "empty", "--samples", "10", "--quiet"] + argv) != 0
    assert "error" in capsys.readouterr().err


def test_entry_point_runs_as_module(tmp_path):
    out = tmp_path / "r.csv"
    proc = subprocess.run([sys.executable, "-m", "berrt.cli", "--scenario", "empty",
                           "--samples", "20", "--trials", "1", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "N=20" in proc.stderr
    assert len(out.read_text().splitlines()) == 2
