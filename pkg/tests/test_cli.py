import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from gradflowlab.cli import (EXIT_CONFIG, EXIT_DIAG, EXIT_OK, list_systems,
                             load_scenario, main, run_scenario, sweep,
                             validate_scenario)
from gradflowlab.errors import ParseError, ValidationError


def write(tmp_path: Path, name: str, text: str) -> Path:
    p = tmp_path / name
    p.write_text(text)
    return p


QUADRATIC_SCENARIO = """
system = "quadratic"
u0 = [1.0]
t0 = 0.0
T = 1.0
N = 20
seed = 0
diagnostics = ["edb", "edi", "slope_estimate", "modulus"]
"""

ERIS_SCENARIO = """
system = "eris_toy"
u0 = [0.0]
t0 = 0.0
T = 2.0
N = 40
diagnostics = ["stability", "energetic", "rate_independence", "apriori"]

[params]
a = 1.0
lam = 2.0
"""


def test_load_and_validate(tmp_path):
    p = write(tmp_path, "ok.toml", QUADRATIC_SCENARIO)
    sc = validate_scenario(load_scenario(p))
    assert sc["system"] == "quadratic"
    with pytest.raises(ParseError):
        load_scenario(tmp_path / "missing.toml")
    bad = write(tmp_path, "bad.toml", "system = [unclosed")
    with pytest.raises(ParseError):
        load_scenario(bad)
    with pytest.raises(ValidationError):
        validate_scenario({"system": "nope"})
    with pytest.raises(ValidationError):
        validate_scenario({"system": "quadratic", "N": 0})


def test_run_quadratic_scenario(tmp_path):
    p = write(tmp_path, "quad.toml", QUADRATIC_SCENARIO)
    out = tmp_path / "out"
    assert run_scenario(p, out) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert all(d.get("pass", False) for d in report["diagnostics"])
    with open(out / "trajectory.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "u_0", "energy", "slope", "speed",
                       "step_increment", "edi_cum_residual"]
    assert len(rows) == 22           # header + 21 nodes
    # node values follow the resolvent recursion
    tau = 1.0 / 20
    u5 = float(rows[6][1])
    assert u5 == pytest.approx((1 + tau) ** -5, abs=1e-12)


def test_run_eris_scenario(tmp_path):
    p = write(tmp_path, "eris.toml", ERIS_SCENARIO)
    out = tmp_path / "out"
    assert run_scenario(p, out) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["oracle_error"] <= 1e-12
    names = {d["name"] for d in report["diagnostics"]}
    assert names == {"stability", "energetic", "rate_independence", "apriori"}
    assert all(d["pass"] for d in report["diagnostics"])


def test_malformed_partition_exit_code(tmp_path):
    p = write(tmp_path, "bad.toml", 'system = "quadratic"\nN = 0\n')
    assert run_scenario(p, tmp_path / "o") == EXIT_CONFIG


def test_unknown_system_exit_code(tmp_path):
    p = write(tmp_path, "bad.toml", 'system = "not_a_system"\n')
    assert run_scenario(p, tmp_path / "o") == EXIT_CONFIG


def test_determinism_bit_identical(tmp_path):
    p = write(tmp_path, "quad.toml", QUADRATIC_SCENARIO)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert run_scenario(p, out1) == EXIT_OK
    assert run_scenario(p, out2) == EXIT_OK
    assert (out1 / "trajectory.csv").read_bytes() == (out2 / "trajectory.csv").read_bytes()
    r1 = json.loads((out1 / "report.json").read_text())
    r2 = json.loads((out2 / "report.json").read_text())
    r1.pop("wall_time_s"), r2.pop("wall_time_s")
    assert r1 == r2


def test_sweep_tau(tmp_path):
    p = write(tmp_path, "quad.toml", QUADRATIC_SCENARIO)
    out = tmp_path / "sweep"
    assert sweep(p, "tau", [0.1, 0.01, 0.001], out) == EXIT_OK
    table = json.loads((out / "sweep.json").read_text())["sweep"]
    errs = [row["error"] for row in table["rows"]]
    assert errs[0] > errs[1] > errs[2]
    assert table["fitted_order"] >= 0.8


def test_sweep_single_value(tmp_path):
    p = write(tmp_path, "quad.toml", QUADRATIC_SCENARIO)
    out = tmp_path / "sweep1"
    assert sweep(p, "tau", [0.05], out) == EXIT_OK
    table = json.loads((out / "sweep.json").read_text())["sweep"]
    assert len(table["rows"]) == 1
    assert table["fitted_order"] is None


def test_check_scenarios(tmp_path):
    p = write(tmp_path, "polar.toml", 'system = "polar_check"\n')
    assert run_scenario(p, tmp_path / "o") == EXIT_OK
    p2 = write(tmp_path, "mean.toml",
               'system = "mean_limits"\n[params]\nn = 256\nepsilon = 0.0625\n')
    assert run_scenario(p2, tmp_path / "o2") == EXIT_OK


def test_list_systems(capsys):
    assert list_systems() == EXIT_OK
    captured = capsys.readouterr()
    assert "eris_toy" in captured.out and "fp_jko" in captured.out


def test_main_entrypoint(tmp_path):
    p = write(tmp_path, "quad.toml", QUADRATIC_SCENARIO)
    assert main(["run", str(p), "--out", str(tmp_path / "m")]) == EXIT_OK
    assert main(["list-systems"]) == EXIT_OK
    assert main(["sweep", str(p), "--param", "tau", "--values", "bogus"]) == EXIT_CONFIG


def test_csv_float_format(tmp_path):
    p = write(tmp_path, "quad.toml", QUADRATIC_SCENARIO)
    out = tmp_path / "fmt"
    run_scenario(p, out)
    text = (out / "trajectory.csv").read_text()
    assert "\r" not in text            # LF line endings
    value = text.splitlines()[2].split(",")[1]
    assert float(value) == float(format(float(value), ".17g"))
