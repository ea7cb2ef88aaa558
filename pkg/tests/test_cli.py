#!/usr/bin/env python3
"""Tests for the sphereval command line."""
import os
import sys
import tempfile

import numpy as np
import pytest

# Add parent directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from bin.cli import run

EXAMPLES = os.path.join(os.path.dirname(__file__), "..", "config", "examples")


def example(name):
    return os.path.join(EXAMPLES, name)


@pytest.fixture
def temp_dir():
    with tempfile.TemporaryDirectory() as path:
        yield path


def read_lines(path):
    with open(path, "r") as f:
        return f.read().splitlines()


def test_rotinv_on_constant_one_prints_eight_pi(capsys):
    code = run(
        ["valuation", "eval", "--spec", example("rotinv.json"), "--field", example("const1.json"),
         "--grid", "gauss:16"]
    )
    assert code == 0
    assert float(capsys.readouterr().out.strip()) == pytest.approx(8 * np.pi)


def test_area_valuation_on_cone(capsys):
    code = run(
        ["valuation", "eval", "--spec", example("area_x1_cubed.json"), "--body",
         example("cone.json")]
    )
    assert code == 0
    assert float(capsys.readouterr().out.strip()) == pytest.approx(-0.8 * np.pi)


def test_area_valuation_needs_a_body():
    assert run(["valuation", "eval", "--spec", example("area_x1_cubed.json")]) == 2


def test_valuation_check_rejects_body_valuations():
    for suite in ("valuation-property", "invariance", "degree"):
        argv = ["valuation", "check", "--suite", suite, "--spec", example("area_x1_cubed.json")]
        assert run(argv + ["--grid", "icosphere:1", "--cases", "1", "--out", "-"]) == 2


def test_find_delta(capsys):
    assert run(["counterexample", "find-delta", "--n", "4"]) == 0
    assert capsys.readouterr().out.strip() == "0.917"


def test_verify_estimate_exit_codes(capsys):
    assert run(["counterexample", "verify-estimate", "--n", "4", "--delta", "0.917"]) == 0
    assert "violations=0" in capsys.readouterr().out
    assert run(["counterexample", "verify-estimate", "--n", "4", "--delta", "0.5"]) == 1


def test_usage_errors():
    assert run([]) == 2
    assert run(["valuation"]) == 2
    assert run(["counterexample", "find-delta", "--n", "four"]) == 2
    assert run(["counterexample", "verify-estimate", "--delta", "abc"]) == 2


def test_bad_inputs(temp_dir):
    assert run(["field", "norms", "--field", "/nonexistent.json"]) == 2
    assert run(["grid", "dump", "--grid", "cube:3", "--out", os.path.join(temp_dir, "g")]) == 2
    assert run(["grid", "dump", "--grid", "icosphere:2", "--n", "4",
                "--out", os.path.join(temp_dir, "g")]) == 2


def test_grid_dump_and_reuse(temp_dir, capsys):
    path = os.path.join(temp_dir, "grid.csv")
    assert run(["grid", "dump", "--grid", "icosphere:2", "--out", path]) == 0
    lines = read_lines(path)
    assert lines[0] == "3,320,icosphere,0"
    assert len(lines) == 1 + 320
    capsys.readouterr()

    assert run(["field", "norms", "--field", example("disk_bump.json"), "--grid", path]) == 0
    out = dict(line.split("=", 1) for line in capsys.readouterr().out.splitlines())
    assert out["grid"] == "icosphere:2"
    assert float(out["sup_norm"]) == pytest.approx(1.0)


def test_field_eval(capsys):
    assert run(["field", "eval", "--field", example("disk_bump.json"), "--x", "0,0,1",
                "--x", "1,0,0"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert float(lines[0].split("\t")[1]) == pytest.approx(-1.0)
    assert float(lines[1].split("\t")[1]) == pytest.approx(0.0)


def test_body_measure_and_pair(temp_dir, capsys):
    path = os.path.join(temp_dir, "measure.csv")
    assert run(["body", "measure", "--body", example("cube.json"), "--out", path]) == 0
    lines = read_lines(path)
    assert lines[0] == "type,dir_or_param,mass_or_coeff"
    assert sum(line.startswith("atom,") for line in lines) == 6
    assert lines[-1].startswith("# version=")
    capsys.readouterr()

    assert run(["body", "pair", "--body", example("cone.json"), "--test", "one"]) == 0
    lateral = np.pi * 2.0 * np.sqrt(5.0)
    assert float(capsys.readouterr().out) == pytest.approx(4 * np.pi + lateral)


def test_valuation_check_report(temp_dir):
    path = os.path.join(temp_dir, "report.csv")
    code = run(["--quiet", "valuation", "check", "--suite", "invariance", "--spec",
                example("theta2_even.json"), "--grid", "gauss:16", "--cases", "3", "--out", path])
    assert code == 0
    lines = read_lines(path)
    assert lines[0] == "case,residual,tol,pass"
    assert [line.split(",")[-1] for line in lines[1:4]] == ["pass"] * 3

    code = run(["--quiet", "valuation", "check", "--suite", "invariance", "--spec",
                example("theta2_identity.json"), "--grid", "gauss:16", "--cases", "3",
                "--out", path])
    assert code == 1


def test_valuation_check_to_stdout(capsys):
    code = run(["valuation", "check", "--suite", "pde", "--spec", example("theta2_even.json"),
                "--cases", "4"])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "case,residual,tol,pass"
    assert len(lines) == 1 + 4 + 1


def test_pde_suite_needs_a_theta2_spec():
    assert run(["valuation", "check", "--suite", "pde", "--spec", example("rotinv.json")]) == 2


def test_counterexample_sweep(temp_dir, capsys):
    path = os.path.join(temp_dir, "sweep.csv")
    code = run(["--quiet", "counterexample", "sweep", "--n", "4", "--kmin", "32", "--kmax", "128",
                "--grid", "mc:500:seed0", "--out", path])
    assert code == 0
    lines = read_lines(path)
    assert lines[0] == "k,N,nu_fk,sup_norm,lip_est,d_tau,ties"
    assert [line.split(",")[0] for line in lines[1:4]] == ["32", "64", "128"]
    out = capsys.readouterr().out
    assert "nu exponent" in out
    assert "tau verdict" in out


def test_sweep_rejects_bad_parameters():
    assert run(["counterexample", "sweep", "--n", "4", "--p", "2.0", "--kmax", "64",
                "--grid", "mc:100:seed0", "--out", "-"]) == 2


def test_suite_subset(temp_dir, capsys):
    path = os.path.join(temp_dir, "suite.csv")
    code = run(["--quiet", "suite", "all", "--quick", "--only", "pde,geometry,equivariance",
                "--grid", "icosphere:2", "--out", path])
    assert code == 0
    lines = read_lines(path)
    assert lines[0] == "case,residual,tol,pass"
    assert all(line.endswith(",pass") for line in lines[1:-1])
    assert "sphereval" in capsys.readouterr().out


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
