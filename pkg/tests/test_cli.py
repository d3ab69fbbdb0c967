"""Integration tests for the command-line front end.

Golden outputs live in ``tests/golden/<case>/``.  Set ``SBHAZARD_REGEN_GOLDEN=1``
to rewrite them after a deliberate, verified change in output.
"""

import json
import os
import shutil
from pathlib import Path

import numpy as np
import pytest

from sbhazard import (
    cash_flow,
    conditional_density,
    cv_score,
    load_events,
    load_triangle,
    smooth_local_linear,
    build_occurrence_exposure,
    backfit,
    BackfitConfig,
)
from sbhazard.cli import main

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"
TRIANGLE = str(DATA / "triangle10.csv")
SCENARIO = str(DATA / "scenario.json")
REGEN = os.environ.get("SBHAZARD_REGEN_GOLDEN") == "1"

CASES = {
    "simulate": ["simulate", "--config", SCENARIO],
    "estimate": ["estimate", "--triangle", TRIANGLE, "--bandwidth", "2,3"],
    "cv": ["cv", "--triangle", TRIANGLE, "--candidates", "2,3x2,3"],
    "forecast": ["forecast", "--triangle", TRIANGLE, "--candidates", "2,3x2,3", "--baseline", "clm", "--periods", "10"],
}


def run(args, out):
    return main([*args, "--out", str(out), "--workers", "1"])


def snapshot(folder):
    return {p.name: p.read_bytes() for p in sorted(Path(folder).iterdir())}


@pytest.mark.parametrize("case", sorted(CASES))
def test_golden_outputs(case, tmp_path):
    assert run(CASES[case], tmp_path) == 0
    got = snapshot(tmp_path)
    target = GOLDEN / case
    if REGEN:
        shutil.rmtree(target, ignore_errors=True)
        shutil.copytree(tmp_path, target)
    want = snapshot(target)
    assert sorted(got) == sorted(want)
    for name in want:
        assert got[name] == want[name], f"{case}/{name} differs from golden"


@pytest.mark.parametrize("case", sorted(CASES))
def test_byte_deterministic(case, tmp_path):
    assert run(CASES[case], tmp_path / "a") == 0
    assert run(CASES[case], tmp_path / "b") == 0
    assert snapshot(tmp_path / "a") == snapshot(tmp_path / "b")


def test_missing_input_exits_one(tmp_path, capsys):
    assert run(["estimate", "--triangle", str(tmp_path / "nope.csv"), "--bandwidth", "2"], tmp_path) == 1
    assert "error" in capsys.readouterr().err


def test_usage_errors_exit_one(tmp_path):
    assert run(["estimate", "--triangle", TRIANGLE], tmp_path) == 1  # no bandwidth
    assert run(["forecast", "--bandwidth", "2"], tmp_path) == 1  # no input
    with pytest.raises(SystemExit) as exc:
        main(["estimate", "--bandwidth", "x,y"])
    assert exc.value.code == 1


def test_non_convergence_exits_two_and_reports_residual(tmp_path):
    args = ["estimate", "--triangle", TRIANGLE, "--bandwidth", "2,3", "--tolerance", "1e-16", "--max-iter", "1"]
    assert run(args, tmp_path) == 2
    diag = json.loads((tmp_path / "diagnostics.json").read_text())
    assert diag["converged"] is False and diag["residual"] > 0
    assert any("did not converge" in w for w in diag["warnings"])
    assert (tmp_path / "fit.json").exists()


def test_simulate_round_trip_into_estimate(tmp_path):
    assert run(["simulate", "--config", SCENARIO], tmp_path) == 0
    meta = json.loads((tmp_path / "simulation.json").read_text())
    events = load_events(tmp_path / "events.csv", meta["scenario"]["horizon"])
    assert len(events) == meta["retained"]
    args = ["estimate", "--events", str(tmp_path / "events.csv"), "--horizon", "10", "--bandwidth", "2"]
    assert run(args, tmp_path / "fit") == 0
    args = ["estimate", "--triangle", str(tmp_path / "triangle.csv"), "--bandwidth", "2"]
    assert run(args, tmp_path / "fit_tri") == 0


def test_simulate_seed_override(tmp_path):
    assert run(["simulate", "--config", SCENARIO, "--seed", "8"], tmp_path / "a") == 0
    assert run(["simulate", "--config", SCENARIO], tmp_path / "b") == 0
    assert (tmp_path / "a" / "events.csv").read_bytes() != (tmp_path / "b" / "events.csv").read_bytes()


def cv_rows(folder):
    lines = (folder / "cv_report.csv").read_text().strip().split("\n")
    return [line.split(",") for line in lines[1:]]


def test_cv_single_candidate(tmp_path):
    assert run(["cv", "--triangle", TRIANGLE, "--candidates", "2,2"], tmp_path) == 0
    rows = cv_rows(tmp_path)
    assert len(rows) == 1 and rows[0][-1] == "1"


def test_cv_flags_failing_candidate(tmp_path):
    # at 13 sweeps the wide bandwidth converges and the narrow one does not
    args = ["cv", "--triangle", TRIANGLE, "--candidates", "2,2;6,6", "--max-iter", "13"]
    assert run(args, tmp_path) == 0
    rows = cv_rows(tmp_path)
    assert rows[0][2:4] == ["inf", "0"] and rows[0][-1] == "0"
    assert rows[1][3] == "1" and rows[1][-1] == "1"


def test_cv_scores_match_library(tmp_path):
    assert run(["cv", "--triangle", TRIANGLE, "--candidates", "2,3x2,3"], tmp_path) == 0
    grid = build_occurrence_exposure(load_triangle(TRIANGLE))
    for b0, b1, score, *_ in cv_rows(tmp_path):
        assert float(score) == cv_score(grid, "epanechnikov", (float(b0), float(b1)))


def test_forecast_total_matches_library(tmp_path):
    args = ["forecast", "--triangle", TRIANGLE, "--bandwidth", "2,3", "--periods", "12", "--baseline", "clm"]
    assert run(args, tmp_path) == 0
    tri = load_triangle(TRIANGLE)
    fit = backfit(smooth_local_linear(build_occurrence_exposure(tri), "epanechnikov", (2.0, 3.0)), BackfitConfig())
    expected = cash_flow(tri, conditional_density(fit), 12)
    data = json.loads((tmp_path / "forecast.json").read_text())
    assert data["total"] == pytest.approx(expected.total, rel=1e-12)
    assert len(data["cash_flow"]) == 12
    assert np.allclose(data["cash_flow"], expected.cash_flow, rtol=1e-12)
    table = (tmp_path / "comparison.csv").read_text().strip().split("\n")
    assert [row.split(",")[0] for row in table[1:]] == ["PH", "CLM"]
    assert len(table[0].split(",")) == 2 + 12


def test_toml_config_with_flag_override(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(f'triangle = "{TRIANGLE}"\nbandwidth = [3.0, 3.0]\nmax_iter = 1\ntolerance = 1e-16\n')
    assert run(["estimate", "--config", str(cfg), "--max-iter", "500", "--tolerance", "1e-8"], tmp_path / "o") == 0
    diag = json.loads((tmp_path / "o" / "diagnostics.json").read_text())
    assert diag["bandwidth"] == [3.0, 3.0] and diag["converged"]
