"""Shared fixtures and a suite-wide audit of converged backfitting runs.

Every call of :func:`sbhazard.backfit.backfit` made anywhere in the test
session (directly, inside cross-validation or through the CLI) is routed
through :func:`_audited_backfit`, which checks the fixed-point contract on
each converged result: the residual stays within the configured tolerance
and the total fitted occurrence equals the total smoothed occurrence to
1e-6 relative.  A violation fails the test that triggered it.
"""

import importlib

import numpy as np
import pytest

import sbhazard
from sbhazard import BackfitConfig

# the package re-exports the function ``backfit`` under the submodule's name
_bf = importlib.import_module("sbhazard.backfit")
_bw = importlib.import_module("sbhazard.bandwidth")
_cli = importlib.import_module("sbhazard.cli")

AUDIT = {"checked": 0, "violations": []}
VERDICTS: dict = {}  # criterion number -> (PASS/FAIL, detail), filled by the acceptance suite
_original_backfit = _bf.backfit


def check_fixed_point(surface, fit, config=None):
    """Return a description of the first violated condition, or ``None``."""
    cfg = config or BackfitConfig()
    res = _bf.residual(surface, fit, cfg.denominator_floor)
    if res > cfg.tolerance:
        return f"residual {res:.3g} above tolerance {cfg.tolerance:.3g}"
    total = float(surface.smoothed_occurrence.sum())
    fitted = float(_bf.fitted_occurrence(surface, fit).sum())
    if abs(fitted - total) > 1e-6 * abs(total):
        return f"fitted occurrence {fitted!r} differs from smoothed occurrence {total!r}"
    return None


def _audited_backfit(surface, config=None, init=None):
    fit = _original_backfit(surface, config, init)
    if fit.converged:
        AUDIT["checked"] += 1
        problem = check_fixed_point(surface, fit, config)
        if problem:
            AUDIT["violations"].append(problem)
            raise AssertionError(f"fixed-point contract violated: {problem}")
    return fit


for _mod in (sbhazard, _bf, _bw, _cli):
    _mod.backfit = _audited_backfit


def pytest_collection_modifyitems(items):
    # acceptance checks run last so the fixed-point audit covers the whole session
    items.sort(key=lambda item: item.module.__name__.endswith("test_acceptance"))


def pytest_terminal_summary(terminalreporter):
    terminalreporter.write_line(
        f"fixed-point audit: {AUDIT['checked']} converged backfitting runs checked, "
        f"{len(AUDIT['violations'])} violations"
    )
    for number in sorted(VERDICTS):
        status, detail = VERDICTS[number]
        terminalreporter.write_line(f"criterion {number}: {status} - {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
