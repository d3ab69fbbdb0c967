"""Cross-validated bandwidth choice for the structured estimator.

The criterion is

    Q(b) = n^{-1} [ sum_c alpha_hat(c)^2 E_c - 2 sum_{c: O_c > 0} alpha_hat^{[c]}(c) O_c ]

where ``alpha_hat`` is the backfitted product and ``alpha_hat^{[c]}`` is the
same estimator refitted without one event of cell ``c`` (every event of a
cell gives the same leave-out fit).  With ``leave_out='cell'`` all events of
the cell are removed at once instead.  The exposure is not touched by a
leave-out, so the smoothed occurrence of a leave-out fit is the full-data
smoothed occurrence minus a multiple of one kernel column, and each refit
starts from the full-data fit.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .backfit import BackfitConfig, MultiplicativeFit, backfit
from .data import OccurrenceExposureGrid
from .kernels import as_bandwidth
from .smoothing import LinearSmoother

__all__ = ["CvResult", "CvGrid", "cv_evaluate", "cv_score", "select_bandwidth"]


@dataclass(frozen=True)
class CvResult:
    """Score of one bandwidth with the pieces it is built from."""

    bandwidth: tuple
    score: float
    converged: bool
    sweeps: int = 0
    fit_term: float = float("nan")
    leave_out_term: float = float("nan")
    n: float = float("nan")
    leave_outs: int = 0
    leave_outs_unconverged: int = 0
    message: str = ""


@dataclass(frozen=True)
class CvGrid:
    """Scores of all candidate bandwidths and the selected one."""

    candidates: tuple
    scores: tuple
    best_index: int
    results: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("candidates must be nonempty")
        if len(self.scores) != len(self.candidates):
            raise ValueError("one score per candidate")

    @property
    def best(self) -> tuple:
        return self.candidates[self.best_index]

    @property
    def best_score(self) -> float:
        return self.scores[self.best_index]

    def to_csv(self) -> str:
        ndim = len(self.candidates[0])
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"b{j}" for j in range(ndim)] + ["score", "converged", "sweeps", "best"])
        for i, (cand, res) in enumerate(zip(self.candidates, self.results)):
            w.writerow(
                [repr(float(b)) for b in cand]
                + [repr(float(res.score)), int(res.converged), res.sweeps, int(i == self.best_index)]
            )
        return buf.getvalue()


def cv_evaluate(
    grid: OccurrenceExposureGrid,
    kernel="epanechnikov",
    bandwidth=2.0,
    config: BackfitConfig | None = None,
    method: str = "ll",
    n: float | None = None,
    leave_out: str = "event",
) -> CvResult:
    """Cross-validation score of one bandwidth with diagnostics.

    Parameters
    ----------
    grid : OccurrenceExposureGrid
    kernel : str or Kernel
    bandwidth : float or sequence of float
        Per-axis bandwidth in cells.
    config : BackfitConfig, optional
    method : {'ll', 'lc'}
    n : float, optional
        Normalizing constant; defaults to the total occurrence.
    leave_out : {'event', 'cell'}
        Remove one event or the whole occurrence of the cell.  Removing a
        whole cell while keeping its exposure biases the leave-out estimate
        down by the cell's own kernel weight, which favours large
        bandwidths.

    Returns
    -------
    CvResult
        ``score`` is ``inf`` when the full-data fit does not converge.
    """
    if leave_out not in ("event", "cell"):
        raise ValueError("leave_out must be 'event' or 'cell'")
    cfg = config or BackfitConfig()
    occ = np.where(grid.support, grid.occurrence, 0.0)
    if not np.any(occ > 0):
        raise ValueError("no events")
    b = tuple(float(x) for x in as_bandwidth(bandwidth, occ.ndim))
    n = float(occ.sum()) if n is None else float(n)

    sm = LinearSmoother(grid.exposure, grid.support, kernel, b, method, grid.bin_width)
    raw = sm.smooth_occurrence(occ)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fit = backfit(sm.surface(raw), cfg)
    if not fit.converged:
        return CvResult(b, math.inf, False, fit.iterations, n=n, message=f"residual {fit.residual:.3g}")

    product = fit.product()
    fit_term = float(np.sum(np.where(grid.support, product**2 * grid.exposure, 0.0)))
    leave_term = 0.0
    unconverged = 0
    cells = np.argwhere(occ > 0)
    for cell in cells:
        idx = tuple(int(i) for i in cell)
        removed = occ[idx] if leave_out == "cell" else min(1.0, occ[idx])
        value, ok = _leave_out_value(sm, raw, removed, idx, cfg, fit)
        unconverged += not ok
        leave_term += value * occ[idx]
    score = (fit_term - 2.0 * leave_term) / n
    return CvResult(
        b,
        score,
        True,
        fit.iterations,
        fit_term=fit_term,
        leave_out_term=leave_term,
        n=n,
        leave_outs=len(cells),
        leave_outs_unconverged=unconverged,
    )


def _leave_out_value(sm: LinearSmoother, raw, count, idx, cfg, fit: MultiplicativeFit):
    """Structured estimate at ``idx`` after removing that cell's occurrence."""
    reduced = raw - count * sm.column(idx)
    surface = sm.surface(reduced)
    if not surface.smoothed_occurrence.sum() > 0:
        return 0.0, True
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            refit = backfit(surface, cfg, init=fit)
        except ValueError:
            # an axis lost all its occurrence: the estimate is zero there
            return 0.0, True
    value = refit.alpha_star
    for c, i in zip(refit.components, idx):
        value *= c[i]
    return float(value), refit.converged


def cv_score(
    grid, kernel="epanechnikov", bandwidth=2.0, config=None, method="ll", n=None, leave_out="event"
) -> float:
    """Cross-validation criterion of one bandwidth; ``inf`` on non-convergence."""
    return cv_evaluate(grid, kernel, bandwidth, config, method, n, leave_out).score


def select_bandwidth(
    grid: OccurrenceExposureGrid,
    kernel="epanechnikov",
    candidates=(),
    config: BackfitConfig | None = None,
    method: str = "ll",
    workers: int = 1,
    score_fn: Callable | None = None,
    leave_out: str = "event",
) -> CvGrid:
    """Score every candidate and pick the minimizer.

    Ties go to the lexicographically smallest bandwidth.  ``score_fn`` may
    replace :func:`cv_evaluate`; it is called as
    ``score_fn(grid, kernel, bandwidth, config)`` and may return a float or
    a :class:`CvResult`.

    Raises
    ------
    ValueError
        If ``candidates`` is empty or no candidate has a finite score.
    """
    cands = [tuple(float(x) for x in as_bandwidth(c, grid.occurrence.ndim)) for c in candidates]
    if not cands:
        raise ValueError("candidates must be nonempty")
    cfg = config or BackfitConfig()

    def run(b):
        if score_fn is None:
            return cv_evaluate(grid, kernel, b, cfg, method, leave_out=leave_out)
        out = score_fn(grid, kernel, b, cfg)
        if isinstance(out, CvResult):
            return out
        out = float(out)
        return CvResult(b, out, not math.isnan(out) and out != math.inf)

    if workers > 1 and len(cands) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, cands))
    else:
        results = [run(b) for b in cands]

    scores = tuple(float(r.score) for r in results)
    usable = [i for i, s in enumerate(scores) if not (math.isnan(s) or s == math.inf)]
    if not usable:
        detail = "; ".join(f"{c}: {r.message or 'not converged'}" for c, r in zip(cands, results))
        raise ValueError(f"no candidate bandwidth converged ({detail})")
    lowest = min(scores[i] for i in usable)
    best = min((i for i in usable if scores[i] == lowest), key=lambda i: cands[i])
    return CvGrid(tuple(cands), scores, best, tuple(results))
