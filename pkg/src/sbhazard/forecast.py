"""Reserves and cash flows from a fitted multiplicative hazard.

For a claim underwritten in cell ``z`` the reporting delay has density

    f_z(t) = a0(R0 - t) a1(z) exp(-a1(z) A0(R0 - t)),   A0(s) = int_0^s a0,

with ``a0 = alpha_star * alpha_0`` in reversed time.  The fitted components
are constant on grid cells, so ``A0`` is piecewise linear and every
probability mass used below is an exact difference of two exponentials.
All lengths are in cells; ``period_length`` is reported in time units.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .backfit import MultiplicativeFit
from .data import EventSample, RunoffTriangle, reverse_time

__all__ = [
    "ConditionalDensity",
    "ReserveForecast",
    "conditional_density",
    "reserve",
    "cash_flow",
    "chain_ladder",
    "comparison_table",
]

DENOMINATOR_FLOOR = 1e-12


def _extend(values: np.ndarray, active: np.ndarray):
    """Fill inactive cells with the value of the nearest active cell."""
    values = np.asarray(values, dtype=float)
    idx = np.flatnonzero(active)
    if idx.size == 0:
        raise ValueError("component has no active cells")
    cells = np.arange(values.size)
    nearest = idx[np.abs(cells[:, None] - idx[None, :]).argmin(axis=1)]
    return values[nearest], cells[~active]


@dataclass(frozen=True)
class ConditionalDensity:
    """Reporting-delay densities of all underwriting cells.

    ``hazard0`` is the reversed-time hazard per cell (``alpha_star`` times
    the first component) and ``hazard1`` the underwriting component, both
    already extended over inactive cells.  ``density[z, t]`` is the density
    at the centre of delay cell ``t``.
    """

    hazard0: np.ndarray
    hazard1: np.ndarray
    r0: int
    bin_width: float = 1.0
    extension_cells: tuple = ()
    density: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h0 = np.asarray(self.hazard0, dtype=float)
        h1 = np.asarray(self.hazard1, dtype=float)
        if np.any(h0 < 0) or np.any(h1 < 0):
            raise ValueError("hazard components must be nonnegative")
        if h0.size < self.r0 or h1.size < self.r0:
            raise ValueError("components must cover r0 cells")
        object.__setattr__(self, "hazard0", h0)
        object.__setattr__(self, "hazard1", h1)
        object.__setattr__(self, "_cum0", np.concatenate([[0.0], np.cumsum(h0[: self.r0])]))
        t = np.arange(self.r0) + 0.5
        s = self.r0 - t
        rate = h0[np.minimum(s.astype(int), self.r0 - 1)]
        dens = h1[: self.r0, None] * rate[None, :] * np.exp(-h1[: self.r0, None] * self.cumulative0(s)[None, :])
        object.__setattr__(self, "density", dens)

    def cumulative0(self, s):
        """``A0(s)`` for reversed time ``s`` in cells, linear inside each cell."""
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.r0)
        i = np.minimum(np.floor(s).astype(int), self.r0 - 1)
        return self._cum0[i] + (s - i) * self.hazard0[i]

    def survival(self, z, t):
        """Probability that a claim of cell ``z`` is still unreported after delay ``t`` cells, ignoring mass past ``R0``."""
        return np.exp(-self.hazard1[np.asarray(z)] * self.cumulative0(self.r0 - np.asarray(t, dtype=float)))

    def mass(self, z, lo, hi):
        """``int_lo^hi f_z(t) dt`` for delays in cells, limits clipped to ``[0, R0]``."""
        lo = np.clip(np.asarray(lo, dtype=float), 0.0, self.r0)
        hi = np.clip(np.asarray(hi, dtype=float), 0.0, self.r0)
        z = np.asarray(z)
        out = np.exp(-self.hazard1[z] * self.cumulative0(self.r0 - hi)) - np.exp(
            -self.hazard1[z] * self.cumulative0(self.r0 - lo)
        )
        return np.where(hi > lo, out, 0.0)


def conditional_density(fit: MultiplicativeFit, r0: int | None = None) -> ConditionalDensity:
    """Delay densities implied by a two-component fit.

    Components are first extended over cells outside their active range by
    the nearest active value; the extended cells are recorded as
    ``(axis, index)`` pairs.
    """
    if fit.ndim != 2:
        raise ValueError("conditional densities need exactly two components (reversed time, underwriting)")
    r0 = fit.shape[0] if r0 is None else int(r0)
    a0, ext0 = _extend(fit.components[0], fit.active[0])
    a1, ext1 = _extend(fit.components[1], fit.active[1])
    cells = tuple((0, int(i)) for i in ext0) + tuple((1, int(i)) for i in ext1)
    return ConditionalDensity(fit.alpha_star * a0, a1, r0, fit.bin_width, cells)


@dataclass(frozen=True)
class ReserveForecast:
    """Total outstanding claims and their split over future periods."""

    total: float
    cash_flow: np.ndarray
    period_length: float
    method: str = "PH"
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "cash_flow", np.asarray(self.cash_flow, dtype=float))

    def to_dict(self) -> dict:
        return {
            "total": float(self.total),
            "period_length": float(self.period_length),
            "cash_flow": self.cash_flow.tolist(),
            "method": self.method,
            **{k: v for k, v in self.diagnostics.items() if k == "bandwidth"},
            "diagnostics": {k: v for k, v in self.diagnostics.items() if k != "bandwidth"},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["period", "count"])
        for a, v in enumerate(self.cash_flow, start=1):
            w.writerow([a, repr(float(v))])
        return buf.getvalue()


def _claims(data, density: ConditionalDensity):
    """Underwriting cell, underwriting time in cells and multiplicity per claim."""
    if isinstance(data, RunoffTriangle):
        tri = reverse_time(data) if data.reversed else data
        if tri.r0 != density.r0:
            raise ValueError("triangle and density grids differ")
        rows = tri.counts.sum(axis=0)
        z = np.flatnonzero(rows)
        return z, z.astype(float), rows[z].astype(float)
    if isinstance(data, EventSample):
        u = data.underwriting / density.bin_width
        z = np.floor(u).astype(int)
        if np.any((z < 0) | (z >= density.r0)):
            raise ValueError("claim underwriting time outside the density grid")
        return z, u, np.ones(z.size)
    raise TypeError("expected an EventSample or a RunoffTriangle")


def _observed_mass(density, z, u):
    den = density.mass(z, 0.0, density.r0 - u)
    bad = den < DENOMINATOR_FLOOR
    if np.any(bad):
        cell = int(z[np.argmax(bad)])
        raise ValueError(
            f"underwriting cell {cell}: observed-report probability {float(den[bad][0]):.3g} below {DENOMINATOR_FLOOR}"
        )
    return den


def reserve(data, density: ConditionalDensity) -> float:
    """Expected number of claims not yet reported.

    Every reported claim underwritten at ``Z`` contributes the ratio of the
    unobserved to the observed delay mass of its underwriting cell.

    Parameters
    ----------
    data : EventSample or RunoffTriangle
        With a triangle every claim of row ``z`` is taken to be underwritten
        at the start of the row.
    density : ConditionalDensity

    Raises
    ------
    ValueError
        If the observed mass of some claim is below ``1e-12``; the message
        names its underwriting cell.
    """
    z, u, w = _claims(data, density)
    den = _observed_mass(density, z, u)
    num = density.mass(z, density.r0 - u, density.r0)
    return float(np.sum(w * num / den))


def cash_flow(data, density: ConditionalDensity, periods: int = 1, **diagnostics) -> ReserveForecast:
    """Outstanding claims per future period of length ``R0 / periods``.

    Period ``a`` collects the delay mass between ``R0 - Z + (a-1) delta`` and
    ``R0 - Z + a delta``, capped at ``R0``.
    """
    if int(periods) != periods or periods < 1:
        raise ValueError("periods must be a positive integer")
    z, u, w = _claims(data, density)
    den = _observed_mass(density, z, u)
    delta = density.r0 / periods
    flows = np.empty(periods)
    for a in range(1, periods + 1):
        lo = density.r0 - u + (a - 1) * delta
        hi = density.r0 - u + a * delta
        flows[a - 1] = np.sum(w * density.mass(z, lo, hi) / den)
    total = reserve(data, density)
    diag = {"extension_cells": [list(c) for c in density.extension_cells]}
    diag.update(diagnostics)
    return ReserveForecast(total, flows, delta * density.bin_width, "PH", diag)


def chain_ladder(triangle: RunoffTriangle, periods: int | None = None) -> ReserveForecast:
    """Classical chain-ladder projection of a run-off triangle.

    Development factors are ratios of column sums of cumulative counts over
    rows observed in both columns.  Future increments of calendar cell ``k``
    (``k = 1`` is the cell just after the valuation date) are spread over
    the periods in proportion to their overlap.

    Raises
    ------
    ValueError
        If a development factor has a zero denominator; the message names
        the development column.
    """
    tri = reverse_time(triangle) if triangle.reversed else triangle
    r0 = tri.r0
    periods = r0 if periods is None else int(periods)
    if periods < 1:
        raise ValueError("periods must be a positive integer")
    cum = np.cumsum(tri.counts.T.astype(float), axis=1)  # [z, t]
    factors = np.ones(max(r0 - 1, 0))
    for t in range(r0 - 1):
        rows = np.arange(r0 - 1 - t)  # rows observed at columns t and t + 1
        den = cum[rows, t].sum()
        if den <= 0:
            raise ValueError(f"chain ladder: zero cumulative count in development column {t}")
        factors[t] = cum[rows, t + 1].sum() / den
    projected = cum.copy()
    for z in range(r0):
        for t in range(r0 - z, r0):
            projected[z, t] = projected[z, t - 1] * factors[t - 1]
    increments = np.diff(np.concatenate([np.zeros((r0, 1)), projected], axis=1), axis=1)
    by_calendar = np.zeros(r0)
    for z in range(r0):
        for t in range(r0 - z, r0):
            by_calendar[z + t - (r0 - 1)] += increments[z, t]
    total = float(projected[:, -1].sum() - cum[np.arange(r0), r0 - 1 - np.arange(r0)].sum())
    delta = r0 / periods
    flows = np.zeros(periods)
    for k in range(1, r0):
        for a in range(periods):
            overlap = min(k, (a + 1) * delta) - max(k - 1, a * delta)
            if overlap > 0:
                flows[a] += by_calendar[k] * overlap
    diag = {"development_factors": factors.tolist()}
    return ReserveForecast(total, flows, delta * tri.bin_width, "CLM", diag)


def comparison_table(forecasts) -> str:
    """CSV with one row per method: total followed by the cash flows."""
    forecasts = list(forecasts)
    m = max(f.cash_flow.size for f in forecasts)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "total"] + [f"period_{a}" for a in range(1, m + 1)])
    for f in forecasts:
        cf = [repr(float(v)) for v in f.cash_flow] + [""] * (m - f.cash_flow.size)
        w.writerow([f.method, repr(float(f.total))] + cf)
    return buf.getvalue()
