"""Synthetic run-off data from a known multiplicative hazard.

A claim underwritten at ``Z`` is reported after a delay ``T``.  In reversed
time ``T^R = R0 - T`` the claim has hazard ``alpha_star * alpha0(s) *
alpha1(Z)``; whatever survival mass is left at ``s = R0`` is reported at
delay zero, so the hazard on ``[0, R0)`` is exactly the model hazard.  A
claim is observed when ``T + Z <= R0``, i.e. when ``T^R >= Z``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .data import EventSample

__all__ = [
    "PiecewiseLinear",
    "SimScenario",
    "simulate",
    "simulate_full",
    "true_hazard",
    "acceptance_probability",
    "true_reserve",
]

MIN_ACCEPTANCE = 1e-4


@dataclass(frozen=True)
class PiecewiseLinear:
    """Linear interpolation through ``(knots, values)``, constant outside.

    The antiderivative starts at the first knot.
    """

    knots: tuple
    values: tuple

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float).ravel()
        v = np.asarray(self.values, dtype=float).ravel()
        if k.size != v.size or k.size < 1:
            raise ValueError("knots and values must be nonempty and of equal length")
        if np.any(np.diff(k) <= 0):
            raise ValueError("knots must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "knots", tuple(k.tolist()))
        object.__setattr__(self, "values", tuple(v.tolist()))
        seg = np.diff(k) * (v[:-1] + v[1:]) / 2
        object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(seg)]))

    @classmethod
    def constant(cls, value: float, lo: float = 0.0, hi: float = 1.0) -> "PiecewiseLinear":
        return cls((lo, hi), (value, value))

    @classmethod
    def from_function(cls, fn, lo: float, hi: float, n: int = 201) -> "PiecewiseLinear":
        x = np.linspace(lo, hi, n)
        return cls(tuple(x), tuple(np.asarray(fn(x), dtype=float)))

    def __call__(self, x):
        return np.interp(x, self.knots, self.values)

    def integral(self, x):
        """``int_{knots[0]}^x f``."""
        k = np.asarray(self.knots)
        v = np.asarray(self.values)
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, k[0], k[-1])
        i = np.clip(np.searchsorted(k, xc, side="right") - 1, 0, max(k.size - 2, 0))
        if k.size == 1:
            return (x - k[0]) * v[0]
        u = xc - k[i]
        slope = (v[i + 1] - v[i]) / (k[i + 1] - k[i])
        inside = self._cum[i] + v[i] * u + 0.5 * slope * u**2
        # constant extension on either side
        return inside + np.where(x > k[-1], (x - k[-1]) * v[-1], 0.0) + np.where(x < k[0], (x - k[0]) * v[0], 0.0)

    def total(self) -> float:
        return float(self._cum[-1])

    def inverse_integral(self, y):
        """Smallest ``x >= knots[0]`` with ``integral(x) = y`` for ``y >= 0``.

        Requires nonnegative values; beyond the last knot the constant
        extension is inverted.
        """
        k = np.asarray(self.knots)
        v = np.asarray(self.values)
        y = np.asarray(y, dtype=float)
        if np.any(v < 0):
            raise ValueError("inverse needs a nonnegative function")
        if k.size == 1:
            return k[0] + y / v[0]
        cum = self._cum
        i = np.clip(np.searchsorted(cum, y, side="right") - 1, 0, k.size - 2)
        d = y - cum[i]
        slope = (v[i + 1] - v[i]) / (k[i + 1] - k[i])
        disc = np.sqrt(np.maximum(v[i] ** 2 + 2 * slope * d, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.where(v[i] + disc > 0, 2 * d / (v[i] + disc), 0.0)
        x = np.minimum(k[i] + u, k[i + 1])
        with np.errstate(divide="ignore"):
            beyond = k[-1] + (y - cum[-1]) / v[-1]
        return np.where(y > cum[-1], beyond, x)

    def to_dict(self) -> dict:
        return {"knots": list(self.knots), "values": list(self.values)}

    @classmethod
    def from_dict(cls, data) -> "PiecewiseLinear":
        return cls(tuple(data["knots"]), tuple(data["values"]))


@dataclass(frozen=True)
class SimScenario:
    """A multiplicative hazard together with an underwriting law.

    Parameters
    ----------
    alpha0 : PiecewiseLinear
        Reversed-time component on ``[0, horizon]``.
    alpha1 : PiecewiseLinear
        Underwriting component on ``[0, horizon]``.
    alpha_star : float
    horizon : float
        ``R0``.
    n_target : int
        Number of claims drawn before truncation.
    underwriting : PiecewiseLinear or float
        Density of ``Z`` on ``[0, horizon]``, or a single underwriting time.
    seed : int
    cohort_width : float, optional
        If given, ``Z`` is rounded down to a multiple of it, so all claims of
        a cohort share one underwriting time.
    """

    alpha0: PiecewiseLinear
    alpha1: PiecewiseLinear
    alpha_star: float = 1.0
    horizon: float = 1.0
    n_target: int = 1000
    underwriting: PiecewiseLinear | float = 0.0
    seed: int = 0
    cohort_width: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not self.alpha_star > 0:
            raise ValueError("alpha_star must be positive")
        if int(self.n_target) != self.n_target or self.n_target < 1:
            raise ValueError("n_target must be a positive integer")
        grid = np.linspace(0.0, self.horizon, 1001)
        for name in ("alpha0", "alpha1"):
            tab = getattr(self, name)
            pts = np.concatenate([grid, [k for k in tab.knots if 0 <= k <= self.horizon]])
            if np.any(tab(pts) <= 0):
                raise ValueError(f"{name} must be strictly positive on [0, horizon]")
        if self.alpha0.knots[0] > 0:
            raise ValueError("alpha0 must be tabulated from 0")
        u = self.underwriting
        if isinstance(u, PiecewiseLinear):
            if np.any(np.asarray(u.values) < 0):
                raise ValueError("underwriting density must be nonnegative")
            if u.knots[0] < 0 or u.knots[-1] > self.horizon:
                raise ValueError("underwriting density must live on [0, horizon]")
            if abs(u.total() - 1) > 1e-6:
                raise ValueError(f"underwriting density integrates to {u.total():.6g}, not 1")
        elif not 0 <= float(u) < self.horizon:
            raise ValueError("underwriting point must lie in [0, horizon)")
        if self.cohort_width is not None and not self.cohort_width > 0:
            raise ValueError("cohort_width must be positive")

    def cumulative_hazard(self, s, z):
        """``alpha_star * alpha1(z) * int_0^s alpha0`` in reversed time."""
        return self.alpha_star * self.alpha1(z) * (self.alpha0.integral(s) - self.alpha0.integral(0.0))

    def to_dict(self) -> dict:
        u = self.underwriting
        return {
            "alpha0": self.alpha0.to_dict(),
            "alpha1": self.alpha1.to_dict(),
            "alpha_star": self.alpha_star,
            "horizon": self.horizon,
            "n_target": int(self.n_target),
            "underwriting": u.to_dict() if isinstance(u, PiecewiseLinear) else float(u),
            "seed": int(self.seed),
            "cohort_width": self.cohort_width,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "SimScenario":
        u = data.get("underwriting", 0.0)
        u = PiecewiseLinear.from_dict(u) if isinstance(u, dict) else float(u)
        return cls(
            alpha0=PiecewiseLinear.from_dict(data["alpha0"]),
            alpha1=PiecewiseLinear.from_dict(data["alpha1"]),
            alpha_star=float(data.get("alpha_star", 1.0)),
            horizon=float(data["horizon"]),
            n_target=int(data.get("n_target", 1000)),
            underwriting=u,
            seed=int(data.get("seed", 0)),
            cohort_width=data.get("cohort_width"),
        )


def true_hazard(scenario: SimScenario, t, z):
    """``alpha_star * alpha0(t) * alpha1(z)`` with ``t`` in reversed time."""
    return scenario.alpha_star * scenario.alpha0(t) * scenario.alpha1(z)


def _cohort_points(scenario: SimScenario):
    """Underwriting values and their probabilities for a cohort grid."""
    w = scenario.cohort_width
    u = scenario.underwriting
    starts = np.arange(0.0, scenario.horizon, w)
    starts = starts[starts < scenario.horizon - 1e-12 * scenario.horizon]
    if isinstance(u, PiecewiseLinear):
        cdf = u.integral(np.minimum(np.append(starts, scenario.horizon), u.knots[-1]))
        probs = np.diff(np.maximum(cdf, 0.0))
    else:
        probs = (starts == starts[np.searchsorted(starts, float(u), side="right") - 1]).astype(float)
    return starts, probs


def _draw_underwriting(scenario: SimScenario, rng, n: int) -> np.ndarray:
    u = scenario.underwriting
    if isinstance(u, PiecewiseLinear):
        z = u.inverse_integral(rng.uniform(0.0, u.total(), n))
        z = np.clip(z, 0.0, np.nextafter(scenario.horizon, 0.0))
    else:
        rng.uniform(size=n)  # keep the stream layout independent of the law
        z = np.full(n, float(u))
    if scenario.cohort_width is not None:
        w = scenario.cohort_width
        z = np.floor(z / w + 1e-12) * w
    return z


def _survival(scenario: SimScenario, z):
    """``P(T^R >= z)`` for a claim underwritten at ``z``."""
    return np.exp(-scenario.cumulative_hazard(np.minimum(z, scenario.horizon), z))


def simulate_full(scenario: SimScenario) -> tuple:
    """All drawn claims split into the observed and the unobserved part.

    Returns
    -------
    observed, unobserved : EventSample
        ``unobserved`` holds claims with ``T + Z > R0``; its ``horizon`` is
        the largest ``T + Z`` so it passes the sample validation.
    """
    acc = acceptance_probability(scenario)
    if acc < MIN_ACCEPTANCE:
        raise ValueError(f"degenerate truncation: acceptance probability {acc:.3g}")
    rng = np.random.default_rng(scenario.seed)
    n = int(scenario.n_target)
    r0 = float(scenario.horizon)
    z = _draw_underwriting(scenario, rng, n)
    e = rng.exponential(size=n)
    scale = scenario.alpha_star * scenario.alpha1(z)
    a0 = scenario.alpha0.integral(0.0)
    s = scenario.alpha0.inverse_integral(a0 + e / scale)
    # the survival mass left at R0 is reported at delay zero
    s = np.where(e >= scenario.cumulative_hazard(r0, z), r0, np.minimum(s, r0))
    delay = np.clip(r0 - s, 0.0, r0)
    seen = s >= z
    observed = EventSample(delay[seen], z[seen], r0)
    late = ~seen
    top = float(np.max(delay[late] + z[late], initial=r0))
    unobserved = EventSample(delay[late], z[late], max(top, r0))
    return observed, unobserved


def simulate(scenario: SimScenario) -> EventSample:
    """Observed claims of one synthetic portfolio.

    ``n_target`` claims are drawn; each keeps its place in the sample only if
    reported by ``R0``.  Equal seeds give identical samples.

    Raises
    ------
    ValueError
        ``degenerate truncation`` if fewer than one claim in ``10^4`` would
        be observed.
    """
    return simulate_full(scenario)[0]


def acceptance_probability(scenario: SimScenario) -> float:
    """Probability that a drawn claim is reported by ``R0``."""
    u = scenario.underwriting
    if scenario.cohort_width is not None:
        starts, probs = _cohort_points(scenario)
        return float(np.sum(probs * _survival(scenario, starts)))
    if not isinstance(u, PiecewiseLinear):
        return float(_survival(scenario, float(u)))
    knots = (*scenario.alpha0.knots, *scenario.alpha1.knots, *u.knots)
    pts = sorted({k for k in knots if 0 < k < scenario.horizon})
    val, _ = integrate.quad(
        lambda x: float(u(x) * _survival(scenario, x)),
        u.knots[0],  # the density vanishes outside its table
        min(u.knots[-1], scenario.horizon),
        points=pts or None,
        limit=500,
        epsabs=1e-12,
        epsrel=1e-10,
    )
    return float(val)


def true_reserve(scenario: SimScenario, sample: EventSample) -> float:
    """Expected number of unreported claims implied by the observed ones.

    Each observed claim underwritten at ``z`` stands for ``(1 - p(z)) /
    p(z)`` unreported claims of the same cohort, where ``p(z)`` is the
    probability of being reported by ``R0``.
    """
    p = _survival(scenario, sample.underwriting)
    return float(np.sum((1 - p) / p))
