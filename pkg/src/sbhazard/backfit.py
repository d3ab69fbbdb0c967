"""Projection of an unstructured hazard estimate onto the multiplicative model.

The fitted hazard is ``alpha_star * prod_j alpha_j(x_j)``.  Each component
solves its marginal equation

    alpha_k(x_k) * sum_{-k} alpha_star prod_{j != k} alpha_j E_hat = sum_{-k} O_hat

and the components are updated in Gauss-Seidel order until none of them
moves.  All integrals are Riemann sums over grid cells of unit width.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .smoothing import HazardSurface, marginal

__all__ = [
    "BackfitConfig",
    "MultiplicativeFit",
    "backfit",
    "evaluate_product",
    "residual",
    "fitted_occurrence",
]


@dataclass(frozen=True)
class BackfitConfig:
    """Settings of the backfitting iteration.

    Parameters
    ----------
    max_iterations : int
        Maximum number of full sweeps.
    tolerance : float
        Bound on both the relative sup-norm change of the components between
        sweeps and the relative residual of the marginal equations.
    denominator_floor : float
        Axis cells whose denominator falls below this fraction of its
        maximum are frozen and excluded from the active range.
    init : {'ones'}
        Starting components when no warm start is given.
    weights : {'exposure', 'uniform'}
        Normalization weights of the identifiability constraint.
    """

    max_iterations: int = 500
    tolerance: float = 1e-8
    denominator_floor: float = 1e-10
    init: str = "ones"
    weights: str = "exposure"

    def __post_init__(self):
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not self.denominator_floor >= 0:
            raise ValueError("denominator_floor must be nonnegative")
        if self.init != "ones":
            raise ValueError("init must be 'ones'")
        if self.weights not in ("exposure", "uniform"):
            raise ValueError("weights must be 'exposure' or 'uniform'")


@dataclass(frozen=True)
class MultiplicativeFit:
    """Constant and per-axis components of a multiplicative hazard.

    Hazards are per unit of cell width; divide by ``bin_width`` for a rate
    per unit of calendar time.
    """

    alpha_star: float
    components: tuple
    norm_weights: tuple
    active: tuple
    residual: float = 0.0
    iterations: int = 0
    converged: bool = True
    bin_width: float = 1.0
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        comps = tuple(np.asarray(c, dtype=float) for c in self.components)
        weights = tuple(np.asarray(w, dtype=float) for w in self.norm_weights)
        active = tuple(np.asarray(a, dtype=bool) for a in self.active)
        if not (len(comps) == len(weights) == len(active)):
            raise ValueError("components, weights and active masks must align")
        for c, w, a in zip(comps, weights, active):
            if c.ndim != 1 or c.shape != w.shape or c.shape != a.shape:
                raise ValueError("each component, weight and mask must be a 1-d array of one length")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "norm_weights", weights)
        object.__setattr__(self, "active", active)

    @property
    def ndim(self) -> int:
        return len(self.components)

    @property
    def shape(self) -> tuple:
        return tuple(c.size for c in self.components)

    def product(self) -> np.ndarray:
        """``alpha_star * prod_j alpha_j`` on the full grid."""
        out = np.asarray(self.alpha_star, dtype=float)
        for c in self.components:
            out = np.multiply.outer(out, c)
        return out

    def to_dict(self) -> dict:
        axes = []
        for k, (c, w, a) in enumerate(zip(self.components, self.norm_weights, self.active)):
            axes.append(
                {
                    "axis": k,
                    "coordinates": ((np.arange(c.size) + 0.5) * self.bin_width).tolist(),
                    "values": c.tolist(),
                    "weights": w.tolist(),
                    "active": a.tolist(),
                }
            )
        return {
            "alpha_star": float(self.alpha_star),
            "bin_width": float(self.bin_width),
            "components": axes,
            "residual": float(self.residual),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "MultiplicativeFit":
        axes = sorted(data["components"], key=lambda a: a["axis"])
        return cls(
            alpha_star=data["alpha_star"],
            components=[a["values"] for a in axes],
            norm_weights=[a["weights"] for a in axes],
            active=[a["active"] for a in axes],
            residual=data.get("residual", 0.0),
            iterations=data.get("iterations", 0),
            converged=data.get("converged", True),
            bin_width=data.get("bin_width", 1.0),
        )


def _others(comps, k) -> np.ndarray:
    """Outer product of all components except ``k``, broadcast on the grid."""
    out = np.ones(())
    for j, c in enumerate(comps):
        out = np.multiply.outer(out, np.ones_like(c) if j == k else c)
    return out


def _denominator(comps, alpha_star, exposure, k) -> np.ndarray:
    return alpha_star * marginal(_others(comps, k) * exposure, k)


def _norm_weights(exposure, kind: str):
    out = []
    for k in range(exposure.ndim):
        m = marginal(exposure, k)
        w = m if kind == "exposure" else (m > 0).astype(float)
        out.append(w / w.sum())
    return out


def _relative_errors(comps, alpha_star, occurrence, exposure, active, floor) -> float:
    worst = 0.0
    for k in range(len(comps)):
        rhs = marginal(occurrence, k)
        lhs = comps[k] * _denominator(comps, alpha_star, exposure, k)
        scale = np.abs(rhs) + floor * np.max(np.abs(rhs), initial=0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(scale > 0, np.abs(lhs - rhs) / scale, np.abs(lhs - rhs))
        rel = rel[active[k]]
        if rel.size:
            worst = max(worst, float(rel.max()))
    return worst


def residual(surface: HazardSurface, fit: MultiplicativeFit, floor: float = 1e-10) -> float:
    """Largest relative violation of the marginal equations.

    For every axis ``k`` and every active cell, compares the fitted marginal
    ``alpha_k * sum_{-k} alpha_star prod_{j != k} alpha_j E_hat`` with the
    smoothed occurrence marginal, relative to the latter plus ``floor``
    times its maximum.
    """
    if fit.shape != surface.shape:
        raise ValueError(f"fit shape {fit.shape} does not match surface shape {surface.shape}")
    return _relative_errors(
        fit.components,
        fit.alpha_star,
        surface.smoothed_occurrence,
        surface.smoothed_exposure,
        fit.active,
        floor,
    )


def evaluate_product(fit: MultiplicativeFit, cell) -> float:
    """``alpha_star * prod_j alpha_j(cell_j)`` at one grid cell."""
    cell = tuple(int(i) for i in np.atleast_1d(cell))
    if len(cell) != fit.ndim:
        raise ValueError(f"cell needs {fit.ndim} indices")
    out = float(fit.alpha_star)
    for c, i in zip(fit.components, cell):
        out *= float(c[i])
    return out


def fitted_occurrence(surface: HazardSurface, fit: MultiplicativeFit) -> np.ndarray:
    """Structured hazard times smoothed exposure on the valid cells."""
    return np.where(surface.valid, fit.product() * surface.smoothed_exposure, 0.0)


def backfit(
    surface: HazardSurface,
    config: BackfitConfig | None = None,
    init: MultiplicativeFit | None = None,
) -> MultiplicativeFit:
    """Fit a multiplicative hazard to a smoothed occurrence/exposure pair.

    Parameters
    ----------
    surface : HazardSurface
        Unstructured estimate; only its smoothed occurrence and exposure on
        the valid cells are used.
    config : BackfitConfig, optional
    init : MultiplicativeFit, optional
        Warm start.  Its components replace the flat start.

    Returns
    -------
    MultiplicativeFit
        Components normalized so that ``sum alpha_k w_k = 1`` on every
        axis.  If the iteration does not settle within
        ``config.max_iterations`` sweeps, the iterate with the smallest
        residual is returned with ``converged=False``.

    Raises
    ------
    ValueError
        If the valid mask is empty or an axis marginal of the smoothed
        occurrence is zero everywhere.
    """
    cfg = config or BackfitConfig()
    if not np.any(surface.valid):
        raise ValueError("surface has no valid cells")
    occ = surface.smoothed_occurrence
    exp_ = surface.smoothed_exposure
    ndim = occ.ndim
    occ_marg = [marginal(occ, k) for k in range(ndim)]
    for k, m in enumerate(occ_marg):
        if not m.sum() > 0:
            raise ValueError(f"unidentifiable component: axis {k} has a zero occurrence marginal")
    weights = _norm_weights(exp_, cfg.weights)

    if init is not None:
        if init.shape != occ.shape:
            raise ValueError("warm start does not match the surface shape")
        comps = [c.copy() for c in init.components]
    else:
        comps = [np.ones(n) for n in occ.shape]
    alpha_star = float(occ.sum() / np.sum(_others(comps, -1) * exp_))
    active = [np.ones(n, dtype=bool) for n in occ.shape]

    best = None
    converged = False
    sweeps = 0
    for sweeps in range(1, cfg.max_iterations + 1):
        previous = [c.copy() for c in comps]
        for k in range(ndim):
            denom = _denominator(comps, alpha_star, exp_, k)
            act = denom > cfg.denominator_floor * np.max(denom, initial=0.0)
            new = comps[k].copy()
            new[act] = occ_marg[k][act] / denom[act]
            scale = float(np.sum(new * weights[k]))
            if scale > 0:
                new /= scale
                alpha_star *= scale
            comps[k] = new
            active[k] = act
        # only alpha_star * alpha_k enters the next update, so this rescale is free
        alpha_star = float(occ.sum() / np.sum(_others(comps, -1) * exp_))
        change = max(
            float(np.max(np.abs(c - p)) / max(np.max(np.abs(p)), np.finfo(float).tiny))
            for c, p in zip(comps, previous)
        )
        res = _relative_errors(comps, alpha_star, occ, exp_, active, cfg.denominator_floor)
        if not np.all(np.isfinite([res, change, alpha_star])):
            break
        if best is None or res < best[0]:
            best = (res, sweeps, [c.copy() for c in comps], alpha_star, [a.copy() for a in active])
        if change < cfg.tolerance and res <= cfg.tolerance:
            converged = True
            break

    if best is None:
        raise FloatingPointError("backfitting produced non-finite values")
    if converged:
        res_best, it_best, comps, alpha_star, active = res, sweeps, comps, alpha_star, active
    else:
        res_best, it_best, comps, alpha_star, active = best
        warnings.warn(
            f"backfitting did not converge in {cfg.max_iterations} sweeps (residual {res_best:.3g})",
            RuntimeWarning,
            stacklevel=2,
        )
    res_final = _relative_errors(comps, alpha_star, occ, exp_, active, cfg.denominator_floor)
    return MultiplicativeFit(
        alpha_star=alpha_star,
        components=comps,
        norm_weights=weights,
        active=active,
        residual=res_final,
        iterations=sweeps if converged else it_best,
        converged=converged,
        bin_width=surface.bin_width,
    )
