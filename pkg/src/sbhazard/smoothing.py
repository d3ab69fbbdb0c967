"""Local constant and local linear smoothing of occurrence and exposure.

Both estimators are ratios of a smoothed occurrence and a smoothed exposure.
The smoothing sums run over grid cells; each data cell contributes the
kernel mass it carries (the kernel integrated over the cell), so the
discrete weights of an interior point add up to one exactly and the
boundary factor of the local constant estimator is the kernel mass inside
the full rectangle.

Product kernels make every sum separable, so all surfaces are computed as
a sequence of one-dimensional matrix products along the axes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .data import OccurrenceExposureGrid
from .kernels import Kernel, as_bandwidth, get_kernel

__all__ = [
    "HazardSurface",
    "LinearSmoother",
    "smooth_local_constant",
    "smooth_local_linear",
    "smooth",
    "marginal",
    "boundary_factor",
    "inverse_marginal_integral",
]

VALID_RTOL = 1e-12
COND_MAX = 1e10


@dataclass(frozen=True)
class HazardSurface:
    """Smoothed occurrence, smoothed exposure and their ratio.

    ``hazard`` is NaN outside ``valid``; ``smoothed_occurrence`` and
    ``smoothed_exposure`` are zero there.
    """

    smoothed_occurrence: NDArray[np.float64]
    smoothed_exposure: NDArray[np.float64]
    valid: NDArray[np.bool_]
    support: NDArray[np.bool_] | None = None
    method: str = "given"
    bandwidth: tuple = ()
    kernel: str = ""
    clip_count: int = 0
    fallback_count: int = 0
    bin_width: float = 1.0
    hazard: NDArray[np.float64] = field(init=False)

    def __post_init__(self):
        occ = np.asarray(self.smoothed_occurrence, dtype=float)
        exp_ = np.asarray(self.smoothed_exposure, dtype=float)
        valid = np.asarray(self.valid, dtype=bool)
        if not (occ.shape == exp_.shape == valid.shape):
            raise ValueError("surface arrays must share a shape")
        support = valid if self.support is None else np.asarray(self.support, dtype=bool)
        if np.any(valid & ~support):
            raise ValueError("valid cells must lie inside the support")
        occ = np.where(valid, occ, 0.0)
        exp_ = np.where(valid, exp_, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            hazard = np.where(valid, occ / exp_, np.nan)
        for a in (occ, exp_, valid, support, hazard):
            a.setflags(write=False)
        object.__setattr__(self, "smoothed_occurrence", occ)
        object.__setattr__(self, "smoothed_exposure", exp_)
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "hazard", hazard)

    @property
    def shape(self):
        return self.valid.shape

    @property
    def ndim(self):
        return self.valid.ndim


def _apply(values: np.ndarray, mats) -> np.ndarray:
    """Apply ``mats[k]`` along axis ``k`` of ``values``."""
    out = values
    for k, m in enumerate(mats):
        out = np.moveaxis(np.tensordot(m, out, axes=([1], [k])), 0, k)
    return out


def _outer(vectors) -> np.ndarray:
    out = vectors[0]
    for v in vectors[1:]:
        out = np.multiply.outer(out, v)
    return out


def boundary_factor(shape, kernel: str | Kernel, bandwidth) -> np.ndarray:
    """Inverse kernel mass inside the rectangle at every cell centre.

    Equals one wherever the kernel window lies inside the rectangle.
    """
    kern = get_kernel(kernel)
    b = as_bandwidth(bandwidth, len(shape))
    mass = _outer([kern.cell_weights(n, bk).sum(axis=1) for n, bk in zip(shape, b)])
    return 1.0 / mass


class LinearSmoother:
    """The occurrence smoother for fixed exposure, kernel and bandwidth.

    With exposure held fixed both estimators are linear in the occurrence
    surface.  Leave-out computations use :meth:`column` to remove a single
    cell's contribution without resmoothing.

    Parameters
    ----------
    exposure, support : ndarray
        Raw exposure and the support mask, indexed like the grid.
    kernel : str or Kernel
    bandwidth : float or sequence of float
        Per-axis bandwidth in cells.
    method : {'ll', 'lc'}
    """

    def __init__(self, exposure, support, kernel="epanechnikov", bandwidth=2.0, method="ll", bin_width=1.0):
        self.bin_width = float(bin_width)
        exposure = np.asarray(exposure, dtype=float)
        support = np.asarray(support, dtype=bool)
        if method not in ("ll", "lc"):
            raise ValueError("method must be 'll' or 'lc'")
        self.kernel = get_kernel(kernel)
        self.ndim = exposure.ndim
        self.bandwidth = as_bandwidth(bandwidth, self.ndim)
        self.method = method
        self.support = support
        self.exposure = np.where(support, exposure, 0.0)
        if np.any(self.bandwidth < 1):
            warnings.warn(
                "bandwidth below one cell: the estimator is close to the raw occurrence/exposure ratio",
                stacklevel=3,
            )
        shape = exposure.shape
        self.weights = [self.kernel.cell_weights(n, b) for n, b in zip(shape, self.bandwidth)]
        offsets = [np.subtract.outer(np.arange(n), np.arange(n)).astype(float) for n in shape]
        self.moment_weights = [a * d for a, d in zip(self.weights, offsets)]
        self.fallback = np.zeros(shape, dtype=bool)

        e = self.exposure
        if method == "lc":
            self.kappa = boundary_factor(shape, self.kernel, self.bandwidth)
            self.gain = None
            raw_e = self.kappa * _apply(e, self.weights)
        else:
            self.kappa = None
            c1 = np.stack([self._moment(e, (j,)) for j in range(self.ndim)], axis=-1)
            dmat = np.empty(shape + (self.ndim, self.ndim))
            for j in range(self.ndim):
                for k in range(j, self.ndim):
                    dmat[..., j, k] = dmat[..., k, j] = self._moment(e, (j, k))
            gain, fallback = _solve_moments(dmat, c1)
            self.gain = gain
            self.fallback = fallback & support
            raw_e = _apply(e, self.weights) - np.sum(gain * c1, axis=-1)
        self.raw_exposure = raw_e
        emax = np.max(np.where(support, raw_e, 0.0), initial=0.0)
        if not emax > 0:
            raise ValueError("no exposure in range")
        self.valid = support & (raw_e > VALID_RTOL * emax)

    def _moment(self, values, axes):
        mats = list(self.weights)
        if len(axes) == 2 and axes[0] == axes[1]:
            j = axes[0]
            mats[j] = self.moment_weights[j] * np.subtract.outer(
                np.arange(values.shape[j]), np.arange(values.shape[j])
            )
        else:
            for j in axes:
                mats[j] = self.moment_weights[j]
        return _apply(values, mats)

    def smooth_occurrence(self, occurrence) -> np.ndarray:
        """Unclipped smoothed occurrence at every cell."""
        o = np.where(self.support, np.asarray(occurrence, dtype=float), 0.0)
        if self.method == "lc":
            return self.kappa * _apply(o, self.weights)
        out = _apply(o, self.weights)
        for j in range(self.ndim):
            out = out - self.gain[..., j] * self._moment(o, (j,))
        return out

    def column(self, index) -> np.ndarray:
        """Smoothed occurrence produced by a unit occurrence at cell ``index``."""
        base = [w[:, i] for w, i in zip(self.weights, index)]
        if self.method == "lc":
            return self.kappa * _outer(base)
        out = _outer(base)
        for j in range(self.ndim):
            vecs = list(base)
            vecs[j] = self.moment_weights[j][:, index[j]]
            out = out - self.gain[..., j] * _outer(vecs)
        return out

    def surface(self, raw_occurrence) -> HazardSurface:
        """Clip, mask and package an unclipped smoothed occurrence."""
        occ = np.asarray(raw_occurrence, dtype=float)
        negative = self.valid & (occ < 0)
        return HazardSurface(
            np.where(negative, 0.0, occ),
            self.raw_exposure,
            self.valid,
            support=self.support,
            method=self.method,
            bandwidth=tuple(float(b) for b in self.bandwidth),
            kernel=self.kernel.name,
            clip_count=int(negative.sum()),
            fallback_count=int(self.fallback.sum()),
            bin_width=self.bin_width,
        )


def _solve_moments(dmat, c1):
    """Solve ``D g = c1`` cell by cell; flag cells where ``D`` is ill conditioned."""
    eig = np.linalg.eigvalsh(dmat)
    lo, hi = eig[..., 0], eig[..., -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = (lo > 0) & (hi / lo < COND_MAX)
    gain = np.zeros_like(c1)
    if np.any(ok):
        chol = np.linalg.cholesky(dmat[ok])
        y = np.linalg.solve(chol, c1[ok][..., None])
        gain[ok] = np.linalg.solve(np.swapaxes(chol, -1, -2), y)[..., 0]
    return gain, ~ok


def smooth(grid: OccurrenceExposureGrid, kernel="epanechnikov", bandwidth=2.0, method="ll") -> HazardSurface:
    sm = LinearSmoother(grid.exposure, grid.support, kernel, bandwidth, method, grid.bin_width)
    return sm.surface(sm.smooth_occurrence(grid.occurrence))


def smooth_local_constant(grid: OccurrenceExposureGrid, kernel="epanechnikov", bandwidth=2.0) -> HazardSurface:
    """Local constant hazard estimate on the data grid.

    Smoothed occurrence and exposure are kernel sums over the support scaled
    by the inverse kernel mass inside the rectangle.

    Parameters
    ----------
    grid : OccurrenceExposureGrid
    kernel : str or Kernel
    bandwidth : float or sequence of float
        Per-axis bandwidth in cells.

    Returns
    -------
    HazardSurface
    """
    return smooth(grid, kernel, bandwidth, "lc")


def smooth_local_linear(grid: OccurrenceExposureGrid, kernel="epanechnikov", bandwidth=2.0) -> HazardSurface:
    """Local linear hazard estimate on the data grid.

    Kernel weights are corrected by ``1 - (x - X)' D(x)^{-1} c1(x)`` where
    ``c1`` and ``D`` are the exposure-weighted first and second kernel
    moments.  Cells whose moment matrix is singular or has condition number
    above ``1e10`` use the local constant weights instead; negative
    smoothed occurrences are clipped to zero.  Both counts are reported on
    the returned surface.
    """
    return smooth(grid, kernel, bandwidth, "ll")


def marginal(values, axis: int, mask=None, cell_width: float = 1.0) -> np.ndarray:
    """Riemann-sum marginal of a gridded function along ``axis``.

    Sums over all other axes restricted to ``mask`` and multiplies by the
    volume of a cell in those axes.
    """
    values = np.asarray(values, dtype=float)
    if not -values.ndim <= axis < values.ndim:
        raise ValueError(f"axis {axis} out of range for {values.ndim}-d input")
    axis %= values.ndim
    if mask is not None:
        values = np.where(mask, values, 0.0)
    other = tuple(k for k in range(values.ndim) if k != axis)
    return values.sum(axis=other) * cell_width ** len(other)


def inverse_marginal_integral(density, mask, cell_width: float) -> float:
    """Riemann sum of ``1 / (O_0(x_0) O_1(x_1))`` over a masked 2-d grid.

    ``O_0`` and ``O_1`` are the marginals of ``density`` computed on the
    same masked grid.  Cells where either marginal vanishes are skipped.
    """
    density = np.where(mask, density, 0.0)
    m0 = marginal(density, 0, cell_width=cell_width)
    m1 = marginal(density, 1, cell_width=cell_width)
    prod = np.multiply.outer(m0, m1)
    use = mask & (prod > 0)
    return float(np.sum(1.0 / prod[use]) * cell_width**2)
