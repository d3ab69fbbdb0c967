"""Compactly supported symmetric kernels on [-1, 1]."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["Kernel", "get_kernel", "KERNELS", "as_bandwidth"]


def _epan_pdf(u):
    return np.where(np.abs(u) <= 1, 0.75 * (1 - u**2), 0.0)


def _epan_cdf(u):
    u = np.clip(u, -1, 1)
    return 0.5 + 0.75 * u - 0.25 * u**3


def _quartic_pdf(u):
    return np.where(np.abs(u) <= 1, 15 / 16 * (1 - u**2) ** 2, 0.0)


def _quartic_cdf(u):
    u = np.clip(u, -1, 1)
    return 0.5 + 15 / 16 * (u - 2 * u**3 / 3 + u**5 / 5)


def _uniform_pdf(u):
    return np.where(np.abs(u) <= 1, 0.5, 0.0)


def _uniform_cdf(u):
    return 0.5 * (np.clip(u, -1, 1) + 1)


@dataclass(frozen=True)
class Kernel:
    """A univariate kernel with its antiderivative.

    The multivariate kernel is the product of univariate kernels.
    """

    name: str
    pdf: Callable
    cdf: Callable

    def __call__(self, u):
        return self.pdf(np.asarray(u, dtype=float))

    def cell_weights(self, n: int, bandwidth: float) -> np.ndarray:
        """Kernel mass of each data cell as seen from each cell centre.

        Entry ``[i, m]`` is ``int_m^{m+1} k((x_i - u) / b) / b du`` with
        ``x_i = i + 0.5``.  Summing row ``i`` gives the kernel mass inside
        ``[0, n]``, and for interior rows exactly one.
        """
        x = np.arange(n) + 0.5
        edges = np.arange(n + 1)
        c = self.cdf((x[:, None] - edges[None, :]) / bandwidth)
        return c[:, :-1] - c[:, 1:]


KERNELS = {
    "epanechnikov": Kernel("epanechnikov", _epan_pdf, _epan_cdf),
    "quartic": Kernel("quartic", _quartic_pdf, _quartic_cdf),
    "uniform": Kernel("uniform", _uniform_pdf, _uniform_cdf),
}


def get_kernel(kernel: str | Kernel = "epanechnikov") -> Kernel:
    if isinstance(kernel, Kernel):
        return kernel
    try:
        return KERNELS[kernel]
    except KeyError:
        raise ValueError(f"unknown kernel {kernel!r}; choose from {sorted(KERNELS)}") from None


def as_bandwidth(bw, ndim: int) -> np.ndarray:
    """Broadcast a scalar or per-axis bandwidth (in cells) to ``ndim`` values."""
    b = np.atleast_1d(np.asarray(bw, dtype=float))
    if b.size == 1:
        b = np.repeat(b, ndim)
    if b.size != ndim:
        raise ValueError(f"bandwidth needs {ndim} components, got {b.size}")
    if not np.all(b > 0) or not np.all(np.isfinite(b)):
        raise ValueError("bandwidth components must be positive")
    return b
