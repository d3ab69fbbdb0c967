import numpy as np
import pytest
from scipy import integrate

from sbhazard import KERNELS, get_kernel
from sbhazard.kernels import as_bandwidth


@pytest.mark.parametrize("name", sorted(KERNELS))
def test_kernel_integrates_to_one(name):
    k = KERNELS[name]
    val, _ = integrate.quad(lambda u: float(k(u)), -1, 1, epsabs=1e-13, epsrel=1e-13)
    assert abs(val - 1) < 1e-10


@pytest.mark.parametrize("name", sorted(KERNELS))
def test_kernel_support_and_symmetry(name):
    k = KERNELS[name]
    u = np.linspace(-3, 3, 601)
    assert np.all(k(u[np.abs(u) > 1]) == 0)
    assert np.allclose(k(u), k(-u), atol=0, rtol=0)
    assert np.all(k(u) >= 0)


@pytest.mark.parametrize("name", sorted(KERNELS))
def test_cdf_is_antiderivative(name):
    k = KERNELS[name]
    for x in (-1.0, -0.3, 0.2, 0.9, 1.0):
        val, _ = integrate.quad(lambda u: float(k(u)), -1, x, epsabs=1e-13)
        assert k.cdf(x) == pytest.approx(val, abs=1e-12)


def test_epanechnikov_anchor():
    assert get_kernel()(0.0) == 0.75
    assert get_kernel("epanechnikov")(0.5) == pytest.approx(0.5625)


@pytest.mark.parametrize("b", [0.7, 1.5, 2.0, 3.3])
def test_cell_weights_match_quadrature(b):
    k = get_kernel("quartic")
    w = k.cell_weights(7, b)
    for i in range(7):
        for m in range(7):
            val, _ = integrate.quad(lambda u: float(k((i + 0.5 - u) / b)) / b, m, m + 1, epsabs=1e-13)
            assert w[i, m] == pytest.approx(val, abs=1e-12)


def test_interior_rows_sum_to_one():
    w = get_kernel().cell_weights(12, 2.5)
    assert np.allclose(w[3:9].sum(axis=1), 1, atol=1e-14)
    assert w[0].sum() < 1


def test_unknown_kernel():
    with pytest.raises(ValueError, match="unknown kernel"):
        get_kernel("gaussian")


def test_bandwidth_validation():
    assert as_bandwidth(2, 2).tolist() == [2, 2]
    with pytest.raises(ValueError):
        as_bandwidth((1, 0), 2)
    with pytest.raises(ValueError):
        as_bandwidth((1, 2, 3), 2)
