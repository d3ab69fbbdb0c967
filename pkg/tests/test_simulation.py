import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from sbhazard import (
    PiecewiseLinear,
    SimScenario,
    acceptance_probability,
    occurrence_exposure_from_events,
    save_events,
    simulate,
    simulate_full,
    true_hazard,
    true_reserve,
)

ONE = PiecewiseLinear.constant(1.0, 0, 10)


def scenario(**kw):
    base = dict(
        alpha0=PiecewiseLinear((0, 5, 10), (0.5, 1.0, 0.8)),
        alpha1=PiecewiseLinear((0, 10), (1.2, 0.8)),
        alpha_star=0.4,
        horizon=10.0,
        n_target=5000,
        underwriting=PiecewiseLinear.constant(0.1, 0, 10),
        seed=3,
    )
    base.update(kw)
    return SimScenario(**base)


def test_constant_hazard_truncated_exponential_mean():
    lam, r0, n = 0.35, 10.0, 40000
    sc = SimScenario(PiecewiseLinear.constant(lam, 0, r0), PiecewiseLinear.constant(1.0, 0, r0), 1.0, r0, n, 0.0, 8)
    sample = simulate(sc)
    assert len(sample) == n  # underwriting at 0: nothing is truncated
    reversed_time = r0 - sample.delay
    # E[min(X, R0)] for X ~ Exp(lam)
    expected = (1 - np.exp(-lam * r0)) / lam
    se = reversed_time.std(ddof=1) / np.sqrt(n)
    assert abs(reversed_time.mean() - expected) < 3 * se


def test_delay_independent_of_underwriting_before_truncation():
    sc = scenario(alpha1=PiecewiseLinear.constant(1.0, 0, 10), n_target=50000, seed=21)
    obs, late = simulate_full(sc)
    delay = np.concatenate([obs.delay, late.delay])
    uw = np.concatenate([obs.underwriting, late.underwriting])
    t_bins = np.quantile(delay, np.linspace(0, 1, 6))
    t_bins[0], t_bins[-1] = -np.inf, np.inf
    table, _, _ = np.histogram2d(delay, uw, bins=[t_bins, np.linspace(0, 10, 6)])
    p = stats.chi2_contingency(table)[1]
    assert p > 1e-3


def test_seed_determinism(tmp_path):
    a, b = simulate(scenario()), simulate(scenario())
    save_events(a, tmp_path / "a.csv")
    save_events(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    c = simulate(scenario(seed=4))
    assert len(c) != len(a) or not np.array_equal(c.delay, a.delay)


def test_retained_events_in_triangle():
    sample = simulate(scenario())
    assert np.all(sample.delay + sample.underwriting <= sample.horizon)
    assert np.all(sample.delay >= 0) and np.all(sample.underwriting >= 0)


def test_acceptance_matches_monte_carlo():
    sc = scenario(n_target=40000)
    obs, late = simulate_full(sc)
    p = acceptance_probability(sc)
    frac = len(obs) / (len(obs) + len(late))
    assert abs(frac - p) < 4 * np.sqrt(p * (1 - p) / sc.n_target)


def test_degenerate_truncation():
    steep = PiecewiseLinear.constant(50.0, 0, 10)  # every claim leaves before its underwriting time
    sc = SimScenario(steep, ONE, 1.0, 10.0, 100, PiecewiseLinear.constant(1 / 9, 1, 10), 0)
    with pytest.raises(ValueError, match="degenerate truncation"):
        simulate(sc)


def test_true_hazard_examples():
    sc = SimScenario(ONE, ONE, 1.0, 10.0)
    assert np.all(true_hazard(sc, np.linspace(0, 10, 7), np.linspace(0, 10, 7)) == 1)
    sc = scenario()
    assert true_hazard(sc, 5.0, 0.0) == pytest.approx(0.4 * 1.0 * 1.2, rel=1e-15)
    # off-node: alpha0(2) = 0.5 + 0.5 * 2 / 5 = 0.7, alpha1(2.5) = 1.2 - 0.4 * 0.25 = 1.1
    assert true_hazard(sc, 2.0, 2.5) == pytest.approx(0.4 * 0.7 * 1.1, rel=1e-14)


def test_occurrence_exposure_ratio_converges_to_hazard():
    sc = scenario(n_target=100000, alpha_star=0.3, seed=5)
    sample = simulate(sc)
    bw = 1.0
    g = occurrence_exposure_from_events(sample, bw)
    r, z = np.indices(g.shape)
    interior = (z >= 1) & (r >= z + 2) & (r <= 8)
    ratio = g.occurrence[interior] / g.exposure[interior] / bw
    truth = true_hazard(sc, (r[interior] + 0.5) * bw, (z[interior] + 0.5) * bw)
    assert np.max(np.abs(ratio / truth - 1)) < 0.10


def test_cohort_width_rounds_underwriting():
    sample = simulate(scenario(cohort_width=2.0))
    assert np.all(np.mod(sample.underwriting, 2.0) == 0)


def test_true_reserve_tracks_unobserved_count():
    sc = scenario(n_target=30000, cohort_width=1.0, underwriting=PiecewiseLinear.constant(1 / 6, 0, 6))
    obs, late = simulate_full(sc)
    expected = sc.n_target * (1 - acceptance_probability(sc))
    sd = np.sqrt(sc.n_target * acceptance_probability(sc) * (1 - acceptance_probability(sc)))
    assert abs(len(late) - expected) < 4 * sd
    assert abs(true_reserve(sc, obs) - expected) < 0.05 * expected


def test_scenario_validation():
    with pytest.raises(ValueError, match="strictly positive"):
        scenario(alpha0=PiecewiseLinear((0, 10), (0.0, 1.0)))
    with pytest.raises(ValueError, match="integrates"):
        scenario(underwriting=PiecewiseLinear.constant(0.2, 0, 10))
    with pytest.raises(ValueError):
        scenario(n_target=0)
    with pytest.raises(ValueError):
        scenario(alpha0=PiecewiseLinear((1, 10), (1.0, 1.0)))


def test_scenario_round_trip():
    sc = scenario(cohort_width=0.5)
    back = SimScenario.from_dict(json.loads(sc.to_json()))
    assert back == sc


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(0.01, 5), min_size=2, max_size=8),
    st.floats(0, 1),
)
def test_inverse_integral_round_trip(values, frac):
    knots = np.cumsum(np.linspace(0.5, 1.5, len(values)))
    f = PiecewiseLinear(tuple(knots), tuple(values))
    y = frac * f.total() * 1.2  # also beyond the last knot
    x = f.inverse_integral(y)
    assert float(f.integral(x)) - float(f.integral(knots[0])) == pytest.approx(y, rel=1e-9, abs=1e-12)
