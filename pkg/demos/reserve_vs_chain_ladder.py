"""Compare reserve cash flows from the structured hazard with the chain ladder
on two simulated books: one where the delay does not depend on underwriting
time and one where the hazard drifts down by 20% across underwriting time.

Run with ``python3 demos/reserve_vs_chain_ladder.py``.
"""

import numpy as np

from sbhazard import (
    PiecewiseLinear,
    SimScenario,
    backfit,
    bin_events,
    cash_flow,
    chain_ladder,
    comparison_table,
    conditional_density,
    occurrence_exposure_from_events,
    select_bandwidth,
    simulate_full,
    smooth_local_linear,
)

R0 = 20.0
PERIODS = 20


def book(alpha1):
    # twelve yearly cohorts observed until time 20; hazard rises with reversed time
    return SimScenario(
        PiecewiseLinear.from_function(lambda s: 0.04 * np.exp(0.2 * s), 0, R0, 81),
        alpha1,
        horizon=R0,
        n_target=60000,
        underwriting=PiecewiseLinear.constant(1 / 12, 0, 12),
        seed=1,
        cohort_width=1.0,
    )


for label, alpha1 in (
    ("independent", PiecewiseLinear.constant(1.0, 0, R0)),
    ("dependent", PiecewiseLinear((0, R0), (1.0, 0.8))),
):
    observed, unobserved = simulate_full(book(alpha1))
    grid = occurrence_exposure_from_events(observed, 1.0, censor_zero_delay=True)
    best = select_bandwidth(grid, "epanechnikov", [(a, b) for a in (2, 3, 4) for b in (2, 3, 4)], workers=4).best
    density = conditional_density(backfit(smooth_local_linear(grid, "epanechnikov", best)))
    ph = cash_flow(observed, density, PERIODS)
    clm = chain_ladder(bin_events(observed, 1.0), PERIODS)
    actual = np.histogram(unobserved.underwriting + unobserved.delay - R0, bins=np.arange(PERIODS + 1))[0]
    print(f"\n{label} book: {len(unobserved)} claims still to be reported, bandwidth {best}")
    print(comparison_table([ph, clm]), end="")
    print("actual," + ",".join(str(v) for v in actual))
