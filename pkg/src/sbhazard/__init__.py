"""Multiplicative hazard estimation on run-off triangles by smooth backfitting."""

from .backfit import BackfitConfig, MultiplicativeFit, backfit, evaluate_product, fitted_occurrence, residual
from .bandwidth import CvGrid, CvResult, cv_evaluate, cv_score, select_bandwidth
from .data import (
    EventSample,
    OccurrenceExposureGrid,
    RunoffTriangle,
    TriangleFormatError,
    bin_events,
    build_occurrence_exposure,
    load_events,
    load_triangle,
    occurrence_exposure_from_events,
    reverse_time,
    save_events,
    save_triangle,
)
from .forecast import (
    ConditionalDensity,
    ReserveForecast,
    cash_flow,
    chain_ladder,
    comparison_table,
    conditional_density,
    reserve,
)
from .kernels import KERNELS, Kernel, get_kernel
from .simulation import (
    PiecewiseLinear,
    SimScenario,
    acceptance_probability,
    simulate,
    simulate_full,
    true_hazard,
    true_reserve,
)
from .smoothing import (
    HazardSurface,
    LinearSmoother,
    inverse_marginal_integral,
    marginal,
    smooth,
    smooth_local_constant,
    smooth_local_linear,
)

__version__ = "0.1.0"
