"""Pulsed photon-emission statistics of a driven two-level system.

Analytic short-pulse counting hierarchy, an exact trajectory/regression
oracle, derived photon statistics and a CSV-producing CLI.
"""

from ._kernels import USING_NUMBA
from .counting import (
    PhotocountDistribution,
    SystemParams,
    closed_form_square,
    density_fn,
    exclusive_Pn,
    ideal_excited_prob,
    inclusive_Fn,
    poisson_limit_Fn,
)
from .numerics import OdeConfig, QuadratureConfig, RandomStream
from .oracle import (
    TrajectoryRecord,
    TwoLevelState,
    exact_density_fn,
    exact_distribution,
    g2_pulsewise,
    g2_two_time,
    master_equation_rho,
    sample_trajectories,
    trajectory_histogram,
)
from .pulses import PulseShape, cumulative_area, envelope, inverse_area, make_pulse
from .stats import (
    EmissionStatistics,
    compute_statistics,
    expected_n,
    g2_zero,
    g2_zero_short_pulse,
    purities,
    variance_rel,
)

__version__ = "0.1.0"

__all__ = [
    "USING_NUMBA",
    "PhotocountDistribution",
    "SystemParams",
    "closed_form_square",
    "density_fn",
    "exclusive_Pn",
    "ideal_excited_prob",
    "inclusive_Fn",
    "poisson_limit_Fn",
    "OdeConfig",
    "QuadratureConfig",
    "RandomStream",
    "TrajectoryRecord",
    "TwoLevelState",
    "exact_density_fn",
    "exact_distribution",
    "g2_pulsewise",
    "g2_two_time",
    "master_equation_rho",
    "sample_trajectories",
    "trajectory_histogram",
    "PulseShape",
    "cumulative_area",
    "envelope",
    "inverse_area",
    "make_pulse",
    "EmissionStatistics",
    "compute_statistics",
    "expected_n",
    "g2_zero",
    "g2_zero_short_pulse",
    "purities",
    "variance_rel",
    "__version__",
]
