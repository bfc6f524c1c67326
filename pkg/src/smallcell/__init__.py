"""Coverage and rate analysis of PPP small-cell networks whose LoS/NLoS
state depends on both link distance and azimuth, with a Monte Carlo
simulator cross-validating every analytical quantity."""

__version__ = "0.1.0"

from .analysis import (
    AssociationDistribution,
    AssociationEstimate,
    CoverageResult,
    LaplaceMode,
    ModelError,
    RateResult,
    association_distribution,
    association_probability,
    average_rate,
    conditional_rate,
    coverage_probabilities,
    coverage_probability,
    kth_nearest_distance_pdf,
    laplace_interference,
    sir_ccdf,
    sir_pdf,
    sir_pdf_finite_difference,
)
from .geometry import (
    ParameterError,
    PointPolar,
    Realization,
    Rectangle,
    count_blocking,
    default_region_radius,
    sample_blockages,
    sample_bs_ppp,
    segment_intersects_rectangle,
)
from .pathloss import (
    DomainError,
    LinkKind,
    LinkState,
    NetworkParams,
    bessel_i0,
    default_params,
    expected_blockage_count,
    los_azimuth_integral,
    los_azimuth_integral_bound,
    los_probability,
    mean_los_probability,
    nlos_probability,
    realized_path_loss,
)
from .quadrature import (
    QuadratureResult,
    QuadratureSpec,
    integrate_2d,
    integrate_finite,
    integrate_semi_infinite,
)
from .simulate import (
    AssociationRule,
    BlockageMode,
    SimulationSummary,
    SirSample,
    TrialConfig,
    associate_argmax,
    associate_table1,
    estimate_association,
    estimate_coverage,
    estimate_laplace,
    estimate_rate,
    run_batch,
    run_trial,
    sample_sir_forced_k,
    summarize,
)

__all__ = [name for name in dir() if not name.startswith("_")]
