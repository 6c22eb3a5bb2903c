"""Numerical laboratory for the 2D inhomogeneous Prandtl boundary-layer
equations: an unsteady IMEX solver for the tangentially regularized
system, a steady quotient-variable marching solver with Picard
continuation, and verification suites for the weighted-norm inequalities,
good-unknown identities and wall compatibility conditions.
"""

from .errors import (
    BlowUpError,
    ConfigurationError,
    ConstructionError,
    DataError,
    DegeneracyError,
    DomainError,
    IterationDivergenceError,
    LifeSpanExceeded,
    OverflowNormError,
    PrandtlLabError,
    StepError,
    UsageError,
)
from .grid import Grid2D, ScalarField, WeightParams, ddx, ddy, fd_weights, make_grid, weighted_norm
from .inequalities import InequalityReport, check_inequality, random_decaying_field, run_inequality_suite
from .initial_data import (
    CompatReport,
    InitialData1D,
    UnsteadyData,
    build_u0_blend,
    build_unsteady_data,
    check_compat,
    validate_weights,
)
from .unsteady import (
    UnsteadyParams,
    UnsteadyRun,
    UnsteadyState,
    heat_oracle,
    init_unsteady,
    recover_v,
    run_unsteady,
    step_unsteady,
)
from .good_unknowns import (
    GoodUnknownResidual,
    GoodUnknowns,
    compute_good_unknowns,
    residual_good_unknown_equation,
    verify_boundary_reduction_1,
    verify_quotient_identity,
)
from .steady import (
    PicardDiagnostics,
    SteadyParams,
    SteadyRun,
    SteadyState,
    advect_density,
    build_q0,
    check_r0,
    compute_r0,
    detect_life_span,
    energy_XY,
    estimate_wall_constants,
    picard_step,
    run_steady,
    stability_check,
    stability_functional,
)
from .monitors import (
    BoundsEnvelope,
    EnergyReport,
    MonitorConfig,
    check_principle_envelope,
    dissipation_D,
    energy_E,
    energy_report,
    largest_energy_interval,
    monitor_bounds,
)

__all__ = [
    "BlowUpError", "ConfigurationError", "ConstructionError", "DataError",
    "DegeneracyError", "DomainError", "IterationDivergenceError",
    "LifeSpanExceeded", "OverflowNormError", "PrandtlLabError", "StepError",
    "UsageError",
    "Grid2D", "ScalarField", "WeightParams", "ddx", "ddy", "fd_weights",
    "make_grid", "weighted_norm",
    "InequalityReport", "check_inequality", "random_decaying_field",
    "run_inequality_suite",
    "CompatReport", "InitialData1D", "UnsteadyData", "build_u0_blend",
    "build_unsteady_data", "check_compat", "validate_weights",
    "UnsteadyParams", "UnsteadyRun", "UnsteadyState", "heat_oracle",
    "init_unsteady", "recover_v", "run_unsteady", "step_unsteady",
    "GoodUnknownResidual", "GoodUnknowns", "compute_good_unknowns",
    "residual_good_unknown_equation", "verify_boundary_reduction_1",
    "verify_quotient_identity",
    "PicardDiagnostics", "SteadyParams", "SteadyRun", "SteadyState",
    "advect_density", "build_q0", "check_r0", "compute_r0",
    "detect_life_span", "energy_XY", "estimate_wall_constants",
    "picard_step", "run_steady", "stability_check", "stability_functional",
    "BoundsEnvelope", "EnergyReport", "MonitorConfig",
    "check_principle_envelope", "dissipation_D", "energy_E", "energy_report",
    "largest_energy_interval", "monitor_bounds",
]

__version__ = "0.1.0"
