"""Sparse minimization over measures: greedy solver, optimality checks,
second-order certificates, and empirical quadratic-growth verification."""
from __future__ import annotations

from .errors import (
    BoundaryAtomError,
    ConeViolation,
    ConfigError,
    DomainError,
    InconsistentStationarity,
    MassError,
    NonConvergence,
    RadoncertError,
    SignError,
    UnsupportedDimension,
)
from .measures import (
    DiscreteMeasure,
    Domain,
    canonicalize,
    dirac,
    jordan_decompose,
    load_measure,
    measure_from_dict,
    measure_to_dict,
    save_measure,
    tv_norm,
    zero_measure,
)
from .model import (
    DualVariable,
    Kernel,
    Loss,
    Problem,
    Scenario,
    apply_K,
    dual_variable,
    lipschitz_embedding_check,
    load_problem,
    load_scenario,
    objective,
    uniform_taylor_check,
)
from .transport import (
    TransportPlan,
    bl_dual_oracle,
    bl_norm,
    check_w1_bl_identity,
    w1,
)
from .optimality import (
    ActiveSets,
    FirstOrderReport,
    active_sets,
    ascend,
    check_first_order,
    global_argmax_abs,
)
from .second_order import (
    ConeEigReport,
    Direction,
    HessianCertificate,
    SecondOrderReport,
    check_C_conditions,
    direction_image,
    hessian_certificate,
    ndc_probe,
    recovery_quotient,
    second_subderivative,
    soc_form,
    soc_min_eig,
)
from .growth import (
    GrowthConfig,
    GrowthReport,
    Perturbation,
    decay_slope,
    default_eps,
    gamma_by_radius,
    growth_ratio,
    growth_report,
    sample_perturbations,
)
from .solver import (
    SolverConfig,
    refine_positions,
    solve_gcg,
)
from .instances import (
    StationaryInstance,
    duplicated_columns_instance,
    flat_hessian_instance,
    make_stationary_problem,
    nondegenerate_instance,
    null_recovery_scenario,
    problem_to_config,
    save_scenario,
    two_spike_recovery_scenario,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
