"""Conformally symplectic dynamics: simulation and numerical certification."""

from .geometry import (
    ANGLE,
    LINE,
    CoordinateSpec,
    conformality_ratio_estimate,
    eval_two_form,
    loop_integral,
    pullback_residual,
    torus_distance,
)
from .models import (
    ModelSpec,
    contact_lift,
    eval_observables,
    eval_vector_field,
    instantiate_model,
    registered_models,
)
from .flows import (
    IntegratorConfig,
    SectionSpec,
    Trajectory,
    conformal_splitting_step,
    flow_ensemble,
    integrate_flow,
    integrate_variational,
    iterate_map,
    poincare_return,
    time_t_map,
)
from .diagnostics import (
    AttractorEstimate,
    CheckResult,
    EscapeStats,
    LyapunovResult,
    OrbitClass,
    PeriodicOrbit,
    attractor_estimate,
    classify_orbit,
    conformal_transport_check,
    escape_statistics,
    find_periodic_orbit,
    isotropy_defect,
    loop_cohomology_check,
    lyapunov_spectrum,
    recurrence_scan,
    rotation_number,
    trapping_level,
    unstable_manifold_cloud,
)
from .certificates import verify_suite

__version__ = "0.1.0"

__all__ = [
    "ANGLE",
    "LINE",
    "AttractorEstimate",
    "CheckResult",
    "CoordinateSpec",
    "EscapeStats",
    "IntegratorConfig",
    "LyapunovResult",
    "ModelSpec",
    "OrbitClass",
    "PeriodicOrbit",
    "SectionSpec",
    "Trajectory",
    "attractor_estimate",
    "classify_orbit",
    "conformal_splitting_step",
    "conformal_transport_check",
    "conformality_ratio_estimate",
    "contact_lift",
    "escape_statistics",
    "eval_observables",
    "eval_two_form",
    "eval_vector_field",
    "find_periodic_orbit",
    "flow_ensemble",
    "instantiate_model",
    "integrate_flow",
    "integrate_variational",
    "isotropy_defect",
    "iterate_map",
    "loop_cohomology_check",
    "loop_integral",
    "lyapunov_spectrum",
    "poincare_return",
    "pullback_residual",
    "recurrence_scan",
    "registered_models",
    "rotation_number",
    "time_t_map",
    "torus_distance",
    "trapping_level",
    "unstable_manifold_cloud",
    "verify_suite",
    "__version__",
]
