"""Observer congruences in Lorentzian spacetimes: kinematics, conformal
stationarity, light signals, redshift, parallax and causality checks."""

__version__ = "0.1.0"

from .causality import CausalityScan, causality_scan, grad_lnf_identity_residual
from .conformal import (
    ConformalCandidate,
    StationarityVerdict,
    angle_preservation_check,
    conformal_residual,
    equivalence_class_check,
    grid_points,
    line_integral_rho,
    reconstruct_ln_f,
    stationarity_scan,
    transport_angle,
)
from .errors import (
    ConfigError,
    ConfstatError,
    ConjugatePointError,
    DegenerateMetricError,
    DomainError,
    GeometryError,
    NormalizationError,
    NullDriftError,
    QuadratureError,
    ShootingError,
    SignatureError,
    SolverError,
    StepSizeError,
)
from .geometry import (
    ConnectionCoefficients,
    MetricEvaluation,
    RiemannEvaluation,
    TangentVector,
    christoffel_at,
    evaluate_metric,
    inner,
    riemann_at,
)
from .kinematics import (
    KinematicsSample,
    decomposition_residual,
    expansion_rotation_exclusion,
    integrability_check,
    kinematics_at,
    lie_V_metric_residual,
    nabla_V,
)
from .models import FAMILIES, MetricModel, instantiate, register_custom
from .report import AnalysisReport
from .tolerances import DEFAULT, Tolerances
from .transport import (
    LightSignal,
    MessageSolution,
    RedshiftRecord,
    Worldline,
    conformal_frequency_drift,
    connect_observers,
    hamiltonian_check,
    integrate_null_geodesic,
    integrate_null_geodesics,
    parallax_verdict,
    redshift,
    solve_infinitesimal_message,
)
