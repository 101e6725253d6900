"""Plan-then-track trade-off toolkit for the planar quadrotor climb task."""

from .collocation_planner import (
    InfeasibleProblemError,
    PlannedTrajectory,
    PlannerNumericalError,
    PlanProblem,
    designed_cost,
    solve,
    transcribe,
)
from .error_estimator import (
    ErrorSeries,
    VelocityProfile,
    error_discrete_limit_form,
    error_integral_form,
    error_sum_discretization,
    lag_response_matrix,
    trapezoid_quadrature,
)
from .frontier import (
    Frontier,
    FrontierPoint,
    SpringFit,
    best_compromise,
    frontier_gap,
    spring_fit,
    sweep,
)
from .lqr import ControllerSpec, EigenvaluePair, control_law, design_controller, dominant_eigenvalue
from .model import ModelParams, PlanarState, RotorThrusts, linear_altitude_derivative, nonlinear_derivative
from .tracking_sim import SimConfig, TrackingResult, reference_lookup, score, select_step, simulate

__all__ = [
    "ControllerSpec",
    "EigenvaluePair",
    "ErrorSeries",
    "Frontier",
    "FrontierPoint",
    "InfeasibleProblemError",
    "ModelParams",
    "PlanProblem",
    "PlanarState",
    "PlannedTrajectory",
    "PlannerNumericalError",
    "RotorThrusts",
    "SimConfig",
    "SpringFit",
    "TrackingResult",
    "VelocityProfile",
    "best_compromise",
    "control_law",
    "design_controller",
    "designed_cost",
    "dominant_eigenvalue",
    "error_discrete_limit_form",
    "error_integral_form",
    "error_sum_discretization",
    "frontier_gap",
    "lag_response_matrix",
    "linear_altitude_derivative",
    "nonlinear_derivative",
    "reference_lookup",
    "score",
    "select_step",
    "simulate",
    "solve",
    "spring_fit",
    "sweep",
    "trapezoid_quadrature",
    "transcribe",
]
