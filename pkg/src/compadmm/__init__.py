"""Variance-reduced stochastic ADMM for linearly constrained composition problems."""
from .admm import (
    Mode,
    ReferenceSolution,
    RunResult,
    SolverConfig,
    dual_reset,
    gap_metrics,
    run_algorithm1,
    run_algorithm2,
    schedule,
)
from .baselines import BaselineConfig, run_comp_svrg, run_sgd
from .constraints import L1, ConstraintSpec, CustomProx, ScaledSquaredNorm
from .errors import ConfigurationError, DivergenceError, UnsupportedConfigurationError
from .estimators import build_reference, minibatch_inner_estimate, vr_gradient_biased, vr_gradient_unbiased
from .harness import fit_rate, reference_solve, run_experiment
from .kernels import BACKEND
from .linalg import Theorem1Params, theorem1_constants
from .plotting import emit_plot
from .problem import (
    AffineQuadraticProblem,
    CallableProblem,
    CompositionProblem,
    OracleLedger,
    Smoothness,
    eval_inner,
    full_gradient,
)
from .problems import PolicyEvalSpec, PortfolioSpec, gen_policy_eval, gen_portfolio, gen_synthetic_quadratic
from .trace import Trace, TraceRow

__all__ = [
    "Mode",
    "ReferenceSolution",
    "RunResult",
    "SolverConfig",
    "dual_reset",
    "gap_metrics",
    "run_algorithm1",
    "run_algorithm2",
    "schedule",
    "BaselineConfig",
    "run_comp_svrg",
    "run_sgd",
    "L1",
    "ConstraintSpec",
    "CustomProx",
    "ScaledSquaredNorm",
    "ConfigurationError",
    "DivergenceError",
    "UnsupportedConfigurationError",
    "build_reference",
    "minibatch_inner_estimate",
    "vr_gradient_biased",
    "vr_gradient_unbiased",
    "fit_rate",
    "reference_solve",
    "run_experiment",
    "BACKEND",
    "Theorem1Params",
    "theorem1_constants",
    "emit_plot",
    "AffineQuadraticProblem",
    "CallableProblem",
    "CompositionProblem",
    "OracleLedger",
    "Smoothness",
    "eval_inner",
    "full_gradient",
    "PolicyEvalSpec",
    "PortfolioSpec",
    "gen_policy_eval",
    "gen_portfolio",
    "gen_synthetic_quadratic",
    "Trace",
    "TraceRow",
]
