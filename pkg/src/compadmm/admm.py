"""Variance-reduced stochastic ADMM for linearly constrained composition problems.

``run_algorithm1`` is the strongly convex method: mini-batch inner estimate,
biased corrected gradient and a dual reset through the pseudoinverse of A
after every epoch. ``run_algorithm2`` handles general convex problems with the
exact inner mean, the unbiased corrected gradient and an epoch-dependent
stepsize schedule, in smooth or non-smooth mode.
"""
from __future__ import annotations

import enum
import math
import time
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels
from .constraints import L1, ConstraintSpec, CustomProx, ScaledSquaredNorm
from .errors import ConfigurationError, DivergenceError, UnsupportedConfigurationError
from .estimators import (
    ReferenceCache,
    build_reference,
    minibatch_inner_estimate,
    vr_gradient_biased,
    vr_gradient_unbiased,
)
from .linalg import pseudoinverse
from .problem import AffineQuadraticProblem, OracleLedger, full_gradient, mean_inner, sample_index
from .trace import Trace, TraceRow

DIVERGENCE_LIMIT = 1e12


class Mode(str, enum.Enum):
    STRONGLY_CONVEX = "strongly_convex"
    CONVEX_SMOOTH = "convex_smooth"
    CONVEX_NONSMOOTH = "convex_nonsmooth"


@dataclass
class SolverConfig:
    """Parameters shared by both algorithms.

    ``S`` is the number of epochs (a maximum when ``stop_tolerance`` is set).
    ``N`` is only used by the strongly convex method. ``eta`` is the fixed
    stepsize there and scales the non-smooth schedule of the convex method;
    the smooth schedule ignores it. ``backend``
    is ``"auto"``, ``"oracle"`` (generic oracle path) or ``"kernel"``.
    """

    K: int = 10
    S: int = 20
    N: int = 1
    eta: Optional[float] = None
    rho: float = 1.0
    mode: Mode = Mode.STRONGLY_CONVEX
    L_F: Optional[float] = None
    seed: int = 0
    stop_tolerance: Optional[float] = None
    backend: str = "auto"

    def __post_init__(self):
        self.mode = Mode(self.mode)
        if self.K < 1 or self.N < 1 or self.S < 1:
            raise ConfigurationError("K, N and S must be at least 1")
        if not self.rho > 0:
            raise ConfigurationError("rho must be positive")
        if self.mode is Mode.STRONGLY_CONVEX and not (self.eta is not None and self.eta > 0):
            raise ConfigurationError("strongly convex mode needs a positive eta")
        if self.eta is not None and not self.eta > 0:
            raise ConfigurationError("eta must be positive")
        if self.backend not in ("auto", "oracle", "kernel"):
            raise ConfigurationError(f"unknown backend {self.backend!r}")


@dataclass(frozen=True)
class ScheduleValue:
    eta_s: float
    c_k: float
    eta_eff: float


def schedule(mode, s, k, K, L_F=None, scale=1.0) -> ScheduleValue:
    """Stepsize eta_s and proximal weight G_k = c_k I for epoch s, iteration k.

    c_k falls linearly from its k=0 value to its k=K-1 value and stays there
    for k=K. The endpoint stepsizes are returned in closed form so they are
    exact: s/((s+1)L_F) and 1/L_F in smooth mode, sqrt(s)/(s+1) and
    1/sqrt(s+1) in non-smooth mode. With K=1 the k=0 value (the carried-over
    G from the previous epoch) takes precedence. ``scale`` multiplies the
    non-smooth stepsizes and is ignored in smooth mode.
    """
    mode = Mode(mode)
    if s < 1 or not 0 <= k <= K or K < 1:
        raise ValueError(f"invalid schedule index s={s}, k={k}, K={K}")
    if mode is Mode.CONVEX_SMOOTH:
        if L_F is None or not L_F > 0:
            raise ConfigurationError("smooth schedule needs a positive L_F")
        eta_s = 1.0 / ((s + 1) * L_F)
        c_first, c_last = 1.0 / s, 1.0 / (s + 1)
        eta_first, eta_last = s / ((s + 1) * L_F), 1.0 / L_F
    elif mode is Mode.CONVEX_NONSMOOTH:
        if not scale > 0:
            raise ConfigurationError("stepsize scale must be positive")
        eta_s = scale / (s + 1)
        c_first, c_last = 1.0 / math.sqrt(s), 1.0 / math.sqrt(s + 1)
        eta_first, eta_last = scale * math.sqrt(s) / (s + 1), scale / math.sqrt(s + 1)
    else:
        raise ConfigurationError(f"no schedule for mode {mode.value}")
    if k == 0:
        return ScheduleValue(eta_s, c_first, eta_first)
    if k >= K - 1:
        return ScheduleValue(eta_s, c_last, eta_last)
    frac = k / (K - 1)
    c_k = c_first + (c_last - c_first) * frac
    return ScheduleValue(eta_s, c_k, eta_s / c_k)


# -- subproblems --------------------------------------------------------------

def _omega_rhs(constraint, rho, x_k, lam_k):
    return -(constraint.B.T @ (lam_k + rho * (constraint.A @ x_k)))


def _require_scalar_BtB(constraint):
    beta = constraint.BtB_scalar
    if beta is None:
        raise UnsupportedConfigurationError("non-quadratic regularizers need B'B = beta I")
    return beta


def solve_omega_subproblem(constraint: ConstraintSpec, rho, x_k, lam_k):
    """argmin_w R(w) + <lam_k, B w> + rho/2 ||A x_k + B w||^2."""
    reg = constraint.regularizer
    v = _omega_rhs(constraint, rho, x_k, lam_k)
    if reg is None or isinstance(reg, ScaledSquaredNorm):
        c = 0.0 if reg is None else reg.mu
        try:
            fac = constraint.BtB_spd.refactor(c, rho)
        except np.linalg.LinAlgError as exc:
            raise UnsupportedConfigurationError("mu_R I + rho B'B is singular") from exc
        return fac.solve(v)
    if isinstance(reg, (L1, CustomProx)):
        beta = _require_scalar_BtB(constraint)
        return reg.prox(v / (rho * beta), 1.0 / (rho * beta))
    raise UnsupportedConfigurationError(f"unknown regularizer {type(reg).__name__}")


def omega_optimality_residual(constraint, rho, x_k, lam_k, omega):
    """Distance of -B'lam_k - rho B'(A x_k + B omega) from the (sub)gradient of R.

    Returns None for custom regularizers, whose subdifferential is unknown.
    """
    s = -constraint.B.T @ lam_k - rho * constraint.B.T @ (constraint.A @ x_k + constraint.B @ omega)
    reg = constraint.regularizer
    if reg is None:
        return float(np.linalg.norm(s))
    if isinstance(reg, ScaledSquaredNorm):
        return float(np.linalg.norm(s - reg.gradient(omega)))
    if isinstance(reg, L1):
        return reg.subgradient_distance(omega, s)
    return None


def solve_x_subproblem(constraint: ConstraintSpec, rho, x_k, lam_k, omega_next, grad_est, eta_eff):
    """Linearized x-update: solves ((1/eta) I + rho A'A) x = x_k/eta - grad - A'lam - rho A'B omega."""
    if not eta_eff > 0:
        raise ValueError("eta_eff must be positive")
    rhs = x_k / eta_eff - grad_est - constraint.A.T @ lam_k - rho * (constraint.AtB @ omega_next)
    return constraint.AtA_spd.refactor(1.0 / eta_eff, rho).solve(rhs)


def update_dual(rho, lam_k, A, B, x_next, omega_next):
    return lam_k + rho * (A @ x_next + B @ omega_next)


def dual_reset(problem, A_pinv, x_tilde, grad=None, ledger=None):
    """lam = -(A')^+ grad F(x_tilde); pass ``grad`` to reuse an evaluated gradient."""
    if grad is None:
        grad = full_gradient(problem, x_tilde, ledger)
    return -(A_pinv.T @ grad)


# -- reference solutions and metrics -----------------------------------------

@dataclass
class ReferenceSolution:
    """Primal-dual optimum used to measure gaps.

    ``grad_F`` and ``subgrad_R`` are the KKT values -A'lam and -B'lam.
    ``reliable`` is False when the reference solve did not reach its tolerance.
    """

    x: np.ndarray
    omega: np.ndarray
    lam: np.ndarray
    value: float
    grad_F: np.ndarray
    subgrad_R: np.ndarray
    residual: float = 0.0
    reliable: bool = True

    @classmethod
    def from_primal_dual(cls, problem, constraint, x, omega, lam, residual=0.0, reliable=True):
        x, omega, lam = (np.asarray(v, dtype=float) for v in (x, omega, lam))
        value = problem.F(x) + constraint.regularizer_value(omega)
        return cls(x, omega, lam, value, -constraint.A.T @ lam, -constraint.B.T @ lam, residual, reliable)


@dataclass(frozen=True)
class GapMetrics:
    objective_gap: Optional[float]
    feasibility: float
    bregman_gap: Optional[float]


def gap_metrics(problem, constraint, reference, x, omega) -> GapMetrics:
    """Objective gap, feasibility violation and Bregman gap G(u) at (x, omega).

    Gaps are None without a reference. Evaluations are not charged to any ledger.
    """
    feas = float(np.linalg.norm(constraint.residual(x, omega)))
    if reference is None:
        return GapMetrics(None, feas, None)
    Fx = problem.F(x)
    Rw = constraint.regularizer_value(omega)
    obj_gap = Fx + Rw - reference.value
    F_star = reference.value - constraint.regularizer_value(reference.omega)
    breg = (
        Fx - F_star - reference.grad_F @ (x - reference.x)
        + Rw - constraint.regularizer_value(reference.omega) - reference.subgrad_R @ (omega - reference.omega)
    )
    return GapMetrics(float(obj_gap), feas, float(breg))


class _Recorder:
    """Builds trace rows; wall time excludes metric evaluation."""

    def __init__(self, problem, constraint, reference, run_id, algorithm):
        self.problem = problem
        self.constraint = constraint
        self.reference = reference
        self.trace = Trace(run_id, algorithm)
        self._elapsed = 0
        self._t0 = time.perf_counter_ns()

    def row(self, epoch, ledger, x, omega, feas_point=None):
        now = time.perf_counter_ns()
        self._elapsed += now - self._t0
        m = gap_metrics(self.problem, self.constraint, self.reference, x, omega)
        if feas_point is not None:
            m = GapMetrics(m.objective_gap, float(np.linalg.norm(self.constraint.residual(*feas_point))), m.bregman_gap)
        objective = self.problem.F(x) + self.constraint.regularizer_value(omega)
        self.trace.append(
            TraceRow(epoch, ledger.calls, objective, m.objective_gap, m.bregman_gap, m.feasibility, self._elapsed)
        )
        self._t0 = time.perf_counter_ns()
        return m


def _stop(cfg, metrics):
    tol = cfg.stop_tolerance
    if tol is None or metrics.objective_gap is None:
        return False
    return abs(metrics.objective_gap) <= tol and metrics.feasibility <= tol


# -- the inner loop -----------------------------------------------------------

@dataclass
class InnerStep:
    """Per-iteration payload handed to a run's ``callback``."""

    epoch: int
    k: int
    x: np.ndarray
    lam: np.ndarray
    omega_next: np.ndarray
    grad_est: np.ndarray
    eta_eff: float
    x_next: np.ndarray
    lam_next: np.ndarray


@dataclass
class SolverState:
    """Final iterates and epoch aggregates of a run."""

    x: np.ndarray
    omega: np.ndarray
    lam: np.ndarray
    reference: Optional[ReferenceCache] = None
    x_tilde: Optional[np.ndarray] = None
    omega_tilde: Optional[np.ndarray] = None
    lam_tilde: Optional[np.ndarray] = None
    x_hat: Optional[np.ndarray] = None
    omega_hat: Optional[np.ndarray] = None
    lam_hat: Optional[np.ndarray] = None
    G_hat: float = 1.0
    x_bar: Optional[np.ndarray] = None
    omega_bar: Optional[np.ndarray] = None
    x_dot_bar: Optional[np.ndarray] = None


@dataclass
class RunResult:
    trace: Trace
    state: SolverState
    ledger: OracleLedger
    backend: str = "oracle"

    @property
    def x(self):
        return self.state.x_bar if self.state.x_bar is not None else self.state.x_tilde

    @property
    def omega(self):
        return self.state.omega_bar if self.state.omega_bar is not None else self.state.omega_tilde


@dataclass
class _Epoch:
    x: np.ndarray
    omega: np.ndarray
    lam: np.ndarray
    x_sum: np.ndarray
    omega_sum: np.ndarray
    lam_sum: np.ndarray
    xdot_sum: np.ndarray
    completed: int


def _kernel_supported(problem, constraint):
    if not isinstance(problem, AffineQuadraticProblem):
        return False
    reg = constraint.regularizer
    if reg is None or isinstance(reg, ScaledSquaredNorm):
        c = 0.0 if reg is None else reg.mu
        return float((c + constraint.BtB_spd.eig[0]).min()) > 0
    return isinstance(reg, L1) and constraint.BtB_scalar is not None


def _select_backend(cfg, problem, constraint, callback):
    if cfg.backend == "oracle":
        return "oracle"
    ok = callback is None and _kernel_supported(problem, constraint)
    if cfg.backend == "kernel" and not ok:
        raise UnsupportedConfigurationError(
            "kernel backend needs an AffineQuadraticProblem, a quadratic or L1 regularizer and no callback"
        )
    return "kernel" if ok else "oracle"


def _draw(problem, rng, K, N):
    u = rng.random((K, N + 2))
    batches = np.ascontiguousarray(sample_index(problem.inner_cdf, u[:, :N]), dtype=np.intp)
    iidx = np.ascontiguousarray(sample_index(problem.outer_cdf, u[:, N]), dtype=np.intp)
    jidx = np.ascontiguousarray(sample_index(problem.inner_cdf, u[:, N + 1]), dtype=np.intp)
    return batches, iidx, jidx


def _bounded(*vecs):
    for v in vecs:
        m = float(np.max(np.abs(v))) if v.size else 0.0
        if not (math.isfinite(m) and m <= DIVERGENCE_LIMIT):
            return False
    return True


def _epoch_oracle(problem, constraint, rho, cache, x, lam, draws, etas, unbiased, ledger, callback, s):
    batches, iidx, jidx = draws
    A, B = constraint.A, constraint.B
    x_sum = np.zeros_like(x)
    xdot_sum = np.zeros_like(x)
    omega_sum = np.zeros(constraint.l)
    lam_sum = np.zeros_like(lam)
    omega = np.zeros(constraint.l)
    for k in range(len(etas)):
        omega = solve_omega_subproblem(constraint, rho, x, lam)
        i, j = int(iidx[k]), int(jidx[k])
        if unbiased:
            g_k = mean_inner(problem, x, ledger)
            grad = vr_gradient_unbiased(problem, cache, x, i, j, g_k, ledger)
        else:
            g_hat = minibatch_inner_estimate(problem, cache, x, batches[k], ledger)
            grad = vr_gradient_biased(problem, cache, x, i, j, g_hat, ledger)
        x_next = solve_x_subproblem(constraint, rho, x, lam, omega, grad, etas[k])
        lam_next = update_dual(rho, lam, A, B, x_next, omega)
        if callback is not None:
            callback(InnerStep(s, k, x, lam, omega, grad, float(etas[k]), x_next, lam_next))
        xdot_sum += x
        x, lam = x_next, lam_next
        x_sum += x
        omega_sum += omega
        lam_sum += lam
        if not _bounded(x, omega, lam):
            return _Epoch(x, omega, lam, x_sum, omega_sum, lam_sum, xdot_sum, k)
    return _Epoch(x, omega, lam, x_sum, omega_sum, lam_sum, xdot_sum, len(etas))


def _epoch_kernel(problem, constraint, rho, cache, x, lam, draws, etas, unbiased, ledger):
    batches, iidx, jidx = draws
    reg = constraint.regularizer
    wV_L = constraint.BtB_spd.eig
    if isinstance(reg, L1):
        omega_mode, omega_c, beta, tau = 1, 0.0, constraint.BtB_scalar, reg.tau
    else:
        omega_mode, omega_c, beta, tau = 0, (0.0 if reg is None else reg.mu), 1.0, 0.0
    xL, xV = constraint.AtA_spd.eig
    x = np.array(x, dtype=float)
    lam = np.array(lam, dtype=float)
    omega = np.zeros(constraint.l)
    sums = [np.zeros(constraint.q), np.zeros(constraint.l), np.zeros(constraint.p), np.zeros(constraint.q)]
    done = kernels.epoch_inner_loop(
        problem.C, problem.C_mean, problem.d_mean, problem.V, problem.t, problem.h,
        constraint.A, constraint.B, constraint.AtB,
        x, omega, lam,
        cache.x_tilde, cache.g_tilde, cache.grad_tilde,
        batches, iidx, jidx, np.ascontiguousarray(etas, dtype=float),
        float(rho),
        np.ascontiguousarray(xV), np.ascontiguousarray(xL),
        omega_mode, np.ascontiguousarray(wV_L[1]), np.ascontiguousarray(wV_L[0]), omega_c, beta, tau,
        bool(unbiased),
        *sums,
        DIVERGENCE_LIMIT,
    )
    charged = min(done + 1, len(etas))
    if unbiased:
        per = dict(inner_value=problem.m, calls=problem.m + 4)
    else:
        N = batches.shape[1]
        per = dict(inner_value=2 * N, calls=2 * N + 4)
    ledger.record(
        inner_value=per["inner_value"] * charged,
        inner_jacobian=2 * charged,
        outer_gradient=2 * charged,
        calls=per["calls"] * charged,
    )
    return _Epoch(x, omega, lam, sums[0], sums[1], sums[2], sums[3], done)


def _run_epoch(backend, problem, constraint, cfg, cache, x, lam, draws, etas, unbiased, ledger, callback, s):
    if backend == "kernel":
        return _epoch_kernel(problem, constraint, cfg.rho, cache, x, lam, draws, etas, unbiased, ledger)
    return _epoch_oracle(problem, constraint, cfg.rho, cache, x, lam, draws, etas, unbiased, ledger, callback, s)


def _initial(vec, size, name):
    if vec is None:
        return np.zeros(size)
    vec = np.array(vec, dtype=float)
    if vec.shape != (size,):
        raise ValueError(f"{name} must have shape ({size},)")
    return vec


# -- algorithms -------------------------------------------------------------------

def run_algorithm1(
    problem,
    constraint: ConstraintSpec,
    config: SolverConfig,
    rng: Optional[np.random.Generator] = None,
    *,
    x0=None,
    omega0=None,
    reference: Optional[ReferenceSolution] = None,
    callback: Optional[Callable[[InnerStep], None]] = None,
    run_id: str = "com-svr-admm",
) -> RunResult:
    """Strongly convex variant. One trace row per epoch plus the starting point.

    Per epoch the ledger grows by 2m + n + K(2N + 4) calls: the gradient at
    the new reference point doubles as the one needed by the dual reset.
    """
    cfg = config
    if cfg.mode is not Mode.STRONGLY_CONVEX:
        raise ConfigurationError("run_algorithm1 needs mode=strongly_convex")
    if constraint.q != problem.q:
        raise ValueError("constraint and problem dimensions differ")
    if not constraint.full_row_rank():
        raise ConfigurationError("the strongly convex method needs A with full row rank")
    L_F = cfg.L_F if cfg.L_F is not None else problem.smoothness.L_F
    if L_F is None:
        warnings.warn("L_F unknown; cannot check eta <= 1/L_F", stacklevel=2)
    elif cfg.eta > 1.0 / L_F * (1 + 1e-12):
        raise ConfigurationError(f"eta={cfg.eta} exceeds 1/L_F={1.0 / L_F}")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    backend = _select_backend(cfg, problem, constraint, callback)

    A_pinv = pseudoinverse(constraint.A)
    ledger = OracleLedger()
    x_t = _initial(x0, problem.q, "x0")
    omega_t = _initial(omega0, constraint.l, "omega0")
    rec = _Recorder(problem, constraint, reference, run_id, "com-svr-admm")
    rec.row(0, ledger, x_t, omega_t)
    etas = np.full(cfg.K, float(cfg.eta))
    cache = None
    for s in range(1, cfg.S + 1):
        cache = build_reference(problem, x_t, s, ledger)
        lam = dual_reset(problem, A_pinv, x_t, grad=cache.grad_tilde)
        draws = _draw(problem, rng, cfg.K, cfg.N)
        ep = _run_epoch(backend, problem, constraint, cfg, cache, x_t.copy(), lam, draws, etas, False, ledger, callback, s)
        if ep.completed < cfg.K:
            raise DivergenceError(f"diverged in epoch {s} at inner iteration {ep.completed}", rec.trace)
        x_t = ep.x_sum / cfg.K
        omega_t = ep.omega_sum / cfg.K
        metrics = rec.row(s, ledger, x_t, omega_t)
        if _stop(cfg, metrics):
            break
    lam_t = dual_reset(problem, A_pinv, x_t)
    state = SolverState(ep.x, ep.omega, ep.lam, cache, x_t, omega_t, lam_t)
    return RunResult(rec.trace, state, ledger, backend)


def run_algorithm2(
    problem,
    constraint: ConstraintSpec,
    config: SolverConfig,
    rng: Optional[np.random.Generator] = None,
    *,
    x0=None,
    omega0=None,
    lam0=None,
    reference: Optional[ReferenceSolution] = None,
    callback: Optional[Callable[[InnerStep], None]] = None,
    run_id: str = "com-svr-admm-convex",
) -> RunResult:
    """General convex variant with the smooth or non-smooth stepsize schedule.

    Trace rows report the running output average (x_bar, omega_bar). In
    non-smooth mode the objective and gaps are taken at z_bar, which pairs
    the average of the inner starting points x^0..x^{K-1} with omega_bar;
    feasibility is always measured at (x_bar, omega_bar). Per epoch the
    ledger grows by 2m + n + K(m + 4) calls.
    """
    cfg = config
    if cfg.mode not in (Mode.CONVEX_SMOOTH, Mode.CONVEX_NONSMOOTH):
        raise ConfigurationError("run_algorithm2 needs a convex mode")
    if constraint.q != problem.q:
        raise ValueError("constraint and problem dimensions differ")
    L_F = cfg.L_F if cfg.L_F is not None else problem.smoothness.L_F
    if cfg.mode is Mode.CONVEX_SMOOTH and L_F is None:
        raise ConfigurationError("smooth mode needs L_F")
    scale = 1.0 if cfg.eta is None else float(cfg.eta)
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    backend = _select_backend(cfg, problem, constraint, callback)

    ledger = OracleLedger()
    x_t = _initial(x0, problem.q, "x0")
    x_hat = x_t.copy()
    omega_hat = _initial(omega0, constraint.l, "omega0")
    lam_hat = _initial(lam0, constraint.p, "lam0")
    G_hat = 1.0
    sums = [np.zeros(problem.q), np.zeros(constraint.l), np.zeros(problem.q)]
    rec = _Recorder(problem, constraint, reference, run_id, f"com-svr-admm-{cfg.mode.value}")
    rec.row(0, ledger, x_t, omega_hat)
    cache = None
    omega_t = lam_t = None
    for s in range(1, cfg.S + 1):
        cache = build_reference(problem, x_t, s, ledger)
        etas = np.array([schedule(cfg.mode, s, k, cfg.K, L_F, scale).eta_eff for k in range(cfg.K)])
        draws = _draw(problem, rng, cfg.K, 0)
        ep = _run_epoch(backend, problem, constraint, cfg, cache, x_hat.copy(), lam_hat.copy(), draws, etas, True, ledger, callback, s)
        if ep.completed < cfg.K:
            raise DivergenceError(f"diverged in epoch {s} at inner iteration {ep.completed}", rec.trace)
        x_t = ep.x_sum / cfg.K
        omega_t = ep.omega_sum / cfg.K
        lam_t = ep.lam_sum / cfg.K
        x_dot = ep.xdot_sum / cfg.K
        x_hat, omega_hat, lam_hat = ep.x, ep.omega, ep.lam
        G_hat = schedule(cfg.mode, s, cfg.K, cfg.K, L_F).c_k
        sums[0] += x_t
        sums[1] += omega_t
        sums[2] += x_dot
        x_bar, omega_bar, x_dot_bar = (v / s for v in sums)
        if cfg.mode is Mode.CONVEX_NONSMOOTH:
            metrics = rec.row(s, ledger, x_dot_bar, omega_bar, feas_point=(x_bar, omega_bar))
        else:
            metrics = rec.row(s, ledger, x_bar, omega_bar)
        if _stop(cfg, metrics):
            break
    state = SolverState(
        ep.x, ep.omega, ep.lam, cache, x_t, omega_t, lam_t,
        x_hat, omega_hat, lam_hat, G_hat, x_bar, omega_bar, x_dot_bar,
    )
    return RunResult(rec.trace, state, ledger, backend)
