"""Experiment plumbing: reference solves, rate fits, config loading and execution."""
from __future__ import annotations

import csv
import hashlib
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml

from . import trace as trace_io
from .admm import (
    Mode,
    ReferenceSolution,
    SolverConfig,
    run_algorithm1,
    run_algorithm2,
    solve_omega_subproblem,
    solve_x_subproblem,
    update_dual,
)
from .baselines import BaselineConfig, run_comp_svrg, run_sgd
from .constraints import L1, ConstraintSpec, ScaledSquaredNorm
from .errors import ConfigurationError, DivergenceError, UnsupportedConfigurationError
from .problem import AffineQuadraticProblem
from .problems import PolicyEvalSpec, PortfolioSpec, gen_policy_eval, gen_portfolio, gen_synthetic_quadratic


# -- reference solutions ----------------------------------------------------------

def kkt_residual(problem, constraint, x, omega, lam):
    """Largest of the stationarity, feasibility and regularizer-optimality residuals."""
    stat = np.linalg.norm(problem.gradF(x) + constraint.A.T @ lam)
    feas = np.linalg.norm(constraint.residual(x, omega))
    s = -constraint.B.T @ lam
    reg = constraint.regularizer
    if reg is None:
        w = np.linalg.norm(s)
    elif isinstance(reg, ScaledSquaredNorm):
        w = np.linalg.norm(s - reg.gradient(omega))
    elif isinstance(reg, L1):
        w = reg.subgradient_distance(omega, s)
    else:
        w = 0.0
    return float(max(stat, feas, w))


def _direct_solve(problem, constraint):
    Q, b, _ = problem.quadratic_form()
    reg = constraint.regularizer
    mu = 0.0 if reg is None else reg.mu
    A, B = constraint.A, constraint.B
    q, l, p = constraint.q, constraint.l, constraint.p
    K = np.zeros((q + l + p, q + l + p))
    K[:q, :q] = Q
    K[:q, q + l:] = A.T
    K[q:q + l, q:q + l] = mu * np.eye(l)
    K[q:q + l, q + l:] = B.T
    K[q + l:, :q] = A
    K[q + l:, q:q + l] = B
    rhs = np.concatenate([-b, np.zeros(l + p)])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:q], sol[q:q + l], sol[q + l:]


def _admm_solve(problem, constraint, tol, max_iter, rho):
    L_F = problem.smoothness.L_F
    if L_F is None or not L_F > 0:
        raise ConfigurationError("the ADMM reference solve needs L_F")
    eta = 1.0 / L_F
    x = np.zeros(problem.q)
    lam = np.zeros(constraint.p)
    omega = np.zeros(constraint.l)
    res = np.inf
    for it in range(1, max_iter + 1):
        omega = solve_omega_subproblem(constraint, rho, x, lam)
        x = solve_x_subproblem(constraint, rho, x, lam, omega, problem.gradF(x), eta)
        lam = update_dual(rho, lam, constraint.A, constraint.B, x, omega)
        if it % 10 == 0 or it == max_iter:
            res = kkt_residual(problem, constraint, x, omega, lam)
            if res <= tol:
                break
    return x, omega, lam, res


def reference_solve(problem, constraint: ConstraintSpec, method="auto", tol=1e-10, max_iter=100_000, rho=1.0):
    """Primal-dual optimum for gap measurement.

    ``auto`` returns a stored analytic optimum when the generator attached one,
    uses a direct KKT solve for quadratic objectives with a quadratic or absent
    regularizer, and otherwise runs deterministic linearized ADMM with exact
    gradients. ``reliable`` is False when the achieved residual exceeds ``tol``.
    """
    if method not in ("auto", "direct", "admm"):
        raise ConfigurationError(f"unknown reference method {method!r}")
    stored = problem.meta.get("optimum") if hasattr(problem, "meta") else None
    if method == "auto" and stored is not None:
        return stored
    quadratic = isinstance(problem, AffineQuadraticProblem) and (
        constraint.regularizer is None or isinstance(constraint.regularizer, ScaledSquaredNorm)
    )
    if method == "direct" and not quadratic:
        raise UnsupportedConfigurationError("direct solve needs a quadratic objective and regularizer")
    if quadratic and method != "admm":
        x, omega, lam = _direct_solve(problem, constraint)
        res = kkt_residual(problem, constraint, x, omega, lam)
    else:
        x, omega, lam, res = _admm_solve(problem, constraint, tol, max_iter, rho)
    return ReferenceSolution.from_primal_dual(problem, constraint, x, omega, lam, residual=res, reliable=res <= tol * 1e2)


# -- rate fitting ------------------------------------------------------------------

@dataclass(frozen=True)
class RateFit:
    slope: float
    r2: float
    window: Tuple[int, int]
    shrunk: bool


def fit_rate(trace, epoch_window, gap="bregman_gap") -> RateFit:
    """Least squares of log10(gap) against epoch over the inclusive window.

    The window is cut at the first row with a missing or nonpositive gap
    (``shrunk`` is then True). Fewer than two usable rows is an error.
    """
    lo, hi = epoch_window
    rows = [r for r in trace.rows if lo <= r.epoch <= hi]
    usable = []
    for r in rows:
        val = getattr(r, gap)
        if val is None or not val > 0:
            break
        usable.append((r.epoch, np.log10(val)))
    if len(usable) < 2:
        raise ValueError(f"fewer than two positive {gap} values in epochs {lo}..{hi}")
    e, y = np.array(usable).T
    slope, intercept = np.polyfit(e, y, 1)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    ss_res = float(((y - (slope * e + intercept)) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    if ss_tot == 0:
        slope = 0.0
    return RateFit(float(slope), r2, (int(e[0]), int(e[-1])), len(usable) < len(rows))


# -- configuration -----------------------------------------------------------------

ALGORITHMS = ("com-svr-admm", "com-svr-admm-convex", "comp-svrg", "sgd")
PROBLEM_KINDS = ("portfolio", "policy_eval", "synthetic_quadratic")


class _Map(dict):
    line: int = 0


class _LineLoader(yaml.SafeLoader):
    def construct_mapping(self, node, deep=False):
        out = _Map(super().construct_mapping(node, deep=True))
        out.line = node.start_mark.line + 1
        return out


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _LineLoader.construct_mapping)


@dataclass
class RunSpec:
    run_id: str
    algo: str
    params: Dict[str, Any]
    seed: Optional[int]
    line: int = 0


@dataclass
class ExperimentConfig:
    problem: Dict[str, Any]
    runs: List[RunSpec]
    seed: int = 0
    repetitions: int = 1
    output_dir: str = "out"
    reference: Dict[str, Any] = field(default_factory=dict)
    target_gap: float = 1e-4
    source: str = "<config>"


def _fail(source, node, msg):
    line = getattr(node, "line", 0)
    raise ConfigurationError(f"{source}:{line}: {msg}")


def parse_config(text, source="<config>") -> ExperimentConfig:
    try:
        doc = yaml.load(text, Loader=_LineLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line = mark.line + 1 if mark is not None else 0
        raise ConfigurationError(f"{source}:{line}: {exc.problem}") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{source}:1: top level must be a mapping")
    problem = doc.get("problem")
    if not isinstance(problem, dict) or problem.get("kind") not in PROBLEM_KINDS:
        _fail(source, problem if isinstance(problem, dict) else doc, f"problem.kind must be one of {PROBLEM_KINDS}")
    runs = doc.get("runs")
    if not isinstance(runs, list) or not runs:
        _fail(source, doc, "runs must be a non-empty list")
    specs = []
    seen = set()
    for entry in runs:
        if not isinstance(entry, dict):
            _fail(source, doc, "each run must be a mapping")
        params = dict(entry)
        algo = params.pop("algo", None)
        if algo not in ALGORITHMS:
            _fail(source, entry, f"runs[].algo must be one of {ALGORITHMS}, got {algo!r}")
        run_id = str(params.pop("id", algo))
        if run_id in seen:
            _fail(source, entry, f"duplicate run id {run_id!r}")
        seen.add(run_id)
        seed = params.pop("seed", None)
        specs.append(RunSpec(run_id, algo, params, seed, getattr(entry, "line", 0)))
    output = doc.get("output") or {}
    reps = int(doc.get("repetitions", 1))
    if reps < 1:
        _fail(source, doc, "repetitions must be at least 1")
    return ExperimentConfig(
        problem=dict(problem),
        runs=specs,
        seed=int(doc.get("seed", 0)),
        repetitions=reps,
        output_dir=str(output.get("dir", "out")),
        reference=dict(doc.get("reference") or {}),
        target_gap=float(doc.get("target_gap", 1e-4)),
        source=source,
    )


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read(), source=str(path))


def derive_seed(global_seed, index, run_id):
    """global_seed XOR a 63-bit hash of (run index, run id)."""
    digest = hashlib.blake2b(f"{index}:{run_id}".encode(), digest_size=8).digest()
    return (int(global_seed) ^ int.from_bytes(digest, "little")) & (2**63 - 1)


def build_problem(spec: Dict[str, Any], default_seed=0):
    """(problem, constraint) for a ``problem:`` mapping."""
    spec = dict(spec)
    kind = spec.pop("kind")
    spec.setdefault("seed", default_seed)
    try:
        if kind == "portfolio":
            return gen_portfolio(PortfolioSpec(**spec))
        if kind == "policy_eval":
            return gen_policy_eval(PolicyEvalSpec(**spec))
        problem, constraint, _ = gen_synthetic_quadratic(**spec)
        return problem, constraint
    except TypeError as exc:
        raise ConfigurationError(f"bad {kind} parameters: {exc}") from exc


def _baseline_regularizer(constraint):
    q = constraint.q
    if constraint.p != q or constraint.l != q or not (
        np.array_equal(constraint.A, np.eye(q)) and np.array_equal(constraint.B, -np.eye(q))
    ):
        raise UnsupportedConfigurationError("baselines need the identity split x - omega = 0")
    return constraint.regularizer


def execute_run(problem, constraint, reference, algo, params, seed, run_id):
    """One run; returns its RunResult. Parameter errors raise ConfigurationError.

    ``eta_scale`` in ``params`` sets eta = eta_scale / L_F. The strongly
    convex method defaults to eta = 1 / L_F.
    """
    params = dict(params)
    scale = params.pop("eta_scale", None)
    L_F = problem.smoothness.L_F
    if scale is not None:
        if "eta" in params:
            raise ConfigurationError("give eta or eta_scale, not both")
        if not L_F:
            raise ConfigurationError("eta_scale needs a known L_F")
        params["eta"] = float(scale) / L_F
    try:
        if algo in ("com-svr-admm", "com-svr-admm-convex"):
            if algo == "com-svr-admm":
                params.setdefault("mode", Mode.STRONGLY_CONVEX.value)
                if params.get("eta") is None and L_F:
                    params["eta"] = 1.0 / L_F
            else:
                params.setdefault("mode", Mode.CONVEX_SMOOTH.value)
            cfg = SolverConfig(seed=seed, **params)
            runner = run_algorithm1 if cfg.mode is Mode.STRONGLY_CONVEX else run_algorithm2
            return runner(problem, constraint, cfg, reference=reference, run_id=run_id)
        cfg = BaselineConfig(seed=seed, **params)
        reg = _baseline_regularizer(constraint)
        runner = run_sgd if algo == "sgd" else run_comp_svrg
        return runner(problem, reg, cfg, reference=reference, run_id=run_id)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for {algo}: {exc}") from exc


@dataclass
class RunOutcome:
    run_id: str
    algo: str
    seed: int
    status: str
    path: Optional[str]
    final_calls: Optional[int] = None
    final_epoch: Optional[int] = None
    final_objective: Optional[float] = None
    final_gap: Optional[float] = None
    calls_to_target: Optional[int] = None
    message: str = ""


SUMMARY_COLUMNS = (
    "run_id", "algo", "seed", "status", "epochs", "oracle_calls",
    "objective", "objective_gap", "calls_to_target", "message",
)


def _job(args):
    cfg, index, rs, rep, out_dir = args
    problem, constraint = build_problem(cfg.problem, cfg.seed)
    reference = reference_solve(problem, constraint, **cfg.reference)
    if cfg.repetitions == 1:
        run_id = rs.run_id
        seed = rs.seed if rs.seed is not None else derive_seed(cfg.seed, index, run_id)
    else:
        run_id = f"{rs.run_id}-r{rep}"
        base = cfg.seed if rs.seed is None else rs.seed
        seed = derive_seed(base, index, run_id)
    path = os.path.join(out_dir, f"{run_id}.csv")
    try:
        result = execute_run(problem, constraint, reference, rs.algo, rs.params, seed, run_id)
        tr, status, msg = result.trace, "ok", ""
    except DivergenceError as exc:
        tr, status, msg = exc.trace, "diverged", str(exc)
    except ConfigurationError as exc:
        return RunOutcome(run_id, rs.algo, seed, "config_error", None, message=f"{cfg.source}:{rs.line}: {exc}")
    if tr is None:
        return RunOutcome(run_id, rs.algo, seed, status, None, message=msg)
    trace_io.save(tr, path)
    last = tr.final
    return RunOutcome(
        run_id, rs.algo, seed, status, path,
        last.oracle_calls, last.epoch, last.objective, last.objective_gap,
        tr.calls_to_reach(cfg.target_gap, feasibility=cfg.target_gap), msg,
    )


def write_summary(outcomes, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for o in outcomes:
            w.writerow([
                o.run_id, o.algo, o.seed, o.status, trace_io._fmt(o.final_epoch), trace_io._fmt(o.final_calls),
                trace_io._fmt(o.final_objective), trace_io._fmt(o.final_gap), trace_io._fmt(o.calls_to_target), o.message,
            ])


def run_experiment(config_path, out_dir=None, jobs=1) -> List[RunOutcome]:
    """Execute every run x repetition, writing ``<run_id>.csv`` and ``summary.csv``.

    Returns the outcomes in configuration order; failed runs carry a
    non-``ok`` status instead of raising.
    """
    cfg = load_config(config_path) if not isinstance(config_path, ExperimentConfig) else config_path
    out = out_dir or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    tasks = []
    for r_idx, rs in enumerate(cfg.runs):
        for rep in range(cfg.repetitions):
            tasks.append((cfg, r_idx * cfg.repetitions + rep, rs, rep, out))
    # surface problem-level config errors before spawning runs
    build_problem(cfg.problem, cfg.seed)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_job, tasks))
    else:
        outcomes = [_job(t) for t in tasks]
    write_summary(outcomes, os.path.join(out, "summary.csv"))
    return outcomes
