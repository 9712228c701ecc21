"""Unconstrained comparison solvers: compositional SGD and a compositional SVRG.

Both minimise F(x) + R(x) directly (no splitting). Their traces use the same
metrics as the ADMM runs, evaluated on the split point (x, omega = x).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .admm import ReferenceSolution, RunResult, SolverState, _bounded, _draw, _Recorder, _stop
from .constraints import ConstraintSpec, is_smooth, regularizer_gradient
from .errors import ConfigurationError, DivergenceError, UnsupportedConfigurationError
from .estimators import build_reference, minibatch_inner_estimate, vr_gradient_biased
from .problem import OracleLedger, mean_inner, mean_jacobian, outer_gradient, sample_index


@dataclass
class BaselineConfig:
    """``steps`` drives SGD, ``S``/``K``/``N`` drive the SVRG baseline.

    ``schedule`` is ``"constant"`` (eta) or ``"sqrt"`` (eta / sqrt(t)).
    SGD records a trace row every ``record_every`` steps.
    """

    eta: float = 0.1
    schedule: str = "constant"
    steps: int = 1000
    record_every: int = 10
    S: int = 20
    K: int = 10
    N: int = 1
    seed: int = 0
    stop_tolerance: Optional[float] = None

    def __post_init__(self):
        if not self.eta >= 0:
            raise ConfigurationError("eta must be nonnegative")
        if self.schedule not in ("constant", "sqrt"):
            raise ConfigurationError(f"unknown schedule {self.schedule!r}")
        if min(self.steps, self.record_every, self.S, self.K, self.N) < 1:
            raise ConfigurationError("counts must be at least 1")

    def stepsize(self, t):
        return self.eta if self.schedule == "constant" else self.eta / math.sqrt(t)


def _step(x, grad, eta, regularizer):
    if is_smooth(regularizer):
        return x - eta * (grad + regularizer_gradient(regularizer, x))
    return regularizer.prox(x - eta * grad, eta)


def run_sgd(
    problem,
    regularizer,
    config: BaselineConfig,
    rng: Optional[np.random.Generator] = None,
    *,
    x0=None,
    reference: Optional[ReferenceSolution] = None,
    run_id: str = "sgd",
) -> RunResult:
    """Compositional SGD with exact inner mean and Jacobian.

    Each step evaluates g(x) and dg(x) over all m inner components and one
    sampled outer gradient: 2m + 1 calls. Non-smooth regularizers are handled
    with a proximal step.
    """
    cfg = config
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    split = ConstraintSpec.identity_split(problem.q, regularizer)
    ledger = OracleLedger()
    x = np.zeros(problem.q) if x0 is None else np.array(x0, dtype=float)
    rec = _Recorder(problem, split, reference, run_id, f"sgd-{cfg.schedule}")
    rec.row(0, ledger, x, x)
    for t in range(1, cfg.steps + 1):
        y = mean_inner(problem, x, ledger)
        J = mean_jacobian(problem, x, ledger)
        i = int(sample_index(problem.outer_cdf, rng.random()))
        grad = J.T @ outer_gradient(problem, i, y, ledger)
        x = _step(x, grad, cfg.stepsize(t), regularizer)
        if not _bounded(x):
            raise DivergenceError(f"SGD diverged at step {t}", rec.trace)
        if t % cfg.record_every == 0 or t == cfg.steps:
            if _stop(cfg, rec.row(t, ledger, x, x)):
                break
    return RunResult(rec.trace, SolverState(x, x.copy(), np.zeros(0), x_tilde=x), ledger, "oracle")


def run_comp_svrg(
    problem,
    regularizer,
    config: BaselineConfig,
    rng: Optional[np.random.Generator] = None,
    *,
    x0=None,
    reference: Optional[ReferenceSolution] = None,
    run_id: str = "comp-svrg",
) -> RunResult:
    """Compositional SVRG with the mini-batch inner estimate and biased gradient.

    Inner steps are x <- x - eta (grad_hat + grad R(x)); the epoch output is
    the average of x^1..x^K. Costs 2m + n + K(2N + 4) calls per epoch.
    """
    cfg = config
    if not is_smooth(regularizer):
        raise UnsupportedConfigurationError("the SVRG baseline handles smooth regularizers only")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    split = ConstraintSpec.identity_split(problem.q, regularizer)
    ledger = OracleLedger()
    x_t = np.zeros(problem.q) if x0 is None else np.array(x0, dtype=float)
    rec = _Recorder(problem, split, reference, run_id, "comp-svrg")
    rec.row(0, ledger, x_t, x_t)
    x = x_t
    for s in range(1, cfg.S + 1):
        cache = build_reference(problem, x_t, s, ledger)
        batches, iidx, jidx = _draw(problem, rng, cfg.K, cfg.N)
        x = x_t.copy()
        x_sum = np.zeros_like(x)
        for k in range(cfg.K):
            g_hat = minibatch_inner_estimate(problem, cache, x, batches[k], ledger)
            grad = vr_gradient_biased(problem, cache, x, int(iidx[k]), int(jidx[k]), g_hat, ledger)
            x = x - cfg.eta * (grad + regularizer_gradient(regularizer, x))
            if not _bounded(x):
                raise DivergenceError(f"SVRG diverged in epoch {s}", rec.trace)
            x_sum += x
        x_t = x_sum / cfg.K
        if _stop(cfg, rec.row(s, ledger, x_t, x_t)):
            break
    return RunResult(rec.trace, SolverState(x, x.copy(), np.zeros(0), x_tilde=x_t), ledger, "oracle")
