"""Benchmark problem generators.

* mean-variance portfolio selection over observed reward vectors,
* linear policy evaluation by Bellman-residual minimisation,
* a synthetic constrained quadratic with a known primal-dual optimum.

All three are :class:`AffineQuadraticProblem` instances. The portfolio and
policy problems use the split x - omega = 0 with R(omega) = mu_R/2 ||omega||^2.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .admm import ReferenceSolution
from .constraints import ConstraintSpec, ScaledSquaredNorm
from .errors import ConfigurationError
from .problem import AffineQuadraticProblem


def _sym_sqrt(M):
    evals, evecs = np.linalg.eigh(0.5 * (M + M.T))
    return (evecs * np.sqrt(np.maximum(evals, 0.0))) @ evecs.T


@dataclass(frozen=True)
class PortfolioSpec:
    n_assets: int = 20
    n_slots: int = 200
    cov: float = 2.0
    mu_R: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n_assets < 1 or self.n_slots < 1:
            raise ConfigurationError("n_assets and n_slots must be positive")
        if not self.cov > 0:
            raise ConfigurationError("cov must be positive")
        if self.mu_R < 0:
            raise ConfigurationError("mu_R must be nonnegative")


def portfolio_returns(spec: PortfolioSpec):
    """Rewards r_i = mean + L xi_i with L the square root of
    cov * (0.5 I + 0.5 11'/N) and mean entries uniform on [0.5, 1.5]."""
    rng = np.random.default_rng(spec.seed)
    N = spec.n_assets
    mean = rng.uniform(0.5, 1.5, N)
    sigma = spec.cov * (0.5 * np.eye(N) + 0.5 * np.ones((N, N)) / N)
    xi = rng.standard_normal((spec.n_slots, N))
    return mean + xi @ _sym_sqrt(sigma)


def gen_portfolio(spec: PortfolioSpec, returns=None):
    """Mean-variance objective as a composition.

    g_j(x) = (x, <r_j, x>) so g(x) = (x, mean return), and
    f_i(y) = -<r_i, y[:N]> + (<r_i, y[:N]> - y[N])^2.
    ``returns`` (n_slots x n_assets) overrides the generated rewards.
    """
    R = portfolio_returns(spec) if returns is None else np.atleast_2d(np.asarray(returns, dtype=float))
    n, N = R.shape
    C = np.zeros((n, N + 1, N))
    C[:, :N, :] = np.eye(N)
    C[:, N, :] = R
    V = np.sqrt(2.0) * np.concatenate([R, -np.ones((n, 1))], axis=1)[:, None, :]
    h = np.concatenate([-R, np.zeros((n, 1))], axis=1)
    problem = AffineQuadraticProblem(C, None, V, h=h)
    problem.meta.update(kind="portfolio", returns=R)
    constraint = ConstraintSpec.identity_split(N, ScaledSquaredNorm(spec.mu_R))
    return problem, constraint


@dataclass(frozen=True)
class PolicyEvalSpec:
    n_states: int = 50
    n_features: int = 10
    gamma: float = 0.9
    mu_R: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.n_states < 1 or self.n_features < 1:
            raise ConfigurationError("n_states and n_features must be positive")
        if not 0 <= self.gamma < 1:
            raise ConfigurationError("gamma must lie in [0, 1)")
        if self.mu_R < 0:
            raise ConfigurationError("mu_R must be nonnegative")


def gen_policy_eval(spec: PolicyEvalSpec, features=None, transition=None, rewards=None):
    """Bellman residual (1/S) sum_s (<phi_s, w> - sum_s' P[s,s'] (r[s,s'] + gamma <phi_s', w>))^2.

    The inner index s' is drawn from u = column mean of P. Component s' is

        g_s'(w) = (phi_1'w, rho_1s' (r_1s' + gamma phi_s'^T w), ..., phi_S'w, rho_Ss' (...))

    with rho_ss' = P[s,s'] / u[s']. The generated P has identical rows, so
    u is that row and every rho is 1; other row-stochastic P are handled
    exactly through the ratios. f_s(y) = (y[2s] - y[2s+1])^2 (zero-based).
    """
    rng = np.random.default_rng(spec.seed)
    S, d = spec.n_states, spec.n_features
    Phi = rng.standard_normal((S, d)) if features is None else np.asarray(features, dtype=float)
    if transition is None:
        row = rng.random(S)
        row /= row.sum()
        P = np.tile(row, (S, 1))
    else:
        P = np.asarray(transition, dtype=float)
        P = P / P.sum(axis=1, keepdims=True)
    if np.any(P < 0) or np.abs(P.sum(axis=1) - 1.0).max() > 1e-12:
        raise ConfigurationError("transition rows must be probability vectors")
    Rw = rng.random((S, S)) if rewards is None else np.broadcast_to(np.asarray(rewards, dtype=float), (S, S))
    if Phi.shape != (S, d):
        raise ConfigurationError(f"features must have shape ({S}, {d})")

    u = P.mean(axis=0)
    u = u / u.sum()
    ratio = np.divide(P, u[None, :], out=np.zeros_like(P), where=u[None, :] > 0)

    C = np.zeros((S, 2 * S, d))
    dvec = np.zeros((S, 2 * S))
    C[:, 0::2, :] = Phi[None, :, :]
    # C[s', 2s+1] = ratio[s, s'] * gamma * phi_s'
    C[:, 1::2, :] = spec.gamma * ratio.T[:, :, None] * Phi[:, None, :]
    dvec[:, 1::2] = (ratio * Rw).T
    V = np.zeros((S, 1, 2 * S))
    idx = np.arange(S)
    V[idx, 0, 2 * idx] = np.sqrt(2.0)
    V[idx, 0, 2 * idx + 1] = -np.sqrt(2.0)
    problem = AffineQuadraticProblem(C, dvec, V, inner_weights=u)
    problem.meta.update(kind="policy_eval", features=Phi, transition=P, rewards=np.array(Rw), gamma=spec.gamma)
    constraint = ConstraintSpec.identity_split(d, ScaledSquaredNorm(spec.mu_R))
    return problem, constraint


def bellman_residual(Phi, P, Rw, gamma, w):
    """Direct (1/S)-scaled Bellman residual; independent of the composition."""
    target = (P * (Rw + gamma * (Phi @ w)[None, :])).sum(axis=1)
    res = Phi @ w - target
    return float(res @ res) / len(res)


def portfolio_objective(R, x):
    """Direct mean-variance formula for rewards R (n x N)."""
    ret = R @ x
    return float(-ret.mean() + ((ret - ret.mean()) ** 2).mean())


def gen_synthetic_quadratic(
    q,
    p,
    condition,
    seed=0,
    mu_R=0.1,
    rank: Optional[int] = None,
    x_star=None,
    n_components=4,
    max_retries=5,
):
    """Quadratic F(x) = 0.5 x'Qx + b'x written compositionally, with A x - omega = 0.

    Q has eigenvalues log-spaced on [1, condition]; ``rank`` zeroes all but
    the largest ``rank`` of them, giving a convex but not strongly convex F.
    Each of the n = m = ``n_components`` inner maps is a perturbed identity and
    each outer function a perturbed copy of Q (kept PSD), so the stochastic
    estimators are genuinely noisy. Returns (problem, constraint, optimum).
    """
    if not 1 <= p <= q:
        raise ConfigurationError("need 1 <= p <= q")
    if not condition >= 1:
        raise ConfigurationError("condition must be >= 1")
    rng = np.random.default_rng(seed)
    nc = n_components
    for _ in range(max_retries):
        A = rng.standard_normal((p, q))
        if np.linalg.matrix_rank(A) == p:
            break
        A = A + 1e-3 * rng.standard_normal((p, q))
    else:
        raise ConfigurationError("could not draw a full-row-rank A")

    U, _ = np.linalg.qr(rng.standard_normal((q, q)))
    eigs = np.logspace(0.0, np.log10(condition), q)[::-1]
    if rank is not None:
        eigs[rank:] = 0.0
    H_bar = (U * eigs) @ U.T
    support = U[:, eigs > 0]
    proj = support @ support.T
    lam_min = eigs[eigs > 0].min()

    noise = rng.standard_normal((nc, q, q))
    noise = noise + noise.transpose(0, 2, 1)
    noise -= noise.mean(axis=0)
    noise = np.einsum("ab,ibc,cd->iad", proj, noise, proj)
    noise *= 0.3 * lam_min / max(np.linalg.norm(noise, ord=2, axis=(1, 2)).max(), 1e-300)
    V = np.stack([_sym_sqrt(H_bar + E) for E in noise])

    delta = rng.standard_normal((nc, q, q))
    delta -= delta.mean(axis=0)
    C = np.eye(q)[None] + 0.1 * delta / np.sqrt(q)
    dvec = rng.standard_normal((nc, q))
    dvec -= dvec.mean(axis=0)
    dvec *= 0.1
    h_noise = rng.standard_normal((nc, q))
    h_noise -= h_noise.mean(axis=0)
    h_noise *= 0.1

    x_ref = rng.standard_normal(q) if x_star is None else np.asarray(x_star, dtype=float)
    draft = AffineQuadraticProblem(C, dvec, V, h=h_noise)
    Q, b0, _ = draft.quadratic_form()
    M = Q + mu_R * A.T @ A
    # choose the mean linear term so that x_ref is optimal
    shift = np.linalg.solve(draft.C_mean.T, -(M @ x_ref) - b0)
    problem = AffineQuadraticProblem(C, dvec, V, h=h_noise + shift[None, :])
    constraint = ConstraintSpec(A, -np.eye(p), ScaledSquaredNorm(mu_R))

    Q, b, _ = problem.quadratic_form()
    M = Q + mu_R * A.T @ A
    x_opt = np.linalg.lstsq(M, -b, rcond=None)[0]
    omega_opt = A @ x_opt
    lam_opt = mu_R * omega_opt
    optimum = ReferenceSolution.from_primal_dual(problem, constraint, x_opt, omega_opt, lam_opt)
    problem.meta.update(kind="synthetic_quadratic", optimum=optimum)
    return problem, constraint, optimum
