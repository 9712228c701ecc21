"""Variance-reduced estimators built around a reference point x_tilde."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import (
    _as_point,
    full_gradient,
    inner_batch,
    inner_jacobian,
    mean_inner,
    outer_gradient,
)


@dataclass
class ReferenceCache:
    """Snapshot point with g(x_tilde) and grad F(x_tilde) computed exactly."""

    x_tilde: np.ndarray
    g_tilde: np.ndarray
    grad_tilde: np.ndarray
    epoch: int = 0

    def verify(self, problem, atol=1e-12):
        """Recompute both cached quantities (uncharged) and compare."""
        ok_g = np.allclose(problem.g(self.x_tilde), self.g_tilde, rtol=0, atol=atol)
        ok_grad = np.allclose(problem.gradF(self.x_tilde), self.grad_tilde, rtol=0, atol=atol)
        return bool(ok_g and ok_grad)


def build_reference(problem, x_tilde, epoch=0, ledger=None) -> ReferenceCache:
    """Epoch setup: g(x_tilde) (m calls) then grad F(x_tilde) (m + n calls)."""
    x_tilde = np.array(_as_point(problem, x_tilde), copy=True)
    g_tilde = mean_inner(problem, x_tilde, ledger)
    grad_tilde = full_gradient(problem, x_tilde, ledger)
    return ReferenceCache(x_tilde, g_tilde, grad_tilde, epoch)


def minibatch_inner_estimate(problem, cache, x_k, batch, ledger=None):
    """g_hat(x_k) = g(x_tilde) - mean_b [g_b(x_tilde) - g_b(x_k)].

    ``batch`` holds N inner indices drawn with replacement; charges 2N calls.
    """
    batch = np.asarray(batch, dtype=np.intp)
    if batch.size == 0:
        raise ValueError("mini-batch must be non-empty")
    at_ref = inner_batch(problem, batch, cache.x_tilde, ledger)
    at_k = inner_batch(problem, batch, x_k, ledger)
    return cache.g_tilde - (at_ref - at_k).sum(axis=0) / batch.size


def _correction(problem, cache, x_k, i_k, j_k, g_k, ledger):
    if np.shape(g_k) != (problem.r,):
        raise ValueError(f"inner estimate must have shape ({problem.r},), got {np.shape(g_k)}")
    J_k = inner_jacobian(problem, j_k, x_k, ledger)
    a_k = outer_gradient(problem, i_k, g_k, ledger)
    J_t = inner_jacobian(problem, j_k, cache.x_tilde, ledger)
    a_t = outer_gradient(problem, i_k, cache.g_tilde, ledger)
    return (J_k.T @ a_k - J_t.T @ a_t) + cache.grad_tilde


def vr_gradient_biased(problem, cache, x_k, i_k, j_k, g_hat, ledger=None):
    """Gradient estimate evaluated at the mini-batch inner estimate g_hat.

    dg_j(x_k)' grad f_i(g_hat) - dg_j(x_tilde)' grad f_i(g(x_tilde)) + grad F(x_tilde).
    Biased because f_i is nonlinear in g_hat. Charges 4 calls.
    """
    return _correction(problem, cache, x_k, i_k, j_k, g_hat, ledger)


def vr_gradient_unbiased(problem, cache, x_k, i_k, j_k, g_exact, ledger=None):
    """Same correction evaluated at the exact g(x_k); unbiased over (i, j)."""
    return _correction(problem, cache, x_k, i_k, j_k, g_exact, ledger)
