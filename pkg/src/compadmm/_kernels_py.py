"""Pure-Python epoch kernel for AffineQuadraticProblem instances.

Mirrors ``_kernels.pyx`` argument for argument; see ``kernels.py``.
"""
import math

import numpy as np


def epoch_inner_loop(
    C, C_mean, d_mean, V, t, h,
    A, B, AtB,
    x, omega, lam,
    x_tilde, g_tilde, grad_tilde,
    batches, iidx, jidx, eta_eff,
    rho,
    xV, xL,
    omega_mode, wV, wL, omega_c, beta, tau,
    unbiased,
    x_sum, omega_sum, lam_sum, xdot_sum,
    limit,
):
    """Run K inner ADMM iterations in place; return the number completed.

    ``x``, ``omega`` and ``lam`` hold the starting state and are overwritten
    with the final state. The four ``*_sum`` arrays are accumulated into.
    A return value below K means the state left [-limit, limit] or became
    non-finite at that iteration.
    """
    K = len(iidx)
    N = batches.shape[1]
    for k in range(K):
        # omega-update
        v = -(B.T @ (lam + rho * (A @ x)))
        if omega_mode == 0:
            omega[:] = wV @ ((wV.T @ v) / (omega_c + rho * wL))
        else:
            z = v / (rho * beta)
            omega[:] = np.sign(z) * np.maximum(np.abs(z) - tau / (rho * beta), 0.0)

        # inner estimate at x_k
        if unbiased:
            y = C_mean @ x + d_mean
        else:
            diff = x_tilde - x
            acc = np.zeros_like(g_tilde)
            for b in batches[k]:
                acc += C[b] @ diff
            y = g_tilde - acc / N

        i = iidx[k]
        j = jidx[k]
        a_k = h[i] + V[i].T @ (V[i] @ y - t[i])
        a_t = h[i] + V[i].T @ (V[i] @ g_tilde - t[i])
        grad = C[j].T @ (a_k - a_t) + grad_tilde

        # x-update and dual ascent
        eta = eta_eff[k]
        xdot_sum += x
        rhs = x / eta - grad - A.T @ lam - rho * (AtB @ omega)
        x[:] = xV @ ((xV.T @ rhs) / (1.0 / eta + rho * xL))
        lam += rho * (A @ x + B @ omega)

        x_sum += x
        omega_sum += omega
        lam_sum += lam
        if not _bounded(x, limit) or not _bounded(omega, limit) or not _bounded(lam, limit):
            return k
    return K


def _bounded(v, limit):
    m = float(np.max(np.abs(v))) if v.size else 0.0
    return math.isfinite(m) and m <= limit
