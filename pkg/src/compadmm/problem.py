"""Composition problems F(x) = sum_i v_i f_i(sum_j w_j g_j(x)) and oracle accounting.

Indices are zero-based. Every oracle access made through the module-level
functions (``eval_inner``, ``mean_inner``, ``full_gradient``, ...) is charged to
an optional :class:`OracleLedger`; direct calls on a problem object are free,
which is how diagnostics evaluate objectives without polluting a run's counts.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class Smoothness:
    """Optional problem constants (any of them may be unknown)."""

    L_F: Optional[float] = None
    L_f: Optional[float] = None
    C_G: Optional[float] = None
    L_G: Optional[float] = None
    mu_F: Optional[float] = None


@dataclass
class OracleLedger:
    """Counts oracle accesses.

    The four fine-grained counters record values and derivatives separately.
    ``calls`` follows the per-access convention of the complexity analysis:
    one call per sampled access, where a combined value+Jacobian request on
    g_j counts once.
    """

    inner_value: int = 0
    inner_jacobian: int = 0
    outer_value: int = 0
    outer_gradient: int = 0
    calls: int = 0

    @property
    def total(self) -> int:
        return self.inner_value + self.inner_jacobian + self.outer_value + self.outer_gradient

    def record(self, *, inner_value=0, inner_jacobian=0, outer_value=0, outer_gradient=0, calls=0):
        if min(inner_value, inner_jacobian, outer_value, outer_gradient, calls) < 0:
            raise ValueError("ledger counters are monotone")
        self.inner_value += inner_value
        self.inner_jacobian += inner_jacobian
        self.outer_value += outer_value
        self.outer_gradient += outer_gradient
        self.calls += calls

    def snapshot(self) -> "OracleLedger":
        return replace(self)

    def __sub__(self, other: "OracleLedger") -> "OracleLedger":
        return OracleLedger(
            self.inner_value - other.inner_value,
            self.inner_jacobian - other.inner_jacobian,
            self.outer_value - other.outer_value,
            self.outer_gradient - other.outer_gradient,
            self.calls - other.calls,
        )


def _check_weights(w, size, name):
    if w is None:
        return np.full(size, 1.0 / size)
    w = np.asarray(w, dtype=float)
    if w.shape != (size,):
        raise ValueError(f"{name} must have shape ({size},), got {w.shape}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise ValueError(f"{name} must be a probability vector")
    return w


def _cdf(w):
    c = np.cumsum(w)
    c[-1] = 1.0
    return c


class CompositionProblem:
    """Base class for a finite-sum composition problem.

    Subclasses implement ``inner`` (value and Jacobian of g_j), ``outer``
    (value and gradient of f_i) and may override the batched accessors for
    speed. ``q`` is the dimension of x and ``r`` the inner output dimension.
    """

    def __init__(self, q, r, n, m, inner_weights=None, outer_weights=None, smoothness=None):
        if min(q, r, n, m) < 1:
            raise ValueError("dimensions and component counts must be positive")
        self.q, self.r, self.n, self.m = int(q), int(r), int(n), int(m)
        self.inner_weights = _check_weights(inner_weights, self.m, "inner_weights")
        self.outer_weights = _check_weights(outer_weights, self.n, "outer_weights")
        self.inner_cdf = _cdf(self.inner_weights)
        self.outer_cdf = _cdf(self.outer_weights)
        self.smoothness = smoothness or Smoothness()
        self.meta = {}

    # -- scalar oracles ---------------------------------------------------
    def inner(self, j, x):
        raise NotImplementedError

    def inner_value(self, j, x):
        return self.inner(j, x)[0]

    def inner_jacobian(self, j, x):
        return self.inner(j, x)[1]

    def outer(self, i, y):
        raise NotImplementedError

    def outer_value(self, i, y):
        return self.outer(i, y)[0]

    def outer_gradient(self, i, y):
        return self.outer(i, y)[1]

    # -- batched oracles (idx=None means every component) ------------------
    def inner_values(self, idx, x):
        idx = range(self.m) if idx is None else idx
        return np.array([self.inner_value(int(j), x) for j in idx], dtype=float).reshape(-1, self.r)

    def inner_jacobians(self, idx, x):
        idx = range(self.m) if idx is None else idx
        return np.array([self.inner_jacobian(int(j), x) for j in idx], dtype=float).reshape(
            -1, self.r, self.q
        )

    def inner_pairs(self, idx, x):
        idx = range(self.m) if idx is None else idx
        pairs = [self.inner(int(j), x) for j in idx]
        vals = np.array([p[0] for p in pairs], dtype=float).reshape(-1, self.r)
        jacs = np.array([p[1] for p in pairs], dtype=float).reshape(-1, self.r, self.q)
        return vals, jacs

    def outer_values(self, idx, y):
        idx = range(self.n) if idx is None else idx
        return np.array([self.outer_value(int(i), y) for i in idx], dtype=float)

    def outer_gradients(self, idx, y):
        idx = range(self.n) if idx is None else idx
        return np.array([self.outer_gradient(int(i), y) for i in idx], dtype=float).reshape(-1, self.r)

    def jacobian_mean(self, x, jacs=None):
        """Weighted mean of the inner Jacobians; ``jacs`` may be supplied."""
        if jacs is None:
            jacs = self.inner_jacobians(None, x)
        return np.tensordot(self.inner_weights, jacs, axes=1)

    # -- uncharged evaluations used by diagnostics -------------------------
    def g(self, x):
        return self.inner_weights @ self.inner_values(None, x)

    def F(self, x):
        return float(self.outer_weights @ self.outer_values(None, self.g(x)))

    def gradF(self, x):
        vals, jacs = self.inner_pairs(None, x)
        y = self.inner_weights @ vals
        v = self.outer_weights @ self.outer_gradients(None, y)
        return self.jacobian_mean(x, jacs).T @ v


class CallableProblem(CompositionProblem):
    """Composition problem assembled from plain Python callables.

    ``inner(j, x)`` returns ``(g_j(x), dg_j(x))`` and ``outer(i, y)`` returns
    ``(f_i(y), grad f_i(y))``. ``inner_value`` is optional.
    """

    def __init__(
        self,
        q,
        r,
        n,
        m,
        inner: Callable,
        outer: Callable,
        inner_value: Optional[Callable] = None,
        **kwargs,
    ):
        super().__init__(q, r, n, m, **kwargs)
        self._inner = inner
        self._outer = outer
        self._inner_value = inner_value

    def inner(self, j, x):
        val, jac = self._inner(j, x)
        return np.asarray(val, dtype=float).reshape(self.r), np.asarray(jac, dtype=float).reshape(self.r, self.q)

    def inner_value(self, j, x):
        if self._inner_value is None:
            return self.inner(j, x)[0]
        return np.asarray(self._inner_value(j, x), dtype=float).reshape(self.r)

    def outer(self, i, y):
        val, grad = self._outer(i, y)
        return float(val), np.asarray(grad, dtype=float).reshape(self.r)


class AffineQuadraticProblem(CompositionProblem):
    """Affine inner maps and least-squares-plus-linear outer functions.

        g_j(x) = C[j] @ x + d[j]
        f_i(y) = h[i] @ y + 0.5 * ||V[i] @ y - t[i]||^2 + c[i]

    All benchmark problems have this form; it is the class the compiled
    kernels accelerate.
    """

    def __init__(self, C, d, V, t=None, h=None, c=None, inner_weights=None, outer_weights=None, smoothness=None):
        C = np.ascontiguousarray(C, dtype=float)
        V = np.ascontiguousarray(V, dtype=float)
        if C.ndim != 3 or V.ndim != 3:
            raise ValueError("C must be (m, r, q) and V must be (n, k, r)")
        m, r, q = C.shape
        n, k, rv = V.shape
        if rv != r:
            raise ValueError(f"V has inner dimension {rv}, expected {r}")
        self.C = C
        self.d = np.ascontiguousarray(np.zeros((m, r)) if d is None else d, dtype=float).reshape(m, r)
        self.V = V
        self.t = np.ascontiguousarray(np.zeros((n, k)) if t is None else t, dtype=float).reshape(n, k)
        self.h = np.ascontiguousarray(np.zeros((n, r)) if h is None else h, dtype=float).reshape(n, r)
        self.c = np.ascontiguousarray(np.zeros(n) if c is None else c, dtype=float).reshape(n)
        super().__init__(q, r, n, m, inner_weights, outer_weights)
        self.C_mean = np.tensordot(self.inner_weights, self.C, axes=1)
        self.d_mean = self.inner_weights @ self.d
        self.smoothness = smoothness or self.estimate_smoothness()

    def inner(self, j, x):
        return self.C[j] @ x + self.d[j], self.C[j]

    def inner_value(self, j, x):
        return self.C[j] @ x + self.d[j]

    def inner_jacobian(self, j, x):
        return self.C[j]

    def outer(self, i, y):
        res = self.V[i] @ y - self.t[i]
        return float(self.h[i] @ y + 0.5 * res @ res + self.c[i]), self.h[i] + self.V[i].T @ res

    def inner_values(self, idx, x):
        if idx is None:
            return self.C @ x + self.d
        idx = np.asarray(idx, dtype=np.intp)
        return self.C[idx] @ x + self.d[idx]

    def inner_jacobians(self, idx, x):
        if idx is None:
            return self.C
        return self.C[np.asarray(idx, dtype=np.intp)]

    def inner_pairs(self, idx, x):
        return self.inner_values(idx, x), self.inner_jacobians(idx, x)

    def _outer_parts(self, idx):
        if idx is None:
            return self.V, self.t, self.h, self.c
        idx = np.asarray(idx, dtype=np.intp)
        return self.V[idx], self.t[idx], self.h[idx], self.c[idx]

    def outer_values(self, idx, y):
        V, t, h, c = self._outer_parts(idx)
        res = V @ y - t
        return h @ y + 0.5 * np.einsum("ik,ik->i", res, res) + c

    def outer_gradients(self, idx, y):
        V, t, h, _ = self._outer_parts(idx)
        res = V @ y - t
        return h + np.einsum("ikr,ik->ir", V, res)

    def jacobian_mean(self, x, jacs=None):
        return self.C_mean

    def quadratic_form(self):
        """Return (Q, b, c0) with F(x) = 0.5 x'Qx + b'x + c0."""
        Vw = self.V * np.sqrt(self.outer_weights)[:, None, None]
        H = np.einsum("ikr,iks->rs", Vw, Vw)
        res0 = self.V @ self.d_mean - self.t
        lin = self.outer_weights @ (self.h + np.einsum("ikr,ik->ir", self.V, res0))
        Q = self.C_mean.T @ H @ self.C_mean
        b = self.C_mean.T @ lin
        c0 = float(
            self.outer_weights
            @ (self.h @ self.d_mean + 0.5 * np.einsum("ik,ik->i", res0, res0) + self.c)
        )
        return 0.5 * (Q + Q.T), b, c0

    def estimate_smoothness(self) -> Smoothness:
        """Constants for this problem class.

        L_F bounds ||C_j' V_i' V_i C_mean|| by ||V_i C_j|| * ||V_i C_mean||,
        which is exact when every V_i has a single row. L_G is zero because
        the inner maps are affine.
        """
        VC_mean = np.linalg.norm(np.einsum("ikr,rq->ikq", self.V, self.C_mean), ord=2, axis=(1, 2))
        # ||V_i C_j|| for all pairs without materialising n*m matrices when k == 1
        if self.V.shape[1] == 1:
            VCj = np.linalg.norm(np.einsum("ir,jrq->ijq", self.V[:, 0, :], self.C), axis=2)
        else:
            VCj = np.linalg.norm(np.einsum("ikr,jrq->ijkq", self.V, self.C), ord=2, axis=(2, 3))
        L_F = float(np.max(VCj * VC_mean[:, None]))
        L_f = float(np.max(np.linalg.norm(self.V, ord=2, axis=(1, 2)) ** 2))
        C_G = float(np.max(np.linalg.norm(self.C, ord=2, axis=(1, 2))))
        Q, _, _ = self.quadratic_form()
        mu_F = float(np.linalg.eigvalsh(Q)[0])
        return Smoothness(L_F=L_F, L_f=L_f, C_G=C_G, L_G=0.0, mu_F=mu_F if mu_F > 0 else None)


# -- charged oracle access --------------------------------------------------

def _as_point(problem, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.q,):
        raise ValueError(f"x must have shape ({problem.q},), got {x.shape}")
    return x


def _check_index(j, size, name):
    if not 0 <= j < size:
        raise IndexError(f"{name} index {j} out of range [0, {size})")


def _check_indices(idx, size, name):
    idx = np.asarray(idx, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= size):
        raise IndexError(f"{name} indices out of range [0, {size})")
    return idx


def _charge(ledger, **counts):
    if ledger is not None:
        ledger.record(**counts)


def eval_inner(problem, j, x, ledger=None, jacobian=True):
    """Value (and by default Jacobian) of g_j at x."""
    _check_index(j, problem.m, "inner")
    x = _as_point(problem, x)
    if not jacobian:
        val = np.asarray(problem.inner_value(j, x), dtype=float)
        if val.shape != (problem.r,):
            raise ValueError(f"inner value has shape {val.shape}, expected ({problem.r},)")
        _charge(ledger, inner_value=1, calls=1)
        return val
    val, jac = problem.inner(j, x)
    val, jac = np.asarray(val, dtype=float), np.asarray(jac, dtype=float)
    if val.shape != (problem.r,) or jac.shape != (problem.r, problem.q):
        raise ValueError(
            f"inner oracle returned shapes {val.shape}, {jac.shape}; "
            f"expected ({problem.r},), ({problem.r}, {problem.q})"
        )
    _charge(ledger, inner_value=1, inner_jacobian=1, calls=1)
    return val, jac


def inner_batch(problem, idx, x, ledger=None):
    """Stacked values g_j(x) for j in idx (one call per entry)."""
    idx = _check_indices(idx, problem.m, "inner")
    vals = problem.inner_values(idx, _as_point(problem, x))
    _charge(ledger, inner_value=len(idx), calls=len(idx))
    return vals


def inner_jacobian(problem, j, x, ledger=None):
    _check_index(j, problem.m, "inner")
    jac = problem.inner_jacobian(j, _as_point(problem, x))
    _charge(ledger, inner_jacobian=1, calls=1)
    return jac


def outer_gradient(problem, i, y, ledger=None):
    _check_index(i, problem.n, "outer")
    grad = problem.outer_gradient(i, np.asarray(y, dtype=float))
    _charge(ledger, outer_gradient=1, calls=1)
    return grad


def mean_inner(problem, x, ledger=None):
    """Weighted mean g(x) = sum_j w_j g_j(x); charges m value calls."""
    vals = problem.inner_values(None, _as_point(problem, x))
    _charge(ledger, inner_value=problem.m, calls=problem.m)
    return problem.inner_weights @ vals


def mean_jacobian(problem, x, ledger=None):
    """Weighted mean of the inner Jacobians; charges m Jacobian calls."""
    jac = problem.jacobian_mean(_as_point(problem, x))
    _charge(ledger, inner_jacobian=problem.m, calls=problem.m)
    return jac


def full_gradient(problem, x, ledger=None):
    """grad F(x) = dg(x)' sum_i v_i grad f_i(g(x)).

    Charges m combined inner calls and n outer-gradient calls.
    """
    x = _as_point(problem, x)
    vals, jacs = problem.inner_pairs(None, x)
    y = problem.inner_weights @ vals
    v = problem.outer_weights @ problem.outer_gradients(None, y)
    _charge(
        ledger,
        inner_value=problem.m,
        inner_jacobian=problem.m,
        outer_gradient=problem.n,
        calls=problem.m + problem.n,
    )
    return problem.jacobian_mean(x, jacs).T @ v


def composite_value(problem, x, ledger=None):
    """F(x) by full enumeration; charges m inner and n outer value calls."""
    x = _as_point(problem, x)
    y = problem.inner_weights @ problem.inner_values(None, x)
    val = float(problem.outer_weights @ problem.outer_values(None, y))
    _charge(ledger, inner_value=problem.m, outer_value=problem.n, calls=problem.m + problem.n)
    return val


def objective(problem, constraint, x, omega, ledger=None):
    """F(x) + R(omega)."""
    return composite_value(problem, x, ledger) + constraint.regularizer_value(omega)


def sample_index(cdf, u):
    """Inverse-CDF sampling of indices from uniforms ``u``."""
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, len(cdf) - 1)
