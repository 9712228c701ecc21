"""Dense linear algebra: SPD solves, pseudoinverse, spectra, rate constants."""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np


class FactoredSpd:
    """Solves (c I + rho A'A) x = b.

    The payload is an eigendecomposition of A'A, so changing (c, rho) only
    rescales the spectrum: ``refactor`` returns a new solver without touching
    A again. Instances are immutable.
    """

    def __init__(self, A, c, rho, _eig=None):
        if not (math.isfinite(c) and math.isfinite(rho)):
            raise FloatingPointError("non-finite input to SPD factorization")
        if rho < 0:
            raise ValueError("rho must be nonnegative")
        if _eig is None:
            A = np.atleast_2d(np.asarray(A, dtype=float))
            if not np.all(np.isfinite(A)):
                raise FloatingPointError("non-finite input to SPD factorization")
            evals, evecs = np.linalg.eigh(A.T @ A)
            _eig = (np.maximum(evals, 0.0), evecs)
        self._evals, self._evecs = _eig
        self.dim = self._evecs.shape[0]
        self.c = float(c)
        self.rho = float(rho)
        self._diag = self.c + self.rho * self._evals
        if self._diag.min() <= 0:
            raise np.linalg.LinAlgError("c I + rho A'A is not positive definite")

    @classmethod
    def from_gram(cls, G, c, rho):
        """Build from a precomputed Gram matrix A'A."""
        evals, evecs = np.linalg.eigh(np.asarray(G, dtype=float))
        return cls(None, c, rho, _eig=(np.maximum(evals, 0.0), evecs))

    def refactor(self, c, rho):
        return FactoredSpd(None, c, rho, _eig=(self._evals, self._evecs))

    @property
    def eig(self):
        return self._evals, self._evecs

    def matrix(self):
        V = self._evecs
        return (V * self._diag) @ V.T

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if not np.all(np.isfinite(b)):
            raise FloatingPointError("non-finite right-hand side")
        V = self._evecs
        return V @ ((V.T @ b) / self._diag)


_SPD_CACHE: "OrderedDict[tuple, FactoredSpd]" = OrderedDict()
_SPD_CACHE_SIZE = 16


def solve_spd(c, rho, A, b):
    """Solve (c I + rho A'A) x = b, reusing factorizations of recent (c, rho, A)."""
    if not (math.isfinite(c) and math.isfinite(rho)):
        raise FloatingPointError("non-finite input to SPD solve")
    if not c > 0:
        raise ValueError("c must be positive")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    key = (float(c), float(rho), A.shape, A.tobytes())
    fac = _SPD_CACHE.get(key)
    if fac is None:
        fac = FactoredSpd(A, c, rho)
        _SPD_CACHE[key] = fac
        if len(_SPD_CACHE) > _SPD_CACHE_SIZE:
            _SPD_CACHE.popitem(last=False)
    else:
        _SPD_CACHE.move_to_end(key)
    return fac.solve(b)


def pseudoinverse(A, tol=1e-12):
    """Moore-Penrose inverse via SVD; singular values <= tol * s_max are dropped."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        raise ValueError("empty matrix")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    keep = s > tol * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (Vt.T * inv) @ U.T


def spectral_bounds(M, sym_tol=1e-10):
    """Largest and smallest eigenvalue of a symmetric matrix."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(np.abs(M).max(), 1.0)
    if np.abs(M - M.T).max() > sym_tol * scale:
        raise ValueError("matrix must be symmetric")
    evals = np.linalg.eigvalsh(M)
    return float(evals[-1]), float(evals[0])


@dataclass(frozen=True)
class Theorem1Params:
    eta: float
    K: int
    N: int
    rho: float
    mu_F: float
    L_F: float
    L_f: float
    C_G: float
    L_G: float
    D: float
    AtA_norm: float
    AAt_sigma_min: float

    def __post_init__(self):
        for name, val in vars(self).items():
            # L_G = 0 is the exact constant for affine inner maps.
            bad = val < 0 if name == "L_G" else not val > 0
            if bad:
                raise ValueError(f"{name} must be positive, got {val}")

    @property
    def sigma_N(self):
        return math.sqrt(1.0 / self.N)


@dataclass(frozen=True)
class RateConstants:
    gamma1: float
    gamma2: float
    gamma: float
    linear: bool


def theorem1_constants(params: Theorem1Params) -> RateConstants:
    """Contraction constants (gamma1, gamma2) of the strongly convex analysis.

    ``linear`` certifies gamma1, gamma2 > 0 and gamma2 / gamma1 < 1.
    """
    p = params
    if p.eta > 1.0 / p.L_F:
        raise ValueError(f"eta={p.eta} exceeds 1/L_F={1.0 / p.L_F}")
    batch_term = 32.0 * p.eta**2 * p.C_G**4 * p.L_f**2 / (p.mu_F * p.N)
    smooth_term = (48.0 * p.eta**2 * p.L_F**2 + 8.0 * p.eta * p.D * p.C_G * p.L_f * p.L_G * p.sigma_N) / p.mu_F
    gamma1 = (2.0 * p.eta - batch_term - smooth_term) * p.K
    gamma2 = (
        (p.K + 1) * (batch_term + smooth_term)
        + 2.0 / p.mu_F
        + 2.0 * p.eta * p.rho * p.AtA_norm / p.mu_F
        + 2.0 * p.L_F * p.eta / (p.rho * p.AAt_sigma_min)
    )
    gamma = gamma2 / gamma1 if gamma1 != 0 else math.inf
    return RateConstants(gamma1, gamma2, gamma, gamma1 > 0 and gamma2 > 0 and gamma < 1)
