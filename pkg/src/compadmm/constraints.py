"""Linear coupling Ax + B omega = 0 and the regularizer R(omega)."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Union

import numpy as np

from .linalg import FactoredSpd


def soft_threshold(v, thresh):
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


@dataclass(frozen=True)
class ScaledSquaredNorm:
    """R(w) = mu/2 ||w||^2."""

    mu: float

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")

    def value(self, w):
        return 0.5 * self.mu * float(w @ w)

    def gradient(self, w):
        return self.mu * w

    def prox(self, v, t):
        return v / (1.0 + t * self.mu)


@dataclass(frozen=True)
class L1:
    """R(w) = tau ||w||_1."""

    tau: float

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")

    def value(self, w):
        return self.tau * float(np.abs(w).sum())

    def prox(self, v, t):
        return soft_threshold(v, t * self.tau)

    def subgradient_distance(self, w, s):
        """Distance from s to the subdifferential of R at w."""
        on = w != 0
        out = np.where(on, s - self.tau * np.sign(w), np.maximum(np.abs(s) - self.tau, 0.0))
        return float(np.linalg.norm(out))


@dataclass(frozen=True)
class CustomProx:
    """User regularizer given by its value and proximal map prox(v, t)."""

    value_fn: Callable
    prox_fn: Callable

    def value(self, w):
        return float(self.value_fn(w))

    def prox(self, v, t):
        return np.asarray(self.prox_fn(v, t), dtype=float)


Regularizer = Optional[Union[ScaledSquaredNorm, L1, CustomProx]]


def is_smooth(reg) -> bool:
    return reg is None or isinstance(reg, ScaledSquaredNorm)


def regularizer_gradient(reg, w):
    if reg is None:
        return np.zeros_like(w)
    if isinstance(reg, ScaledSquaredNorm):
        return reg.gradient(w)
    raise TypeError(f"{type(reg).__name__} is not differentiable")


class ConstraintSpec:
    """Matrices A (p x q), B (p x l) and the regularizer on omega."""

    def __init__(self, A, B, regularizer: Regularizer = None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if A.shape[0] != B.shape[0]:
            raise ValueError(f"A has {A.shape[0]} rows but B has {B.shape[0]}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ValueError("A and B must be finite")
        self.A = A
        self.B = B
        self.regularizer = regularizer

    @classmethod
    def identity_split(cls, q, regularizer: Regularizer = None):
        """x - omega = 0: the regularizer acts on a copy of x."""
        return cls(np.eye(q), -np.eye(q), regularizer)

    @property
    def p(self):
        return self.A.shape[0]

    @property
    def q(self):
        return self.A.shape[1]

    @property
    def l(self):  # noqa: E743
        return self.B.shape[1]

    def residual(self, x, omega):
        return self.A @ np.asarray(x, dtype=float) + self.B @ np.asarray(omega, dtype=float)

    def regularizer_value(self, omega):
        return 0.0 if self.regularizer is None else self.regularizer.value(np.asarray(omega, dtype=float))

    def full_row_rank(self) -> bool:
        return self.p <= self.q and np.linalg.matrix_rank(self.A) == self.p

    @cached_property
    def AtA(self):
        return self.A.T @ self.A

    @cached_property
    def BtB(self):
        return self.B.T @ self.B

    @cached_property
    def AtB(self):
        return self.A.T @ self.B

    @cached_property
    def AtA_spd(self):
        """Eigen-factored A'A; ``refactor(c, rho)`` gives c I + rho A'A."""
        return FactoredSpd.from_gram(self.AtA, 1.0, 0.0)

    @cached_property
    def BtB_spd(self):
        return FactoredSpd.from_gram(self.BtB, 1.0, 0.0)

    @cached_property
    def BtB_scalar(self) -> Optional[float]:
        """beta when B'B = beta I, else None."""
        beta = float(np.trace(self.BtB)) / self.l
        if beta > 0 and np.allclose(self.BtB, beta * np.eye(self.l), rtol=0, atol=1e-12 * max(beta, 1.0)):
            return beta
        return None
