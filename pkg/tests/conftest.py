import sys
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from compadmm import CallableProblem, gen_portfolio, gen_synthetic_quadratic, PortfolioSpec

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def scalar_linear_problem(weights=None):
    """m=2 inner maps g_1(x)=x, g_2(x)=2x and one outer f(y)=y."""
    return CallableProblem(
        1, 1, 1, 2,
        inner=lambda j, x: ((j + 1) * x, [[j + 1.0]]),
        outer=lambda i, y: (y[0], [1.0]),
        inner_weights=weights,
    )


def toy_portfolio(mu_R=0.0):
    return gen_portfolio(PortfolioSpec(n_assets=1, n_slots=2, mu_R=mu_R), returns=[[1.0], [3.0]])


def nonlinear_problem(n=4, m=4, q=3, r=2, seed=0, inner_weights=None, outer_weights=None):
    """Non-affine inner maps and non-quadratic outer functions."""
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((m, r, q)) * 0.5
    c = rng.standard_normal((m, r))
    U = rng.standard_normal((n, r))

    def inner(j, x):
        z = W[j] @ x
        return np.tanh(z) + c[j], (1 - np.tanh(z) ** 2)[:, None] * W[j]

    def outer(i, y):
        t = U[i] @ y
        return np.log1p(np.exp(t)) + 0.5 * y @ y, U[i] / (1 + np.exp(-t)) + y

    return CallableProblem(q, r, n, m, inner, outer, inner_weights=inner_weights, outer_weights=outer_weights)


@pytest.fixture
def synthetic():
    return gen_synthetic_quadratic(8, 3, 10, seed=1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_affine(m=4, n=3, q=5, r=3, k=2, seed=0, weighted=False):
    """Random convex AffineQuadraticProblem with arbitrary component counts."""
    from compadmm import AffineQuadraticProblem

    rng = np.random.default_rng(seed)
    kw = {}
    if weighted:
        kw = dict(inner_weights=rng.dirichlet(np.ones(m)), outer_weights=rng.dirichlet(np.ones(n)))
    return AffineQuadraticProblem(
        rng.standard_normal((m, r, q)) / np.sqrt(q),
        rng.standard_normal((m, r)),
        rng.standard_normal((n, k, r)) / np.sqrt(r),
        t=rng.standard_normal((n, k)),
        h=0.1 * rng.standard_normal((n, r)),
        **kw,
    )


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.report_lines():
        terminalreporter.write_line(line)
