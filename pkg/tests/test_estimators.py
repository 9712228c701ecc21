import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from compadmm import CallableProblem, OracleLedger, full_gradient, gen_portfolio, PortfolioSpec
from compadmm.estimators import build_reference, minibatch_inner_estimate, vr_gradient_biased, vr_gradient_unbiased
from compadmm.problem import mean_inner

from conftest import nonlinear_problem, scalar_linear_problem


def test_build_reference_caches_exact_values_and_charges():
    pb = nonlinear_problem(n=3, m=5)
    led = OracleLedger()
    x = np.array([0.2, -0.4, 1.0])
    cache = build_reference(pb, x, 1, led)
    assert cache.verify(pb)
    assert led.calls == 2 * 5 + 3


def test_minibatch_at_reference_point_is_exact():
    pb = nonlinear_problem()
    x = np.array([0.1, 0.5, -0.3])
    cache = build_reference(pb, x)
    for batch in ([0], [3, 3], [1, 2, 0]):
        assert np.array_equal(minibatch_inner_estimate(pb, cache, x, batch), cache.g_tilde)


def test_minibatch_full_enumeration_telescopes():
    pb = nonlinear_problem(m=4)
    cache = build_reference(pb, np.array([0.1, 0.5, -0.3]))
    x_k = np.array([1.0, -2.0, 0.4])
    est = minibatch_inner_estimate(pb, cache, x_k, [0, 1, 2, 3])
    assert np.allclose(est, mean_inner(pb, x_k), atol=1e-14)


def test_minibatch_hand_example():
    pb = scalar_linear_problem()
    cache = build_reference(pb, [1.0])
    # zero-based batch (0, 0) is the one-based (1, 1)
    assert minibatch_inner_estimate(pb, cache, [0.0], [0, 0])[0] == pytest.approx(0.5, abs=1e-15)


def test_minibatch_charges_two_per_entry_and_rejects_empty():
    pb = nonlinear_problem()
    cache = build_reference(pb, np.zeros(3))
    led = OracleLedger()
    minibatch_inner_estimate(pb, cache, np.ones(3), [0, 1, 1], led)
    assert (led.inner_value, led.calls) == (6, 6)
    with pytest.raises(ValueError):
        minibatch_inner_estimate(pb, cache, np.ones(3), [])


def test_biased_gradient_hand_example():
    pb = CallableProblem(1, 1, 1, 1, inner=lambda j, x: (x**2, [[2 * x[0]]]), outer=lambda i, y: (y[0], [1.0]))
    cache = build_reference(pb, [1.0])
    assert vr_gradient_biased(pb, cache, [2.0], 0, 0, np.array([4.0]))[0] == pytest.approx(4.0, abs=1e-15)


def test_biased_gradient_straight_line_oracle():
    pb, _ = gen_portfolio(PortfolioSpec(n_assets=3, n_slots=6, seed=4))
    R = pb.meta["returns"]
    rng = np.random.default_rng(0)
    x_t, x_k = rng.standard_normal(3), rng.standard_normal(3)
    batch, i, j = [2, 5, 2], 4, 1
    cache = build_reference(pb, x_t)

    # written directly from the mean-variance construction
    def g_j(jj, x):
        return np.append(x, R[jj] @ x)

    def jac_j(jj):
        return np.vstack([np.eye(3), R[jj]])

    def grad_f(ii, y):
        s = R[ii] @ y[:3] - y[3]
        return np.append(-R[ii] + 2 * s * R[ii], -2 * s)

    g_t = np.mean([g_j(jj, x_t) for jj in range(6)], axis=0)
    grad_t = np.mean([jac_j(jj) for jj in range(6)], axis=0).T @ np.mean([grad_f(ii, g_t) for ii in range(6)], axis=0)
    g_hat = g_t - np.mean([g_j(b, x_t) - g_j(b, x_k) for b in batch], axis=0)
    expect = jac_j(j).T @ grad_f(i, g_hat) - jac_j(j).T @ grad_f(i, g_t) + grad_t

    got_hat = minibatch_inner_estimate(pb, cache, x_k, batch)
    assert np.allclose(got_hat, g_hat, atol=1e-13)
    assert np.allclose(vr_gradient_biased(pb, cache, x_k, i, j, got_hat), expect, atol=1e-12)


def test_gradient_estimators_charge_four_calls():
    pb = nonlinear_problem()
    cache = build_reference(pb, np.zeros(3))
    for fn in (vr_gradient_biased, vr_gradient_unbiased):
        led = OracleLedger()
        fn(pb, cache, np.ones(3), 1, 2, cache.g_tilde, led)
        assert (led.calls, led.inner_jacobian, led.outer_gradient) == (4, 2, 2)
        with pytest.raises(ValueError):
            fn(pb, cache, np.ones(3), 1, 2, np.zeros(5))


@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 10_000), st.booleans())
def test_unbiasedness_by_enumeration(n, m, seed, weighted):
    rng = np.random.default_rng(seed)
    kw = {}
    if weighted:
        kw = dict(inner_weights=rng.dirichlet(np.ones(m)), outer_weights=rng.dirichlet(np.ones(n)))
    pb = nonlinear_problem(n=n, m=m, seed=seed, **kw)
    cache = build_reference(pb, rng.standard_normal(pb.q))
    x_k = rng.standard_normal(pb.q)
    g_k = mean_inner(pb, x_k)
    total = np.zeros(pb.q)
    for i, j in itertools.product(range(n), range(m)):
        total += pb.outer_weights[i] * pb.inner_weights[j] * vr_gradient_unbiased(pb, cache, x_k, i, j, g_k)
    assert np.abs(total - full_gradient(pb, x_k)).max() <= 1e-12


@given(st.integers(0, 10_000))
def test_fixpoint_both_estimators(seed):
    rng = np.random.default_rng(seed)
    pb = nonlinear_problem(n=3, m=4, seed=seed)
    x = rng.standard_normal(pb.q)
    cache = build_reference(pb, x)
    batch = rng.integers(0, pb.m, size=rng.integers(1, 5))
    i, j = int(rng.integers(pb.n)), int(rng.integers(pb.m))
    g_hat = minibatch_inner_estimate(pb, cache, x, batch)
    assert np.abs(vr_gradient_biased(pb, cache, x, i, j, g_hat) - cache.grad_tilde).max() <= 1e-12
    assert np.abs(vr_gradient_unbiased(pb, cache, x, i, j, mean_inner(pb, x)) - cache.grad_tilde).max() <= 1e-12


def test_variance_reduction_near_optimum(synthetic):
    pb, _, opt = synthetic
    rng = np.random.default_rng(7)
    x_t = opt.x + 1e-2 * rng.standard_normal(pb.q)
    x_k = opt.x + 1e-2 * rng.standard_normal(pb.q)
    cache = build_reference(pb, x_t)
    true = full_gradient(pb, x_k)
    g_k = mean_inner(pb, x_k)
    vr, plain = [], []
    for _ in range(400):
        i, j = int(rng.integers(pb.n)), int(rng.integers(pb.m))
        b = rng.integers(0, pb.m, size=1)
        vr.append(vr_gradient_biased(pb, cache, x_k, i, j, minibatch_inner_estimate(pb, cache, x_k, b)) - true)
        # plain stochastic estimator: sampled Jacobian at x_k times sampled outer gradient at g(x_k)
        plain.append(pb.C[j].T @ pb.outer_gradient(i, g_k) - true)
    assert np.mean(np.sum(np.square(vr), 1)) < np.mean(np.sum(np.square(plain), 1))
