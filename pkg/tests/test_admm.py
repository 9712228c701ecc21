import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from compadmm import (
    L1,
    CallableProblem,
    ConstraintSpec,
    CustomProx,
    Mode,
    ScaledSquaredNorm,
    SolverConfig,
    dual_reset,
    full_gradient,
    gap_metrics,
    run_algorithm1,
    run_algorithm2,
    schedule,
)
from compadmm.admm import (
    omega_optimality_residual,
    solve_omega_subproblem,
    solve_x_subproblem,
    update_dual,
)
from compadmm.errors import ConfigurationError, DivergenceError, UnsupportedConfigurationError
from compadmm.linalg import pseudoinverse

from conftest import nonlinear_problem, random_affine


# -- schedule ------------------------------------------------------------------

def test_schedule_smooth_examples():
    v = schedule("convex_smooth", 1, 0, 5, L_F=2.0)
    assert (v.eta_s, v.c_k, v.eta_eff) == (0.25, 1.0, 0.25)
    assert schedule("convex_smooth", 1, 4, 5, L_F=2.0).eta_eff == 0.5


def test_schedule_nonsmooth_example():
    assert schedule("convex_nonsmooth", 4, 0, 5).eta_eff == pytest.approx(0.4, abs=1e-16)


def test_schedule_errors():
    with pytest.raises(ConfigurationError):
        schedule("convex_smooth", 1, 0, 5)
    with pytest.raises(ConfigurationError):
        schedule("strongly_convex", 1, 0, 5)
    with pytest.raises(ValueError):
        schedule("convex_smooth", 0, 0, 5, L_F=1.0)
    with pytest.raises(ValueError):
        schedule("convex_smooth", 1, 6, 5, L_F=1.0)


@given(st.integers(1, 200), st.integers(1, 30), st.floats(0.1, 100.0), st.sampled_from(list(Mode)[1:]))
def test_schedule_monotone(s, K, L_F, mode):
    vals = [schedule(mode, s, k, K, L_F) for k in range(K + 1)]
    cs = [v.c_k for v in vals]
    etas = [v.eta_eff for v in vals[:K]]
    assert all(b <= a for a, b in zip(cs, cs[1:]))
    assert all(b >= a * (1 - 1e-15) for a, b in zip(etas, etas[1:]))
    if mode is Mode.CONVEX_SMOOTH:
        assert max(etas) <= 1.0 / L_F
    # c at the end of epoch s is the value epoch s+1 starts from
    assert vals[K].c_k == schedule(mode, s + 1, 0, K, L_F).c_k


def test_schedule_scale_only_affects_nonsmooth():
    a = schedule("convex_nonsmooth", 3, 1, 4, scale=0.1)
    b = schedule("convex_nonsmooth", 3, 1, 4)
    assert a.eta_eff == pytest.approx(0.1 * b.eta_eff) and a.c_k == b.c_k
    assert schedule("convex_smooth", 3, 1, 4, L_F=2.0, scale=0.1) == schedule("convex_smooth", 3, 1, 4, L_F=2.0)


# -- subproblems ---------------------------------------------------------------

def test_omega_feasibility_minimizer():
    con = ConstraintSpec.identity_split(2)
    assert np.allclose(solve_omega_subproblem(con, 1.0, np.array([2.0, 3.0]), np.zeros(2)), [2.0, 3.0])


def test_omega_ridge_hand_example():
    con = ConstraintSpec([[1.0]], [[1.0]], ScaledSquaredNorm(1.0))
    assert solve_omega_subproblem(con, 1.0, np.array([1.0]), np.zeros(1))[0] == pytest.approx(-0.5, abs=1e-15)


def test_omega_l1_large_tau_is_zero():
    con = ConstraintSpec.identity_split(3, L1(100.0))
    assert np.array_equal(solve_omega_subproblem(con, 1.0, np.array([1.0, -2.0, 0.5]), np.zeros(3)), np.zeros(3))


def test_omega_custom_prox_matches_l1():
    l1 = L1(0.3)
    custom = CustomProx(l1.value, l1.prox)
    x, lam = np.array([1.0, -0.1, 0.5]), np.array([0.2, 0.0, -0.4])
    a = solve_omega_subproblem(ConstraintSpec.identity_split(3, l1), 2.0, x, lam)
    b = solve_omega_subproblem(ConstraintSpec.identity_split(3, custom), 2.0, x, lam)
    assert np.array_equal(a, b)


def test_omega_nonscalar_btb_unsupported():
    con = ConstraintSpec(np.eye(2), np.diag([1.0, 2.0]), L1(0.1))
    with pytest.raises(UnsupportedConfigurationError):
        solve_omega_subproblem(con, 1.0, np.ones(2), np.zeros(2))


@given(st.integers(0, 10_000), st.sampled_from(["none", "ridge", "l1"]))
def test_omega_optimality_residual(seed, kind):
    rng = np.random.default_rng(seed)
    p, q = 3, 4
    reg = {"none": None, "ridge": ScaledSquaredNorm(0.5), "l1": L1(0.2)}[kind]
    B = -np.eye(p) * 1.5 if kind == "l1" else rng.standard_normal((p, p)) + 3 * np.eye(p)
    con = ConstraintSpec(rng.standard_normal((p, q)), B, reg)
    x, lam = rng.standard_normal(q), rng.standard_normal(p)
    omega = solve_omega_subproblem(con, 1.3, x, lam)
    assert omega_optimality_residual(con, 1.3, x, lam, omega) <= 1e-10


def test_x_update_reduces_to_gradient_step_when_A_zero():
    con = ConstraintSpec(np.zeros((2, 3)), -np.eye(2))
    x, g = np.array([1.0, 2.0, 3.0]), np.array([0.5, -1.0, 2.0])
    out = solve_x_subproblem(con, 1.0, x, np.ones(2), np.ones(2), g, 0.1)
    assert np.allclose(out, x - 0.1 * g, atol=1e-14)


def test_x_update_hand_example():
    con = ConstraintSpec([[1.0]], [[-1.0]])
    out = solve_x_subproblem(con, 1.0, np.zeros(1), np.zeros(1), np.zeros(1), np.ones(1), 1.0)
    assert out[0] == pytest.approx(-0.5, abs=1e-15)


def test_x_update_non_finite():
    con = ConstraintSpec([[1.0]], [[-1.0]])
    with pytest.raises(FloatingPointError):
        solve_x_subproblem(con, 1.0, np.zeros(1), np.zeros(1), np.zeros(1), np.array([np.nan]), 1.0)


def test_update_dual_examples():
    A, B = np.eye(2), -np.eye(2)
    x = np.array([1.0, 2.0])
    assert np.array_equal(update_dual(3.0, np.array([0.5, 0.5]), A, B, x, x), [0.5, 0.5])
    assert np.array_equal(update_dual(2.0, np.zeros(2), A, B, np.array([1.0, -1.0]), np.zeros(2)), [2.0, -2.0])


def test_dual_reset_identity_A():
    pb = nonlinear_problem(q=3)
    x = np.array([0.1, 0.2, -0.3])
    assert np.allclose(dual_reset(pb, pseudoinverse(np.eye(3)), x), -full_gradient(pb, x), atol=1e-14)


def test_dual_reset_at_optimum(synthetic):
    pb, con, opt = synthetic
    lam = dual_reset(pb, pseudoinverse(con.A), opt.x)
    assert np.linalg.norm(full_gradient(pb, opt.x) + con.A.T @ lam) <= 1e-8
    assert np.allclose(lam, opt.lam, atol=1e-8)


def test_dual_reset_zero_gradient():
    pb = CallableProblem(2, 2, 1, 1, inner=lambda j, x: (x, np.eye(2)), outer=lambda i, y: (0.0, np.zeros(2)))
    assert np.array_equal(dual_reset(pb, np.eye(2), np.ones(2)), np.zeros(2))


# -- metrics -------------------------------------------------------------------

def test_gap_metrics_at_optimum(synthetic):
    pb, con, opt = synthetic
    m = gap_metrics(pb, con, opt, opt.x, opt.omega)
    assert abs(m.objective_gap) <= 1e-10 and m.feasibility <= 1e-10 and abs(m.bregman_gap) <= 1e-10


def test_gap_metrics_feasible_suboptimal(synthetic):
    pb, con, opt = synthetic
    x = opt.x + 0.5
    m = gap_metrics(pb, con, opt, x, con.A @ x)
    assert m.feasibility <= 1e-12 and m.objective_gap > 0 and m.bregman_gap > 0


def test_gap_metrics_missing_reference(synthetic):
    pb, con, _ = synthetic
    m = gap_metrics(pb, con, None, np.zeros(pb.q), np.zeros(con.l))
    assert m.objective_gap is None and m.bregman_gap is None and m.feasibility == 0.0


def test_bregman_gap_independent_formula(synthetic):
    pb, con, opt = synthetic
    rng = np.random.default_rng(0)
    Q, b, c0 = pb.quadratic_form()
    mu = con.regularizer.mu
    for _ in range(10):
        x, w = rng.standard_normal(pb.q), rng.standard_normal(con.l)
        # F and R are quadratic: the Bregman gaps are exact quadratic forms
        expect = 0.5 * (x - opt.x) @ Q @ (x - opt.x) + 0.5 * mu * (w - opt.omega) @ (w - opt.omega)
        assert gap_metrics(pb, con, opt, x, w).bregman_gap == pytest.approx(expect, rel=1e-9, abs=1e-10)


# -- strongly convex method ----------------------------------------------------

def test_strongly_convex_reduces_to_preconditioned_gradient_descent():
    pb = random_affine(m=3, n=1, q=4, r=3, seed=5)
    eps, rho, eta = 1e-3, 1.0, 0.5 / pb.smoothness.L_F
    con = ConstraintSpec(eps * np.eye(4), -np.eye(4))
    cfg = SolverConfig(K=1, N=pb.m, S=15, eta=eta, rho=rho, seed=0, backend="oracle")
    res = run_algorithm1(pb, con, cfg)
    M = np.eye(4) / eta + rho * eps**2 * np.eye(4)
    x = np.zeros(4)
    for _ in range(15):
        x = x - np.linalg.solve(M, pb.gradF(x))
    assert np.abs(res.state.x_tilde - x).max() <= 1e-12


@pytest.mark.parametrize("m,n,K,N", [(20, 10, 5, 3), (7, 3, 2, 1), (50, 50, 10, 5)])
@pytest.mark.parametrize("backend", ["oracle", "kernel"])
def test_strongly_convex_epoch_ledger(m, n, K, N, backend):
    pb = random_affine(m=m, n=n, q=4, r=3, seed=m)
    con = ConstraintSpec.identity_split(4, ScaledSquaredNorm(0.1))
    res = run_algorithm1(pb, con, SolverConfig(K=K, N=N, S=3, eta=0.5 / pb.smoothness.L_F, backend=backend))
    calls = res.trace.column("oracle_calls")
    assert calls[0] == 0
    assert set(np.diff(calls)) == {2 * m + n + K * (2 * N + 4)}


def test_strongly_convex_determinism(synthetic):
    pb, con, opt = synthetic
    cfg = SolverConfig(K=5, N=2, S=10, eta=1 / pb.smoothness.L_F, seed=3)
    a = run_algorithm1(pb, con, cfg, reference=opt)
    b = run_algorithm1(pb, con, cfg, reference=opt)
    strip = lambda t: [r[:-1] for r in t.rows]  # noqa: E731
    assert strip(a.trace) == strip(b.trace)
    assert np.array_equal(a.x, b.x)


def test_strongly_convex_preconditions(synthetic):
    pb, con, _ = synthetic
    with pytest.raises(ConfigurationError):
        run_algorithm1(pb, con, SolverConfig(eta=2.0 / pb.smoothness.L_F))
    with pytest.raises(ConfigurationError):
        run_algorithm1(pb, ConstraintSpec(np.ones((2, pb.q)), -np.eye(2)), SolverConfig(eta=0.01))
    with pytest.raises(ConfigurationError):
        run_algorithm1(pb, con, SolverConfig(eta=0.01, mode="convex_smooth"))
    with pytest.raises(ConfigurationError):
        SolverConfig(eta=None)
    with pytest.raises(ConfigurationError):
        SolverConfig(eta=0.1, backend="gpu")


def test_strongly_convex_warns_without_L_F():
    pb = nonlinear_problem()
    with pytest.warns(UserWarning):
        run_algorithm1(pb, ConstraintSpec.identity_split(3), SolverConfig(K=2, S=2, eta=0.05))


@pytest.mark.parametrize("runner", ["alg1", "alg2"])
def test_divergence_carries_partial_trace(synthetic, runner):
    pb, con, _ = synthetic
    with pytest.raises(DivergenceError) as info:
        if runner == "alg1":
            run_algorithm1(pb, con, SolverConfig(K=20, S=50, eta=50.0, L_F=1e-3))
        else:
            run_algorithm2(pb, con, SolverConfig(K=20, S=50, eta=50.0, mode="convex_nonsmooth"))
    assert info.value.trace is not None and len(info.value.trace.rows) >= 1


def test_kernel_backend_rejects_callback(synthetic):
    pb, con, _ = synthetic
    with pytest.raises(UnsupportedConfigurationError):
        run_algorithm1(pb, con, SolverConfig(eta=0.01, backend="kernel"), callback=lambda step: None)


def test_subproblem_identities_every_inner_step(synthetic):
    pb, con, opt = synthetic
    worst = {"optimality": 0.0, "descent": 0.0}

    def check(step):
        worst["optimality"] = max(worst["optimality"], omega_optimality_residual(con, 1.0, step.x, step.lam, step.omega_next))
        gd = step.x - step.eta_eff * (step.grad_est + con.A.T @ step.lam_next)
        worst["descent"] = max(worst["descent"], float(np.abs(step.x_next - gd).max()))

    run_algorithm1(pb, con, SolverConfig(K=10, N=2, S=10, eta=1 / pb.smoothness.L_F), callback=check)
    run_algorithm2(pb, con, SolverConfig(K=10, S=10, mode="convex_smooth"), callback=check)
    assert worst["optimality"] <= 1e-10 and worst["descent"] <= 1e-10


# -- convex method -------------------------------------------------------------

@pytest.mark.parametrize("backend", ["oracle", "kernel"])
def test_convex_epoch_ledger(backend):
    pb = random_affine(m=6, n=4, q=4, r=3, seed=2)
    con = ConstraintSpec.identity_split(4, ScaledSquaredNorm(0.1))
    res = run_algorithm2(pb, con, SolverConfig(K=3, S=4, mode="convex_smooth", backend=backend))
    assert set(np.diff(res.trace.column("oracle_calls"))) == {2 * 6 + 4 + 3 * (6 + 4)}


def test_convex_smooth_needs_L_F():
    with pytest.raises(ConfigurationError):
        run_algorithm2(nonlinear_problem(), ConstraintSpec.identity_split(3), SolverConfig(mode="convex_smooth"))
    with pytest.raises(ConfigurationError):
        run_algorithm2(nonlinear_problem(), ConstraintSpec.identity_split(3), SolverConfig(eta=0.1))


def test_convex_general_problem_nonsmooth_l1():
    pb = nonlinear_problem(n=3, m=4)
    con = ConstraintSpec.identity_split(3, L1(0.05))
    res = run_algorithm2(pb, con, SolverConfig(K=5, S=30, mode="convex_nonsmooth", eta=0.2))
    assert res.backend == "oracle"
    feas = res.trace.column("feasibility")
    assert feas[-1] < feas[1]


@pytest.mark.parametrize("mode", ["convex_smooth", "convex_nonsmooth"])
def test_bregman_gap_nonnegative_at_recorded_points(synthetic, mode):
    pb, con, opt = synthetic
    eta = None if mode == "convex_smooth" else 1 / pb.smoothness.L_F
    runs = [
        run_algorithm2(pb, con, SolverConfig(K=5, S=40, mode=mode, eta=eta), reference=opt),
        run_algorithm1(pb, con, SolverConfig(K=5, N=1, S=40, eta=1 / pb.smoothness.L_F), reference=opt),
    ]
    for res in runs:
        assert min(res.trace.column("bregman_gap")) >= -1e-12


def test_convex_carryover_state(synthetic):
    pb, con, opt = synthetic
    res = run_algorithm2(pb, con, SolverConfig(K=4, S=5, mode="convex_smooth"), reference=opt)
    st_ = res.state
    assert np.array_equal(st_.x_hat, st_.x) and np.array_equal(st_.lam_hat, st_.lam)
    assert st_.G_hat == pytest.approx(1 / 6)
    assert st_.x_bar.shape == (pb.q,) and st_.x_dot_bar.shape == (pb.q,)


def test_run_result_accessors(synthetic):
    pb, con, _ = synthetic
    res = run_algorithm1(pb, con, SolverConfig(K=2, S=2, eta=0.01))
    assert np.array_equal(res.x, res.state.x_tilde) and np.array_equal(res.omega, res.state.omega_tilde)
    assert math.isfinite(res.trace.final.objective)


def test_stop_tolerance_requires_feasibility(synthetic):
    pb, con, opt = synthetic
    cfg = SolverConfig(K=5, N=1, S=200, eta=1 / pb.smoothness.L_F, stop_tolerance=1e-6)
    res = run_algorithm1(pb, con, cfg, reference=opt)
    last = res.trace.final
    assert last.epoch < 200 and abs(last.objective_gap) <= 1e-6 and last.feasibility <= 1e-6
