import math

import numpy as np
import pytest

from paro.losses import CompositeProblem, LeastSquaresLoss, LogisticLoss, lipschitz_bound
from paro.par import (build_par, integer_convex_par, nonconvex_par, quantization_rate,
                      quasiconvex_par)
from paro.solvers import (TRACE_COLUMNS, LineSearchError, SolverConfig,
                          accelerated_proximal_gradient, admm, check_criticality,
                          proximal_gradient, snap_to_levels)
from paro.statbench import SyntheticSpec, gen_dataset

L1 = build_par((0.0,), (1.0,), "convex")


def _soft(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _ls(n, d, seed, sigma=0.0):
    ds = gen_dataset(SyntheticSpec(n=n, d=d, noise_sigma=sigma, seed=seed))
    return ds, LeastSquaresLoss(ds.A, ds.b)


def _int_par(x_true):
    return integer_convex_par(int(math.ceil(2 * np.max(np.abs(x_true)))))


def test_zero_lambda_is_gradient_descent():
    _, loss = _ls(10, 5, 0)
    eta = 0.5 / lipschitz_bound(loss)
    prob = CompositeProblem(loss, integer_convex_par(50, bounded=False), 0.0)
    cfg = SolverConfig(max_iters=25, step_init=eta, line_search=False, tol_residual=0)
    x, tr = proximal_gradient(prob, cfg)
    y = np.zeros(5)
    for _ in range(25):
        y = y - eta * loss.grad(y)
    assert np.allclose(x, y, atol=1e-13)
    assert len(tr) == 26


def test_one_step_soft_threshold():
    t, lam = 2.3, 0.4
    loss = LeastSquaresLoss(np.ones((1, 1)), np.array([t]))
    prob = CompositeProblem(loss, L1, lam)
    x, _ = proximal_gradient(prob, SolverConfig(max_iters=1, step_init=1.0, line_search=False))
    assert x[0] == pytest.approx(_soft(t, lam))


def test_converged_pg_point_is_quantized_at_scale():
    ds, loss = _ls(20, 200, 0)
    prob = CompositeProblem(loss, _int_par(ds.x_true), 0.01)
    # plain PG is too slow on this ill-conditioned problem; the accelerated run
    # reaches the critical point and PG must then sit still there
    x, tr = accelerated_proximal_gradient(prob, SolverConfig(max_iters=20000, tol_residual=1e-10))
    assert tr.converged
    x2, tr2 = proximal_gradient(prob, SolverConfig(max_iters=50, tol_residual=1e-8), x0=x)
    assert tr2.converged and tr2.n_iter <= 5
    assert check_criticality(prob, x2).residual <= 1e-5
    assert quantization_rate(x2, prob.par).rate >= 0.9


def test_pg_converges_and_quantizes_small_problem():
    ds, loss = _ls(6, 40, 1)
    prob = CompositeProblem(loss, _int_par(ds.x_true), 0.1)
    x, tr = proximal_gradient(prob, SolverConfig(max_iters=20000, tol_residual=1e-10))
    assert tr.converged
    assert check_criticality(prob, x).residual <= 1e-5
    assert quantization_rate(x, prob.par).rate >= 1 - 6 / 40


def test_zero_momentum_matches_pg():
    ds, loss = _ls(15, 40, 2, 0.1)
    for par in (_int_par(ds.x_true), quasiconvex_par(0.5), nonconvex_par(np.arange(-4, 5) * 0.5)):
        prob = CompositeProblem(loss, par, 0.05)
        cfg = SolverConfig(max_iters=200, momentum_rule=0.0)
        x1, t1 = proximal_gradient(prob, cfg)
        x2, t2 = accelerated_proximal_gradient(prob, cfg)
        assert np.array_equal(x1, x2)
        assert t1.rows == t2.rows


def test_accelerated_rate_on_quadratic():
    _, loss = _ls(30, 20, 3)
    L = lipschitz_bound(loss)
    eta = 1.0 / L
    prob = CompositeProblem(loss, integer_convex_par(10**4, bounded=False), 0.0)
    x_star = np.linalg.lstsq(loss.A, loss.b, rcond=None)[0]
    F_star = loss.value(x_star)
    cfg = SolverConfig(max_iters=300, step_init=eta, line_search=False, restart=False,
                       tol_residual=0)
    _, tr = accelerated_proximal_gradient(prob, cfg)
    F = tr.column("F")
    T = np.arange(1, F.size)
    bound = 2 * float(x_star @ x_star) / (eta * (T + 1) ** 2)
    assert np.all(F[1:] - F_star <= bound + 1e-12)


def test_admm_orthogonal_lasso():
    n, lam = 8, 0.05
    b = np.random.default_rng(4).normal(0, 1, n)
    prob = CompositeProblem(LeastSquaresLoss(np.eye(n), b), L1, lam)
    z, tr = admm(prob, SolverConfig(max_iters=5000, tol_residual=1e-12))
    assert tr.converged
    assert np.allclose(z, _soft(b, n * lam), atol=1e-9)
    assert check_criticality(prob, z).residual <= 1e-8


def test_admm_zero_lambda_agrees_with_pg():
    _, loss = _ls(30, 10, 5, 0.2)
    prob = CompositeProblem(loss, integer_convex_par(100, bounded=False), 0.0)
    z, tz = admm(prob, SolverConfig(max_iters=5000, tol_residual=1e-12))
    x, tx = proximal_gradient(prob, SolverConfig(max_iters=20000, tol_residual=1e-12))
    assert abs(prob.objective(z) - prob.objective(x)) <= 1e-6


def test_admm_matches_accelerated_on_convex():
    ds, loss = _ls(20, 200, 6, 0.1)
    prob = CompositeProblem(loss, _int_par(ds.x_true), 0.5)
    z, tz = admm(prob, SolverConfig(max_iters=20000, tol_residual=1e-11))
    x, tx = accelerated_proximal_gradient(prob, SolverConfig(max_iters=20000, tol_residual=1e-11))
    Fz, Fx = prob.objective(z), prob.objective(x)
    assert abs(Fz - Fx) <= 1e-6 * abs(Fx)
    assert np.max(np.abs(tz.column("step_norm")[-1:])) <= 1e-10


def test_admm_logistic_agrees_with_pg():
    ds = gen_dataset(SyntheticSpec(n=60, d=15, task="logistic", seed=7))
    prob = CompositeProblem(LogisticLoss(ds.A, ds.b), integer_convex_par(5, 0.5), 0.02)
    z, tz = admm(prob, SolverConfig(max_iters=3000, tol_residual=1e-10))
    x, tx = accelerated_proximal_gradient(prob, SolverConfig(max_iters=5000, tol_residual=1e-11))
    assert tz.converged
    assert prob.objective(z) == pytest.approx(prob.objective(x), rel=1e-7)
    assert check_criticality(prob, z).residual <= 1e-5


def test_criticality_examples():
    ds, loss = _ls(10, 20, 8)
    par = _int_par(ds.x_true)
    g0 = np.max(np.abs(loss.grad(np.zeros(20))))
    big = CompositeProblem(loss, par, 2 * g0 / par.slopes[0])
    assert check_criticality(big, np.zeros(20)).is_critical
    rep = check_criticality(CompositeProblem(loss, par, 0.01),
                            np.random.default_rng(0).uniform(-1, 1, 20), tol=1e-5)
    assert not rep.is_critical and rep.residual > 1e-5
    assert rep.coordinate_residuals.shape == (20,)


def test_criticality_handles_zero_lambda_and_domain_ends():
    loss = LeastSquaresLoss(np.eye(2), np.array([5.0, 0.5]))
    par = integer_convex_par(2)
    # at the domain end the normal cone absorbs the pull outward
    prob = CompositeProblem(loss, par, 0.0)
    rep = check_criticality(prob, np.array([2.0, 0.5]))
    assert rep.residual == pytest.approx(0.0, abs=1e-15)


def test_snap_only_moves_near_levels():
    par = integer_convex_par(3)
    x = np.array([1.0 + 5e-10, 1.0 + 1e-6, -2.0 - 1e-10, 0.4])
    assert snap_to_levels(par, x).tolist() == [1.0, 1.0 + 1e-6, -2.0, 0.4]


def test_sufficient_decrease_fixed_step():
    rng = np.random.default_rng(10)
    for k in range(6):
        ds, loss = _ls(10, 30, 100 + k, 0.1)
        eta = 0.5 / lipschitz_bound(loss)
        for par in (_int_par(ds.x_true), quasiconvex_par(0.5),
                    nonconvex_par(np.arange(-6, 7) * 0.5)):
            prob = CompositeProblem(loss, par, float(rng.uniform(0.01, 1)))
            cfg = SolverConfig(max_iters=100, step_init=eta, line_search=False, tol_residual=0)
            x, tr = proximal_gradient(prob, cfg)
            F, step = tr.column("F"), tr.column("step_norm")
            slack = 1e-12 * np.abs(F[:-1])
            assert np.all(F[1:] <= F[:-1] - step[1:] ** 2 / (4 * eta) + slack)


def test_trace_shape_and_csv():
    ds, loss = _ls(10, 30, 11)
    prob = CompositeProblem(loss, _int_par(ds.x_true), 0.1)
    for solver in (proximal_gradient, accelerated_proximal_gradient, admm):
        x, tr = solver(prob, SolverConfig(max_iters=37, crit_every=5))
        assert len(tr) <= 38
        text = tr.to_csv()
        lines = text.strip().split("\n")
        assert lines[0] == ",".join(TRACE_COLUMNS)
        assert len(lines) == len(tr) + 1
        crit = tr.column("crit_residual")
        assert not math.isnan(crit[-1]) and not math.isnan(crit[0])


def test_determinism():
    ds, loss = _ls(20, 60, 12, 0.1)
    prob = CompositeProblem(loss, quasiconvex_par(0.5), 0.2)
    for solver in (proximal_gradient, accelerated_proximal_gradient, admm):
        a = solver(prob, SolverConfig(max_iters=300))[1].to_csv()
        b = solver(prob, SolverConfig(max_iters=300))[1].to_csv()
        assert a == b


def test_errors():
    loss = LeastSquaresLoss(np.eye(2), np.ones(2))
    prob = CompositeProblem(loss, integer_convex_par(1), 0.1)
    with pytest.raises(ValueError):
        proximal_gradient(prob, x0=np.array([3.0, 0.0]))
    with pytest.raises(ValueError):
        admm(prob, SolverConfig(admm_rho=0.0))
    with pytest.raises(ValueError):
        admm(CompositeProblem(LeastSquaresLoss(np.array([[np.nan, 0], [0, 1]]), np.ones(2)),
                              integer_convex_par(1), 0.1))
    with pytest.raises(ValueError):
        SolverConfig(backtrack_factor=1.5)
    with pytest.raises(ValueError):
        SolverConfig(momentum_rule="heavy-ball")


class _UphillLinear(LeastSquaresLoss):
    # f(x) = <c, x> with the gradient sign flipped; F(0) = 0 leaves no rounding slack
    def value_grad(self, x):
        x = self._check(x)
        return float(self.b @ x), -self.b


def test_line_search_gives_up():
    loss = _UphillLinear(np.eye(2), np.ones(2))
    prob = CompositeProblem(loss, integer_convex_par(20, bounded=False), 0.0)
    with pytest.raises(LineSearchError):
        proximal_gradient(prob, SolverConfig(max_iters=5, step_init=1.0))
