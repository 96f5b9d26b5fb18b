import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamcs.linalg import SingularSystemError
from streamcs.pipeline import warm_start
from streamcs.solvers import (
    LassoProblem,
    fista,
    kkt_residual,
    kkt_satisfied,
    lasso_objective,
    lse_on_support,
    omp,
    soft_threshold,
)


def plant(m, n, k, seed, amp=(1.0, 2.0)):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((m, n)) / math.sqrt(m)
    x = np.zeros(n)
    pos = rng.choice(n, size=k, replace=False)
    x[pos] = (rng.integers(0, 2, k) * 2 - 1) * rng.uniform(amp[0], amp[1], k)
    return a, x, sorted(pos.tolist())


class TestSoftThreshold:
    def test_basic_cases(self):
        assert soft_threshold(3.0, 1.0) == 2.0
        assert soft_threshold(-0.5, 1.0) == 0.0
        assert soft_threshold(-3.0, 1.0) == -2.0

    @given(st.floats(-100, 100), st.floats(0, 50))
    @settings(max_examples=50, deadline=None)
    def test_odd_and_shrinking(self, v, t):
        out = soft_threshold(v, t)
        assert out == -soft_threshold(-v, t)
        assert abs(out) == max(abs(v) - t, 0.0)

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            soft_threshold(1.0, -0.1)


class TestFista:
    def test_scalar_closed_form(self):
        # min (x-1)^2 + |x| has solution 1/2
        rep = fista(LassoProblem(np.array([[1.0]]), np.array([1.0]), 1.0),
                    np.zeros(1), eps=1e-10)
        assert rep.x_hat[0] == pytest.approx(0.5, abs=1e-8)
        assert rep.converged

    def test_scalar_threshold_dominates(self):
        rep = fista(LassoProblem(np.array([[1.0]]), np.array([1.0]), 4.0),
                    np.zeros(1), eps=1e-10)
        assert rep.x_hat[0] == 0.0
        assert rep.iterations == 0  # the zero start is already optimal

    def test_planted_noiseless_recovery(self):
        a, x, pos = plant(48, 128, 5, seed=0)
        rep = fista(LassoProblem(a, a @ x, 1e-4), np.zeros(128), eps=1e-8,
                    max_iter=50_000)
        assert rep.converged
        assert sorted(np.flatnonzero(rep.x_hat).tolist()) == pos
        assert np.linalg.norm(rep.x_hat - x) <= 1e-2

    def test_kkt_certificate_self_consistent(self):
        a, x, _ = plant(30, 80, 4, seed=1)
        y = a @ x + np.random.default_rng(2).normal(0, 0.05, 30)
        eps = 1e-6
        rep = fista(LassoProblem(a, y, 0.1), np.zeros(80), eps=eps)
        assert rep.converged
        recomputed = kkt_residual(a, y, 0.1, rep.x_hat)
        assert recomputed <= eps
        assert rep.kkt_residual == pytest.approx(recomputed, abs=1e-14)
        assert kkt_satisfied(a, y, 0.1, rep.x_hat, eps)

    def test_objective_never_above_start(self):
        a, x, _ = plant(25, 60, 6, seed=3)
        y = a @ x + np.random.default_rng(4).normal(0, 0.1, 25)
        for seed in range(5):
            x0 = np.random.default_rng(seed).standard_normal(60)
            rep = fista(LassoProblem(a, y, 0.3), x0, eps=1e-8, max_iter=200)
            assert rep.objective <= lasso_objective(a, y, 0.3, x0) + 1e-12

    def test_max_iter_reported_not_raised(self):
        a, x, _ = plant(30, 90, 5, seed=5)
        rep = fista(LassoProblem(a, a @ x, 1e-6), np.zeros(90), eps=1e-12, max_iter=3)
        assert not rep.converged
        assert rep.iterations == 3

    def test_warm_start_beats_cold_on_average(self):
        # streaming windows: warm start from the shifted previous solution
        rng = np.random.default_rng(6)
        n, m, windows = 128, 44, 120
        a0 = rng.standard_normal((m, n)) / math.sqrt(m)
        values = np.where(rng.random(n + windows) < 0.05,
                          rng.uniform(1, 2, n + windows), 0.0)
        tiled = np.concatenate([a0, a0], axis=1)
        lam = 0.05
        warm_iters, cold_iters = [], []
        prev = None
        for i in range(windows):
            a = tiled[:, i % n : i % n + n]
            y = a @ values[i : i + n] + rng.normal(0, 0.1, m)
            x0 = np.zeros(n) if prev is None else warm_start(prev, 1)
            rep_w = fista(LassoProblem(a, y, lam), x0, eps=1e-4 * lam)
            rep_c = fista(LassoProblem(a, y, lam), np.zeros(n), eps=1e-4 * lam)
            warm_iters.append(rep_w.iterations)
            cold_iters.append(rep_c.iterations)
            prev = rep_w.x_hat
        d = np.array(cold_iters[1:]) - np.array(warm_iters[1:])
        assert d.mean() > 3 * d.std(ddof=1) / math.sqrt(d.size)


class TestOmp:
    def test_identity_single_atom(self):
        y = np.zeros(4)
        y[2] = 3.0
        x = omp(np.eye(4), y, max_atoms=2)
        assert np.allclose(x, y, atol=1e-12)

    def test_zero_measurement(self):
        x = omp(np.eye(5), np.zeros(5), max_atoms=2)
        assert np.array_equal(x, np.zeros(5))

    def test_planted_exact_recovery(self):
        a, x, pos = plant(40, 200, 4, seed=7)
        out = omp(a, a @ x, max_atoms=4)
        assert sorted(np.flatnonzero(out).tolist()) == pos
        assert np.max(np.abs(out - x)) <= 1e-8

    def test_residual_orthogonal_after_each_selection(self):
        a, x, _ = plant(30, 100, 5, seed=8)
        y = a @ x
        for t in range(1, 6):
            xt = omp(a, y, max_atoms=t)
            sel = np.flatnonzero(xt)
            r = y - a @ xt
            assert np.max(np.abs(a[:, sel].T @ r)) <= 1e-9

    def test_gamma_stops_early(self):
        a, x, _ = plant(40, 120, 3, seed=9)
        out = omp(a, a @ x, max_atoms=10, gamma=1e-10)
        assert np.count_nonzero(out) == 3

    def test_max_atoms_bound_enforced(self):
        with pytest.raises(ValueError):
            omp(np.eye(4), np.ones(4), max_atoms=4)


class TestLseOnSupport:
    def test_empty_support_gives_zero(self):
        a, _, _ = plant(10, 30, 2, seed=10)
        assert np.array_equal(lse_on_support(a, np.ones(10), []), np.zeros(30))

    def test_orthonormal_support_noiseless_exact(self):
        q, _ = np.linalg.qr(np.random.default_rng(11).standard_normal((12, 12)))
        a = q[:, :8]  # orthonormal columns
        x = np.zeros(8)
        x[[1, 5]] = [2.0, -3.0]
        out = lse_on_support(a, a @ x, [1, 5])
        assert np.allclose(out, x, atol=1e-12)

    def test_support_too_large_rejected(self):
        a, _, _ = plant(5, 20, 2, seed=12)
        with pytest.raises(SingularSystemError):
            lse_on_support(a, np.ones(5), list(range(5)))

    def test_out_of_range_support(self):
        a, _, _ = plant(5, 20, 2, seed=13)
        with pytest.raises(IndexError):
            lse_on_support(a, np.ones(5), [25])

    def test_error_covariance_trace(self):
        # on a fixed true support, MSE over noise ~ sigma^2 tr((A_S^T A_S)^-1)
        m, n, k, sigma, trials = 30, 100, 5, 0.1, 1000
        a, x, pos = plant(m, n, k, seed=14)
        expected = sigma**2 * float(np.trace(np.linalg.inv(a[:, pos].T @ a[:, pos])))
        rng = np.random.default_rng(15)
        sq = 0.0
        for _ in range(trials):
            y = a @ x + rng.normal(0, sigma, m)
            est = lse_on_support(a, y, pos)
            sq += float(np.sum((est[pos] - x[pos]) ** 2))
        assert sq / trials == pytest.approx(expected, rel=0.05)

    def test_unbiased_while_lasso_is_not(self):
        m, n, k, sigma, trials = 40, 120, 5, 0.1, 400
        a, x, pos = plant(m, n, k, seed=16)
        lam = 4 * sigma * math.sqrt(2 * math.log(n))
        rng = np.random.default_rng(17)
        lse_mean = np.zeros(k)
        lasso_mean = np.zeros(k)
        lse_sq = np.zeros(k)
        for _ in range(trials):
            y = a @ x + rng.normal(0, sigma, m)
            lse_mean += lse_on_support(a, y, pos)[pos]
            lasso_mean += fista(LassoProblem(a, y, lam), np.zeros(n),
                                eps=1e-4 * lam).x_hat[pos]
            lse_sq += (lse_on_support(a, y, pos)[pos] - x[pos]) ** 2
        lse_mean /= trials
        lasso_mean /= trials
        se = np.sqrt(lse_sq / trials / trials)  # per-coordinate standard error
        assert np.all(np.abs(lse_mean - x[pos]) <= 3 * se)
        assert np.max(np.abs(lasso_mean - x[pos])) > 5 * np.max(se)
