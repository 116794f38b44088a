import numpy as np
import pytest
from scipy.linalg import block_diag, cho_factor, cho_solve

from warmgp.errors import DivergenceError, NotPositiveDefiniteError
from warmgp.solvers import (BUDGETS, Initialization, Preconditioner, SolverConfig, ap_solve, cg_solve,
                            init_weights, make_preconditioner, pivoted_cholesky, quadratic_objective,
                            relative_residual, sgd_solve, solve, solve_one)

from helpers import blocked, matern_system


def oracle(H, b):
    return cho_solve(cho_factor(H), b)


def random_spd(rng, n, diag=1.0):
    A = rng.standard_normal((n, n)) / np.sqrt(n)
    return A @ A.T + diag * np.eye(n)


class TestConfig:
    def test_defaults(self):
        c = SolverConfig()
        assert (c.tolerance, c.learning_rate, c.momentum) == (0.01, 0.3, 0.9)
        assert (c.batch_size, c.block_size, c.precond_rank) == (100, 100, 100)

    @pytest.mark.parametrize("kw", [dict(method="lu"), dict(tolerance=0), dict(momentum=1.0),
                                    dict(batch_size=0), dict(precond_rank=-1), dict(ap_order="random")])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SolverConfig(**kw)

    def test_budgets(self):
        assert BUDGETS["small"] == {"cg": 5, "sgd": 120, "ap": 30}
        assert BUDGETS["large"] == {"cg": 25, "sgd": 600, "ap": 150}
        assert SolverConfig(method="ap").with_budget("large").max_iters == 150


class TestInitialization:
    def test_cold(self):
        np.testing.assert_array_equal(init_weights(Initialization.cold(), 3, 2), np.zeros(5))

    def test_warm(self):
        np.testing.assert_array_equal(init_weights(Initialization.warm([1.0, 2.0]), 2, 1), [1, 2, 0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            init_weights(Initialization.warm([1.0, 2.0]), 3, 1)

    def test_warm_needs_vector(self):
        with pytest.raises(ValueError):
            Initialization("warm")

    def test_exact_warm_start_residual(self, rng):
        sys_ = blocked(rng, 30, 6)
        u1 = oracle(sys_.H11, sys_.b1)
        v0 = init_weights(Initialization.warm(u1), 30, 6)
        r = sys_.b - sys_.assemble() @ v0
        np.testing.assert_allclose(r[:30], 0, atol=1e-10)
        np.testing.assert_allclose(r[30:], sys_.b2 - sys_.H12.T @ u1, atol=1e-10)


class TestRelativeResidual:
    def test_exact_solution(self, rng):
        H, b = matern_system(rng, 40)
        assert relative_residual(H, oracle(H, b), b) < 1e-12

    def test_zero_vector(self, rng):
        H, b = matern_system(rng, 10)
        assert relative_residual(H, np.zeros(10), b) == 1.0

    def test_hand_case(self):
        assert relative_residual(2 * np.eye(2), np.array([0.5, 0.0]), np.array([2.0, 0.0])) == 0.5

    def test_zero_rhs(self):
        with pytest.raises(ValueError):
            relative_residual(np.eye(2), np.zeros(2), np.zeros(2))


class TestPivotedCholesky:
    def test_full_rank(self, rng):
        H = random_spd(rng, 30)
        L = pivoted_cholesky(H, 30)
        np.testing.assert_allclose(L @ L.T, H, atol=1e-10)

    def test_picks_largest_diagonal(self):
        H = np.diag([1.0, 5.0, 3.0])
        L = pivoted_cholesky(H, 1)
        np.testing.assert_allclose(L[:, 0], [0, np.sqrt(5), 0])

    def test_trace_decreases(self, rng):
        H = random_spd(rng, 50)
        traces = [np.trace(H - (L := pivoted_cholesky(H, k)) @ L.T) for k in range(51)]
        assert np.all(np.diff(traces) <= 1e-12)

    def test_residual_diagonal_nonnegative(self, rng):
        H, _ = matern_system(rng, 80)
        L = pivoted_cholesky(H, 30)
        assert np.all(np.diagonal(H - L @ L.T) >= -1e-12)

    def test_stops_at_numerical_rank(self):
        v = np.arange(1.0, 6.0)
        L = pivoted_cholesky(np.outer(v, v), 4)
        assert L.shape[1] == 1

    def test_woodbury_inverse(self, rng):
        H = random_spd(rng, 25)
        L = pivoted_cholesky(H, 10)
        P = Preconditioner(L, 0.3)
        r = rng.standard_normal(25)
        np.testing.assert_allclose(P(r), np.linalg.solve(L @ L.T + 0.3 * np.eye(25), r), rtol=1e-10)

    def test_explicit_shift(self, rng):
        H, _ = matern_system(rng, 40)
        assert make_preconditioner(H, SolverConfig(precond_shift=0.04)).shift == 0.04


class TestCG:
    def test_identity_one_iteration(self, rng):
        b = rng.standard_normal(10)
        res = cg_solve(np.eye(10), b, Initialization.cold(), SolverConfig(precond_rank=0))
        assert res.iterations == 1 and res.converged
        np.testing.assert_allclose(res.v, b)

    def test_matches_oracle(self, rng):
        H = random_spd(rng, 20)
        b = rng.standard_normal(20)
        res = cg_solve(H, b, Initialization.cold(), SolverConfig(precond_rank=5))
        assert res.converged and relative_residual(H, res.v, b) <= 0.01
        assert np.linalg.norm(res.v - oracle(H, b)) / np.linalg.norm(oracle(H, b)) < 0.05

    def test_history_invariants(self, rng):
        H, b = matern_system(rng, 100)
        res = cg_solve(H, b, Initialization.cold(), SolverConfig(tolerance=1e-8, precond_rank=10))
        assert len(res.residual_history) == res.iterations + 1
        assert res.residual_history[0] == 1.0
        assert res.final_residual <= 1e-8

    def test_history_is_true_residual(self, rng):
        H, b = matern_system(rng, 60)
        cfg = SolverConfig(tolerance=1e-12, max_iters=7, precond_rank=5)
        res = cg_solve(H, b, Initialization.cold(), cfg)
        assert res.final_residual == pytest.approx(relative_residual(H, res.v, b), rel=1e-12)

    def test_warm_no_more_iterations(self, rng):
        sys_ = blocked(rng, 200, 20)
        H, b = sys_.assemble(), sys_.b
        u1 = oracle(sys_.H11, sys_.b1)
        cfg = SolverConfig(tolerance=1e-4, precond_rank=20)
        warm = cg_solve(H, b, Initialization.warm(u1), cfg)
        cold = cg_solve(H, b, Initialization.cold(), cfg)
        assert warm.iterations <= cold.iterations + 1

    def test_indefinite_breakdown(self):
        H = np.diag([1.0, -1.0])
        with pytest.raises(NotPositiveDefiniteError):
            cg_solve(H, np.array([1.0, 1.0]), Initialization.cold(), SolverConfig(precond_rank=0))

    def test_budget_cap(self, rng):
        H, b = matern_system(rng, 150, hyp=None)
        res = cg_solve(H, b, Initialization.cold(), SolverConfig(tolerance=1e-14, max_iters=5, precond_rank=0))
        assert res.iterations == 5 and not res.converged

    def test_zero_rhs(self):
        res = cg_solve(np.eye(3), np.zeros(3), Initialization.cold(), SolverConfig())
        assert res.converged and res.iterations == 0 and res.final_residual == 0.0
        np.testing.assert_array_equal(res.v, 0)


class TestSGD:
    def test_full_batch_identity_one_step(self, rng):
        b = rng.standard_normal(8)
        cfg = SolverConfig(method="sgd", learning_rate=1.0, momentum=0.0, batch_size=8)
        res = sgd_solve(np.eye(8), b, Initialization.cold(), cfg)
        assert res.iterations == 1 and res.converged
        np.testing.assert_allclose(res.v, b)

    def test_default_step_converges(self, rng):
        n = 50
        A = rng.uniform(-1, 1, size=(n, n)) * 0.02
        H = A @ A.T + np.eye(n)
        b = rng.standard_normal(n)
        cfg = SolverConfig(method="sgd", batch_size=10, max_iters=5000)
        res = sgd_solve(H, b, Initialization.cold(), cfg)
        assert res.converged and res.iterations < 5000

    def test_warm_start_smaller_initial_residual(self, rng):
        sys_ = blocked(rng, 100, 10)
        u1 = oracle(sys_.H11, sys_.b1)
        cfg = SolverConfig(method="sgd", max_iters=0)
        H = sys_.assemble()
        warm = sgd_solve(H, sys_.b, Initialization.warm(u1), cfg)
        cold = sgd_solve(H, sys_.b, Initialization.cold(), cfg)
        assert warm.residual_history[0] < cold.residual_history[0]

    def test_deterministic(self, rng):
        H, b = matern_system(rng, 120)
        cfg = SolverConfig(method="sgd", batch_size=20, max_iters=50, seed=3)
        a = sgd_solve(H, b, Initialization.cold(), cfg)
        c = sgd_solve(H, b, Initialization.cold(), cfg)
        np.testing.assert_array_equal(a.v, c.v)
        np.testing.assert_array_equal(a.residual_history, c.residual_history)

    def test_divergence_guard(self, rng):
        H, b = matern_system(rng, 60)
        cfg = SolverConfig(method="sgd", learning_rate=50.0, momentum=0.9, batch_size=60, max_iters=500)
        with pytest.raises(DivergenceError) as info:
            sgd_solve(H, b, Initialization.cold(), cfg)
        partial = info.value.result
        assert partial is not None and not partial.converged
        assert relative_residual(H, partial.v, b) <= 1.0

    def test_objective_decreases(self, rng):
        H, b = matern_system(rng, 100)
        res = sgd_solve(H, b, Initialization.cold(), SolverConfig(method="sgd", batch_size=25, max_iters=200))
        assert quadratic_objective(H, res.v, b) < quadratic_objective(H, np.zeros(100), b)


class TestAP:
    def test_single_block(self, rng):
        H, b = matern_system(rng, 30)
        res = ap_solve(H, b, Initialization.cold(), SolverConfig(method="ap", block_size=30, tolerance=1e-10))
        assert res.iterations == 1 and res.converged

    def test_block_diagonal_one_sweep(self, rng):
        H = block_diag(random_spd(rng, 10), random_spd(rng, 10), random_spd(rng, 5))
        b = rng.standard_normal(25)
        res = ap_solve(H, b, Initialization.cold(), SolverConfig(method="ap", block_size=10, tolerance=1e-10))
        assert res.iterations == 3 and res.converged

    def test_random_spd_monotone_and_accurate(self, rng):
        H = random_spd(rng, 300)
        b = rng.standard_normal(300)
        res = ap_solve(H, b, Initialization.cold(), SolverConfig(method="ap", block_size=100))
        assert res.converged
        assert np.all(np.diff(res.residual_history) <= 0)
        v = oracle(H, b)
        assert np.linalg.norm(res.v - v) / np.linalg.norm(v) < 0.05

    def test_objective_monotone_on_matern(self, rng):
        H, b = matern_system(rng, 250, hyp=None)
        cfg = SolverConfig(method="ap", block_size=50, max_iters=60, tolerance=1e-12)
        v = np.zeros(250)
        J = [quadratic_objective(H, v, b)]
        res = ap_solve(H, b, Initialization.cold(), cfg)
        # replay the sweep: each block solve minimizes J over its block
        for it in range(res.iterations):
            s = (it % 5) * 50
            r = b - H @ v
            v[s:s + 50] += np.linalg.solve(H[s:s + 50, s:s + 50], r[s:s + 50])
            J.append(quadratic_objective(H, v, b))
        assert np.all(np.diff(J) <= 1e-12)
        np.testing.assert_allclose(v, res.v, atol=1e-10)

    def test_greedy_order(self, rng):
        H, b = matern_system(rng, 200)
        cyc = ap_solve(H, b, Initialization.cold(), SolverConfig(method="ap", block_size=50, max_iters=5000))
        grd = ap_solve(H, b, Initialization.cold(),
                       SolverConfig(method="ap", block_size=50, max_iters=5000, ap_order="greedy"))
        assert cyc.converged and grd.converged

    def test_non_spd_block(self):
        H = np.diag([1.0, -2.0, 1.0])
        with pytest.raises(NotPositiveDefiniteError):
            ap_solve(H, np.ones(3), Initialization.cold(), SolverConfig(method="ap", block_size=1))


class TestOracleAgreement:
    @pytest.mark.parametrize("method", ["cg", "sgd", "ap"])
    def test_tight_tolerance(self, rng, method):
        H, b = matern_system(rng, 200)
        res = solve_one(H, b, Initialization.cold(),
                        SolverConfig(method=method, tolerance=1e-6, max_iters=200000))
        v = oracle(H, b)
        err = np.sqrt((res.v - v) @ H @ (res.v - v)) / np.sqrt(v @ H @ v)
        assert res.converged and err <= 1e-4

    @pytest.mark.parametrize("method", ["cg", "sgd", "ap"])
    def test_objective_decreases(self, rng, method):
        H, b = matern_system(rng, 150)
        res = solve_one(H, b, Initialization.cold(), SolverConfig(method=method, max_iters=20))
        assert res.iterations >= 1
        assert quadratic_objective(H, res.v, b) < 0.0


class TestMultiRhs:
    @pytest.mark.parametrize("method", ["cg", "sgd", "ap"])
    def test_single_column_matches(self, rng, method):
        H, b = matern_system(rng, 120)
        cfg = SolverConfig(method=method, max_iters=40, seed=5)
        (multi,) = solve(H, b[:, None], [Initialization.cold()], cfg)
        single = solve_one(H, b, Initialization.cold(), cfg)
        np.testing.assert_array_equal(multi.v, single.v)

    @pytest.mark.parametrize("method", ["cg", "ap"])
    def test_identical_columns(self, rng, method):
        H, b = matern_system(rng, 120)
        out = solve(H, np.column_stack([b, b, b]), Initialization.cold(), SolverConfig(method=method))
        for r in out[1:]:
            np.testing.assert_array_equal(r.v, out[0].v)

    def test_sgd_columns_use_distinct_seeds(self, rng):
        H, b = matern_system(rng, 120)
        cfg = SolverConfig(method="sgd", batch_size=20, max_iters=30, seed=1)
        a = solve(H, np.column_stack([b, b]), Initialization.cold(), cfg)
        again = solve(H, np.column_stack([b, b]), Initialization.cold(), cfg)
        assert not np.array_equal(a[0].v, a[1].v)
        np.testing.assert_array_equal(a[1].v, again[1].v)

    def test_hundred_rhs_budgeted(self, rng):
        H, _ = matern_system(rng, 300, hyp=None)
        B = rng.standard_normal((300, 100))
        out = solve(H, B, Initialization.cold(), SolverConfig(tolerance=1e-12).with_budget("small"))
        assert all(len(r.residual_history) == 6 for r in out)

    def test_shape_checks(self, rng):
        H, b = matern_system(rng, 10)
        with pytest.raises(ValueError):
            solve(H, np.ones((9, 2)), Initialization.cold(), SolverConfig())
        with pytest.raises(ValueError):
            solve(H, np.ones((10, 2)), [Initialization.cold()], SolverConfig())

    def test_keep_on_divergence(self, rng):
        H, b = matern_system(rng, 60)
        cfg = SolverConfig(method="sgd", learning_rate=50.0, batch_size=60, max_iters=500)
        (res,) = solve(H, b, Initialization.cold(), cfg, on_divergence="keep")
        assert not res.converged
        with pytest.raises(DivergenceError):
            solve(H, b, Initialization.cold(), cfg)
