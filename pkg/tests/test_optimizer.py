import numpy as np
import pytest

from conftest import make_problem
from multiridge.core import (Dataset, HyperParams, InvalidInputError, normal_equation_residual,
                             standardize_apply, standardize_fit)
from multiridge.cv_gradient import CVObjective, eval_criterion, partition_folds
from multiridge.datagen import SparseLinearSpec, gen_sparse_linear
from multiridge.optimizer import (DivergenceError, InitStrategy, OptimConfig, init_lambda,
                                  optimize)


class TestInit:
    def test_identity(self):
        assert np.array_equal(init_lambda("identity", 3), [1, 1, 1])

    def test_lasso_informed(self):
        th = np.array([[0.0], [0.7], [0.0]])
        assert np.array_equal(init_lambda(InitStrategy("lasso_informed"), 3, th), [10, 1, 10])

    def test_lasso_informed_multi_target(self):
        th = np.array([[0.0, 0.0], [0.0, 0.1]])
        assert np.array_equal(init_lambda(InitStrategy("lasso_informed", high=5, low=2), 2, th),
                              [5, 2])

    def test_constant(self):
        assert np.array_equal(init_lambda(InitStrategy("constant", 0.5), 2), [0.5, 0.5])

    def test_missing_lasso_theta(self):
        with pytest.raises(InvalidInputError):
            init_lambda(InitStrategy("lasso_informed"), 3)

    def test_unknown(self):
        with pytest.raises(InvalidInputError):
            InitStrategy("zeros")


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(epochs=0), dict(decay=0.0), dict(decay=1.5),
                                    dict(learning_rate=-1.0)])
    def test_rejects(self, kw):
        with pytest.raises(InvalidInputError):
            OptimConfig(**kw)


class TestOptimize:
    def test_zero_learning_rate_is_noop(self, problem):
        data, plan = problem
        lam0 = np.linspace(0.5, 1.5, data.n_features)
        res = optimize(data, plan, HyperParams(lam0), OptimConfig(0.0, 1.0, 1))
        assert np.array_equal(res.lambda_star, lam0)
        assert len(res.history) == 1 and res.epochs_run == 1

    def test_scalar_problem_reaches_grid_minimum(self, rng):
        X = rng.normal(size=(60, 1))
        y = 0.3 * X[:, 0] + rng.normal(size=60)
        data = Dataset(X, y)
        plan = partition_folds(60, 5, 0)
        grid = np.linspace(0, 5, 50001)
        obj = CVObjective(data, plan)
        vals = [obj.value(np.array([g]), HyperParams([1.0])) for g in grid]
        best = grid[int(np.argmin(vals))]
        assert 0 < best < 5
        res = optimize(data, plan, HyperParams([1.0]), OptimConfig(5.0, 1.0, 3000))
        assert abs(abs(res.lambda_star[0]) - best) <= 1e-3

    def test_default_settings_decrease_criterion(self):
        train, _ = gen_sparse_linear(SparseLinearSpec(D=100, N_test=0, seed=3))
        data = standardize_apply(standardize_fit(train), train)
        plan = partition_folds(data.n_samples, 5, 0)
        hp0 = HyperParams(np.ones(100))
        res = optimize(data, plan, hp0, OptimConfig(350.0, 0.999, 300))
        assert eval_criterion(data, plan, hp0.with_lambda(res.lambda_star)).value \
            <= eval_criterion(data, plan, hp0).value

    def test_history_and_refit(self, problem):
        data, plan = problem
        cfg = OptimConfig(35.0, 0.99, 20)
        res = optimize(data, plan, HyperParams(np.ones(data.n_features)), cfg)
        lrs = [h[2] for h in res.history]
        expect = [35.0]
        for _ in range(19):
            expect.append(expect[-1] * 0.99)
        assert lrs == expect
        assert len(res.values) == res.epochs_run == 20
        assert normal_equation_residual(data.X, data.Y, res.lambda_star, res.theta_final) <= 1e-8

    @staticmethod
    def _count_ascents(lr, n=50):
        from multiridge.verify import random_instance
        rng = np.random.default_rng(0)
        worse = 0
        for _ in range(n):
            data, plan, _ = random_instance(rng)
            hp0 = HyperParams(np.ones(data.n_features))
            try:
                res = optimize(data, plan, hp0, OptimConfig(lr, 0.999, 300), refit=False)
            except DivergenceError:
                continue
            final = eval_criterion(data, plan, hp0.with_lambda(res.lambda_star)).value
            worse += final > eval_criterion(data, plan, hp0).value
        return worse

    @pytest.mark.xfail(strict=True, reason="lr 35 overshoots onto the large-penalty plateau "
                       "on small random instances; see decisions ledger")
    def test_descent_sanity_tenth_of_default_rate(self):
        assert self._count_ascents(35.0) == 0

    def test_descent_sanity_hundredth_of_default_rate(self):
        assert self._count_ascents(3.5) == 0

    def test_deterministic(self, problem):
        data, plan = problem
        hp0 = HyperParams(np.ones(data.n_features), (0.5, 1.0, 2.0))
        a = optimize(data, plan, hp0, OptimConfig(10.0, 0.99, 15))
        b = optimize(data, plan, hp0, OptimConfig(10.0, 0.99, 15))
        assert np.array_equal(a.lambda_star, b.lambda_star) and a.history == b.history
        assert np.array_equal(a.theta_final, b.theta_final)

    def test_divergence_raises(self, rng):
        data, plan = make_problem(rng, N=50, D=5, M=1)
        with pytest.raises(DivergenceError) as ei:
            optimize(data, plan, HyperParams(np.ones(5)), OptimConfig(1e200, 1.0, 50))
        assert ei.value.last_lambda.shape == (5,)

    def test_no_refit(self, problem):
        data, plan = problem
        res = optimize(data, plan, HyperParams(np.ones(data.n_features)),
                       OptimConfig(1.0, 1.0, 2), refit=False)
        assert res.theta_final is None
