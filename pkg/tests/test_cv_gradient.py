import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_problem
from multiridge.core import Dataset, HyperParams, InvalidInputError
from multiridge.cv_gradient import (CVObjective, eval_criterion, finite_diff_grad, grad_lambda,
                                    grad_lambda_full, partition_folds, partition_holdout,
                                    q_term_and_grad)


def naive_criterion(data, plan, L, gammas=(1.0,), mu=0.0):
    """Loop-based criterion for a full penalty matrix ``L`` (system X'X + N_T g^2 L L)."""
    K = plan.K
    E = Q = 0.0
    for val, train in zip(plan.validation, plan.training):
        Xt, Yt = data.X[train], data.Y[train]
        n_t, n_v = len(train), len(val)
        for g in gammas:
            M = Xt.T @ Xt + n_t * g * g * (L @ L)
            theta = np.linalg.solve(M, Xt.T @ Yt)
            r = data.Y[val] - data.X[val] @ theta
            E += np.sum(r * r) / (2 * n_v) / K / len(gammas)
            Q += 0.5 * mu * np.sum((L @ theta) ** 2)
    return E + Q


class TestPartition:
    def test_even_split(self):
        p = partition_folds(10, 5, 0)
        assert [len(v) for v in p.validation] == [2] * 5 and len(p.dropped) == 0

    def test_remainder_dropped(self):
        p = partition_folds(11, 5, 0)
        assert [len(v) for v in p.validation] == [2] * 5 and len(p.dropped) == 1

    def test_deterministic(self):
        a, b = partition_folds(37, 4, 9), partition_folds(37, 4, 9)
        assert all(np.array_equal(x, y) for x, y in zip(a.validation, b.validation))

    @pytest.mark.parametrize("N,K", [(10, 1), (3, 5)])
    def test_rejects(self, N, K):
        with pytest.raises(InvalidInputError):
            partition_folds(N, K)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(2, 300), st.integers(2, 12), st.integers(0, 2**31))
    def test_invariants(self, N, K, seed):
        if N < K:
            return
        p = partition_folds(N, K, seed)
        assert p.K == K and p.n_val == N // K and p.n_train == (K - 1) * (N // K)
        allv = np.concatenate(p.validation + (p.dropped,))
        assert np.array_equal(np.sort(allv), np.arange(N))
        for v, t in zip(p.validation, p.training):
            assert len(np.intersect1d(v, t)) == 0
            assert len(v) + len(t) + len(p.dropped) == N

    def test_holdout(self):
        p = partition_holdout(1000, 0.8, 3)
        assert p.K == 1 and p.n_train == 800 and p.n_val == 200
        with pytest.raises(InvalidInputError):
            partition_holdout(3, 0.1)

    def test_reordered(self):
        p = partition_folds(20, 4, 1)
        q = p.reordered([3, 2, 1, 0])
        assert np.array_equal(q.validation[0], p.validation[3])


class TestCriterion:
    def test_matches_naive_loop(self, problem):
        data, plan = problem
        lam = np.random.default_rng(1).uniform(0.1, 1.5, data.n_features)
        for gammas in [(1.0,), (0.5, 1.0, 2.0)]:
            rep = eval_criterion(data, plan, HyperParams(lam, gammas))
            ref = naive_criterion(data, plan, np.diag(lam), gammas)
            assert rep.value == pytest.approx(ref, rel=1e-12)
            assert rep.value == pytest.approx(rep.per_fold_losses.mean(), rel=1e-12)

    def test_with_q_matches_naive(self, problem):
        data, plan = problem
        lam = np.random.default_rng(2).uniform(0.1, 1.5, data.n_features)
        rep = eval_criterion(data, plan, HyperParams(lam, mu=0.3))
        assert rep.value == pytest.approx(naive_criterion(data, plan, np.diag(lam), mu=0.3),
                                          rel=1e-12)
        assert rep.value == pytest.approx(rep.per_fold_losses.mean() + rep.per_fold_Q.sum(),
                                          rel=1e-12)

    def test_zero_residual(self, rng):
        X = rng.normal(size=(20, 3))
        data = Dataset(X, X @ np.array([1.0, -2.0, 0.5]))
        rep = eval_criterion(data, partition_folds(20, 5, 0), HyperParams(np.zeros(3)))
        assert rep.value == pytest.approx(0.0, abs=1e-25)

    def test_scalar_hand_computation(self):
        # two samples, two folds of one: each fold trains on the other sample
        x = np.array([[1.0], [2.0]])
        y = np.array([3.0, 5.0])
        plan = partition_folds(2, 2, 0)
        lam = 0.5
        E = 0.0
        for v, t in zip(plan.validation, plan.training):
            xt, yt = x[t, 0], y[t]
            th = np.sum(xt * yt) / (np.sum(xt ** 2) + len(t) * lam ** 2)
            E += (y[v][0] - x[v][0, 0] * th) ** 2 / 2 / 2
        rep = eval_criterion(Dataset(x, y), plan, HyperParams([lam]))
        assert rep.value == pytest.approx(E, rel=1e-14)
        # by hand: fold with x=1 trains on (2,5): th = 10/4.25; fold with x=2 on (1,3): 3/1.25
        hand = ((3 - 10 / 4.25) ** 2 + (5 - 2 * 3 / 1.25) ** 2) / 4
        assert rep.value == pytest.approx(hand, rel=1e-14)

    def test_wrong_lambda_length(self, problem):
        data, plan = problem
        with pytest.raises(InvalidInputError):
            eval_criterion(data, plan, HyperParams(np.ones(3)))

    def test_plan_size_mismatch(self, problem):
        data, _ = problem
        with pytest.raises(InvalidInputError):
            CVObjective(data, partition_folds(50, 5))


class TestGradient:
    def test_finite_difference_agreement(self, rng):
        data, plan = make_problem(rng, N=100, D=20, M=3)
        lam = rng.normal(size=20)
        rep = grad_lambda(data, plan, HyperParams(lam))
        fd = finite_diff_grad(lambda l: eval_criterion(data, plan, HyperParams(l)).value, lam)
        err = np.abs(rep.grad - fd)
        assert np.all((err <= 1e-6 * np.abs(fd)) | (err <= 1e-9))

    def test_origin(self, problem):
        data, plan = problem
        g = grad_lambda(data, plan, HyperParams(np.zeros(data.n_features))).grad
        assert np.all(g == 0.0)

    def test_odd_in_each_coordinate(self, problem):
        data, plan = problem
        lam = np.linspace(0.2, 1.4, data.n_features)
        base = grad_lambda(data, plan, HyperParams(lam))
        flip = lam.copy()
        flip[4] *= -1
        rep = grad_lambda(data, plan, HyperParams(flip))
        assert rep.value == pytest.approx(base.value, rel=1e-12)
        assert rep.grad[4] == pytest.approx(-base.grad[4], rel=1e-10)
        others = np.arange(data.n_features) != 4
        assert np.allclose(rep.grad[others], base.grad[others], rtol=1e-10, atol=0)

    def test_base_case_bit_identical(self, problem):
        data, plan = problem
        lam = np.linspace(0.2, 1.4, data.n_features)
        obj = CVObjective(data, plan)
        a = obj.evaluate(HyperParams(lam))
        b = obj.evaluate(HyperParams(lam, [1.0], 0.0))
        assert a.value == b.value and np.array_equal(a.grad, b.grad)

    def test_fold_order(self, problem):
        data, plan = problem
        lam = np.linspace(0.2, 1.4, data.n_features)
        a = grad_lambda(data, plan, HyperParams(lam))
        b = grad_lambda(data, plan.reordered([4, 3, 2, 1, 0]), HyperParams(lam))
        assert b.value == pytest.approx(a.value, rel=1e-12)
        assert np.allclose(a.grad, b.grad, rtol=1e-12, atol=1e-15)

    def test_augmented_agreement(self, rng):
        data, plan = make_problem(rng, N=80, D=12, M=2)
        lam = rng.uniform(0.05, 2, 12) * rng.choice([-1, 1], 12)
        hp = HyperParams(lam, (0.5, 1.0, 2.0))
        g = grad_lambda(data, plan, hp).grad
        fd = finite_diff_grad(lambda l: eval_criterion(data, plan, hp.with_lambda(l)).value, lam)
        err = np.abs(g - fd)
        assert np.all((err <= 1e-6 * np.abs(fd)) | (err <= 1e-9))

    def test_float32_keeps_dtype(self, problem):
        data, plan = problem
        rep = grad_lambda(data.astype(np.float32), plan,
                          HyperParams(np.ones(data.n_features, dtype=np.float32)))
        assert rep.grad.dtype == np.float32


class TestFullGradient:
    def test_diagonal_bit_identical(self, problem):
        data, plan = problem
        D = data.n_features
        for hp in [HyperParams(np.linspace(0.2, 1.4, D)),
                   HyperParams(np.linspace(0.2, 1.4, D), (0.5, 2.0)),
                   HyperParams(np.linspace(0.2, 1.4, D), mu=0.2)]:
            full = grad_lambda_full(data, plan, hp).reshape(D, D, order="F")
            assert np.array_equal(np.diag(full), grad_lambda(data, plan, hp).grad)

    def test_origin_zero(self, problem):
        data, plan = problem
        D = data.n_features
        assert np.all(grad_lambda_full(data, plan, HyperParams(np.zeros(D))) == 0)

    @pytest.mark.parametrize("mu", [0.0, 0.4])
    def test_matrix_entries_match_finite_differences(self, rng, mu):
        data, plan = make_problem(rng, N=60, D=6, M=2)
        lam = rng.uniform(0.2, 1.5, 6)
        D = 6
        G = grad_lambda_full(data, plan, HyperParams(lam, mu=mu)).reshape(D, D, order="F")
        L0 = np.diag(lam)
        h = 1e-6
        for i in range(D):
            for j in range(D):
                dL = np.zeros((D, D))
                dL[i, j] = h
                fd = (naive_criterion(data, plan, L0 + dL, mu=mu)
                      - naive_criterion(data, plan, L0 - dL, mu=mu)) / (2 * h)
                assert abs(G[i, j] - fd) <= max(1e-6 * abs(fd), 1e-9), (i, j)


class TestQTerm:
    def test_origin(self, problem):
        data, plan = problem
        rep = q_term_and_grad(data, plan, HyperParams(np.zeros(data.n_features), mu=0.5))
        assert rep.value == 0.0 and np.all(rep.grad == 0)

    def test_disabled(self, problem):
        data, plan = problem
        rep = q_term_and_grad(data, plan, HyperParams(np.ones(data.n_features)))
        assert rep.value == 0.0 and np.all(rep.grad == 0)

    def test_finite_difference_agreement(self, rng):
        data, plan = make_problem(rng, N=100, D=10, M=2)
        lam = rng.uniform(0.05, 2, 10) * rng.choice([-1, 1], 10)
        hp = HyperParams(lam, mu=0.7)
        rep = q_term_and_grad(data, plan, hp)
        fd = finite_diff_grad(
            lambda l: CVObjective(data, plan).value(l, hp, include_e=False), lam)
        err = np.abs(rep.grad - fd)
        assert np.all((err <= 1e-6 * np.abs(fd)) | (err <= 1e-9))

    def test_combined_gradient_is_sum(self, problem):
        data, plan = problem
        lam = np.linspace(0.2, 1.4, data.n_features)
        e = grad_lambda(data, plan, HyperParams(lam))
        q = q_term_and_grad(data, plan, HyperParams(lam, mu=0.3))
        both = grad_lambda(data, plan, HyperParams(lam, mu=0.3))
        assert both.value == pytest.approx(e.value + q.value, rel=1e-13)
        assert np.allclose(both.grad, e.grad + q.grad, rtol=1e-12, atol=1e-15)

    def test_rejects_augmentation(self, problem):
        data, plan = problem
        with pytest.raises(InvalidInputError):
            q_term_and_grad(data, plan, HyperParams(np.ones(data.n_features), (0.5, 1.0)))


class TestFiniteDiff:
    def test_quadratic(self):
        lam = np.array([0.3, -1.2, 4.0])
        assert np.allclose(finite_diff_grad(lambda l: 0.5 * l @ l, lam), lam, rtol=1e-8)

    def test_constant(self):
        assert np.all(finite_diff_grad(lambda l: 3.0, np.ones(4)) == 0)

    def test_cubic(self):
        g = finite_diff_grad(lambda l: np.sum(l ** 3), np.array([1.0, 2.0]), 1e-4)
        assert np.allclose(g, [3.0, 12.0], rtol=1e-7)

    def test_bad_step(self):
        with pytest.raises(InvalidInputError):
            finite_diff_grad(lambda l: 0.0, np.ones(2), 0.0)

    def test_does_not_mutate_input(self):
        lam = np.array([1.0, 2.0])
        finite_diff_grad(lambda l: l.sum(), lam)
        assert np.array_equal(lam, [1.0, 2.0])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_agreement_property(seed):
    from multiridge.verify import gradient_agreement, random_instance
    rng = np.random.default_rng(seed)
    data, plan, lam = random_instance(rng, D_max=25, N_max=120)
    ok, j, rel, _, _ = gradient_agreement(CVObjective(data, plan), HyperParams(lam))
    assert ok, (j, rel)
