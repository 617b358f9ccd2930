"""Property suite behind the ``verify`` command."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baselines import coordinate_descent, enet_objective, lasso_fit, lasso_kkt_violation, ridge_fit
from .core import (Dataset, HyperParams, normal_equation_residual, solve_tikhonov,
                   standardize_apply, standardize_fit)
from .cv_gradient import CVObjective, finite_diff_grad, grad_lambda_full, partition_folds
from .datagen import LPV_TRUE_COEF, lpv_step_terms, r2_score, simulate_lpv_signals

REL_TOL = 1e-6
ABS_TOL = 1e-9


@dataclass
class PropertyResult:
    name: str
    passed: bool
    detail: str


def random_instance(rng, D_max=50, M_max=5, N_max=200, K=5):
    """Standardized random regression problem and a penalty vector.

    Penalties have magnitude in [0.05, 2] with random signs.
    """
    D = int(rng.integers(2, D_max + 1))
    M = int(rng.integers(1, M_max + 1))
    N = int(rng.integers(5 * K, N_max + 1))
    X = rng.normal(size=(N, D))
    theta = rng.normal(size=(D, M)) * (rng.random((D, 1)) < 0.5)
    Y = X @ theta + 0.3 * rng.normal(size=(N, M))
    data = Dataset(X, Y)
    data = standardize_apply(standardize_fit(data), data)
    plan = partition_folds(N, K, int(rng.integers(0, 2**31)))
    lam = rng.uniform(0.05, 2.0, D) * rng.choice([-1.0, 1.0], D)
    return data, plan, lam


def gradient_agreement(obj, hp, step=1e-6, include_e=True, corrupt=None):
    """Compare the analytic gradient with central differences.

    Returns ``(ok, worst_coordinate, rel_err_at_worst, analytic, numeric)``;
    a coordinate passes if its relative error is below ``REL_TOL`` or its
    absolute error is below ``ABS_TOL``.
    """
    rep = obj.evaluate(hp, grad=True, include_e=include_e, _corrupt=corrupt)
    fd = finite_diff_grad(lambda l: obj.value(l, hp, include_e=include_e), hp.lambda_, step)
    err = np.abs(rep.grad - fd)
    rel = err / np.maximum(np.abs(fd), np.finfo(float).tiny)
    bad = (rel >= REL_TOL) & (err >= ABS_TOL)
    score = np.where(err >= ABS_TOL, rel, 0.0)
    worst = int(np.argmax(score))
    return (not bad.any()), worst, float(score[worst]), rep.grad, fd


def _corrupt_one(g):
    # negative control: perturb coordinate 1 of the analytic gradient
    g = g.copy()
    g[min(1, g.size - 1)] += 1e-3
    return g


def _agreement(name, n, seed, mode, corrupt=False):
    rng = np.random.default_rng(seed)
    hook = _corrupt_one if corrupt else None
    worst_abs = worst_rel = 0.0
    for i in range(n):
        data, plan, lam = random_instance(rng)
        if mode == "augmented":
            hp = HyperParams(lam, (0.5, 1.0, 2.0))
        elif mode == "q":
            hp = HyperParams(lam, (1.0,), float(rng.uniform(0.1, 1.0)))
        else:
            hp = HyperParams(lam)
        ok, j, rel, g, fd = gradient_agreement(CVObjective(data, plan), hp,
                                               include_e=(mode != "q"), corrupt=hook)
        if not ok:
            return PropertyResult(name, False,
                                  f"instance {i}: coordinate {j} relative error {rel:.3e}")
        err = np.abs(g - fd)
        # relative error is only informative where the absolute floor does not apply
        big = np.abs(fd) >= ABS_TOL / REL_TOL
        worst_abs = max(worst_abs, float(err.max()))
        if big.any():
            worst_rel = max(worst_rel, float((err[big] / np.abs(fd[big])).max()))
    return PropertyResult(name, True, f"{n} instances, max abs err {worst_abs:.1e}, "
                                      f"max rel err (|g|>=1e-3) {worst_rel:.1e}")


def _origin(seed, n=10):
    rng = np.random.default_rng(seed)
    for i in range(n):
        data, plan, lam = random_instance(rng, D_max=20, N_max=200)
        # keep folds nonsingular at lambda = 0
        g = CVObjective(data, plan).evaluate(HyperParams(np.zeros(data.n_features)))
        if np.any(g.grad != 0.0):
            return PropertyResult("origin stationarity", False, f"instance {i}: max |g|="
                                  f"{np.abs(g.grad).max():.3e}")
    return PropertyResult("origin stationarity", True, f"{n} instances, gradient exactly 0")


def _base_case(seed):
    rng = np.random.default_rng(seed)
    data, plan, lam = random_instance(rng)
    obj = CVObjective(data, plan)
    a = obj.evaluate(HyperParams(lam))
    b = obj.evaluate(HyperParams(lam, [1.0]))
    ok = a.value == b.value and np.array_equal(a.grad, b.grad)
    return PropertyResult("base-case reduction (gamma={1})", ok, "bit-identical" if ok else "differs")


def _evenness(seed):
    rng = np.random.default_rng(seed)
    data, plan, lam = random_instance(rng)
    obj = CVObjective(data, plan)
    base = obj.evaluate(HyperParams(lam))
    worst = 0.0
    for j in range(lam.size):
        flipped = lam.copy()
        flipped[j] = -flipped[j]
        r = obj.evaluate(HyperParams(flipped))
        worst = max(worst, abs(r.value - base.value) / abs(base.value))
        expect = base.grad.copy()
        expect[j] = -expect[j]
        if not np.allclose(r.grad, expect, rtol=1e-10, atol=1e-14):
            return PropertyResult("evenness / odd gradient", False, f"coordinate {j}")
    return PropertyResult("evenness / odd gradient", worst <= 1e-12, f"max rel change {worst:.1e}")


def _fold_order(seed):
    rng = np.random.default_rng(seed)
    data, plan, lam = random_instance(rng)
    a = CVObjective(data, plan).evaluate(HyperParams(lam))
    b = CVObjective(data, plan.reordered([3, 1, 4, 0, 2])).evaluate(HyperParams(lam))
    rel_v = abs(a.value - b.value) / abs(a.value)
    rel_g = np.linalg.norm(a.grad - b.grad) / np.linalg.norm(a.grad)
    ok = rel_v <= 1e-12 and rel_g <= 1e-12
    return PropertyResult("fold-order independence", ok, f"rel diff {max(rel_v, rel_g):.1e}")


def _full_diag(seed):
    rng = np.random.default_rng(seed)
    data, plan, lam = random_instance(rng, D_max=15)
    hp = HyperParams(lam)
    D = lam.size
    full = grad_lambda_full(data, plan, hp).reshape(D, D, order="F")
    g = CVObjective(data, plan).evaluate(hp).grad
    ok = np.array_equal(np.diag(full), g)
    return PropertyResult("full-gradient diagonal", ok, "bit-identical" if ok else "differs")


def _solver(seed, n=100):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        N, D, M = int(rng.integers(5, 80)), int(rng.integers(1, 40)), int(rng.integers(1, 4))
        X, Y = rng.normal(size=(N, D)), rng.normal(size=(N, M))
        lam = rng.uniform(0.05, 3.0, D) * rng.choice([-1, 1], D)
        g = float(rng.choice([0.5, 1.0, 2.0]))
        th = solve_tikhonov(X, Y, lam, g)
        worst = max(worst, normal_equation_residual(X, Y, lam, th, g))
    return PropertyResult("normal-equation residual", worst <= 1e-8, f"max {worst:.1e}")


def _solver_symmetries(seed):
    rng = np.random.default_rng(seed)
    X, Y = rng.normal(size=(30, 8)), rng.normal(size=(30, 2))
    lam = rng.uniform(0.1, 2, 8)
    th = solve_tikhonov(X, Y, lam)
    sign_ok = np.array_equal(th, solve_tikhonov(X, Y, -lam))
    c = 0.7
    rr = ridge_fit(X, Y, 30 * c * c)
    eq = np.linalg.norm(solve_tikhonov(X, Y, np.full(8, c)) - rr) / np.linalg.norm(rr)
    perm = rng.permutation(8)
    pe = np.abs(solve_tikhonov(X[:, perm], Y, lam[perm]) - th[perm]).max()
    ok = sign_ok and eq <= 1e-10 and pe <= 1e-12
    return PropertyResult("solver sign/ridge/permutation", ok,
                          f"sign={'ok' if sign_ok else 'bad'} ridge={eq:.1e} perm={pe:.1e}")


def _lasso_kkt(seed, n=20):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        N, D = int(rng.integers(20, 60)), int(rng.integers(3, 15))
        X = rng.normal(size=(N, D))
        y = X @ (rng.normal(size=D) * (rng.random(D) < 0.5)) + 0.1 * rng.normal(size=N)
        amax = np.abs(X.T @ y).max() / N
        alpha = float(amax * rng.uniform(0.01, 0.9))
        th = lasso_fit(X, y, alpha, tol=1e-10, max_iter=100000)
        worst = max(worst, lasso_kkt_violation(X, y, th, alpha))
    return PropertyResult("lasso KKT", worst <= 1e-4, f"max violation {worst:.1e}")


def _enet_reductions(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 6))
    y = X @ rng.normal(size=6) + 0.1 * rng.normal(size=40)
    a = 0.05
    e1, _, _ = coordinate_descent(X, y, a, 1.0, 1e-12, 100000)
    l1 = lasso_fit(X, y, a, tol=1e-12, max_iter=100000)
    e0, _, _ = coordinate_descent(X, y, a, 0.0, 1e-12, 100000)
    r0 = ridge_fit(X, y, a * 40)
    d1 = np.abs(e1 - l1).max()
    d0 = np.abs(e0 - r0).max()
    return PropertyResult("elastic-net reductions", d1 <= 1e-8 and d0 <= 1e-8,
                          f"rho=1 {d1:.1e}, rho=0 {d0:.1e}")


def _cd_monotone(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(50, 20))
    y = X @ rng.normal(size=20) + rng.normal(size=50)
    theta = np.zeros((20, 1))
    prev = enet_objective(X, y, theta, 0.05, 0.7)
    for _ in range(30):
        theta, _, _ = coordinate_descent(X, y, 0.05, 0.7, 0.0, 1, theta)
        cur = enet_objective(X, y, theta, 0.05, 0.7)
        if cur > prev + 1e-14:
            return PropertyResult("coordinate descent monotone", False, f"{cur} > {prev}")
        prev = cur
    return PropertyResult("coordinate descent monotone", True, "30 cycles non-increasing")


def _r2_affine(seed):
    rng = np.random.default_rng(seed)
    yt, yp = rng.normal(size=(50, 2)), rng.normal(size=(50, 2)) * 0.3
    yp = yt + yp
    a = r2_score(yt, yp)
    b = r2_score(-3.0 * yt + 7.0, -3.0 * yp + 7.0)
    return PropertyResult("r2 affine invariance", abs(a - b) <= 1e-12, f"{a:.6f} vs {b:.6f}")


def _lpv_recovery(seed, n=10):
    worst = 0.0
    for s in range(n):
        rng = np.random.default_rng([seed, s])
        y, u, p, _ = simulate_lpv_signals(200, np.inf, np.pi, rng, noise=False)
        Phi = np.array([lpv_step_terms(y, u, p, k) for k in range(3, len(y))])
        coef, *_ = np.linalg.lstsq(Phi, y[3:], rcond=None)
        worst = max(worst, np.abs(coef - LPV_TRUE_COEF).max())
    return PropertyResult("LPV noise-free recovery", worst <= 1e-8, f"max err {worst:.1e}")


def run_verify(seed=0, n_instances=50, corrupt_gradient=False):
    checks = [
        lambda: _agreement("gradient agreement (E)", n_instances, seed, "plain",
                           corrupt_gradient),
        lambda: _agreement("gradient agreement (augmented)", n_instances, seed + 1, "augmented"),
        lambda: _agreement("gradient agreement (Q)", n_instances, seed + 2, "q"),
        lambda: _origin(seed + 3),
        lambda: _base_case(seed + 4),
        lambda: _evenness(seed + 5),
        lambda: _fold_order(seed + 6),
        lambda: _full_diag(seed + 7),
        lambda: _solver(seed + 8),
        lambda: _solver_symmetries(seed + 9),
        lambda: _lasso_kkt(seed + 10),
        lambda: _enet_reductions(seed + 11),
        lambda: _cd_monotone(seed + 12),
        lambda: _r2_affine(seed + 13),
        lambda: _lpv_recovery(seed + 14),
    ]
    return [c() for c in checks]


def format_report(results):
    width = max(len(r.name) for r in results)
    lines = [f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}" for r in results]
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} properties passed")
    return "\n".join(lines)


__all__ = ["PropertyResult", "gradient_agreement", "random_instance", "run_verify",
           "format_report"]
