"""Reference regressors and their cross-validated hyperparameter searches.

LASSO and Elastic Net use the per-target objective

    1/(2N) ||y - X theta||^2 + alpha * rho * ||theta||_1
                             + alpha * (1 - rho) / 2 * ||theta||^2

(``rho = 1`` is LASSO), solved by cyclic coordinate descent with soft
thresholding. Ridge uses ``||Y - X Theta||^2 + alpha ||Theta||^2``, i.e.
``(X'X + alpha I)^{-1} X'Y``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numba
import numpy as np
import scipy.linalg as sla

from .core import InvalidInputError, SPDFactor, _as_2d
from .cv_gradient import FoldPlan


class ConvergenceWarning(UserWarning):
    pass


class SearchFailureError(RuntimeError):
    pass


def ols_fit(X, Y):
    """Minimum-norm least squares."""
    X = _as_2d(X, "X")
    Y = _as_2d(Y, "Y")
    theta, *_ = np.linalg.lstsq(X, Y, rcond=None)
    return theta


def ridge_fit(X, Y, alpha):
    X = _as_2d(X, "X")
    Y = _as_2d(Y, "Y")
    if not alpha >= 0:
        raise InvalidInputError("alpha must be nonnegative")
    factor = SPDFactor(X.T @ X, np.full(X.shape[1], float(alpha)))
    return factor.solve(X.T @ Y)


@numba.njit(cache=True, nogil=True)
def _cd_enet(X, y, theta, l1, l2, tol, max_iter, col_sq):
    n, d = X.shape
    r = y - X @ theta
    n_iter = 0
    converged = False
    for it in range(max_iter):
        n_iter = it + 1
        max_step = 0.0
        max_coef = 0.0
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            old = theta[j]
            z = 0.0
            for i in range(n):
                z += X[i, j] * r[i]
            z = z / n + col_sq[j] * old
            if z > l1:
                new = (z - l1) / (col_sq[j] + l2)
            elif z < -l1:
                new = (z + l1) / (col_sq[j] + l2)
            else:
                new = 0.0
            if new != old:
                delta = new - old
                for i in range(n):
                    r[i] -= X[i, j] * delta
                theta[j] = new
                if abs(delta) > max_step:
                    max_step = abs(delta)
            if abs(new) > max_coef:
                max_coef = abs(new)
        if max_step == 0.0 or max_step <= tol * max_coef:
            converged = True
            break
    return n_iter, converged


def coordinate_descent(X, Y, alpha, l1_ratio=1.0, tol=1e-4, max_iter=1000, theta0=None):
    """Elastic-net coordinate descent on each target column.

    Stops when the largest coefficient change in a full cycle is at most
    ``tol`` times the largest coefficient magnitude.

    Returns
    -------
    theta : array (D, M)
    n_iter : int
        Largest number of cycles over the targets.
    converged : bool
    """
    X = np.asfortranarray(_as_2d(X, "X"), dtype=np.float64)
    Y = _as_2d(Y, "Y").astype(np.float64)
    if not alpha >= 0:
        raise InvalidInputError("alpha must be nonnegative")
    if not 0.0 <= l1_ratio <= 1.0:
        raise InvalidInputError("l1_ratio must lie in [0, 1]")
    n, d = X.shape
    theta = np.zeros((d, Y.shape[1])) if theta0 is None else np.array(theta0, dtype=np.float64)
    col_sq = np.einsum("ij,ij->j", X, X) / n
    l1 = alpha * l1_ratio
    l2 = alpha * (1.0 - l1_ratio)
    n_iter, ok = 0, True
    for m in range(Y.shape[1]):
        t = np.ascontiguousarray(theta[:, m])
        it, conv = _cd_enet(X, np.ascontiguousarray(Y[:, m]), t, l1, l2,
                            float(tol), int(max_iter), col_sq)
        theta[:, m] = t
        n_iter = max(n_iter, it)
        ok = ok and conv
    return theta, n_iter, ok


def _warn_if(converged, what, max_iter):
    if not converged:
        warnings.warn(f"{what} did not converge in {max_iter} cycles",
                      ConvergenceWarning, stacklevel=3)


def lasso_fit(X, Y, alpha, tol=1e-4, max_iter=1000, theta0=None):
    if not alpha > 0:
        raise InvalidInputError("alpha must be positive")
    theta, _, ok = coordinate_descent(X, Y, alpha, 1.0, tol, max_iter, theta0)
    _warn_if(ok, "lasso", max_iter)
    return theta


def enet_fit(X, Y, alpha, l1_ratio=0.5, tol=1e-4, max_iter=1000, theta0=None):
    theta, _, ok = coordinate_descent(X, Y, alpha, l1_ratio, tol, max_iter, theta0)
    _warn_if(ok, "elastic net", max_iter)
    return theta


def enet_objective(X, Y, theta, alpha, l1_ratio=1.0):
    X = _as_2d(X, "X")
    Y = _as_2d(Y, "Y")
    theta = _as_2d(theta, "theta")
    n = X.shape[0]
    r = Y - X @ theta
    return (0.5 / n * float(np.sum(r * r)) + alpha * l1_ratio * float(np.abs(theta).sum())
            + 0.5 * alpha * (1 - l1_ratio) * float(np.sum(theta * theta)))


def lasso_kkt_violation(X, Y, theta, alpha):
    """Largest violation of the LASSO optimality conditions."""
    X = _as_2d(X, "X")
    Y = _as_2d(Y, "Y")
    theta = _as_2d(theta, "theta")
    corr = X.T @ (Y - X @ theta) / X.shape[0]
    active = theta != 0
    v_active = np.abs(corr - alpha * np.sign(theta))[active]
    v_inactive = np.maximum(np.abs(corr) - alpha, 0.0)[~active]
    return float(np.max(np.concatenate([v_active, v_inactive, [0.0]])))


@dataclass(frozen=True)
class SearchSpec:
    """Hyperparameter search protocol for one baseline.

    ``ridge_grid`` and ``lasso_grid`` evaluate ``num_points`` log-spaced
    strengths; ``enet_random`` draws ``num_points`` (strength, l1_ratio) pairs,
    strength log-uniform and ratio uniform over ``l1_ratio_bounds``.
    """

    kind: str
    strength_lo: float
    strength_hi: float
    num_points: int = 1000
    l1_ratio_bounds: tuple = (0.0, 1.0)
    seed: int = 0
    tol: float = 1e-4
    max_iter: int = 1000

    def __post_init__(self):
        if self.kind not in ("ridge_grid", "lasso_grid", "enet_random"):
            raise InvalidInputError(f"unknown search kind {self.kind!r}")
        if not 0 < self.strength_lo <= self.strength_hi:
            raise InvalidInputError("need 0 < strength_lo <= strength_hi")
        if self.strength_lo == self.strength_hi and self.num_points != 1:
            raise InvalidInputError("equal bounds need num_points == 1")
        if self.num_points < 1:
            raise InvalidInputError("num_points must be >= 1")
        lo, hi = self.l1_ratio_bounds
        if not 0.0 <= lo <= hi <= 1.0:
            raise InvalidInputError("l1_ratio_bounds must lie in [0, 1]")

    @classmethod
    def ridge(cls, **kw):
        return cls("ridge_grid", 1e-3, 1e6, **kw)

    @classmethod
    def lasso(cls, **kw):
        return cls("lasso_grid", 1e-5, 1e2, **kw)

    @classmethod
    def enet(cls, **kw):
        return cls("enet_random", 1e-5, 1e3, **kw)

    def candidates(self):
        """Array of shape (num_points, 2): strength and l1_ratio."""
        if self.kind == "enet_random":
            rng = np.random.default_rng(self.seed)
            strength = np.exp(rng.uniform(np.log(self.strength_lo),
                                          np.log(self.strength_hi), self.num_points))
            ratio = rng.uniform(*self.l1_ratio_bounds, self.num_points)
            return np.column_stack([strength, ratio])
        strength = np.logspace(np.log10(self.strength_lo), np.log10(self.strength_hi),
                               self.num_points)
        ratio = 1.0 if self.kind == "lasso_grid" else 0.0
        return np.column_stack([strength, np.full(self.num_points, ratio)])


@dataclass(frozen=True)
class SearchResult:
    strength: float
    l1_ratio: float
    cv_loss: float
    theta: np.ndarray
    cv_curve: np.ndarray  # columns: strength, l1_ratio, mean validation MSE


def _ridge_fold_losses(X, Y, val, train, alphas):
    Xt, Yt = X[train], Y[train]
    s, V = sla.eigh(Xt.T @ Xt)
    s = np.maximum(s, 0.0)
    P = X[val] @ V
    c = V.T @ (Xt.T @ Yt)
    Yv = Y[val]
    out = np.empty(len(alphas))
    with np.errstate(divide="ignore", invalid="ignore"):
        for i, a in enumerate(alphas):
            pred = P @ (c / (s + a)[:, None])
            out[i] = np.mean((Yv - pred) ** 2)
    return out


def _cd_fold_losses(X, Y, val, train, cands, tol, max_iter):
    Xt = np.asfortranarray(X[train])
    Yt = Y[train]
    Xv, Yv = X[val], Y[val]
    out = np.empty(len(cands))
    # strongest l1 penalty first so each fit warm-starts from a sparser one
    order = np.lexsort((-cands[:, 0], -cands[:, 0] * cands[:, 1]))
    theta = None
    for i in order:
        a, rho = cands[i]
        theta, _, _ = coordinate_descent(Xt, Yt, a, rho, tol, max_iter, theta)
        out[i] = np.mean((Yv - Xv @ theta) ** 2)
    return out


def search_cv(X, Y, plan: FoldPlan, spec: SearchSpec) -> SearchResult:
    """Pick the candidate with the smallest mean validation MSE, then refit.

    Ties go to the larger strength.
    """
    X = _as_2d(X, "X").astype(np.float64)
    Y = _as_2d(Y, "Y").astype(np.float64)
    cands = spec.candidates()
    losses = np.zeros(len(cands))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        for val, train in zip(plan.validation, plan.training):
            if spec.kind == "ridge_grid":
                losses += _ridge_fold_losses(X, Y, val, train, cands[:, 0])
            else:
                losses += _cd_fold_losses(X, Y, val, train, cands, spec.tol, spec.max_iter)
    losses /= plan.K
    ok = np.isfinite(losses)
    if not ok.any():
        raise SearchFailureError(f"{spec.kind}: every candidate failed")
    best_loss = losses[ok].min()
    tied = np.flatnonzero(ok & (losses == best_loss))
    best = tied[np.argmax(cands[tied, 0])]
    a, rho = cands[best]
    if spec.kind == "ridge_grid":
        theta = ridge_fit(X, Y, a)
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            theta, _, _ = coordinate_descent(X, Y, a, rho, spec.tol, spec.max_iter)
    curve = np.column_stack([cands, losses])
    return SearchResult(float(a), float(rho), float(best_loss), theta, curve)
