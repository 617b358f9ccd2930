"""Domain types, standardization and the closed-form Tikhonov solver.

The model is ``f(x) = x' Theta`` with no intercept. For a training block
``(X, Y)`` with ``N_T`` rows and per-feature penalties ``lambda`` the
coefficients are

    Theta = (X'X + N_T * gamma**2 * Diag(lambda)**2)^{-1} X'Y

which minimises ``1/(2 N_T) ||Y - X Theta||_F^2 + 1/2 ||gamma Lambda Theta||_F^2``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla


class InvalidInputError(ValueError):
    """Raised on malformed or inconsistent inputs."""


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when a regularized normal-equation matrix cannot be factorized."""

    def __init__(self, message, fold=None, gamma=None):
        super().__init__(message)
        self.fold = fold
        self.gamma = gamma


class FactorizationWarning(RuntimeWarning):
    """Cholesky failed and a pivoted LU factorization was used instead."""


def _as_2d(a, name):
    a = np.asarray(a)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be 1-D or 2-D, got ndim={a.ndim}")
    if not np.issubdtype(a.dtype, np.floating):
        a = a.astype(np.float64)
    return a


@dataclass(frozen=True)
class Dataset:
    """Paired feature matrix ``X`` (N x D) and target matrix ``Y`` (N x M)."""

    X: np.ndarray
    Y: np.ndarray
    true_theta: np.ndarray | None = None
    noise: np.ndarray | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        X = _as_2d(self.X, "X")
        Y = _as_2d(self.Y, "Y")
        if X.shape[0] != Y.shape[0]:
            raise InvalidInputError(
                f"X and Y row counts differ: {X.shape[0]} != {Y.shape[0]}")
        if X.shape[0] < 1 or X.shape[1] < 1 or Y.shape[1] < 1:
            raise InvalidInputError("Dataset needs N >= 1, D >= 1, M >= 1")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise InvalidInputError("Dataset entries must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        if self.true_theta is not None:
            object.__setattr__(self, "true_theta", _as_2d(self.true_theta, "true_theta"))

    @property
    def n_samples(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    @property
    def n_targets(self):
        return self.Y.shape[1]

    def astype(self, dtype):
        return Dataset(self.X.astype(dtype), self.Y.astype(dtype),
                       self.true_theta, self.noise, self.meta)


@dataclass(frozen=True)
class HyperParams:
    """Per-feature penalties plus the augmentation scalings and Q weight.

    Only ``lambda_**2`` enters the model, so the sign of each entry is free.
    """

    lambda_: np.ndarray
    gamma_set: tuple = (1.0,)
    mu: float = 0.0

    def __post_init__(self):
        lam = np.asarray(self.lambda_)
        if not np.issubdtype(lam.dtype, np.floating):
            lam = lam.astype(np.float64)
        lam = lam.reshape(-1)
        if lam.size < 1 or not np.all(np.isfinite(lam)):
            raise InvalidInputError("lambda must be a non-empty finite vector")
        gammas = tuple(float(g) for g in self.gamma_set)
        if len(gammas) == 0 or any(g == 0.0 for g in gammas):
            raise InvalidInputError("gamma_set must be non-empty with nonzero entries")
        if not (self.mu >= 0 and np.isfinite(self.mu)):
            raise InvalidInputError("mu must be a finite nonnegative number")
        if self.mu > 0 and len(gammas) > 1:
            raise InvalidInputError(
                "validation regularization (mu > 0) cannot be combined with "
                "gamma augmentation (|gamma_set| > 1)")
        object.__setattr__(self, "lambda_", lam)
        object.__setattr__(self, "gamma_set", gammas)
        object.__setattr__(self, "mu", float(self.mu))

    def with_lambda(self, lambda_):
        return HyperParams(lambda_, self.gamma_set, self.mu)


@dataclass(frozen=True)
class Standardizer:
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    target_mean: np.ndarray
    target_scale: np.ndarray

    @classmethod
    def identity(cls, n_features, n_targets):
        return cls(np.zeros(n_features), np.ones(n_features),
                   np.zeros(n_targets), np.ones(n_targets))

    def transform_X(self, X):
        X = _as_2d(X, "X")
        if X.shape[1] != self.feature_mean.size:
            raise InvalidInputError(
                f"expected {self.feature_mean.size} features, got {X.shape[1]}")
        return (X - self.feature_mean) / self.feature_scale

    def transform_Y(self, Y):
        Y = _as_2d(Y, "Y")
        if Y.shape[1] != self.target_mean.size:
            raise InvalidInputError(
                f"expected {self.target_mean.size} targets, got {Y.shape[1]}")
        return (Y - self.target_mean) / self.target_scale

    def inverse_X(self, Xs):
        return _as_2d(Xs, "X") * self.feature_scale + self.feature_mean

    def inverse_Y(self, Ys):
        return _as_2d(Ys, "Y") * self.target_scale + self.target_mean


def _column_stats(A):
    mean = A.mean(axis=0)
    scale = A.std(axis=0)  # population convention
    # a constant column can show a roundoff-sized spread around its mean
    flat = scale <= 16 * np.finfo(A.dtype).eps * np.abs(mean)
    scale = np.where((scale > 0) & ~flat, scale, 1.0)
    return mean, scale


def standardize_fit(data: Dataset) -> Standardizer:
    """Column means and population standard deviations of ``X`` and ``Y``.

    Zero-variance columns get scale 1 so they pass through centered.
    """
    if data.n_samples < 2:
        raise InvalidInputError("standardization needs at least 2 samples")
    fm, fs = _column_stats(data.X)
    tm, ts = _column_stats(data.Y)
    return Standardizer(fm, fs, tm, ts)


def standardize_apply(s: Standardizer, data: Dataset) -> Dataset:
    return Dataset(s.transform_X(data.X), s.transform_Y(data.Y),
                   data.true_theta, data.noise, data.meta)


def standardize_inverse(s: Standardizer, data: Dataset) -> Dataset:
    return Dataset(s.inverse_X(data.X), s.inverse_Y(data.Y),
                   data.true_theta, data.noise, data.meta)


class SPDFactor:
    """Factorization of ``W = G + diag(d)`` reused for repeated solves.

    Cholesky first; if ``W`` is not numerically positive definite a
    pivoted LU factorization is kept instead and a warning is emitted.
    """

    def __init__(self, G, d, *, fold=None, gamma=None):
        W = G.copy()
        W[np.diag_indices_from(W)] += d
        self.cholesky = True
        try:
            self._factor = sla.cho_factor(W, lower=False, check_finite=False)
        except np.linalg.LinAlgError:
            self.cholesky = False
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                lu, piv = sla.lu_factor(W, check_finite=False)
            diag = np.abs(np.diag(lu))
            tiny = np.finfo(W.dtype).eps * max(1.0, float(np.abs(W).max())) * W.shape[0]
            if not np.all(np.isfinite(lu)) or diag.min() <= tiny:
                where = _describe(fold, gamma)
                raise SingularSystemError(
                    f"regularized normal equations are singular{where}",
                    fold=fold, gamma=gamma) from None
            warnings.warn(
                f"Cholesky failed{_describe(fold, gamma)}; using pivoted LU",
                FactorizationWarning, stacklevel=3)
            self._factor = (lu, piv)

    def solve(self, B):
        if self.cholesky:
            return sla.cho_solve(self._factor, B, check_finite=False)
        return sla.lu_solve(self._factor, B, check_finite=False)


def _describe(fold, gamma):
    parts = []
    if fold is not None:
        parts.append(f"fold {fold}")
    if gamma is not None:
        parts.append(f"gamma={gamma:g}")
    return f" ({', '.join(parts)})" if parts else ""


def tikhonov_factor(gram, lambda_, gamma, n_train, *, fold=None):
    """Factor ``gram + n_train * gamma**2 * lambda_**2`` on the diagonal."""
    lam = np.asarray(lambda_, dtype=gram.dtype)
    d = (n_train * gamma * gamma) * (lam * lam)
    return SPDFactor(gram, d.astype(gram.dtype), fold=fold, gamma=gamma)


def solve_tikhonov(X, Y, lambda_, gamma=1.0, *, return_factor=False):
    """Closed-form multi-penalty ridge solution on one training block.

    Parameters
    ----------
    X : array (N_T, D)
    Y : array (N_T, M) or (N_T,)
    lambda_ : array (D,)
        Per-feature penalties; enter squared.
    gamma : float
        Common scaling applied to every penalty.
    return_factor : bool
        Also return the :class:`SPDFactor` of the system matrix.

    Returns
    -------
    theta : array (D, M)
    """
    X = _as_2d(X, "X")
    Y = _as_2d(Y, "Y")
    lam = np.asarray(lambda_).reshape(-1)
    if X.shape[0] != Y.shape[0]:
        raise InvalidInputError("X and Y row counts differ")
    if lam.size != X.shape[1]:
        raise InvalidInputError(
            f"lambda has length {lam.size}, X has {X.shape[1]} columns")
    if X.shape[0] < 1:
        raise InvalidInputError("need at least one training row")
    factor = tikhonov_factor(X.T @ X, lam, gamma, X.shape[0])
    theta = factor.solve(X.T @ Y)
    if return_factor:
        return theta, factor
    return theta


def predict(theta, X):
    theta = _as_2d(theta, "theta")
    X = _as_2d(X, "X")
    if X.shape[1] != theta.shape[0]:
        raise InvalidInputError(
            f"X has {X.shape[1]} columns, theta has {theta.shape[0]} rows")
    return X @ theta


def normal_equation_residual(X, Y, lambda_, theta, gamma=1.0):
    """Relative residual ``||(X'X + N_T g^2 L^2) Theta - X'Y||_F / ||X'Y||_F``."""
    X = _as_2d(X, "X")
    Y = _as_2d(Y, "Y")
    lam = np.asarray(lambda_).reshape(-1)
    rhs = X.T @ Y
    lhs = X.T @ (X @ theta) + (X.shape[0] * gamma ** 2 * lam ** 2)[:, None] * theta
    denom = np.linalg.norm(rhs)
    return np.linalg.norm(lhs - rhs) / (denom if denom > 0 else 1.0)


@dataclass(frozen=True)
class FitState:
    theta_per_fold: list
    theta_full: np.ndarray | None
    residuals_per_fold: list
