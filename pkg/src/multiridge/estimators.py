"""scikit-learn compatible estimators.

All estimators standardize features and targets on the training data, pick
their hyperparameters by K-fold cross-validation on the standardized data,
refit on all training rows and report coefficients on the original scale.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .baselines import SearchSpec, ols_fit, search_cv
from .core import Dataset, HyperParams, standardize_apply, standardize_fit
from .cv_gradient import partition_folds
from .optimizer import InitStrategy, OptimConfig, init_lambda, optimize


class _StandardizedLinearModel(RegressorMixin, BaseEstimator):

    def _fit_standardized(self, data, plan):
        raise NotImplementedError

    def fit(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True, dtype=np.float64)
        self._y_1d = y.ndim == 1
        data = Dataset(X, y)
        self.standardizer_ = standardize_fit(data)
        std = standardize_apply(self.standardizer_, data)
        plan = partition_folds(std.n_samples, self.n_folds, self.random_state)
        theta = self._fit_standardized(std, plan)
        self.theta_ = theta
        s = self.standardizer_
        coef = theta * s.target_scale[None, :] / s.feature_scale[:, None]
        intercept = s.target_mean - s.feature_mean @ coef
        self.coef_ = coef.T[0] if self._y_1d else coef.T
        self.intercept_ = float(intercept[0]) if self._y_1d else intercept
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, model was fit with {self.n_features_in_}")
        return X @ np.asarray(self.coef_).T + self.intercept_


class MultiRidge(_StandardizedLinearModel):
    """Ridge regression with one penalty per feature tuned by gradient descent.

    Parameters
    ----------
    n_folds : int
        Folds of the cross-validation criterion.
    learning_rate, decay, epochs : float, float, int
        Plain gradient descent; the step shrinks by ``decay`` each epoch.
    init : {"identity", "constant", "lasso_informed"}
        ``lasso_informed`` runs a LASSO grid search first and starts from
        ``init_high`` on features it zeroes and ``init_low`` elsewhere.
    gamma_set : tuple of float
        Scalings of the penalty vector averaged in the criterion.
    mu : float
        Weight of the penalty-norm term added to the criterion.

    Attributes
    ----------
    lambda_ : ndarray (n_features,)
    history_ : list of (criterion, gradient norm, learning rate)
    """

    def __init__(self, n_folds=5, learning_rate=350.0, decay=0.999, epochs=300,
                 init="identity", init_value=1.0, init_high=10.0, init_low=1.0,
                 gamma_set=(1.0,), mu=0.0, lasso_num_points=1000, random_state=0):
        self.n_folds = n_folds
        self.learning_rate = learning_rate
        self.decay = decay
        self.epochs = epochs
        self.init = init
        self.init_value = init_value
        self.init_high = init_high
        self.init_low = init_low
        self.gamma_set = gamma_set
        self.mu = mu
        self.lasso_num_points = lasso_num_points
        self.random_state = random_state

    def _fit_standardized(self, data, plan):
        strategy = InitStrategy(self.init, self.init_value, self.init_high, self.init_low)
        lasso_theta = None
        if strategy.kind == "lasso_informed":
            lasso = search_cv(data.X, data.Y, plan,
                              SearchSpec.lasso(num_points=self.lasso_num_points))
            lasso_theta = lasso.theta
            self.lasso_alpha_ = lasso.strength
        lam0 = init_lambda(strategy, data.n_features, lasso_theta)
        hp0 = HyperParams(lam0, tuple(self.gamma_set), self.mu)
        cfg = OptimConfig(self.learning_rate, self.decay, int(self.epochs), strategy)
        res = optimize(data, plan, hp0, cfg)
        self.lambda_init_ = lam0
        self.lambda_ = res.lambda_star
        self.history_ = res.history
        return res.theta_final


class _SearchModel(_StandardizedLinearModel):

    def _spec(self):
        raise NotImplementedError

    def _fit_standardized(self, data, plan):
        res = search_cv(data.X, data.Y, plan, self._spec())
        self.alpha_ = res.strength
        self.l1_ratio_ = res.l1_ratio
        self.cv_curve_ = res.cv_curve
        return res.theta


class RidgeGridCV(_SearchModel):
    """Single-penalty ridge, strength picked on a log grid."""

    def __init__(self, n_folds=5, alpha_lo=1e-3, alpha_hi=1e6, num_points=1000,
                 random_state=0):
        self.n_folds = n_folds
        self.alpha_lo = alpha_lo
        self.alpha_hi = alpha_hi
        self.num_points = num_points
        self.random_state = random_state

    def _spec(self):
        return SearchSpec("ridge_grid", self.alpha_lo, self.alpha_hi, self.num_points)


class LassoGridCV(_SearchModel):
    def __init__(self, n_folds=5, alpha_lo=1e-5, alpha_hi=1e2, num_points=1000,
                 tol=1e-4, max_iter=1000, random_state=0):
        self.n_folds = n_folds
        self.alpha_lo = alpha_lo
        self.alpha_hi = alpha_hi
        self.num_points = num_points
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def _spec(self):
        return SearchSpec("lasso_grid", self.alpha_lo, self.alpha_hi, self.num_points,
                          tol=self.tol, max_iter=self.max_iter)


class ElasticNetRandomCV(_SearchModel):
    """Elastic net with (strength, l1_ratio) picked by seeded random search."""

    def __init__(self, n_folds=5, alpha_lo=1e-5, alpha_hi=1e3, num_points=1000,
                 tol=1e-4, max_iter=1000, random_state=0):
        self.n_folds = n_folds
        self.alpha_lo = alpha_lo
        self.alpha_hi = alpha_hi
        self.num_points = num_points
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def _spec(self):
        return SearchSpec("enet_random", self.alpha_lo, self.alpha_hi, self.num_points,
                          seed=self.random_state, tol=self.tol, max_iter=self.max_iter)


class LeastSquares(_StandardizedLinearModel):
    """Minimum-norm least squares on standardized data."""

    def __init__(self, n_folds=5, random_state=0):
        self.n_folds = n_folds
        self.random_state = random_state

    def _fit_standardized(self, data, plan):
        return ols_fit(data.X, data.Y)
