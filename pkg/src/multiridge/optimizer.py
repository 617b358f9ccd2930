"""Full-batch gradient descent over the per-feature penalties."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, HyperParams, InvalidInputError, solve_tikhonov
from .cv_gradient import CVObjective, FoldPlan

logger = logging.getLogger(__name__)


class DivergenceError(FloatingPointError):
    """Non-finite criterion or gradient during optimization."""

    def __init__(self, message, epoch, last_lambda):
        super().__init__(message)
        self.epoch = epoch
        self.last_lambda = last_lambda


@dataclass(frozen=True)
class InitStrategy:
    """``kind`` is one of ``identity``, ``constant`` or ``lasso_informed``."""

    kind: str = "identity"
    value: float = 1.0
    high: float = 10.0
    low: float = 1.0

    def __post_init__(self):
        if self.kind not in ("identity", "constant", "lasso_informed"):
            raise InvalidInputError(f"unknown init strategy {self.kind!r}")


@dataclass(frozen=True)
class OptimConfig:
    learning_rate: float = 350.0
    decay: float = 0.999
    epochs: int = 300
    init: InitStrategy = field(default_factory=InitStrategy)
    record_history: bool = True

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise InvalidInputError("learning_rate must be >= 0")
        if not 0 < self.decay <= 1:
            raise InvalidInputError("decay must lie in (0, 1]")
        if int(self.epochs) < 1:
            raise InvalidInputError("epochs must be >= 1")


@dataclass(frozen=True)
class OptimResult:
    lambda_star: np.ndarray
    history: list
    theta_final: np.ndarray | None
    epochs_run: int

    @property
    def values(self):
        return np.array([h[0] for h in self.history])


def init_lambda(strategy, D, lasso_theta=None):
    """Initial penalty vector.

    ``lasso_informed`` puts ``high`` on features whose LASSO coefficients are
    all zero and ``low`` elsewhere.
    """
    if isinstance(strategy, str):
        strategy = InitStrategy(strategy)
    if strategy.kind == "identity":
        return np.ones(D)
    if strategy.kind == "constant":
        return np.full(D, float(strategy.value))
    if lasso_theta is None:
        raise InvalidInputError("lasso_informed init needs lasso_theta")
    theta = np.asarray(lasso_theta)
    if theta.ndim == 1:
        theta = theta[:, None]
    if theta.shape[0] != D:
        raise InvalidInputError(f"lasso_theta has {theta.shape[0]} rows, expected {D}")
    zero_rows = np.all(theta == 0, axis=1)
    return np.where(zero_rows, strategy.high, strategy.low).astype(np.float64)


def optimize(data: Dataset, plan: FoldPlan, hp0: HyperParams, cfg: OptimConfig,
             *, refit=True, objective: CVObjective | None = None) -> OptimResult:
    """Run ``cfg.epochs`` steps of ``lam <- lam - lr * grad`` with ``lr *= decay``.

    The gradient includes the validation regularizer when ``hp0.mu > 0``.
    After the loop the model is refit on all rows of ``data`` with gamma 1.
    """
    obj = objective if objective is not None else CVObjective(data, plan)
    lam = np.array(hp0.lambda_, dtype=np.float64)
    lr = float(cfg.learning_rate)
    history = []
    for epoch in range(int(cfg.epochs)):
        rep = obj.evaluate(hp0.with_lambda(lam), grad=True)
        g = rep.grad.astype(np.float64, copy=False)
        if not (np.isfinite(rep.value) and np.all(np.isfinite(g))):
            raise DivergenceError(
                f"non-finite criterion or gradient at epoch {epoch}", epoch, lam.copy())
        if cfg.record_history:
            history.append((rep.value, float(np.linalg.norm(g)), lr))
        new = lam - lr * g
        with np.errstate(over="ignore"):
            # the penalties enter squared, so overflow there too
            blown = not np.all(np.isfinite(new * new))
        if blown:
            raise DivergenceError(f"lambda overflowed at epoch {epoch}", epoch, lam.copy())
        lam = new
        lr *= cfg.decay
    logger.debug("optimize: %d epochs, final lr %.4g", cfg.epochs, lr)
    theta = solve_tikhonov(data.X, data.Y, lam, 1.0) if refit else None
    return OptimResult(lam, history, theta, int(cfg.epochs))
