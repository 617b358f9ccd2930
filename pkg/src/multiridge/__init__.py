"""Multi-penalty ridge regression with gradient-tuned per-feature penalties."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    Dataset,
    HyperParams,
    InvalidInputError,
    SingularSystemError,
    Standardizer,
    predict,
    solve_tikhonov,
    standardize_apply,
    standardize_fit,
)
from .cv_gradient import (  # noqa: E402
    CVObjective,
    FoldPlan,
    GradientReport,
    eval_criterion,
    finite_diff_grad,
    grad_lambda,
    grad_lambda_full,
    partition_folds,
    partition_holdout,
    q_term_and_grad,
)
from .optimizer import DivergenceError, OptimConfig, OptimResult, init_lambda, optimize  # noqa: E402
from .estimators import (  # noqa: E402
    ElasticNetRandomCV,
    LassoGridCV,
    LeastSquares,
    MultiRidge,
    RidgeGridCV,
)

__all__ = [
    "CVObjective", "Dataset", "DivergenceError", "ElasticNetRandomCV", "FoldPlan",
    "GradientReport", "HyperParams", "InvalidInputError", "LassoGridCV", "LeastSquares",
    "MultiRidge", "OptimConfig", "OptimResult", "RidgeGridCV", "SingularSystemError",
    "Standardizer", "eval_criterion", "finite_diff_grad", "grad_lambda", "grad_lambda_full",
    "init_lambda", "optimize", "partition_folds", "partition_holdout", "predict",
    "q_term_and_grad", "solve_tikhonov", "standardize_apply", "standardize_fit",
]
