"""K-fold criterion, validation regularizer and their analytic gradients.

For validation fold ``k`` with training complement, write ``A_k`` for the
inverse of ``X_tr'X_tr + N_T g^2 Diag(lam)^2``, ``Theta_k`` for the fold
solution and ``R_k = X_k Theta_k - Y_k``. Then

    E      = 1/K sum_k 1/(2 N_V) ||R_k||_F^2
    dE/dlam = -N_T/(K N_V) sum_k g^2 diag(Lam B_k + B_k Lam),
    B_k    = A_k X_k' R_k Theta_k'

and only ``diag(B_k)`` is needed for the diagonal gradient, which is a
row-wise inner product of ``A_k X_k' R_k`` with ``Theta_k``. With several
scalings ``g`` the criterion and gradient are averaged over them.

The validation regularizer is ``Q = mu/2 sum_k ||Lam Theta_k||_F^2`` with

    dQ/dlam = mu sum_k diag(D_k Theta_k' - N_T (Lam G_k + G_k Lam)),
    D_k = Lam Theta_k,  G_k = A_k Lam D_k Theta_k'.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, HyperParams, InvalidInputError, tikhonov_factor


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Validation/training index sets.

    ``validation[k]`` and ``training[k]`` are disjoint; for a K-fold plan the
    training set of fold ``k`` is the union of the other validation folds.
    """

    n_samples: int
    validation: tuple
    training: tuple
    dropped: np.ndarray
    seed: int | None = None

    @property
    def K(self):
        return len(self.validation)

    @property
    def n_val(self):
        return len(self.validation[0])

    @property
    def n_train(self):
        return len(self.training[0])

    def reordered(self, order):
        order = list(order)
        return FoldPlan(self.n_samples,
                        tuple(self.validation[i] for i in order),
                        tuple(self.training[i] for i in order),
                        self.dropped, self.seed)


def partition_folds(N, K, seed=0) -> FoldPlan:
    """Shuffle ``range(N)`` and cut it into ``K`` equal contiguous blocks.

    The ``N mod K`` trailing indices of the permutation are dropped.
    """
    N, K = int(N), int(K)
    if K < 2:
        raise InvalidInputError(f"K must be >= 2, got {K}")
    if N < K:
        raise InvalidInputError(f"need N >= K, got N={N}, K={K}")
    perm = np.random.default_rng(seed).permutation(N)
    n_val = N // K
    folds = [np.sort(perm[k * n_val:(k + 1) * n_val]) for k in range(K)]
    dropped = np.sort(perm[K * n_val:])
    training = tuple(
        np.sort(np.concatenate([folds[j] for j in range(K) if j != k]))
        for k in range(K))
    return FoldPlan(N, tuple(folds), training, dropped, seed)


def partition_holdout(N, train_fraction=0.8, seed=0) -> FoldPlan:
    """Single shuffled train/validation split."""
    N = int(N)
    n_train = int(round(train_fraction * N))
    if not 1 <= n_train < N:
        raise InvalidInputError(
            f"train_fraction={train_fraction} leaves an empty split for N={N}")
    perm = np.random.default_rng(seed).permutation(N)
    return FoldPlan(N, (np.sort(perm[n_train:]),), (np.sort(perm[:n_train]),),
                    np.empty(0, dtype=int), seed)


@dataclass(frozen=True)
class GradientReport:
    value: float
    grad: np.ndarray | None
    per_fold_losses: np.ndarray
    per_fold_Q: np.ndarray | None = None
    grad_full: np.ndarray | None = None


class _Fold:
    __slots__ = ("X_val", "Y_val", "gram", "cross", "n_train", "n_val")

    def __init__(self, X, Y, val, train):
        Xt, Yt = X[train], Y[train]
        self.X_val = X[val]
        self.Y_val = Y[val]
        self.gram = Xt.T @ Xt
        self.cross = Xt.T @ Yt
        self.n_train = len(train)
        self.n_val = len(val)


class CVObjective:
    """Cross-validation criterion bound to one dataset and fold plan.

    Per-fold Gram matrices are computed once, so repeated evaluations only
    pay for one factorization per (fold, gamma).
    """

    def __init__(self, data: Dataset, plan: FoldPlan):
        if plan.n_samples != data.n_samples:
            raise InvalidInputError(
                f"fold plan is for N={plan.n_samples}, data has N={data.n_samples}")
        self.n_features = data.n_features
        self.dtype = data.X.dtype
        self.folds = [_Fold(data.X, data.Y, v, t)
                      for v, t in zip(plan.validation, plan.training)]

    def _check(self, hp):
        if hp.lambda_.size != self.n_features:
            raise InvalidInputError(
                f"lambda has length {hp.lambda_.size}, data has {self.n_features} features")
        return hp.lambda_.astype(self.dtype, copy=False)

    def evaluate(self, hp: HyperParams, *, grad=True, full=False,
                 include_e=True, include_q=True, _corrupt=None) -> GradientReport:
        lam = self._check(hp)
        K = len(self.folds)
        gammas = hp.gamma_set
        n_g = len(gammas)
        use_q = include_q and hp.mu > 0
        D = self.n_features
        dt = self.dtype

        losses = np.zeros(K, dtype=np.float64)
        q_vals = np.zeros(K, dtype=np.float64) if use_q else None
        g_e = np.zeros(D, dtype=dt)
        g_q = np.zeros(D, dtype=dt)
        g_full = np.zeros((D, D), dtype=dt) if full else None
        g_full_q = np.zeros((D, D), dtype=dt) if full and use_q else None

        for k, f in enumerate(self.folds):
            coef = -f.n_train / (K * f.n_val) / n_g
            for gamma in gammas:
                factor = tikhonov_factor(f.gram, lam, gamma, f.n_train, fold=k)
                theta = factor.solve(f.cross)
                resid = f.X_val @ theta - f.Y_val
                losses[k] += float(np.sum(resid * resid)) / (2 * f.n_val) / n_g
                if grad and include_e:
                    W = factor.solve(f.X_val.T @ resid)
                    b_diag = np.einsum("ij,ij->i", W, theta)
                    lb = lam * b_diag
                    g2 = gamma * gamma
                    g_e += (coef * g2) * (lb + lb)
                    if full:
                        B = W @ theta.T
                        B[np.diag_indices(D)] = b_diag
                        g_full += (coef * g2) * (lam[:, None] * B + B * lam[None, :])
                if use_q:
                    Dk = lam[:, None] * theta
                    q_vals[k] = 0.5 * hp.mu * float(np.sum(Dk * Dk))
                    if grad:
                        V = factor.solve(lam[:, None] * Dk)
                        g_diag = np.einsum("ij,ij->i", V, theta)
                        lg = lam * g_diag
                        d_diag = np.einsum("ij,ij->i", Dk, theta)
                        g_q += hp.mu * (d_diag - f.n_train * (lg + lg))
                        if full:
                            G = V @ theta.T
                            G[np.diag_indices(D)] = g_diag
                            DT = Dk @ theta.T
                            DT[np.diag_indices(D)] = d_diag
                            g_full_q += hp.mu * (DT - f.n_train * (
                                lam[:, None] * G + G * lam[None, :]))

        value = 0.0
        if include_e:
            value += float(np.mean(losses))
        if use_q:
            value += float(np.sum(q_vals))
        g = None
        if grad:
            g = np.zeros(D, dtype=dt)
            if include_e:
                g = g + g_e
            if use_q:
                g = g + g_q
            if full:
                if not include_e:
                    g_full[:] = 0
                if use_q:
                    g_full = g_full + g_full_q
            if _corrupt is not None:
                g = _corrupt(g)
        return GradientReport(value, g, losses, q_vals, g_full)

    def value(self, lambda_, hp: HyperParams, **kw):
        return self.evaluate(hp.with_lambda(lambda_), grad=False, **kw).value


def eval_criterion(data: Dataset, plan: FoldPlan, hp: HyperParams) -> GradientReport:
    """Cross-validation criterion value (plus ``Q`` when ``mu > 0``)."""
    return CVObjective(data, plan).evaluate(hp, grad=False)


def grad_lambda(data: Dataset, plan: FoldPlan, hp: HyperParams) -> GradientReport:
    """Criterion value and its analytic gradient with respect to ``lambda``.

    Includes the validation regularizer when ``hp.mu > 0`` so the value
    matches :func:`eval_criterion` on the same inputs.
    """
    return CVObjective(data, plan).evaluate(hp, grad=True)


def grad_lambda_full(data: Dataset, plan: FoldPlan, hp: HyperParams) -> np.ndarray:
    """Gradient with respect to ``vec(Lambda)`` as a length ``D**2`` vector.

    Column-major vec, so ``reshape(D, D, order="F")`` recovers the matrix;
    its diagonal is bit-identical to :func:`grad_lambda`.
    """
    rep = CVObjective(data, plan).evaluate(hp, grad=True, full=True)
    return rep.grad_full.reshape(-1, order="F")


def q_term_and_grad(data: Dataset, plan: FoldPlan, hp: HyperParams) -> GradientReport:
    """Validation regularizer ``Q`` alone and its gradient."""
    if len(hp.gamma_set) > 1:
        raise InvalidInputError("Q term is only defined for gamma_set == (1,)")
    return CVObjective(data, plan).evaluate(hp, grad=True, include_e=False)


def finite_diff_grad(objective, lambda_, step=1e-6):
    """Central-difference gradient with per-coordinate step ``step*max(1,|x_j|)``."""
    if not step > 0:
        raise InvalidInputError("step must be positive")
    lam = np.array(lambda_, copy=True).reshape(-1)
    if not np.issubdtype(lam.dtype, np.floating):
        lam = lam.astype(np.float64)
    out = np.empty(lam.size, dtype=np.float64)
    for j in range(lam.size):
        x0 = lam[j]
        h = lam.dtype.type(step * max(1.0, abs(float(x0))))
        lam[j] = x0 + h
        hi = lam[j]
        f_plus = float(objective(lam))
        lam[j] = x0 - h
        lo = lam[j]
        f_minus = float(objective(lam))
        lam[j] = x0
        # divide by the representable step actually taken
        out[j] = (f_plus - f_minus) / float(hi - lo)
    return out.astype(lam.dtype, copy=False)
