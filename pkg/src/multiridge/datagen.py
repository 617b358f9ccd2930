"""Synthetic data for the benchmark studies, SNR calibration and R^2."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import Dataset, InvalidInputError


class SimulationDivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SparseLinearSpec:
    D: int = 100
    N_train: int = 1000
    N_test: int = 10000
    informative_fraction: float = 0.5
    coef_range: tuple = (-50.0, 50.0)
    snr_db: float = 20.0
    seed: int = 0
    n_targets: int = 1

    def __post_init__(self):
        if self.D < 1 or self.N_train < 1 or self.N_test < 0:
            raise InvalidInputError("D, N_train must be >= 1 and N_test >= 0")
        if not 0 < self.informative_fraction <= 1:
            raise InvalidInputError("informative_fraction must lie in (0, 1]")
        if int(np.floor(self.D * self.informative_fraction)) < 1:
            raise InvalidInputError("no informative features for this D")


@dataclass(frozen=True)
class LpvSpec:
    N: int = 50
    N_test: int = 3000
    n_a: int = 30
    n_b: int = 30
    snr_db: float = 14.0
    p_variance: float = np.pi
    seed: int = 0
    overflow_guard: float = 1e8

    @property
    def n_alpha(self):
        return 8

    @property
    def n_regressors(self):
        return self.n_alpha * (self.n_a + self.n_b)


def noise_std(signal, snr_db):
    """``sigma_e`` giving ``10 log10(||s||^2 / (N sigma_e^2 * M)) = snr_db``."""
    s = np.asarray(signal, dtype=np.float64)
    power = float(np.mean(s * s))
    if power == 0.0:
        raise InvalidInputError("signal is identically zero")
    return np.sqrt(power / 10.0 ** (snr_db / 10.0))


def calibrate_noise(signal, snr_db, seed=None):
    """Gaussian noise with variance set from the mean signal power.

    The expected SNR hits ``snr_db``; the realized one fluctuates.
    ``snr_db = inf`` returns zeros.
    """
    s = np.asarray(signal, dtype=np.float64)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if np.isinf(snr_db) and snr_db > 0:
        noise_std(s, 0.0)  # still reject zero signals
        return np.zeros_like(s)
    return rng.normal(0.0, noise_std(s, snr_db), size=s.shape)


def realized_snr_db(y, e):
    y = np.asarray(y, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    return 10.0 * np.log10(np.sum((y - e) ** 2) / np.sum(e ** 2))


def gen_sparse_linear(spec: SparseLinearSpec):
    """``y = x' theta + e`` with ``x ~ N(0, I)`` and ``floor(D*frac)`` nonzero rows.

    Returns ``(train, test)``; the noise level is set from the training signal
    and applied to both sets.
    """
    rng = np.random.default_rng(spec.seed)
    D, M = spec.D, spec.n_targets
    lo, hi = spec.coef_range
    theta = rng.uniform(lo, hi, size=(D, M))
    n_inf = int(np.floor(D * spec.informative_fraction))
    informative = rng.choice(D, size=n_inf, replace=False)
    mask = np.zeros(D, dtype=bool)
    mask[informative] = True
    theta[~mask] = 0.0

    X_tr = rng.normal(size=(spec.N_train, D))
    X_te = rng.normal(size=(spec.N_test, D))
    s_tr = X_tr @ theta
    s_te = X_te @ theta
    if np.isinf(spec.snr_db):
        sigma = 0.0
    else:
        sigma = noise_std(s_tr, spec.snr_db)
    e_tr = rng.normal(0.0, 1.0, size=s_tr.shape) * sigma
    e_te = rng.normal(0.0, 1.0, size=s_te.shape) * sigma
    meta = {"seed": spec.seed, "snr_db": spec.snr_db, "sigma_e": sigma,
            "informative": np.sort(informative)}
    train = Dataset(X_tr, s_tr + e_tr, theta, e_tr, meta)
    test = Dataset(X_te, s_te + e_te, theta, e_te, meta) if spec.N_test > 0 else None
    return train, test


def lpv_basis(p):
    """``[1, p, p^2, p^3, sin p, cos p, sin^2 p, cos^2 p]`` (last axis)."""
    p = np.asarray(p, dtype=np.float64)
    s, c = np.sin(p), np.cos(p)
    return np.stack([np.ones_like(p), p, p * p, p ** 3, s, c, s * s, c * c], axis=-1)


def build_lpv_regressor(y_hist, u_hist, p_now, n_a, n_b):
    """Regressor row for one time step.

    ``y_hist[j-1]`` and ``u_hist[j-1]`` hold ``y(k-j)`` and ``u(k-j)``.
    Layout: for ``j = 1..n_a`` the 8 entries ``y(k-j) psi_s(p(k))``, then the
    same for ``u`` over ``j = 1..n_b``.
    """
    y_hist = np.asarray(y_hist, dtype=np.float64).reshape(-1)
    u_hist = np.asarray(u_hist, dtype=np.float64).reshape(-1)
    if y_hist.size < n_a or u_hist.size < n_b:
        raise InvalidInputError(
            f"need {n_a} output and {n_b} input lags, got {y_hist.size} and {u_hist.size}")
    psi = lpv_basis(p_now)
    return np.concatenate([np.outer(y_hist[:n_a], psi).ravel(),
                           np.outer(u_hist[:n_b], psi).ravel()])


def lpv_regressor_matrix(y, u, p, n_a, n_b, start):
    """Stack regressor rows for ``k = start .. len(y)-1``."""
    rows = []
    for k in range(start, len(y)):
        rows.append(build_lpv_regressor(y[k - n_a:k][::-1], u[k - n_b:k][::-1],
                                        p[k], n_a, n_b))
    return np.asarray(rows)


def lpv_step_terms(y, u, p, k):
    """The four true regressors ``(y(k-2) cos p, y(k-3) sin^2 p, u(k-2)(cos p - sin p), u(k-3) sin p)``."""
    c, s = np.cos(p[k]), np.sin(p[k])
    return np.array([c * y[k - 2], s * s * y[k - 3], (c - s) * u[k - 2], s * u[k - 3]])


LPV_TRUE_COEF = np.array([0.5, -0.1, 1.0, 3.0])


def _lpv_run(u, p, e, guard):
    n = len(u)
    y = np.zeros(n)
    for k in range(3, n):
        y[k] = LPV_TRUE_COEF @ lpv_step_terms(y, u, p, k) + e[k]
        if not abs(y[k]) < guard:
            return None
    return y


def simulate_lpv_signals(n_steps, snr_db, p_variance, rng, guard=1e8, noise=True):
    """Simulate the LPV-ARX system for ``n_steps`` steps from rest.

    The noise standard deviation is set from the power of a noise-free run
    driven by the same input and scheduling sequences.
    """
    u = rng.normal(0.0, 1.0, size=n_steps)
    p = rng.normal(0.0, np.sqrt(p_variance), size=n_steps)
    w = rng.normal(0.0, 1.0, size=n_steps)
    clean = _lpv_run(u, p, np.zeros(n_steps), guard)
    if clean is None:
        return None
    sigma = noise_std(clean, snr_db) if noise and np.isfinite(snr_db) else 0.0
    y = _lpv_run(u, p, sigma * w, guard)
    if y is None:
        return None
    return y, u, p, sigma * w


def simulate_lpv(spec: LpvSpec):
    """Training and test sets for the over-parameterized LPV-ARX model.

    ``max(n_a, n_b)`` warm-up steps precede each recorded window, so the
    training set has exactly ``spec.N`` regression rows.
    """
    rng = np.random.default_rng(spec.seed)
    lag = max(spec.n_a, spec.n_b)
    out = []
    for n in (spec.N, spec.N_test):
        sim = simulate_lpv_signals(n + lag, spec.snr_db, spec.p_variance, rng,
                                   spec.overflow_guard)
        if sim is None:
            raise SimulationDivergenceError(
                f"LPV trajectory exceeded {spec.overflow_guard:g} (seed={spec.seed})")
        y, u, p, e = sim
        X = lpv_regressor_matrix(y, u, p, spec.n_a, spec.n_b, lag)
        out.append(Dataset(X, y[lag:], None, e[lag:],
                           {"seed": spec.seed, "snr_db": spec.snr_db}))
    return out[0], out[1]


def r2_score(y_true, y_pred):
    """``max(0, 1 - SSE/SST)`` with SST about the column means of ``y_true``."""
    yt = np.asarray(y_true, dtype=np.float64)
    yp = np.asarray(y_pred, dtype=np.float64)
    if yt.ndim == 1:
        yt = yt[:, None]
    if yp.ndim == 1:
        yp = yp[:, None]
    if yt.shape != yp.shape:
        raise InvalidInputError(f"shape mismatch {yt.shape} vs {yp.shape}")
    if yt.shape[0] < 2:
        raise InvalidInputError("need at least 2 samples")
    sst = float(np.sum((yt - yt.mean(axis=0)) ** 2))
    if sst == 0.0:
        raise InvalidInputError("y_true is constant")
    sse = float(np.sum((yt - yp) ** 2))
    return max(0.0, 1.0 - sse / sst)


def write_dataset_csv(data: Dataset, path):
    """CSV with header ``x_1..x_D, y_1..y_M``."""
    header = [f"x_{j + 1}" for j in range(data.n_features)]
    header += [f"y_{m + 1}" for m in range(data.n_targets)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in np.hstack([data.X, data.Y]):
            w.writerow([repr(float(v)) for v in row])
