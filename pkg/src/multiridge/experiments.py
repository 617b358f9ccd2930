"""Experiment runners: feature-count sweep, gradient benchmark, LPV study.

Each runner takes a nested config dict (defaults below, overridable from a
YAML file), writes a deterministic results CSV, a ``timings.csv`` sidecar
with wall-clock seconds and a JSON summary into an output directory.
Existing rows in the results CSV are kept and their keys are not recomputed.
"""

from __future__ import annotations

import copy
import csv
import json
import logging
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import yaml

from . import __version__
from .core import Dataset, HyperParams
from .cv_gradient import CVObjective, finite_diff_grad, partition_holdout
from .datagen import LpvSpec, SparseLinearSpec, gen_sparse_linear, r2_score, simulate_lpv
from .estimators import ElasticNetRandomCV, LassoGridCV, LeastSquares, MultiRidge, RidgeGridCV

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


EXPERIMENT1_DEFAULTS = {
    "experiment": "experiment1",
    "seed": 0,
    "features": [100, 400, 800],
    "replications": 5,
    "n_train": 1000,
    "n_test": 10000,
    "snr_db": 20.0,
    "informative_fraction": 0.5,
    "coef_range": [-50.0, 50.0],
    "n_folds": 5,
    "methods": ["oracle", "ridge", "lasso", "enet", "multiridge"],
    "ridge": {"lo": 1e-3, "hi": 1e6, "num_points": 1000},
    "lasso": {"lo": 1e-5, "hi": 1e2, "num_points": 1000, "tol": 1e-4, "max_iter": 1000},
    "enet": {"lo": 1e-5, "hi": 1e3, "num_points": 1000, "tol": 1e-4, "max_iter": 1000},
    "multiridge": {"learning_rate": 350.0, "decay": 0.999, "epochs": 300,
                   "init": "identity", "gamma_set": [1.0], "mu": 0.0},
}

GRADIENT_BENCH_DEFAULTS = {
    "experiment": "gradient-bench",
    "seed": 0,
    "features": [10, 100, 1000],
    "n_samples": 1000,
    "n_targets": 10,
    "train_fraction": 0.8,
    "precisions": ["f64", "f32"],
    "fd_step": {"f64": 1e-6, "f32": 4.9e-3},
    "repeats": 5,
    "warmup": 1,
}

EXPERIMENT3_DEFAULTS = {
    "experiment": "experiment3",
    "seed": 0,
    "runs": 20,
    "n_train": 50,
    "n_test": 3000,
    "n_a": 30,
    "n_b": 30,
    "snr_db": 14.0,
    "p_variance": float(np.pi),
    "n_folds": 5,
    "methods": ["ols", "ridge", "lasso", "enet", "multiridge"],
    "ridge": {"lo": 1e-3, "hi": 1e6, "num_points": 1000},
    "lasso": {"lo": 1e-5, "hi": 1e2, "num_points": 1000, "tol": 1e-4, "max_iter": 1000},
    "enet": {"lo": 1e-5, "hi": 1e3, "num_points": 1000, "tol": 1e-4, "max_iter": 1000},
    "multiridge": {"learning_rate": 1.0, "decay": 0.999, "epochs": 300,
                   "init": "lasso_informed", "init_high": 10.0, "init_low": 1.0,
                   "gamma_set": [0.5, 1.0, 2.0], "mu": 0.0},
    "reference_medians": {"ols": 0.18, "ridge": 0.21, "lasso": 0.88, "enet": 0.86,
                          "multiridge": 0.91},
}

DEFAULTS = {
    "experiment1": EXPERIMENT1_DEFAULTS,
    "gradient-bench": GRADIENT_BENCH_DEFAULTS,
    "experiment3": EXPERIMENT3_DEFAULTS,
}


def _merge(base, override):
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        if k not in out:
            raise ConfigError(f"unknown config key {k!r}")
        if isinstance(out[k], dict) and isinstance(v, dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(name, path=None, **overrides):
    """Defaults for experiment ``name`` updated from a YAML file and kwargs."""
    if name not in DEFAULTS:
        raise ConfigError(f"unknown experiment {name!r}")
    user = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        if user.get("experiment", name) != name:
            raise ConfigError(f"{path} is a {user['experiment']!r} config, not {name!r}")
    cfg = _merge(DEFAULTS[name], user)
    cfg = _merge(cfg, {k: v for k, v in overrides.items() if v is not None})
    return cfg


@dataclass
class ExperimentRecord:
    experiment_id: str
    config: dict
    results: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    histories: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)
    version: str = __version__

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _read_rows(path):
    if not os.path.exists(path):
        return []
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _write_rows(path, header, rows):
    tmp = path + ".tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(r.get(h, "")) for h in header])
    os.replace(tmp, path)


def _percentiles(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {"n": 0}
    return {"n": int(v.size), "median": float(np.median(v)),
            "p5": float(np.percentile(v, 5)), "p95": float(np.percentile(v, 95))}


def _run_parallel(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _make_estimator(method, cfg, seed):
    folds = cfg["n_folds"]
    if method == "ols":
        return LeastSquares(n_folds=folds, random_state=seed)
    if method == "ridge":
        c = cfg["ridge"]
        return RidgeGridCV(folds, c["lo"], c["hi"], c["num_points"], random_state=seed)
    if method == "lasso":
        c = cfg["lasso"]
        return LassoGridCV(folds, c["lo"], c["hi"], c["num_points"], c["tol"],
                           c["max_iter"], random_state=seed)
    if method == "enet":
        c = cfg["enet"]
        return ElasticNetRandomCV(folds, c["lo"], c["hi"], c["num_points"], c["tol"],
                                  c["max_iter"], random_state=seed)
    if method == "multiridge":
        c = cfg["multiridge"]
        return MultiRidge(n_folds=folds, learning_rate=c["learning_rate"], decay=c["decay"],
                          epochs=c["epochs"], init=c["init"],
                          init_high=c.get("init_high", 10.0), init_low=c.get("init_low", 1.0),
                          gamma_set=tuple(c["gamma_set"]), mu=c["mu"],
                          lasso_num_points=cfg["lasso"]["num_points"], random_state=seed)
    raise ConfigError(f"unknown method {method!r}")


def _fit_score(method, cfg, seed, train, test):
    """Returns (r2, seconds, error, extra) for one method on one instance."""
    t0 = time.perf_counter()
    extra = {}
    try:
        if method == "oracle":
            r2 = r2_score(test.Y, test.X @ test.true_theta)
        else:
            est = _make_estimator(method, cfg, seed)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                est.fit(train.X, train.Y)
            r2 = r2_score(test.Y, est.predict(test.X))
            if method == "multiridge":
                extra["history"] = [list(h) for h in est.history_]
        return r2, time.perf_counter() - t0, "", extra
    except Exception as exc:  # recorded per row, the run continues
        logger.warning("%s failed on seed %s: %s", method, seed, exc)
        return float("nan"), time.perf_counter() - t0, type(exc).__name__, extra


def _write_outputs(out_dir, name, header, rows, timings, record):
    os.makedirs(out_dir, exist_ok=True)
    _write_rows(os.path.join(out_dir, "results.csv"), header, rows)
    if timings is not None:
        t_header, t_rows = timings
        _write_rows(os.path.join(out_dir, "timings.csv"), t_header, t_rows)
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        fh.write(record.to_json())


def _merge_rows(existing, new, key_fields, order_key):
    merged = {tuple(r[k] for k in key_fields): r for r in existing}
    for r in new:
        merged[tuple(_fmt(r[k]) for k in key_fields)] = {k: _fmt(v) for k, v in r.items()}
    return sorted(merged.values(), key=order_key)


def run_experiment1(cfg, out_dir, threads=1):
    """Test R^2 of each method across feature counts and replications."""
    cfg = _merge(EXPERIMENT1_DEFAULTS, cfg)
    header = ["D", "method", "seed", "r2", "error"]
    path = os.path.join(out_dir, "results.csv")
    existing = _read_rows(path)
    done = {(r["D"], r["method"], r["seed"]) for r in existing}
    methods = list(cfg["methods"])
    seeds = [int(cfg["seed"]) + r for r in range(int(cfg["replications"]))]

    jobs = []
    for D in cfg["features"]:
        for seed in seeds:
            todo = [m for m in methods if (str(D), m, str(seed)) not in done]
            if todo:
                jobs.append((int(D), seed, todo))

    def work(job):
        D, seed, todo = job
        spec = SparseLinearSpec(D=D, N_train=int(cfg["n_train"]), N_test=int(cfg["n_test"]),
                                informative_fraction=float(cfg["informative_fraction"]),
                                coef_range=tuple(cfg["coef_range"]),
                                snr_db=float(cfg["snr_db"]), seed=seed)
        train, test = gen_sparse_linear(spec)
        out = []
        for m in todo:
            r2, secs, err, extra = _fit_score(m, cfg, seed, train, test)
            logger.info("experiment1 D=%d seed=%d %s r2=%.4f (%.1fs)", D, seed, m, r2, secs)
            out.append(({"D": D, "method": m, "seed": seed, "r2": r2, "error": err},
                        secs, extra))
        return out

    produced = [x for batch in _run_parallel(work, jobs, threads) for x in batch]
    method_rank = {m: i for i, m in enumerate(methods)}
    rows = _merge_rows(existing, [p[0] for p in produced], ["D", "method", "seed"],
                       lambda r: (int(r["D"]), int(r["seed"]),
                                  method_rank.get(r["method"], len(methods)), r["method"]))

    summary = {}
    for r in rows:
        if r["error"]:
            continue
        summary.setdefault(r["D"], {}).setdefault(r["method"], []).append(float(r["r2"]))
    summary = {D: {m: _percentiles(v) for m, v in ms.items()} for D, ms in summary.items()}
    t_rows = [{"D": p[0]["D"], "method": p[0]["method"], "seed": p[0]["seed"],
               "seconds": p[1]} for p in produced]
    histories = {f"D={p[0]['D']},seed={p[0]['seed']}": p[2]["history"]
                 for p in produced if "history" in p[2]}
    record = ExperimentRecord("experiment1", cfg, rows, summary, histories, seeds)
    _write_outputs(out_dir, "experiment1", header, rows,
                   (["D", "method", "seed", "seconds"], t_rows), record)
    return record


def _time_call(fn, repeats, warmup):
    for _ in range(warmup):
        fn()
    times = []
    result = None
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return result, float(np.median(times))


_DTYPES = {"f64": np.float64, "f32": np.float32}


def run_gradient_bench(cfg, out_dir, threads=1):
    """Analytic gradient versus central finite differences on a holdout split.

    ``diff_norm`` is the Euclidean norm of the difference between the two
    gradients computed in the same precision. The finite-difference
    gradient is timed once since it already spans ``2 D`` evaluations.
    """
    cfg = _merge(GRADIENT_BENCH_DEFAULTS, cfg)
    header = ["D", "precision", "method", "diff_norm", "grad_norm"]
    for p in cfg["precisions"]:
        if p not in _DTYPES:
            raise ConfigError(f"unknown precision {p!r}")
    N, M = int(cfg["n_samples"]), int(cfg["n_targets"])
    rows, t_rows = [], []
    for D in cfg["features"]:
        D = int(D)
        rng = np.random.default_rng([int(cfg["seed"]), D])
        X = rng.normal(size=(N, D))
        Y = rng.normal(size=(N, M))
        lam = rng.normal(size=D)
        plan = partition_holdout(N, float(cfg["train_fraction"]), int(cfg["seed"]))
        for p in cfg["precisions"]:
            dt = _DTYPES[p]
            data = Dataset(X.astype(dt), Y.astype(dt))
            obj = CVObjective(data, plan)
            hp = HyperParams(lam.astype(dt))
            g_an, t_an = _time_call(lambda: obj.evaluate(hp, grad=True).grad,
                                    int(cfg["repeats"]), int(cfg["warmup"]))
            step = float(cfg["fd_step"][p])
            g_fd, t_fd = _time_call(lambda: finite_diff_grad(
                lambda l: obj.value(l, hp), hp.lambda_, step), 1, 0)
            diff = float(np.linalg.norm(g_an.astype(np.float64) - g_fd.astype(np.float64)))
            gnorm = float(np.linalg.norm(g_an.astype(np.float64)))
            logger.info("gradient-bench D=%d %s analytic %.4fs fd %.4fs diff %.3e",
                        D, p, t_an, t_fd, diff)
            for method, secs in (("analytic", t_an), ("finite_diff", t_fd)):
                rows.append({"D": D, "precision": p, "method": method,
                             "diff_norm": diff, "grad_norm": gnorm})
                t_rows.append({"D": D, "precision": p, "method": method, "seconds": secs})
    summary = {}
    for r, t in zip(rows, t_rows):
        summary.setdefault(str(r["D"]), {}).setdefault(r["precision"], {}).update(
            {"diff_norm": r["diff_norm"], "grad_norm": r["grad_norm"],
             f"seconds_{r['method']}": t["seconds"]})
    record = ExperimentRecord("gradient-bench", cfg, rows, summary, {}, [int(cfg["seed"])])
    _write_outputs(out_dir, "gradient-bench", header,
                   [{k: _fmt(v) for k, v in r.items()} for r in rows],
                   (["D", "precision", "method", "seconds"], t_rows), record)
    return record


def run_experiment3(cfg, out_dir, threads=1):
    """Monte-Carlo LPV-ARX identification with every method."""
    cfg = _merge(EXPERIMENT3_DEFAULTS, cfg)
    header = ["run", "method", "r2", "error"]
    path = os.path.join(out_dir, "results.csv")
    existing = _read_rows(path)
    done = {(r["run"], r["method"]) for r in existing}
    methods = list(cfg["methods"])
    seeds = [int(cfg["seed"]) + r for r in range(int(cfg["runs"]))]
    jobs = [(run, seed, [m for m in methods if (str(run), m) not in done])
            for run, seed in enumerate(seeds)]
    jobs = [j for j in jobs if j[2]]

    def work(job):
        run, seed, todo = job
        spec = LpvSpec(N=int(cfg["n_train"]), N_test=int(cfg["n_test"]), n_a=int(cfg["n_a"]),
                       n_b=int(cfg["n_b"]), snr_db=float(cfg["snr_db"]),
                       p_variance=float(cfg["p_variance"]), seed=seed)
        try:
            train, test = simulate_lpv(spec)
        except Exception as exc:
            return [({"run": run, "method": m, "r2": float("nan"),
                      "error": type(exc).__name__}, 0.0, {}) for m in todo]
        out = []
        for m in todo:
            r2, secs, err, extra = _fit_score(m, cfg, seed, train, test)
            logger.info("experiment3 run=%d %s r2=%.4f (%.1fs)", run, m, r2, secs)
            out.append(({"run": run, "method": m, "r2": r2, "error": err}, secs, extra))
        return out

    produced = [x for batch in _run_parallel(work, jobs, threads) for x in batch]
    method_rank = {m: i for i, m in enumerate(methods)}
    rows = _merge_rows(existing, [p[0] for p in produced], ["run", "method"],
                       lambda r: (int(r["run"]), method_rank.get(r["method"], len(methods)),
                                  r["method"]))
    per_method = {}
    for r in rows:
        if not r["error"]:
            per_method.setdefault(r["method"], []).append(float(r["r2"]))
    summary = {"medians": {m: float(np.median(v)) for m, v in per_method.items()},
               "stats": {m: _percentiles(v) for m, v in per_method.items()},
               "reference_medians": dict(cfg["reference_medians"])}
    t_rows = [{"run": p[0]["run"], "method": p[0]["method"], "seconds": p[1]}
              for p in produced]
    histories = {f"run={p[0]['run']}": p[2]["history"] for p in produced if "history" in p[2]}
    record = ExperimentRecord("experiment3", cfg, rows, summary, histories, seeds)
    _write_outputs(out_dir, "experiment3", header, rows,
                   (["run", "method", "seconds"], t_rows), record)
    return record
