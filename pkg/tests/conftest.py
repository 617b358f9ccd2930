import numpy as np
import pytest

from multiridge.core import Dataset, standardize_apply, standardize_fit
from multiridge.cv_gradient import partition_folds

CRITERIA = []


def record_criterion(label, passed, detail=""):
    line = f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}"
    CRITERIA.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_problem(rng, N=100, D=20, M=3, K=5, noise=0.3):
    X = rng.normal(size=(N, D))
    theta = rng.normal(size=(D, M)) * (rng.random((D, 1)) < 0.5)
    Y = X @ theta + noise * rng.normal(size=(N, M))
    data = Dataset(X, Y)
    data = standardize_apply(standardize_fit(data), data)
    return data, partition_folds(N, K, int(rng.integers(0, 2**31)))


@pytest.fixture
def problem(rng):
    return make_problem(rng)
