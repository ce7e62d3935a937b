import os
from pathlib import Path

import numpy as np
import pytest

from pidnet.data import Dataset, load_pid

PID_PATH = Path(os.environ.get("PIDNET_DATA", Path(__file__).parent / "data" / "pima-indians-diabetes.csv"))


@pytest.fixture(scope="session")
def pid_path():
    if not PID_PATH.exists():
        pytest.skip(f"PID data file not found at {PID_PATH}")
    return PID_PATH


@pytest.fixture(scope="session")
def pid(pid_path):
    return load_pid(pid_path)


def separable_dataset(n=20):
    """Two well separated clusters in the first two columns; the rest are zero."""
    rs = np.random.default_rng(123)
    half = n // 2
    a = rs.uniform(0.0, 1.0, size=(half, 2))
    b = rs.uniform(2.0, 3.0, size=(n - half, 2))
    x = np.zeros((n, 8))
    x[:, :2] = np.vstack([a, b])
    y = np.r_[np.zeros(half), np.ones(n - half)]
    return Dataset(x, y)


@pytest.fixture
def separable():
    return separable_dataset()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
