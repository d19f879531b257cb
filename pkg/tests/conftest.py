import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import acceptance_log  # noqa: E402
from proxkernel.binning import BinAssignment  # noqa: E402

DATA_DIR = Path(__file__).parent / "data"

# A=(1,1) B=(1,2) C=(2,1) D=(1,missing); bins are 1-based, 0 = missing
ABCD = np.array([[1, 1], [1, 2], [2, 1], [1, 0]])
# same plus E, alone in bin 3 of feature 1 and missing feature 2
ABCDE = np.array([[1, 1], [1, 2], [2, 1], [1, 0], [3, 0]])


@pytest.fixture
def abcd():
    return BinAssignment(ABCD.copy(), 2)


@pytest.fixture
def abcde():
    return BinAssignment(ABCDE.copy(), 3)


def random_incomplete(rng, n, d, rate, levels=None):
    """Float matrix with NaNs; ``levels`` limits values to small integers."""
    if levels:
        X = rng.integers(0, levels, size=(n, d)).astype(float)
    else:
        X = rng.normal(size=(n, d))
    X[rng.random((n, d)) < rate] = np.nan
    # keep every feature observed at least once
    for j in range(d):
        if np.isnan(X[:, j]).all():
            X[rng.integers(n), j] = 0.0
    return X


def pytest_terminal_summary(terminalreporter):
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
