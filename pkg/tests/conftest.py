import numpy as np
import pytest

from fairclass.core import Dataset


def make_dataset(X, y=None, s=None, groups=None, sf="s"):
    """Dataset from a covariate block; an intercept is prepended and s appended."""
    X = np.asarray(X, float).reshape(len(X), -1)
    cols = [np.ones(X.shape[0]), X]
    names = ["intercept"] + [f"x{k + 1}" for k in range(X.shape[1])]
    sens = {}
    if s is not None:
        s = np.asarray(s, int)
        cols.append(s[:, None])
        names.append(sf)
        sens[sf] = s
    return Dataset(np.column_stack(cols), y, sens, groups, tuple(names))


def random_dataset(rng, n=40, p=2, grouped=0):
    X = rng.standard_normal((n, p))
    s = rng.integers(0, 2, n)
    s[:2] = (0, 1)
    y = np.where(rng.random(n) < 0.5, 1, -1)
    y[:4] = (1, -1, 1, -1)
    s[:4] = (0, 0, 1, 1)
    groups = None
    if grouped:
        groups = np.array([f"g{k % grouped}" for k in range(n)])
    return make_dataset(X, y, s, groups)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
