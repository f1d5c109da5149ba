import sys

import numpy as np
import pytest

from cfsa.dataset import make_dataset
from cfsa.fixtures import FixtureSpec, gen_biased


def toy_dataset(X, y, sens_col=-1, names=None):
    X = np.asarray(X, dtype=float)
    m = X.shape[1]
    names = names or [f"x{j}" for j in range(m - 1)] + ["sex"]
    return make_dataset(X, y, names, names[sens_col])


def random_dataset(n=200, m=3, seed=0, p_fav=0.5, p_pos=0.5):
    rng = np.random.default_rng(seed)
    X = rng.random((n, m))
    s = (rng.random(n) < p_fav).astype(float)
    y = (rng.random(n) < p_pos).astype(int)
    return toy_dataset(np.column_stack([X, s]), y)


@pytest.fixture(scope="session")
def reference_fixture():
    return gen_biased(FixtureSpec())


@pytest.fixture
def rand200():
    return random_dataset()


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
