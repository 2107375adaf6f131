import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from kinsolve.skeleton import load_builtin

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def _vec(rng, lo=0.2, hi=2.0):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v) * rng.uniform(lo, hi)


@st.composite
def vectors(draw, lo=0.2, hi=2.0):
    """Random 3-vectors with norms in [lo, hi]."""
    return _vec(np.random.default_rng(draw(st.integers(0, 2**32 - 1))), lo, hi)


@st.composite
def rotations(draw):
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    q = rng.normal(size=4)
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


seeds = st.integers(0, 2**32 - 1)
angles = st.floats(-np.pi + 1e-6, np.pi, allow_nan=False)


@pytest.fixture(scope="session")
def body24():
    return load_builtin("body24")


@pytest.fixture(scope="session")
def wholebody():
    return load_builtin("wholebody")


@pytest.fixture(scope="session")
def hand16():
    return load_builtin("hand16")


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
