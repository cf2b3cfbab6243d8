import numpy as np
import pytest

from qfock import TruncatedFock


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_level(space: TruncatedFock, k: int, rng, d=None):
    d = space.D if d is None else d
    return space.embed_level(k, rng.standard_normal(d**k), d)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[num])
