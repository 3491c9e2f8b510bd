import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from rilab.profile_core import StepProfile

settings.register_profile("lab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")


@st.composite
def step_profiles(draw, L=1e8, rearranged=True, max_blocks=12):
    """Random step profiles with breakpoints spread over several decades."""
    n = draw(st.integers(1, max_blocks))
    logs = draw(st.lists(st.floats(-4, min(4, np.log10(L)), allow_nan=False), min_size=n, max_size=n, unique=True))
    b = np.sort(10.0 ** np.array(logs))
    b = b[np.concatenate([[True], np.diff(b) > 1e-12 * b[1:]])]
    v = np.array(draw(st.lists(st.floats(1e-3, 1e3), min_size=b.size, max_size=b.size)))
    if rearranged:
        v = np.sort(v)[::-1]
    return StepProfile(b, v, L, rearranged=rearranged)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
