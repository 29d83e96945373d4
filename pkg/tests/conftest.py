import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from fwl.convexfn import PLQFn, PolyhedralFn

settings.register_profile(
    "default", max_examples=100, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)
settings.load_profile("default")

finite = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False, allow_infinity=False)


@st.composite
def polyhedral_1d(draw, min_size=2, max_size=7):
    """Random one-dimensional polyhedral function with a nondegenerate domain."""
    k = draw(st.integers(min_size, max_size))
    xs = draw(st.lists(st.floats(-2.0, 2.0), min_size=k, max_size=k, unique=True))
    xs = sorted(round(x, 3) for x in xs)
    if xs[-1] - xs[0] < 0.1:
        xs[-1] = xs[0] + 0.5
    xs = sorted(set(xs))
    # values on a 1e-3 lattice keep hull decisions away from rounding-level ties
    zs = [round(z, 3) for z in draw(st.lists(finite, min_size=len(xs), max_size=len(xs)))]
    return PolyhedralFn(np.array(xs), np.array(zs))


@pytest.fixture
def indicator():
    return PLQFn.indicator(-1.0, 1.0)


@pytest.fixture
def quad_cap():
    return PLQFn.quadratic(1.0, lo=-1.0, hi=1.0)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
