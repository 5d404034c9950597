import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")

TWO_PI = 2 * np.pi


def grid(n):
    return np.arange(n) / n


def trig(n, coeffs):
    """``sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x)``, k from 1."""
    x = grid(n)
    out = np.zeros(n)
    for k, (a, b) in enumerate(coeffs, start=1):
        out += a * np.cos(TWO_PI * k * x) + b * np.sin(TWO_PI * k * x)
    return out


coeff = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)
coeffs4 = st.lists(st.tuples(coeff, coeff), min_size=1, max_size=4)


@st.composite
def densities(draw, n=64, amp_max=0.6):
    """Unit-mass band-limited positive profile."""
    c = draw(coeffs4)
    v = trig(n, c)
    top = np.max(np.abs(v))
    amp = draw(st.floats(0.0, amp_max))
    return 1.0 + (amp * v / top if top > 0 else v)


@st.composite
def tangents(draw, n=64):
    c = draw(coeffs4)
    return trig(n, c)


@pytest.fixture
def x128():
    return grid(128)
