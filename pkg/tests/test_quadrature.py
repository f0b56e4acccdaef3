import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opuc_sumrules.quadrature import integrate_arc, integrate_log_singular


@settings(deadline=None)
@given(st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_polynomial_integrals_are_exact(a, w):
    b = a + w
    assert integrate_arc(lambda t: t * t, a, b) == pytest.approx((b**3 - a**3) / 3, rel=1e-12)


@settings(deadline=None)
@given(st.floats(0.0, 2.0), st.floats(0.2, 2.0))
def test_sqrt_edges_handle_semicircle(a, w):
    b = a + w
    val = integrate_arc(lambda t: np.sqrt(max((t - a) * (b - t), 0.0)), a, b, sqrt_edges=True)
    assert val == pytest.approx(np.pi * w * w / 8, rel=1e-9)


@settings(deadline=None)
@given(st.floats(0.05, 0.95))
def test_log_singularity_inside_interval(s):
    # int_0^1 log|t - s| dt in closed form
    exact = s * np.log(s) + (1 - s) * np.log(1 - s) - 1
    assert integrate_log_singular(lambda t: 1.0, 0.0, 1.0, s) == pytest.approx(exact, abs=1e-9)
