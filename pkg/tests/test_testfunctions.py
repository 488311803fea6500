import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from branchfluct.testfunctions import TestFunction, TimeProfile


def test_integral_closed_form():
    assert TestFunction.gaussian(1, 1.0).integral() == pytest.approx(math.sqrt(2 * math.pi))
    phi = TestFunction.gaussian(2, 0.7, 2.0, [1.0, -1.0])
    num = integrate.dblquad(lambda y, x: float(phi(np.array([x, y]))), -8, 10, -10, 8)[0]
    assert num == pytest.approx(phi.integral(), rel=1e-8)


def test_roundtrip_and_add():
    phi = TestFunction([[0.0], [2.0]], [1.0, 0.5], [1.0, 3.0])
    again = TestFunction.from_dict(phi.to_dict())
    x = np.linspace(-3, 3, 7)
    assert np.allclose(again(x), phi(x))
    assert np.allclose((phi + phi)(x), 2 * phi(x))
    assert TestFunction.zero(2).is_zero


def test_validation():
    with pytest.raises(ValueError):
        TestFunction([[0.0]], [0.0], [1.0])
    with pytest.raises(ValueError):
        TestFunction([[0.0]], [1.0], [-1.0])


@given(st.floats(-5, 5), st.floats(0.2, 3.0))
def test_fourier_at_zero_is_mass(c, s):
    phi = TestFunction.gaussian(1, s, 1.0, [c])
    assert phi.fourier(np.zeros((1, 1)))[0].real == pytest.approx(phi.integral())


@pytest.mark.parametrize("prof", [TimeProfile(), TimeProfile("indicator", 2.0, 0.4), TimeProfile("bump", 1.0, a=0.2, b=0.7)])
def test_tail_integral(prof):
    for t in (0.0, 0.3, 0.55, 0.9):
        direct = integrate.quad(lambda s: float(prof(s)), t, 1.0, points=[0.4, 0.2, 0.7])[0]
        assert float(prof.tail_integral(t)) == pytest.approx(direct, abs=1e-9)


def test_point_profile():
    p = TimeProfile("point", 2.0, 0.5)
    assert float(p.tail_integral(0.2)) == 2.0
    assert float(p.tail_integral(0.7)) == 0.0
    with pytest.raises(ValueError):
        p(0.3)
    with pytest.raises(ValueError):
        TimeProfile("indicator", t1=1.5)
