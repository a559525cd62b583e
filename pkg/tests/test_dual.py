"""Checks of the forward-mode dual-number core against closed forms."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftct import dual
from ftct.dual import Dual


def test_first_derivative_polynomial():
    f = lambda x: 3.0 * x ** 3 - 2.0 * x + 5.0
    assert dual.nth_derivative(f, 2.0, 1) == pytest.approx(3 * 3 * 4.0 - 2.0)


def test_high_order_derivatives_of_exp_product():
    # d^4/dx^4 [x^2 e^x] = (x^2 + 8x + 12) e^x
    f = lambda x: x ** 2 * dual.exp(x)
    x0 = 0.7
    want = (x0 ** 2 + 8 * x0 + 12) * np.exp(x0)
    assert dual.nth_derivative(f, x0, 4) == pytest.approx(want, rel=1e-12)


def test_fourth_derivative_tanh_gauss():
    # Matches the profile used throughout: f(t) = exp(-t^2) tanh(t).
    f = lambda t: dual.exp(-(t ** 2)) * dual.tanh(t)
    got = dual.nth_derivative(f, 0.9, 4)

    def fd4(h):
        vals = [np.exp(-(0.9 + k * h) ** 2) * np.tanh(0.9 + k * h)
                for k in (-2, -1, 0, 1, 2)]
        return (vals[0] - 4 * vals[1] + 6 * vals[2] - 4 * vals[3] + vals[4]) / h ** 4

    # Richardson-extrapolated central-difference oracle, O(h^4)
    fd = (4 * fd4(5e-3) - fd4(1e-2)) / 3
    assert got == pytest.approx(fd, abs=5e-5)


def test_mixed_partials_symmetry():
    def f(args):
        x, y = args
        return dual.sin(x * y) + x ** 3 * y
    H = dual.hessian(f, [0.4, -1.2])
    assert H[0][1] == pytest.approx(H[1][0], rel=1e-13)
    x, y = 0.4, -1.2
    want = np.cos(x * y) - x * y * np.sin(x * y) + 3 * x ** 2
    assert H[0][1] == pytest.approx(want, rel=1e-12)


def test_array_coefficients_batch():
    xs = np.linspace(0.1, 2.0, 7)
    g = dual.im_part(dual.log(Dual(xs, 1.0)))
    np.testing.assert_allclose(g, 1.0 / xs, rtol=1e-14)


def test_numpy_scalar_left_operand():
    # ndarray + Dual must defer to Dual.__radd__, not broadcast.
    x = Dual(np.array([1.0, 2.0]), 1.0)
    y = np.array([3.0, 4.0]) + x
    assert isinstance(y, Dual)
    np.testing.assert_allclose(y.re, [4.0, 6.0])


def test_directional_derivative():
    def f(args):
        x, y = args
        return x ** 2 * y
    d = dual.directional(f, [1.5, 2.0], [1.0, -1.0])
    assert d == pytest.approx(2 * 1.5 * 2.0 * 1.0 + 1.5 ** 2 * (-1.0))


def test_apply_univariate_tower():
    table = {0: np.sin, 1: np.cos, 2: lambda a: -np.sin(a), 3: lambda a: -np.cos(a)}
    derivs = lambda a, k: table[k % 4](a) * (1 if k < 4 else None)
    t = Dual(Dual(0.3, 1.0), 1.0)
    out = dual.apply_univariate(derivs, t)
    assert dual.value(out) == pytest.approx(np.sin(0.3))
    assert dual.value(out.im) == pytest.approx(np.cos(0.3))
    assert dual.value(out.im.im) == pytest.approx(-np.sin(0.3))


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=-2.0, max_value=2.0),
       st.floats(min_value=0.05, max_value=3.0))
def test_quotient_rule_property(a, b):
    f = lambda x: (x ** 2 + 1.0) / (x ** 2 + b)
    got = dual.nth_derivative(f, a, 1)
    want = (2 * a * (a ** 2 + b) - (a ** 2 + 1) * 2 * a) / (a ** 2 + b) ** 2
    assert got == pytest.approx(want, rel=1e-10, abs=1e-12)
