# External Party
import numpy as np
from numpy.testing import assert_allclose
import pytest

# My Modules
from kink_stability.common.numerics import EVEN
from kink_stability.common.numerics import ODD
from kink_stability.common.numerics import first_derivative
from kink_stability.common.numerics import line_inner
from kink_stability.common.numerics import line_integral
from kink_stability.common.numerics import line_norm
from kink_stability.common.numerics import second_derivative
from kink_stability.common.numerics import three_point_laplacian

X = np.linspace(0.0, 12.0, 1201)
H = X[1]


def test_fourth_order_derivatives_of_an_odd_function():
    f = X * np.exp(-(X**2) / 4)
    slope = (1 - X**2 / 2) * np.exp(-(X**2) / 4)
    curvature = (X**3 / 4 - 1.5 * X) * np.exp(-(X**2) / 4)
    assert_allclose(first_derivative(f, H, ODD)[:-2], slope[:-2], atol=1e-7)
    assert_allclose(second_derivative(f, H, ODD)[:-2], curvature[:-2], atol=1e-6)


def test_parity_sets_the_ghost_nodes():
    f = np.exp(-(X**2))
    # an even function has zero slope at the origin
    assert first_derivative(f, H, EVEN)[0] == pytest.approx(0.0, abs=1e-12)
    assert second_derivative(f, H, EVEN)[0] == pytest.approx(-2.0, abs=1e-6)
    assert three_point_laplacian(f, H, EVEN)[0] == pytest.approx(-2.0, abs=1e-3)


def test_three_point_laplacian_is_exact_on_cubics():
    f = X**3
    lap = three_point_laplacian(f, H, ODD)
    assert_allclose(lap[:-1], 6 * X[:-1], atol=1e-6)
    assert lap[-1] == 0.0


def test_line_quadrature():
    gaussian = np.exp(-(X**2))
    assert line_integral(gaussian, H) == pytest.approx(np.sqrt(np.pi), rel=1e-12)
    odd = X * np.exp(-(X**2) / 2)
    # the integral of x^2 e^{-x^2} over the line is sqrt(pi) / 2
    assert line_norm(odd, H) ** 2 == pytest.approx(np.sqrt(np.pi) / 2, rel=1e-12)
    assert line_inner(odd, odd, H) == pytest.approx(line_norm(odd, H) ** 2)
