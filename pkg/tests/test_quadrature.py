import math

import numpy as np
import pytest

from vacuumpath.quadrature import QuadratureNonConvergent, gauss_kronrod
from vacuumpath.search import golden_section


@pytest.mark.parametrize("f, a, b, exact", [
    (np.exp, 0.0, 1.0, math.e - 1.0),
    (lambda x: 1.0 / (1.0 + x * x), -5.0, 5.0, 2 * math.atan(5.0)),
    (lambda x: np.cosh(20 * (x - 0.3)) ** -2, 0.0, 1.0, (math.tanh(14.0) + math.tanh(6.0)) / 20),
    (lambda x: x**3 * np.exp(-x), 0.0, 60.0, 6.0 - math.exp(-60) * (60**3 + 3 * 60**2 + 6 * 60 + 6)),
])
def test_known_integrals(f, a, b, exact):
    val, err = gauss_kronrod(f, [a, b], tol=1e-12)
    assert val == pytest.approx(exact, rel=1e-11)
    assert err < 1e-10 * abs(exact) + 1e-15


def test_breakpoints_help_with_a_kink():
    val, _ = gauss_kronrod(lambda x: np.abs(x - 0.3), [0.0, 0.3, 1.0], tol=1e-13)
    assert val == pytest.approx(0.5 * (0.09 + 0.49), rel=1e-13)


def test_nonfinite_integrand_raises():
    with pytest.raises(QuadratureNonConvergent):
        gauss_kronrod(lambda x: np.where(x > 0.5, np.nan, x), [0.0, 1.0])


def test_refinement_limit_raises():
    with pytest.raises(QuadratureNonConvergent):
        gauss_kronrod(lambda x: np.sin(1.0 / np.maximum(x, 1e-300)), [0.0, 1.0], tol=1e-14, max_intervals=50)


def test_empty_range():
    assert gauss_kronrod(np.exp, [1.0, 1.0]) == (0.0, 0.0)


def test_golden_section_parabola():
    # comparisons of f cannot locate a quadratic minimum better than ~sqrt(eps)
    x, fx = golden_section(lambda t: (t - 0.37) ** 2 + 2.0, 0.0, 2.0, xtol=1e-6)
    assert x == pytest.approx(0.37, abs=1e-6)
    assert fx == pytest.approx(2.0, abs=1e-15)


def test_golden_section_accepts_reversed_bracket():
    x, _ = golden_section(lambda t: math.cosh(t - 1.0), 3.0, -1.0, xtol=1e-6)
    assert x == pytest.approx(1.0, abs=1e-6)
