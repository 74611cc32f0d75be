import math

import numpy as np
import pytest

from vacuumpath.model import (AnsatzFamily, ScalarPotential, Variant, ansatz_dr, ansatz_dR, ansatz_value,
                              potential_deriv, potential_eval, sphere_area)


def test_false_vacuum_energy_is_zero(pot):
    assert potential_eval(pot, pot.phi_false) == pytest.approx(0.0, abs=1e-12)


def test_vacua_closed_form(pot):
    assert pot.phi_false == (1.0 - math.sqrt(5.0)) / 2.0
    assert pot.phi_true == (1.0 + math.sqrt(5.0)) / 2.0


def test_true_vacuum_value_by_hand(pot):
    p = (1 + math.sqrt(5)) / 2
    q = (1 - math.sqrt(5)) / 2

    def raw(x):
        return 16 * (-x**2 / 2 - x**3 / 3 + x**4 / 4)

    expect = raw(p) - raw(q)
    assert expect < 0
    assert potential_eval(pot, pot.phi_true) == pytest.approx(expect, rel=1e-13)
    assert pot.v_true == pytest.approx(expect, rel=1e-13)


def test_degenerate_minima_without_cubic():
    p = ScalarPotential(1.0, 0.0)
    assert potential_deriv(p, 1.0) == 0.0
    assert potential_deriv(p, -1.0) == 0.0
    assert potential_eval(p, 1.0) == pytest.approx(potential_eval(p, -1.0), abs=1e-15)


def test_derivative_examples(pot):
    assert potential_deriv(pot, 0.0) == 0.0
    assert abs(potential_deriv(pot, pot.phi_false)) < 1e-12
    assert abs(potential_deriv(pot, pot.phi_true)) < 1e-12 * pot.eta
    assert potential_deriv(ScalarPotential(1.0, 1.0), 1.0) == -1.0


def test_barrier_between_vacua(pot):
    assert pot.phi_false < 0 < pot.phi_true
    assert pot(0.0) > 0
    assert pot(pot.barrier_field()) == pytest.approx(0.0, abs=1e-12)


def test_shifted_matches_direct_difference(pot):
    eps = np.linspace(-0.5, 3.0, 41)
    direct = pot._raw(pot.phi_false + eps) - pot._raw(pot.phi_false)
    assert np.allclose(pot.shifted(eps), direct, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("eta, lam", [(0.0, 1.0), (-1.0, 1.0), (1.0, -0.5)])
def test_potential_rejects_bad_parameters(eta, lam):
    with pytest.raises(ValueError):
        ScalarPotential(eta, lam)


def test_sphere_area():
    assert sphere_area(0) == 2.0
    assert sphere_area(1) == pytest.approx(2 * math.pi)
    assert sphere_area(2) == pytest.approx(4 * math.pi)
    assert sphere_area(3) == pytest.approx(2 * math.pi**2)


@pytest.mark.parametrize("variant", list(Variant))
def test_zero_radius_is_false_vacuum(pot, variant):
    a = AnsatzFamily(pot, 0.5, 2, variant)
    r = np.linspace(0, 10, 101)
    assert np.all(ansatz_value(a, 0.0, r) == pot.phi_false)


def test_large_radius_reaches_true_vacuum(family, pot):
    R, r = 40.0, np.array([0.0, 1.0, 2.0])
    dev = np.abs(ansatz_value(family, R, r) - pot.phi_true)
    assert np.all(dev <= pot.delta_phi * np.exp(-2 * (R - r) / family.sigma) + 1e-15)


def test_asymmetric_negative_radius(pot):
    # negative R pushes the core through the false vacuum to phi_F - (phi_T - phi_F)
    a = AnsatzFamily(pot, 0.5, 2, "asymmetric")
    R = -10 * a.sigma
    assert ansatz_value(a, R, 0.0) == pytest.approx(pot.phi_false - pot.delta_phi, abs=1e-6)
    assert ansatz_value(a, R, 40.0) == pytest.approx(pot.phi_false, abs=1e-12)
    assert ansatz_value(a, 10 * a.sigma, 0.0) == pytest.approx(pot.phi_true, abs=1e-6)


@pytest.mark.parametrize("variant", ["symmetric", "rdependent"])
def test_even_variants_are_bitwise_symmetric(pot, variant):
    a = AnsatzFamily(pot, 0.6, 2, variant)
    R = np.linspace(0.01, 5, 37)[:, None]
    r = np.linspace(0, 8, 53)[None, :]
    assert np.array_equal(ansatz_value(a, R, r), ansatz_value(a, -R, r))


def test_tails_decay_exponentially(family, pot):
    r = np.array([5.0, 7.0, 9.0])
    dev = family.excess(1.0, r)
    ratio = dev[1:] / dev[:-1]
    assert np.allclose(ratio, np.exp(-2 * 2.0 / family.sigma), rtol=1e-6)


def test_radial_slope_at_wall_centre(family, pot):
    s = family.sigma
    assert ansatz_dr(family, 5 * s, 5 * s) == pytest.approx(-pot.delta_phi / (2 * s), rel=1e-8)


def test_flat_at_zero_radius(family):
    assert np.all(ansatz_dr(family, 0.0, np.linspace(0, 5, 11)) == 0.0)


def test_dR_at_zero_is_right_limit(family):
    r = np.linspace(0, 3, 31)
    assert np.allclose(ansatz_dR(family, 0.0, r), ansatz_dR(family, 1e-9, r), rtol=1e-7, atol=1e-12)
    assert np.allclose(ansatz_dR(family, -1e-9, r), -ansatz_dR(family, 1e-9, r), rtol=1e-7, atol=1e-12)


def _fd_errors(a, h):
    R = np.array([-1.7, -0.6, 0.4, 1.1, 2.3])[:, None]
    r = np.linspace(0.05, 4, 40)[None, :]
    fd_R = (ansatz_value(a, R + h, r) - ansatz_value(a, R - h, r)) / (2 * h)
    fd_r = (ansatz_value(a, R, r + h) - ansatz_value(a, R, r - h)) / (2 * h)
    return np.max(np.abs(fd_R - ansatz_dR(a, R, r))), np.max(np.abs(fd_r - ansatz_dr(a, R, r)))


@pytest.mark.parametrize("variant", list(Variant))
def test_derivatives_match_finite_differences(pot, variant):
    a = AnsatzFamily(pot, 0.5, 2, variant)
    eR, er = _fd_errors(a, 1e-5)
    assert eR < 1e-6 and er < 1e-6
    eR2, er2 = _fd_errors(a, 5e-3)
    eR1, er1 = _fd_errors(a, 1e-2)
    assert math.log2(eR1 / eR2) >= 1.9
    assert math.log2(er1 / er2) >= 1.9


def test_rdependent_width_shrinks(pot):
    a = AnsatzFamily(pot, 0.7, 2, "rdependent")
    assert a.wall_width(0.0) == pytest.approx(0.7)
    assert a.wall_width(70.0) == pytest.approx(0.7**2 / 70.7)


def test_family_validation(pot):
    with pytest.raises(ValueError):
        AnsatzFamily(pot, 0.0, 2)
    with pytest.raises(ValueError):
        AnsatzFamily(pot, 0.5, 4)
    with pytest.raises(ValueError):
        AnsatzFamily(pot, 0.5, 2, "wobbly")
