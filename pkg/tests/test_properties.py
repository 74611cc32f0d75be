import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vacuumpath.config import RunConfig, parse_text
from vacuumpath.evolver import (Evolver, EvolverConfig, WaveState, hamiltonian_matrix, interval_weights,
                                thermal_weights)
from vacuumpath.model import AnsatzFamily, ScalarPotential, _tanh_diff, ansatz_value
from vacuumpath.reduction import ReducedSystem, compute_K, compute_U

finite = st.floats(-30, 30, allow_nan=False)
fast = settings(max_examples=40, deadline=None)


@fast
@given(finite, finite)
def test_tanh_difference(x, y):
    expect = math.tanh(x + y) - math.tanh(x - y)
    assert abs(_tanh_diff(x, y) - expect) <= 1e-15 + 4e-16 * abs(math.tanh(x + y))


@fast
@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_tanh_difference_is_bounded_and_odd(x, y):
    v = _tanh_diff(x, y)
    assert abs(v) <= 2.0 and np.isfinite(v)
    assert abs(_tanh_diff(x, -y) + v) <= 4.5e-16


@fast
@given(st.floats(0.5, 40), st.floats(0.0, 3.0))
def test_vacua_and_barrier(eta, lam):
    p = ScalarPotential(eta, lam)
    assert abs(p.deriv(p.phi_false)) < 1e-9 * eta and abs(p.deriv(p.phi_true)) < 1e-9 * eta
    assert p.v_true <= 1e-12 * eta
    assert p(0.0) > 0


@fast
@given(st.floats(0.2, 1.5), st.floats(-4, 4), st.sampled_from(["symmetric", "asymmetric", "rdependent"]))
def test_ansatz_stays_between_vacua(sigma, R, variant):
    p = ScalarPotential(16.0, 1.0)
    a = AnsatzFamily(p, sigma, 2, variant)
    phi = ansatz_value(a, R, np.linspace(0, 20, 81))
    lo = p.phi_false - (p.delta_phi if variant == "asymmetric" else 0.0)
    assert np.all(phi >= lo - 1e-12) and np.all(phi <= p.phi_true + 1e-12)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.3, 1.2), st.floats(0.05, 2.0))
def test_reduction_parity_and_positivity(sigma, R):
    a = AnsatzFamily(ScalarPotential(16.0, 1.0), sigma, 2)
    assert compute_K(a, R) > 0
    assert compute_U(a, R) == compute_U(a, -R)


@fast
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_interval_weights_measure_overlap(a, b):
    lo, hi = min(a, b), max(a, b)
    R = np.linspace(-2, 2, 41)
    w = interval_weights(R, lo, hi)
    assert math.isclose(w.sum(), max(0.0, min(hi, 2) - max(lo, -2)), abs_tol=1e-12)
    assert np.all(w >= 0)


@fast
@given(st.floats(0.1, 20), st.floats(0.05, 50))
def test_thermal_weights_geometric(omega, T):
    w = thermal_weights(omega, T)
    assert math.isclose(w.sum(), 1.0, rel_tol=1e-12)
    if w.size > 1:
        assert np.allclose(w[1:] / w[:-1], math.exp(-omega / T), rtol=1e-10)


def _system(K, U):
    n = K.size
    R = np.linspace(-1, 1, n)
    return ReducedSystem(R, K, U, float(K[n // 2]), 1.0, 0.5, 1.0, 1)


@fast
@given(arrays(float, 31, elements=st.floats(0.1, 10)), arrays(float, 31, elements=st.floats(-5, 5)))
def test_hamiltonian_symmetric_for_any_mass(K, U):
    H = hamiltonian_matrix(_system(K, U))
    assert np.array_equal(H, H.T)


@settings(max_examples=15, deadline=None)
@given(arrays(float, 31, elements=st.floats(0.1, 10)), arrays(float, 31, elements=st.floats(-5, 5)),
       st.integers(0, 2**32 - 1))
def test_undamped_steps_are_unitary(K, U, seed):
    rs = _system(K, U)
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=31) + 1j * rng.normal(size=31)
    psi[0] = psi[-1] = 0
    ev = Evolver(rs, EvolverConfig(dt=0.01, gamma=0.0, t_final=0.2, output_interval=0.01, smoothing_window=0.05))
    tr = ev.evolve(WaveState(psi, rs.grid))
    assert np.allclose(tr.norm, tr.norm[0], rtol=1e-12)


@fast
@given(st.floats(0.1, 3.0), st.floats(1.0, 30.0), st.floats(1e-9, 1e-5), st.floats(0.0, 5.0),
       st.lists(st.floats(0.1, 3.0), min_size=1, max_size=4))
def test_config_text_round_trip(lam, eta, gamma, T, lams):
    cfg = RunConfig(lam=lam, eta=eta, gamma=gamma, temperature=T, sweep_lambda=lams).validate()
    assert parse_text(cfg.dumps()) == cfg
