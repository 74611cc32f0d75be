import math

import numpy as np
import pytest

from conftest import harmonic_system, well_with_drop
from vacuumpath.evolver import (ConfigError, DecayTrace, Evolver, EvolverConfig, GridTooNarrow, TruncationInsufficient,
                                WaveState, decay_rate, false_vacuum_weights, hamiltonian_matrix, harmonic_state,
                                interval_weights, prob_false, thermal_trace, thermal_weights, tuned_dt)
from vacuumpath.reduction import Grid

# the toy wells are deliberately shallow compared with the harmonic width
pytestmark = pytest.mark.filterwarnings("ignore:harmonic width")


def _cfg(**kw):
    base = dict(dt=1e-3, gamma=0.0, t_final=1.0, output_interval=0.01, smoothing_window=0.1)
    base.update(kw)
    return EvolverConfig(**base)


def test_hamiltonian_is_real_symmetric():
    H = hamiltonian_matrix(well_with_drop())
    assert np.isrealobj(H)
    assert np.array_equal(H, H.T)


def test_discrete_spectrum_of_harmonic_well():
    rs = harmonic_system(n=1601)
    ev = np.linalg.eigvalsh(hamiltonian_matrix(rs))[:5]
    assert np.allclose(ev, np.arange(5) + 0.5, atol=1e-4)


def test_norm_conserved_without_damping():
    rs = well_with_drop()
    tr = Evolver(rs, _cfg()).evolve(harmonic_state(rs, 0))
    assert tr.times.size == 101
    assert np.max(np.abs(tr.norm - tr.norm[0])) < 1e-10


def test_harmonic_ground_state_is_stationary():
    rs = harmonic_system(n=1601)
    ws = harmonic_state(rs, 0)
    rho0 = np.abs(ws.amplitudes) ** 2
    ev = Evolver(rs, _cfg(dt=0.01, t_final=2 * math.pi, output_interval=0.1, smoothing_window=0.5))
    for _ in range(5):
        tr = ev.evolve(ws)
        ws = ev.final_state
        assert np.max(np.abs(np.abs(ws.amplitudes) ** 2 - rho0)) < 1e-6
    assert np.max(np.abs(tr.p_false - tr.p_false[0])) < 1e-9
    assert np.max(np.abs(tr.gamma_inst)) < 1e-8


@pytest.mark.parametrize("n", [0, 1, 2, 5, 10])
def test_harmonic_state_parity_and_node_count(n):
    rs = harmonic_system(n=1201, half_width=12.0)
    psi = harmonic_state(rs, n).amplitudes.real
    assert np.allclose(psi, (-1) ** n * psi[::-1], atol=1e-14)
    inner = psi[1:-1][np.abs(psi[1:-1]) > 1e-8]
    assert np.count_nonzero(np.diff(np.sign(inner))) == n


def test_harmonic_states_orthonormal():
    rs = harmonic_system(n=1201, half_width=12.0)
    S = np.array([harmonic_state(rs, n).amplitudes for n in range(11)])
    gram = (S.conj() @ S.T).real * rs.grid.dx
    assert np.max(np.abs(gram - np.eye(11))) < 1e-8


def test_harmonic_state_needs_room():
    with pytest.raises(GridTooNarrow):
        harmonic_state(harmonic_system(half_width=3.0, n=301), 0)
    with pytest.raises(ValueError):
        harmonic_state(harmonic_system(), -1)


def test_interval_weights_integrate_piecewise_linear_exactly():
    R = np.linspace(-1, 2, 31)
    w = interval_weights(R, -0.37, 1.23)
    assert w.sum() == pytest.approx(1.6, rel=1e-14)
    assert w @ R == pytest.approx(0.5 * (1.23**2 - 0.37**2), rel=1e-13)
    assert np.all(w[R < -0.5] == 0) and np.all(w[R > 1.4] == 0)


def test_prob_false_examples():
    rs = harmonic_system()
    # the Gaussian tail beyond R_Umax = 4 carries erfc(4) of the probability
    assert prob_false(harmonic_state(rs, 0), rs) == pytest.approx(1.0 - math.erfc(4.0), abs=1e-10)
    far = WaveState(np.where(np.abs(rs.R - 6.5) < 0.5, 1.0 + 0j, 0.0), rs.grid)
    assert prob_false(far, rs) == 0.0
    w = false_vacuum_weights(rs)
    assert w.sum() == pytest.approx(2 * rs.R_Umax, rel=1e-12)


def test_decay_rate_of_exponential():
    t = np.linspace(0, 5, 501)
    g = decay_rate(t, 0.7 * np.exp(-0.3 * t), 0.2)
    assert np.allclose(g, 0.3, rtol=1e-12)
    assert decay_rate(t[:1], np.ones(1), 0.2).tolist() == [0.0]


def test_thermal_weights():
    w = thermal_weights(2.0, 1.0)
    assert w.sum() == pytest.approx(1.0)
    assert np.allclose(w[1:] / w[:-1], math.exp(-2.0))
    assert 1 - math.exp(-2.0 * w.size) >= 0.999 and w[-1] <= 1e-3
    assert w[-2] / w[:-1].sum() > 1e-3
    assert thermal_weights(2.0, 1e-3).tolist() == [1.0]
    with pytest.raises(ValueError):
        thermal_weights(2.0, 0.0)


@pytest.mark.parametrize("omega, T", [(5.48, 1.0), (2.0, 1.0), (0.5, 3.0)])
def test_automatic_truncation_passes_its_own_check(omega, T):
    w = thermal_weights(omega, T)
    assert w.size > 1 and w[-1] <= 1e-3
    assert w[:-1].sum() / w.sum() >= 0.999


def test_thermal_trace_rejects_short_truncation():
    rs = harmonic_system()
    with pytest.raises(TruncationInsufficient):
        thermal_trace(rs, _cfg(), temperature=5.0, n_max=2)


def test_cold_limit_matches_ground_state():
    rs = well_with_drop()
    cfg = _cfg(gamma=1e-7, dt=tuned_dt(1e-7, rs.grid.dx), t_final=0.5)
    cold = thermal_trace(rs, cfg, temperature=0.05)
    zero = thermal_trace(rs, cfg, temperature=0.0)
    assert np.array_equal(cold.p_false, zero.p_false)


def test_thermal_mixture_is_weighted_average():
    rs = well_with_drop(n=1201, half_width=6.0)
    cfg = _cfg(gamma=1e-7, dt=tuned_dt(1e-7, rs.grid.dx), t_final=0.5)
    T = 3.0
    tr = thermal_trace(rs, cfg, T)
    w = thermal_weights(rs.omega, T)
    ev = Evolver(rs, cfg)
    manual = sum(wn * ev.evolve(harmonic_state(rs, n)).p_false for n, wn in enumerate(w))
    assert np.allclose(tr.p_false, manual, rtol=1e-12)
    assert len(tr.metadata["members"]) == w.size


@pytest.mark.parametrize("m", [3, 40, 200, 799])
def test_damping_matches_crank_nicolson_factor(m):
    # Dirichlet sine modes diagonalise both the kinetic term (constant K, U = 0) and D4
    rs = harmonic_system(omega=0.0)
    N = rs.R.size - 2
    j = np.arange(1, N + 1)
    mode = np.zeros(rs.R.size, dtype=complex)
    mode[1:-1] = np.sin(m * math.pi * j / (N + 1))
    mu = 4 / rs.grid.dx**2 * math.sin(m * math.pi / (2 * (N + 1))) ** 2
    gamma, dt, steps = 1e-6, 1e-3, 200
    a, b = 0.25 * dt * gamma * mu**2, 0.5 * dt * mu / 2
    factor = ((1 - a) ** 2 + b**2) / ((1 + a) ** 2 + b**2)
    ev = Evolver(rs, _cfg(gamma=gamma, dt=dt, t_final=steps * dt, check_tuning=False, R0_scale=1.0))
    ws = WaveState(mode, rs.grid)
    ev.evolve(ws)
    assert ev.final_state.norm() / ws.norm() == pytest.approx(factor**steps, rel=1e-9)


def test_damping_setting_checks():
    rs = harmonic_system()
    with pytest.raises(ConfigError):
        Evolver(rs, _cfg(gamma=1e-6, dt=1e-6))
    with pytest.raises(ConfigError):
        Evolver(rs, _cfg(dt=-1.0))
    with pytest.raises(ConfigError):
        Evolver(rs, _cfg(gamma=-1.0))


def test_leaking_well_decays():
    rs = well_with_drop()
    gamma = 1e-7
    cfg = _cfg(gamma=gamma, dt=tuned_dt(gamma, rs.grid.dx), t_final=3.0)
    tr = Evolver(rs, cfg).evolve(harmonic_state(rs, 0))
    assert tr.p_false[0] == pytest.approx(1.0, abs=1e-3)
    assert tr.p_false[-1] < 0.999
    assert np.mean(tr.gamma_inst[tr.times > 2.0]) > 0


def test_numba_and_numpy_paths_agree():
    from vacuumpath._jit import HAVE_NUMBA
    if not HAVE_NUMBA:
        pytest.skip("numba not installed")
    rs = well_with_drop()
    gamma = 1e-7
    cfg = _cfg(gamma=gamma, dt=tuned_dt(gamma, rs.grid.dx), t_final=0.5)
    a = Evolver(rs, cfg, use_numba=True).evolve(harmonic_state(rs, 0))
    b = Evolver(rs, cfg, use_numba=False).evolve(harmonic_state(rs, 0))
    assert np.allclose(a.p_false, b.p_false, rtol=0, atol=1e-12)


def test_step_matches_evolve():
    rs = well_with_drop()
    cfg = _cfg(dt=1e-3, t_final=0.01, output_interval=0.01)
    ev = Evolver(rs, cfg)
    ws = harmonic_state(rs, 1)
    for _ in range(10):
        ws = ev.step(ws)
    ev.evolve(harmonic_state(rs, 1))
    assert np.allclose(ws.amplitudes, ev.final_state.amplitudes, atol=1e-13)
    assert ws.time == pytest.approx(0.01)


def test_plateau_and_csv_round_trip(tmp_path):
    t = np.linspace(0, 10, 1001)
    p = np.exp(-0.2 * t)
    tr = DecayTrace(t, p, decay_rate(t, p, 0.5), np.ones_like(t))
    G, ok = tr.plateau()
    assert ok and G == pytest.approx(0.2)
    tr.to_csv(tmp_path / "trace.csv")
    back = DecayTrace.from_csv(tmp_path / "trace.csv")
    assert np.array_equal(back.p_false, tr.p_false)
    assert back.value_at(5.0) == pytest.approx(math.exp(-1.0))
    noisy = DecayTrace(t, p, 0.2 + 0.2 * np.sin(40 * t), np.ones_like(t))
    assert noisy.plateau()[1] is False


def test_plateau_stops_at_probability_floor():
    t = np.linspace(0, 10, 1001)
    g = np.where(t < 5, 5.0, -1.0)
    p = np.exp(-np.cumsum(g) * (t[1] - t[0]))
    G, _ = DecayTrace(t, p, g, np.ones_like(t)).plateau(p_floor=1e-10)
    assert G == pytest.approx(5.0)


def test_grid_points_are_uniform():
    g = Grid(-1.0, 1.0, 5)
    assert np.allclose(np.diff(g.points), g.dx)
