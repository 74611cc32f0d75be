"""Real-time evolution of the collective-coordinate wave function.

The equation solved is

    i d_t psi = -d_R ( d_R psi / (2 K(R)) ) + U(R) psi - i (gamma/2) d_R^4 psi

on a uniform grid with psi = 0 at both ends.  The fourth-derivative term
damps grid-scale waves that run down the potential toward the edges.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time as _time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .kernels import BandedStepper
from .reduction import Grid, ReducedSystem

log = logging.getLogger(__name__)


class GridTooNarrow(ValueError):
    pass


class StabilityViolation(RuntimeError):
    pass


class TruncationInsufficient(ValueError):
    pass


class ConfigError(ValueError):
    pass


@dataclass
class WaveState:
    amplitudes: np.ndarray
    grid: Grid
    time: float = 0.0

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dx)


@dataclass(frozen=True)
class EvolverConfig:
    dt: float = 1e-3
    gamma: float = 1e-6
    t_final: float = 20.0
    R0_scale: float | None = None
    smoothing_window: float = 0.2
    output_interval: float = 0.01
    check_tuning: bool = True

    def validate(self, dx: float, R0: float | None = None) -> None:
        bad = [k for k in ("dt", "t_final", "smoothing_window", "output_interval") if not getattr(self, k) > 0]
        if self.gamma < 0:
            bad.append("gamma")
        if bad:
            raise ConfigError(f"non-positive evolver settings: {', '.join(bad)}")
        if self.gamma > 0 and self.check_tuning:
            R0 = self.R0_scale if self.R0_scale is not None else R0
            grid_damp, slow_damp = dissipation_numbers(self.gamma, dx, self.dt, R0, self.t_final)
            if not 0.1 <= grid_damp <= 10.0:
                raise ConfigError(
                    f"grid-scale damping per step {grid_damp:.3g} outside [0.1, 10]; "
                    f"use dt near {dx**4 / (8 * math.pi**4 * self.gamma):.3g}"
                )
            if R0 is not None and not slow_damp < 0.1:
                raise ConfigError(f"damping of R0-scale modes over the run is {slow_damp:.3g} (needs < 0.1)")


def dissipation_numbers(gamma, dx, dt, R0, t_final):
    """Damping of a dx-wavelength mode per step and of an R0-wavelength mode over the run."""
    grid = 0.5 * gamma * 16 * math.pi**4 / dx**4 * dt
    slow = 0.5 * gamma * 16 * math.pi**4 / R0**4 * t_final if R0 else float("nan")
    return grid, slow


def tuned_dt(gamma: float, dx: float, target: float = 1.0) -> float:
    """Time step giving ``target`` damping per step for dx-wavelength modes."""
    return target * dx**4 / (8 * math.pi**4 * gamma)


@dataclass
class DecayTrace:
    times: np.ndarray
    p_false: np.ndarray
    gamma_inst: np.ndarray
    norm: np.ndarray
    metadata: dict = field(default_factory=dict)

    def plateau(self, fraction: float = 0.2, rel_std: float = 0.1, p_floor: float = 1e-10):
        """Mean of Gamma over the final ``fraction`` of the run.

        The run is cut where ``P_F`` first drops below ``p_floor`` times its
        initial value: past that point the interior holds only round-off and
        residual reflections.  Returns ``(mean, reached)``; ``reached`` is
        False when the windowed standard deviation exceeds ``rel_std`` of
        the mean.
        """
        low = np.flatnonzero(self.p_false < p_floor * self.p_false[0])
        n = low[0] if low.size else self.times.size
        if n < 2:
            return float("nan"), False
        tail = self.gamma_inst[int(math.floor((1 - fraction) * (n - 1))):n]
        mean = float(np.mean(tail))
        std = float(np.std(tail))
        return mean, bool(mean > 0 and std < rel_std * mean)

    def value_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.p_false))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "P_F", "Gamma"])
            for row in zip(self.times, self.p_false, self.gamma_inst):
                w.writerow([f"{v:.16e}" for v in row])

    def write(self, csv_path, json_path=None) -> None:
        self.to_csv(csv_path)
        if json_path is not None:
            with open(json_path, "w") as fh:
                json.dump(self.metadata, fh, indent=2, sort_keys=True, default=_jsonable)
                fh.write("\n")

    @classmethod
    def from_csv(cls, path, metadata=None) -> DecayTrace:
        t, p, g = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2).T
        return cls(t, p, g, np.full_like(t, np.nan), metadata or {})


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def hermite_functions(x: np.ndarray, nmax: int) -> np.ndarray:
    """Normalised Hermite functions ``h_0..h_nmax`` at ``x`` (rows)."""
    out = np.empty((nmax + 1, x.size))
    out[0] = math.pi**-0.25 * np.exp(-0.5 * x * x)
    if nmax >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(1, nmax):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * x * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def harmonic_state(rs: ReducedSystem, n: int, grid: Grid | None = None, edge_tol: float = 1e-12) -> WaveState:
    """n-th eigenstate of the harmonic approximation at the false vacuum."""
    if n < 0:
        raise ValueError("n must be non-negative")
    grid = grid or rs.grid
    R = grid.points
    alpha = math.sqrt(rs.K0 * rs.Upp0)
    psi = alpha**0.25 * hermite_functions(math.sqrt(alpha) * R, n)[n]
    peak = np.max(np.abs(psi))
    if max(abs(psi[0]), abs(psi[-1])) > edge_tol * max(peak, 1.0):
        raise GridTooNarrow(f"harmonic state n={n} has amplitude {max(abs(psi[0]), abs(psi[-1])):.2e} at the grid edge")
    psi[0] = psi[-1] = 0.0
    psi /= math.sqrt(np.sum(psi**2) * grid.dx)
    return WaveState(psi.astype(np.complex128), grid, 0.0)


def midpoint_inverse_mass(rs: ReducedSystem) -> np.ndarray:
    """``1 / (2 K)`` at the cell midpoints of the tabulation grid."""
    mid = 0.5 * (rs.R[1:] + rs.R[:-1])
    return 0.5 / CubicSpline(rs.R, rs.K)(mid)


def hamiltonian_bands(rs: ReducedSystem):
    """Diagonal and first off-diagonal of the interior-node Hamiltonian.

    The kinetic part uses the flux form ``-[c_{j+1/2}(psi_{j+1}-psi_j) -
    c_{j-1/2}(psi_j-psi_{j-1})]/dx^2`` so the matrix is real symmetric.
    """
    dx = rs.grid.dx
    c = midpoint_inverse_mass(rs)
    diag = (c[:-1] + c[1:]) / dx**2 + rs.U[1:-1]
    off = -c[1:-1] / dx**2
    return diag, off


def hamiltonian_matrix(rs: ReducedSystem) -> np.ndarray:
    diag, off = hamiltonian_bands(rs)
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def _d4_bands(m: int, dx: float):
    """Square of the Dirichlet second-difference matrix (bands 0, 1, 2)."""
    d0 = np.full(m, 6.0)
    d0[0] = d0[-1] = 5.0
    return d0 / dx**4, np.full(m - 1, -4.0) / dx**4, np.full(m - 2, 1.0) / dx**4


def cn_bands(rs: ReducedSystem, dt: float, gamma: float):
    """Band storage (ku = kl = 2) of ``I - dt/2 A`` and ``I + dt/2 A``, ``A = -iH - gamma/2 D4``."""
    diag, off = hamiltonian_bands(rs)
    m = diag.size
    e0, e1, e2 = _d4_bands(m, rs.grid.dx)
    a0 = -1j * diag - 0.5 * gamma * e0
    a1 = -1j * off - 0.5 * gamma * e1
    a2 = -0.5 * gamma * e2 + 0j

    def pack(sign):
        ab = np.zeros((5, m), dtype=np.complex128)
        ab[2] = 1.0 + sign * 0.5 * dt * a0
        ab[1, 1:] = sign * 0.5 * dt * a1
        ab[3, :-1] = sign * 0.5 * dt * a1
        ab[0, 2:] = sign * 0.5 * dt * a2
        ab[4, :-2] = sign * 0.5 * dt * a2
        return ab

    return pack(-1.0), pack(+1.0)


def false_vacuum_weights(rs: ReducedSystem) -> np.ndarray:
    """Weights ``w`` with ``sum(w * |psi|^2)`` = integral of the piecewise-linear
    density over the false-vacuum region of ``rs``."""
    R = rs.R
    lo = -rs.R_Umax if rs.interior == "between" else R[0]
    hi = rs.R_Umax
    return interval_weights(R, lo, hi)


def interval_weights(R: np.ndarray, lo: float, hi: float) -> np.ndarray:
    w = np.zeros(R.size)
    lo = max(lo, R[0])
    hi = min(hi, R[-1])
    for j in range(R.size - 1):
        a, b = R[j], R[j + 1]
        s, e = max(a, lo), min(b, hi)
        if e <= s:
            continue
        h = b - a
        # integral over [s, e] of the linear hat functions of nodes j and j+1
        ta, tb = (s - a) / h, (e - a) / h
        w[j] += h * ((tb - ta) - 0.5 * (tb**2 - ta**2))
        w[j + 1] += h * 0.5 * (tb**2 - ta**2)
    return w


def prob_false(ws: WaveState, rs: ReducedSystem) -> float:
    w = false_vacuum_weights(rs)
    return float(w @ (np.abs(ws.amplitudes) ** 2))


class Evolver:
    """Pre-factorised stepper for a fixed system, grid and configuration."""

    def __init__(self, rs: ReducedSystem, cfg: EvolverConfig, use_numba=None):
        R0 = cfg.R0_scale if cfg.R0_scale is not None else 2 * math.pi * rs.harmonic_width
        cfg.validate(rs.grid.dx, R0)
        self.rs, self.cfg, self.R0 = rs, cfg, R0
        lhs, rhs = cn_bands(rs, cfg.dt, cfg.gamma)
        self.stepper = BandedStepper(lhs, rhs, 2, 2, use_numba=use_numba)
        self.w_false = false_vacuum_weights(rs)[1:-1]

    def step(self, ws: WaveState) -> WaveState:
        before = ws.norm()
        inner = self.stepper.step(ws.amplitudes[1:-1])
        out = np.zeros_like(ws.amplitudes)
        out[1:-1] = inner
        new = WaveState(out, ws.grid, ws.time + self.cfg.dt)
        if not np.all(np.isfinite(inner)):
            raise StabilityViolation("non-finite amplitudes after step")
        if self.cfg.gamma == 0 and new.norm() - before > 1e-6 * before:
            raise StabilityViolation("norm grew during a step with no dissipation")
        return new

    def evolve(self, initial: WaveState) -> DecayTrace:
        cfg = self.cfg
        nsteps = int(round(cfg.t_final / cfg.dt))
        stride = max(1, int(round(cfg.output_interval / cfg.dt)))
        wall = _time.perf_counter()
        final, pf, norm = self.stepper.run(initial.amplitudes[1:-1], nsteps, stride, self.w_false)
        wall = _time.perf_counter() - wall
        if not np.all(np.isfinite(final)):
            raise StabilityViolation("non-finite amplitudes during evolution")
        times = initial.time + np.arange(pf.size) * stride * cfg.dt
        norm = norm * self.rs.grid.dx
        g = decay_rate(times, pf, cfg.smoothing_window)
        meta = {
            "evolver": asdict(cfg),
            "R0_scale": self.R0,
            "grid": asdict(self.rs.grid),
            "reduced": dict(self.rs.provenance),
            "K0": self.rs.K0,
            "Upp0": self.rs.Upp0,
            "R_Umax": self.rs.R_Umax,
            "U_max": self.rs.U_max,
            "wall_clock_s": wall,
        }
        self.final_state = WaveState(np.concatenate([[0], final, [0]]), initial.grid, times[-1])
        return DecayTrace(times, pf, g, norm, meta)


def decay_rate(times: np.ndarray, p_false: np.ndarray, window: float) -> np.ndarray:
    """``-d ln P_F / dt`` as a centred difference across ``window``.

    Near the ends the stencil shrinks to the available samples.
    """
    n = times.size
    if n < 2:
        return np.zeros(n)
    dt = times[1] - times[0]
    m = max(1, int(round(0.5 * window / dt)))
    idx = np.arange(n)
    hi = np.minimum(idx + m, n - 1)
    lo = np.maximum(idx - m, 0)
    lp = np.log(np.maximum(p_false, 1e-300))
    return -(lp[hi] - lp[lo]) / (times[hi] - times[lo])


def step(ws: WaveState, rs: ReducedSystem, cfg: EvolverConfig) -> WaveState:
    return Evolver(rs, cfg).step(ws)


def evolve(initial: WaveState, rs: ReducedSystem, cfg: EvolverConfig) -> DecayTrace:
    _warn_wide_state(rs)
    return Evolver(rs, cfg).evolve(initial)


def _warn_wide_state(rs: ReducedSystem) -> None:
    if rs.harmonic_width > rs.R_Umax / 3:
        warnings.warn(
            f"harmonic width {rs.harmonic_width:.3g} exceeds R_Umax/3 = {rs.R_Umax / 3:.3g}; "
            "the initial state is not well localised inside the barrier",
            stacklevel=3,
        )


def thermal_weights(omega: float, temperature: float, n_max: int | None = None, cutoff: float = 0.999):
    """Boltzmann weights ``~ exp(-n omega / T)`` normalised over ``0..n_max``.

    With ``n_max=None`` the smallest level count reaching ``cutoff`` of the
    untruncated geometric sum is used, extended until the last kept level
    carries at most ``1 - cutoff`` of the renormalised weight.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    q = math.exp(-omega / temperature)
    if n_max is None:
        n_max = 0 if q == 0 else max(0, int(math.ceil(math.log(1 - cutoff) / math.log(q))) - 1)
        while 1 - q ** (n_max + 1) < cutoff:
            n_max += 1
        while n_max > 0 and q ** n_max * (1 - q) / (1 - q ** (n_max + 1)) > 1 - cutoff:
            n_max += 1
    w = q ** np.arange(n_max + 1, dtype=float)
    return w / w.sum()


def thermal_trace(rs: ReducedSystem, cfg: EvolverConfig, temperature: float,
                  n_max: int | None = None, grid: Grid | None = None) -> DecayTrace:
    """Boltzmann-weighted average of P_F over harmonic initial states."""
    if temperature == 0:
        weights = np.array([1.0])
    else:
        weights = thermal_weights(rs.omega, temperature, n_max)
    if weights.size > 1 and weights[-1] > 1e-3:
        raise TruncationInsufficient(
            f"level {weights.size - 1} carries weight {weights[-1]:.2e}; raise n_max"
        )
    _warn_wide_state(rs)
    ev = Evolver(rs, cfg)
    pf = None
    members = []
    for n, w in enumerate(weights):
        tr = ev.evolve(harmonic_state(rs, n, grid))
        pf = w * tr.p_false if pf is None else pf + w * tr.p_false
        members.append({"n": n, "weight": float(w), "wall_clock_s": tr.metadata["wall_clock_s"]})
    g = decay_rate(tr.times, pf, cfg.smoothing_window)
    meta = dict(tr.metadata)
    meta.update(temperature=temperature, members=members)
    return DecayTrace(tr.times, pf, g, np.full_like(pf, np.nan), meta)
