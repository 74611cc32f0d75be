"""Two-component condensate reduced to the bubble radius R.

The relative phase of the two components follows the Ansatz

    phi_R(r) = pi * [1 - tanh((r - R)/sigma)/2 + tanh((r + R)/sigma)/2]

while the common density ``rho_R`` and its first-order response
``gamma_R`` (in the velocity ``R'``) are obtained from two radial
boundary-value problems for every R.  Units: hbar = m = rho_m = 1 unless
``rho_m`` is set otherwise.

Both problems are discretised on a uniform vertex grid ``r_i = i h`` by the
finite-volume form of ``(1/r) d/dr (r d/dr)``: cell fluxes at ``r_{i+1/2}``
and node volumes ``v_i = r_i h`` (``h^2/8`` at the centre).  The density
problem is then the exact stationarity condition of the discrete energy
used for U(R), and the response problem is symmetric, so the discrete K(R)
is the value of the discrete quadratic form at its extremum.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from .instanton import bounce_profile
from .model import _sech2, _tanh_diff
from .reduction import BarrierNotFound, Grid, ReducedSystem, locate_barrier, second_derivative_at_zero

log = logging.getLogger(__name__)


class NewtonDivergence(RuntimeError):
    pass


class SingularOperator(RuntimeError):
    pass


@dataclass(frozen=True)
class CondensateModel:
    """Model parameters; ``eta_c`` is the coupling of the squared term."""

    g0: float = 1.0
    lam: float = 0.25
    eta_c: float = 0.8
    rho_m: float = 1.0
    winding: int = 0
    sigma: float = 1.0

    def __post_init__(self):
        for k in ("g0", "lam", "eta_c", "rho_m", "sigma"):
            if not getattr(self, k) > 0:
                raise ValueError(f"{k} must be positive")
        if self.winding < 0 or int(self.winding) != self.winding:
            raise ValueError("winding must be a non-negative integer")
        if not self.lam < 2 * self.g0 * self.rho_m:
            raise ValueError("no false vacuum: need lam < 2 g0 rho_m")
        gap = self.g0 * self.rho_m - self.lam
        if gap <= 0 or not self.eta_c > self.g0 / (2 * gap):
            raise ValueError("no false vacuum: need eta > g0 / (2 (g0 rho_m - lam))")
        if self.w_coeff(self.rho_false, math.pi) <= 0:
            raise ValueError("false vacuum unstable against relative density fluctuations (need 2 lam < g0 rho_m)")

    def with_sigma(self, sigma: float) -> CondensateModel:
        return CondensateModel(self.g0, self.lam, self.eta_c, self.rho_m, self.winding, sigma)

    def with_winding(self, winding: int) -> CondensateModel:
        return CondensateModel(self.g0, self.lam, self.eta_c, self.rho_m, winding, self.sigma)

    @property
    def rho_false(self) -> float:
        return self.rho_m - self.lam / self.g0

    @property
    def rho_true(self) -> float:
        return self.rho_m + self.lam / self.g0

    @property
    def sound_speed(self) -> float:
        return math.sqrt(self.g0 * self.rho_false)

    @property
    def healing_length(self) -> float:
        return 1.0 / math.sqrt(self.g0 * self.rho_false)

    # potential with both densities equal to rho
    def potential(self, rho, phi):
        s2 = np.sin(phi) ** 2
        return (self.g0 * (rho - self.rho_m) ** 2 - 2 * self.lam * rho * np.cos(phi)
                + 2 * self.lam * self.eta_c * rho * rho * s2)

    def dV_drho(self, rho, phi):
        """Derivative of ``V(rho, rho, phi)`` along equal densities."""
        return (2 * self.g0 * (rho - self.rho_m) - 2 * self.lam * np.cos(phi)
                + 4 * self.lam * self.eta_c * rho * np.sin(phi) ** 2)

    def d2V_drho2(self, rho, phi):
        return 2 * self.g0 + 4 * self.lam * self.eta_c * np.sin(phi) ** 2 + 0 * rho

    def w_coeff(self, rho, phi):
        """``d^2V/drho_+^2 - d^2V/drho_+ drho_-`` at equal densities."""
        return self.g0 + self.lam * np.cos(phi) / rho - 2 * self.lam * self.eta_c * np.sin(phi) ** 2

    def local_density(self, phi):
        """Density minimising V(rho, rho, phi) at fixed phase."""
        return (self.g0 * self.rho_m + self.lam * np.cos(phi)) / (self.g0 + 2 * self.lam * self.eta_c * np.sin(phi) ** 2)

    @property
    def v_false(self) -> float:
        return float(self.potential(self.rho_false, math.pi))


def phase_ansatz(m: CondensateModel, R, r):
    x, y = np.asarray(r) / m.sigma, np.asarray(R) / m.sigma
    return math.pi + 0.5 * math.pi * _tanh_diff(x, y)


def phase_dr(m: CondensateModel, R, r):
    x, y = np.asarray(r) / m.sigma, np.asarray(R) / m.sigma
    return 0.5 * math.pi / m.sigma * (_sech2(x + y) - _sech2(x - y))


def phase_dR(m: CondensateModel, R, r):
    x, y = np.asarray(r) / m.sigma, np.asarray(R) / m.sigma
    return 0.5 * math.pi / m.sigma * (_sech2(x + y) + _sech2(x - y))


@dataclass(frozen=True)
class RadialGrid:
    """Vertex grid ``0, h, ..., r_max`` with finite-volume weights."""

    r_max: float
    n: int

    @classmethod
    def for_range(cls, m: CondensateModel, R_max: float, h: float | None = None, pad: float = 15.0):
        h = h if h is not None else min(0.1 * m.sigma, 0.1 * m.healing_length)
        r_max = abs(R_max) + pad * max(m.sigma, m.healing_length)
        n = int(math.ceil(r_max / h))
        return cls(n * h, n + 1)

    @property
    def h(self) -> float:
        return self.r_max / (self.n - 1)

    @property
    def r(self) -> np.ndarray:
        return self.h * np.arange(self.n)

    @property
    def r_half(self) -> np.ndarray:
        """Cell-face radii ``r_{i+1/2}``, ``i = 0 .. n-2``."""
        return self.h * (np.arange(self.n - 1) + 0.5)

    @property
    def volumes(self) -> np.ndarray:
        h = self.h
        v = self.r * h
        v[0] = h * h / 8
        v[-1] = 0.5 * h * (self.r_max - 0.25 * h)
        return v


@dataclass
class DensityProfiles:
    r_grid: np.ndarray
    rho: np.ndarray
    gamma_resp: np.ndarray
    R: float
    newton_iterations: int = 0
    newton_residual: float = 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", "rho", "gamma"])
            for row in zip(self.r_grid, self.rho, self.gamma_resp):
                w.writerow([f"{v:.16e}" for v in row])


def _flux_bands(g: RadialGrid, scale: float = 1.0):
    """Band form (3 x n) of the flux difference ``sum_faces r_f (u_j - u_i)/h``."""
    c = scale * g.r_half / g.h
    ab = np.zeros((3, g.n))
    ab[0, 1:] = c
    ab[2, :-1] = c
    ab[1, :-1] -= c
    ab[1, 1:] -= c
    return ab


def _flux_apply(g: RadialGrid, u):
    c = g.r_half / g.h
    flux = c * np.diff(u)
    out = np.zeros_like(u)
    out[:-1] += flux
    out[1:] -= flux
    return out


def _centrifugal(m: CondensateModel, g: RadialGrid):
    r = g.r
    c = np.zeros_like(r)
    if m.winding:
        c[1:] = m.winding**2 / r[1:] ** 2
    return c


def _free_slice(m: CondensateModel, g: RadialGrid) -> slice:
    # the outer node is pinned to the false vacuum; the centre is pinned to 0 around a vortex
    return slice(1 if m.winding else 0, g.n - 1)


def initial_density(m: CondensateModel, R: float, g: RadialGrid) -> np.ndarray:
    """Local-density guess, with a ``tanh^2`` core around a vortex."""
    phi = phase_ansatz(m, R, g.r)
    rho = m.local_density(phi)
    if m.winding:
        rho = rho * np.tanh(g.r / (math.sqrt(2.0) * m.healing_length)) ** (2 * m.winding)
    return rho


def _phase(m, R, g):
    """Phase and squared radial phase gradient on the grid."""
    return phase_ansatz(m, R, g.r), phase_dr(m, R, g.r) ** 2


def solve_rho(m: CondensateModel, R: float, grid: RadialGrid, tol: float = 1e-10, max_iter: int = 60,
              initial: np.ndarray | None = None):
    """Newton relaxation for ``f = sqrt(rho_R)``.

    Returns ``(rho, diagnostics)`` with ``diagnostics = {"iterations", "residual"}``;
    the residual is the max over free nodes of the equation divided by the
    node volume, i.e. in the units of ``(1/r)(r f')' - f * (...)``.
    """
    g = grid
    phi, dr2 = _phase(m, R, g)
    cent = _centrifugal(m, g)
    vol = g.volumes
    free = _free_slice(m, g)
    f = np.sqrt(initial if initial is not None else initial_density(m, R, g))
    f[-1] = math.sqrt(m.rho_false)
    if m.winding:
        f[0] = 0.0
    lap = _flux_bands(g)

    def resid(f):
        F = _flux_apply(g, f) - vol * f * (0.25 * dr2 + cent + m.dV_drho(f * f, phi))
        return F[free]

    def norm(F):
        return float(np.max(np.abs(F / vol[free])))

    F = resid(f)
    err = norm(F)
    it = 0
    while err > tol:
        if it >= max_iter:
            raise NewtonDivergence(f"density Newton stalled at residual {err:.3g} after {it} iterations (R={R})")
        rho = f * f
        diag = vol * (0.25 * dr2 + cent + m.dV_drho(rho, phi) + 2 * rho * m.d2V_drho2(rho, phi))
        J = lap.copy()
        J[1] -= diag
        Jf = J[:, free]
        # trim the couplings to pinned nodes
        Jf = Jf.copy()
        Jf[0, 0] = 0.0
        Jf[2, -1] = 0.0
        step = solve_banded((1, 1), Jf, -F)
        t = 1.0
        while True:
            trial = f.copy()
            trial[free] += t * step
            if np.all(trial[free] > 0) or m.winding:
                Ft = resid(trial)
                et = norm(Ft)
                if et < err or t < 1e-4:
                    break
            t *= 0.5
            if t < 1e-4:
                raise NewtonDivergence(f"line search failed at residual {err:.3g} (R={R})")
        f, F, err = trial, Ft, et
        it += 1
    return f * f, {"iterations": it, "residual": err}


def _gamma_Q(m, rho, phi, dr2, cent):
    # d_r(r d_r sqrt(rho))/(r rho^{3/2}) replaced through the density equation
    return 0.25 * (0.25 * dr2 + cent + m.dV_drho(rho, phi)) + m.w_coeff(np.maximum(rho, 1e-300), phi) * rho


def solve_gamma(m: CondensateModel, R: float, rho: np.ndarray, grid: RadialGrid, tol: float = 1e-10,
                source: np.ndarray | None = None) -> np.ndarray:
    """Linear response ``gamma_R`` to the source ``d phi_R / dR / 2``.

    Written for ``u = gamma / sqrt(rho)`` the problem reads
    ``(1/4)(1/r)(r u')' - Q u = sqrt(rho) * s`` with ``s`` the source.
    """
    g = grid
    phi, dr2 = _phase(m, R, g)
    cent = _centrifugal(m, g)
    vol = g.volumes
    free = _free_slice(m, g)
    f = np.sqrt(rho)
    s = 0.5 * phase_dR(m, R, g.r) if source is None else np.asarray(source, dtype=float)
    Q = _gamma_Q(m, rho, phi, dr2, cent)
    if m.winding:
        Q[0] = 0.0
    A = _flux_bands(g, 0.25)
    A[1] -= vol * Q
    Af = A[:, free].copy()
    Af[0, 0] = 0.0
    Af[2, -1] = 0.0
    b = (vol * f * s)[free]
    try:
        u_free = solve_banded((1, 1), Af, b)
    except np.linalg.LinAlgError as exc:
        raise SingularOperator(str(exc)) from exc
    if not np.all(np.isfinite(u_free)):
        raise SingularOperator("response operator is numerically singular")
    u = np.zeros(g.n)
    u[free] = u_free
    return f * u


def gamma_residual(m: CondensateModel, R: float, rho, gamma, grid: RadialGrid) -> np.ndarray:
    """Residual of the response equation in its original form, on free interior nodes.

    ``(1/(4 r sqrt(rho))) (r (gamma/sqrt(rho))')' - s
    - [(r sqrt(rho)')'/(4 r rho^{3/2}) + W] gamma`` with discrete operators.
    """
    g = grid
    phi, _ = _phase(m, R, g)
    vol = g.volumes
    f = np.sqrt(rho)
    free = _free_slice(m, g)
    idx = np.arange(g.n)[free]
    idx = idx[f[idx] > 0]
    u = np.zeros(g.n)
    u[idx] = gamma[idx] / f[idx]
    lap_u = (_flux_apply(g, u) / vol)[idx]
    lap_f = (_flux_apply(g, f) / vol)[idx]
    s = 0.5 * phase_dR(m, R, g.r[idx])
    fi, gi = f[idx], gamma[idx]
    return lap_u / (4 * fi) - s - (lap_f / (4 * fi**3) + m.w_coeff(rho[idx], phi[idx])) * gi


def _energy_parts(m, g, rho, R, cent):
    phi, dr2 = _phase(m, R, g)
    f = np.sqrt(rho)
    cells = g.r_half * np.diff(f) ** 2 / g.h
    nodes = g.volumes * (rho * (0.25 * dr2 + cent) + m.potential(rho, phi))
    if m.winding:
        nodes[0] = g.volumes[0] * m.potential(0.0, phi[0])
    return cells, nodes


def condensate_K(m: CondensateModel, R: float, profiles: DensityProfiles, grid: RadialGrid) -> float:
    """``K(R) = -2 pi int gamma_R d_R phi_R r dr`` (hbar = 1)."""
    return float(-2 * math.pi * np.sum(grid.volumes * profiles.gamma_resp * phase_dR(m, R, grid.r)))


def condensate_U(m: CondensateModel, R: float, profiles: DensityProfiles, grid: RadialGrid,
                 reference: DensityProfiles | None = None) -> float:
    """Energy relative to the R = 0 state on the same grid.

    Without a vortex the reference is the homogeneous false vacuum; with one
    it is the R = 0 vortex, so the logarithmic vortex energy cancels.
    """
    cent = _centrifugal(m, grid)
    cells, nodes = _energy_parts(m, grid, profiles.rho, R, cent)
    if reference is None and m.winding == 0:
        nodes = nodes - grid.volumes * m.v_false
        return float(2 * math.pi * (cells.sum() + nodes.sum()))
    if reference is None:
        reference = solve_profiles(m, 0.0, grid)
    c0, n0 = _energy_parts(m, grid, reference.rho, 0.0, cent)
    return float(2 * math.pi * ((cells - c0).sum() + (nodes - n0).sum()))


def solve_profiles(m: CondensateModel, R: float, grid: RadialGrid, tol: float = 1e-10) -> DensityProfiles:
    rho, info = solve_rho(m, R, grid, tol)
    gam = solve_gamma(m, R, rho, grid, tol)
    return DensityProfiles(grid.r, rho, gam, float(R), info["iterations"], info["residual"])


def _KU_at(args):
    m, R, grid, tol, ref = args
    prof = solve_profiles(m, R, grid, tol)
    return condensate_K(m, R, prof, grid), condensate_U(m, R, prof, grid, ref)


def condensate_harmonic(m: CondensateModel, h: float | None = None, tol: float = 1e-10):
    """``(K(0), U''(0))`` of the reduction, without tabulating a grid."""
    rg = RadialGrid.for_range(m, 0.5 * m.sigma, h)
    ref = solve_profiles(m, 0.0, rg, tol)
    K0 = condensate_K(m, 0.0, ref, rg)
    Upp0 = second_derivative_at_zero(lambda x: _KU_at((m, abs(x), rg, tol, ref))[1], 0.05 * m.sigma)
    return K0, Upp0


def condensate_half_width(m: CondensateModel, depth: float = 20.0, dx: float | None = None, kdx: float = 2.0,
                          h: float | None = None, tol: float = 1e-10) -> float:
    """Smallest scanned L beyond the barrier with U(L) < -depth * U_max (see reduction.default_half_width)."""
    step = 0.25 * m.sigma
    x, best = step, -np.inf
    ref = None
    while True:
        grid = RadialGrid.for_range(m, x, h)
        if m.winding:
            ref = solve_profiles(m, 0.0, grid, tol)
        K, u = _KU_at((m, x, grid, tol, ref))
        best = max(best, u)
        if best > 0 and u < -depth * best:
            if dx is None or math.sqrt(2 * K * (best - u)) * dx >= kdx:
                return x
        x += step
        if x > 1e3:
            raise BarrierNotFound("condensate U does not fall below the barrier depth")


def condensate_reduced_system(m: CondensateModel, grid: Grid, tol: float = 1e-10, h: float | None = None,
                              jobs: int = 1) -> ReducedSystem:
    """K and U on a symmetric R grid, packaged like the relativistic reduction.

    Both are even in R, so only ``R >= 0`` is solved and mirrored.
    """
    R = grid.points
    if abs(grid.lo + grid.hi) > 1e-9 * grid.hi:
        raise ValueError("condensate reduction needs a grid symmetric about 0")
    Rp = R[grid.n // 2:]
    rg = RadialGrid.for_range(m, Rp[-1], h)
    ref = solve_profiles(m, 0.0, rg, tol) if m.winding else None
    tasks = [(m, float(x), rg, tol, ref) for x in Rp]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            out = list(ex.map(_KU_at, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        out = [_KU_at(t) for t in tasks]
    Kp = np.array([o[0] for o in out])
    Up = np.array([o[1] for o in out])
    K = np.concatenate([Kp[:0:-1], Kp])
    U = np.concatenate([Up[:0:-1], Up])
    h_curv = 0.05 * m.sigma

    def u_of(x):
        return _KU_at((m, abs(x), rg, tol, ref))[1]

    Upp0 = second_derivative_at_zero(u_of, h_curv)
    R_Umax, U_max = locate_barrier(u_of, R, U, tol=1e-8)
    prov = {
        "system": "coldatom",
        "g0": m.g0,
        "lambda": m.lam,
        "eta": m.eta_c,
        "rho_m": m.rho_m,
        "winding": m.winding,
        "sigma": m.sigma,
        "r_max": rg.r_max,
        "h": rg.h,
        "tol": tol,
    }
    return ReducedSystem(R, K, U, float(Kp[0]), Upp0, R_Umax, U_max, 2, "between", prov)


def expansion_parameter(m: CondensateModel, rs: ReducedSystem, h: float | None = None, tol: float = 1e-10) -> float:
    """``max |gamma_R| R'/rho_F`` at the barrier top, with ``R'`` from ``K R'^2/2 = U_max``."""
    rg = RadialGrid.for_range(m, rs.R_Umax, h)
    prof = solve_profiles(m, rs.R_Umax, rg, tol)
    K = float(np.interp(rs.R_Umax, rs.R, rs.K))
    v = math.sqrt(2 * rs.U_max / K)
    val = float(np.max(np.abs(prof.gamma_resp)) * v / m.rho_false)
    log.info("expansion parameter max|gamma| R'/rho_F = %.3g (R' ~ %.3g, c0 = %.3g)", val, v, m.sound_speed)
    return val


def _phase_potential(m: CondensateModel):
    """``U(phi) = V(rho_loc, rho_loc, phi) - V_F`` and its first two derivatives."""
    lam, eta = m.lam, m.eta_c

    def rho_and_slope(phi):
        num = m.g0 * m.rho_m + lam * np.cos(phi)
        den = m.g0 + 2 * lam * eta * np.sin(phi) ** 2
        return num / den, (-lam * np.sin(phi) * den - num * 2 * lam * eta * np.sin(2 * phi)) / den**2

    def u(phi):
        return m.potential(m.local_density(phi), phi) - m.v_false

    def du(phi):
        # envelope theorem: the density is stationary at rho_loc
        rho = m.local_density(phi)
        return 2 * lam * rho * np.sin(phi) + 2 * lam * eta * rho**2 * np.sin(2 * phi)

    def d2u(phi):
        rho, drho = rho_and_slope(phi)
        return (2 * lam * (drho * np.sin(phi) + rho * np.cos(phi))
                + 2 * lam * eta * (2 * rho * drho * np.sin(2 * phi) + 2 * rho**2 * np.cos(2 * phi)))

    return u, du, d2u


def field_level_bounce(m: CondensateModel, tol: float = 1e-12):
    """Bounce of the relative phase with density slaved to it and constant metrics.

    Linearising the kinetic terms about the false vacuum gives the action
    ``int [ M phi_t^2/2 + G phi_r^2/2 + U(phi) ]`` with ``M = 1/(2 W_F)`` and
    ``G = rho_F/2``.  Rescaling time turns it into an O(3) problem, whose
    action is returned as ``(S, profile)``; the profile is in rescaled time.
    Independent of ``sigma``; only winding 0 is meaningful.
    """
    if m.winding:
        raise ValueError("the field-level bounce is defined for winding 0")
    rho_f = m.rho_false
    M = 1.0 / (2.0 * float(m.w_coeff(rho_f, math.pi)))
    G = rho_f / 2.0
    u, du, d2u = _phase_potential(m)
    phis = np.linspace(math.pi, 2 * math.pi, 4001)
    vals = u(phis)
    top = int(np.argmax(vals))
    bar = brentq(u, float(phis[top]), 2 * math.pi, xtol=1e-14)
    rho_max = 40.0 * max(m.healing_length, m.sigma, 1.0) * math.sqrt(M / G)
    b = bounce_profile(lambda p: du(p) / G, lambda p: d2u(p) / G, lambda p: u(p) / G,
                       math.pi, bar, 2 * math.pi, 2, rho_max, tol)
    return math.sqrt(M * G) * b.S_E, b

