"""Euclidean bounces: O(d+1) field profile and the reduced one-coordinate bounce."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, simpson, solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .model import AnsatzFamily, ScalarPotential, sphere_area
from .reduction import (Grid, ReducedSystem, compute_K, compute_U, locate_barrier,
                        second_derivative_at_zero, tabulate)
from .search import golden_section


class BracketingFailure(RuntimeError):
    pass


class ToleranceUnreachable(RuntimeError):
    pass


class NoTurningPoint(RuntimeError):
    pass


class NoInteriorMinimum(RuntimeError):
    pass


@dataclass
class BounceProfile:
    rho_grid: np.ndarray
    phi: np.ndarray
    S_E: float
    dim: int
    phi0: float = float("nan")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rho", "phi"])
            for row in zip(self.rho_grid, self.phi):
                w.writerow([f"{v:.16e}" for v in row])


@dataclass
class ReducedBounce:
    turning_point: float
    S_E_reduced: float
    sigma: float = float("nan")


# ---------------------------------------------------------------------------
# field-theoretic bounce


def _bounce_rhs(d, dV):
    def rhs(rho, y):
        phi, dphi = y
        return [dphi, dV(phi) - d * dphi / rho]

    return rhs


def _shoot(phi0, d, dV, d2V, phi_false, rho_max, rtol, side=1.0, dense=False):
    """Integrate from the centre; return (+1 overshoot | -1 undershoot | 0, solution)."""
    # Series start keeps the d/rho friction regular: phi ~ phi0 + V'(phi0) rho^2 / (2(d+1)).
    a = dV(phi0) / (2.0 * (d + 1))
    curv = abs(d2V(phi0)) + 1e-300
    rho0 = min(1e-3, 1e-2 / math.sqrt(curv))
    y0 = [phi0 + a * rho0**2, 2 * a * rho0]

    def cross(rho, y):
        return y[0] - phi_false

    cross.terminal = True
    cross.direction = -side

    def turn(rho, y):
        return y[1]

    turn.terminal = True
    turn.direction = side

    sol = solve_ivp(_bounce_rhs(d, dV), (rho0, rho_max), y0, method="DOP853", rtol=rtol,
                    atol=rtol * 1e-3, events=(cross, turn), dense_output=dense)
    if sol.t_events[0].size:
        return 1, sol
    if sol.t_events[1].size:
        return -1, sol
    return 0, sol


def solve_bounce_field(p: ScalarPotential, d: int = 2, tol: float = 1e-12, rho_max: float | None = None,
                       max_iter: int = 200) -> BounceProfile:
    """Overshoot/undershoot bisection on the central field value.

    Starting at ``phi(0)`` between the barrier edge (where V returns to zero)
    and the true vacuum, trajectories either cross phi_F (overshoot) or turn
    back before reaching it (undershoot).
    """
    if p.lam <= 0:
        raise BracketingFailure("degenerate vacua: the bounce radius diverges")
    if rho_max is None:
        # thin-wall radius estimate R ~ d * tension / dV, tension ~ sqrt(2 Vbarrier) * delta_phi
        tension = math.sqrt(2 * max(p(0.0), 1e-300)) * p.delta_phi
        rho_max = 10.0 * max(d * tension / abs(p.v_true), 10.0 / p.mass_false)
    return bounce_profile(p.deriv, p.deriv2, lambda phi: p.shifted(phi - p.phi_false), p.phi_false,
                          p.barrier_field(), p.phi_true, d, rho_max, tol, max_iter)


def bounce_profile(dV, d2V, v_rel, phi_false: float, phi_bar: float, phi_true: float, d: int,
                   rho_max: float, tol: float = 1e-12, max_iter: int = 200) -> BounceProfile:
    """O(d+1) bounce of ``phi'' + d phi'/rho = V'(phi)`` for a generic potential.

    ``v_rel(phi)`` is ``V(phi) - V(phi_false)``; ``phi_bar`` is where it
    returns to zero on the far side of the barrier.  ``phi_true`` may lie on
    either side of ``phi_false``.
    """
    side = 1.0 if phi_true > phi_false else -1.0
    span = abs(phi_true - phi_false)
    lo, hi = phi_bar, phi_true
    for k in range(1, 60):
        trial = phi_true - side * span * 10.0 ** (-k / 2)
        kind, _ = _shoot(trial, d, dV, d2V, phi_false, rho_max, 1e-10, side)
        if kind == 1:
            hi = trial
            break
        if kind == -1 and side * (trial - lo) > 0:
            lo = trial
    else:
        raise BracketingFailure("no overshooting start found short of the true vacuum")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if abs(hi - lo) <= tol * abs(hi):
            break
        kind, _ = _shoot(mid, d, dV, d2V, phi_false, rho_max, 1e-11, side)
        if kind == 1:
            hi = mid
        elif kind == -1:
            lo = mid
        else:
            break
    else:
        raise ToleranceUnreachable("bisection on phi(0) did not converge")
    return _profile_from_start(dV, d2V, v_rel, phi_false, d, lo, rho_max, side)


def _profile_from_start(dV, d2V, v_rel, phi_false, d, phi0, rho_max, side=1.0, n=4001):
    """Undershooting trajectory, cut where it stops approaching phi_F."""
    _, sol = _shoot(phi0, d, dV, d2V, phi_false, rho_max, 1e-11, side, dense=True)
    rho_end = sol.t[-1]
    rho = np.linspace(sol.t[0], rho_end, n)
    y = sol.sol(rho)
    phi, dphi = y
    # trajectory peels away from phi_F at the end of an undershoot: keep up to
    # the closest approach
    m = math.sqrt(abs(d2V(phi_false)))
    k = int(np.argmin(np.abs(phi - phi_false) + np.abs(dphi) / m))
    rho, phi, dphi = rho[: k + 1], phi[: k + 1], dphi[: k + 1]
    rho = np.concatenate([[0.0], rho])
    phi = np.concatenate([[phi0], phi])
    dphi = np.concatenate([[0.0], dphi])
    S = _field_action(v_rel, d, rho, phi, dphi)
    return BounceProfile(rho, phi, S, d, phi0)


def _field_action(v_rel, d, rho, phi, dphi):
    integrand = (0.5 * dphi**2 + v_rel(phi)) * rho**d
    return sphere_area(d) * simpson(integrand, x=rho)


def euclidean_action_field(b: BounceProfile, p: ScalarPotential, d: int | None = None) -> float:
    """Euclidean action of a tabulated profile (derivative by splines)."""
    d = b.dim if d is None else d
    if np.allclose(b.phi, p.phi_false):
        return 0.0
    dphi = CubicSpline(b.rho_grid, b.phi)(b.rho_grid, 1)
    return _field_action(lambda phi: p.shifted(phi - p.phi_false), d, b.rho_grid, b.phi, dphi)


def field_action_virial(b: BounceProfile, p: ScalarPotential) -> float:
    """Action from the kinetic term alone, ``2 T / (d + 1)`` (Derrick scaling)."""
    d = b.dim
    dphi = CubicSpline(b.rho_grid, b.phi)(b.rho_grid, 1)
    T = sphere_area(d) * simpson(0.5 * dphi**2 * b.rho_grid**d, x=b.rho_grid)
    return 2.0 * T / (d + 1)


# ---------------------------------------------------------------------------
# reduced bounce


def turning_point(rs: ReducedSystem) -> float:
    """First zero of U beyond the barrier top (R > R_Umax)."""
    U = CubicSpline(rs.R, rs.U)
    R = rs.R
    idx = np.flatnonzero((R > rs.R_Umax) & (rs.U < 0))
    if idx.size == 0:
        raise NoTurningPoint("U does not cross zero beyond the barrier on the tabulated range")
    j = idx[0]
    return brentq(U, max(R[j - 1], rs.R_Umax), R[j], xtol=1e-14, rtol=1e-14)


def solve_bounce_reduced(rs: ReducedSystem, tol: float = 1e-10) -> ReducedBounce:
    """Zero-energy bounce action ``2 * int_0^R* sqrt(2 K U) dR``."""
    Rs = turning_point(rs)
    K = CubicSpline(rs.R, rs.K)
    U = CubicSpline(rs.R, rs.U)

    # sqrt(U) vanishes like sqrt(R* - R) at the turning point: use the
    # algebraic-endpoint weight for the last stretch.
    def f(x):
        return math.sqrt(2.0 * K(x) * max(U(x), 0.0))

    split = 0.5 * (rs.R_Umax + Rs)
    body, _ = quad(f, 0.0, split, epsabs=0, epsrel=tol, limit=400)

    def g(x):
        return math.sqrt(2.0 * K(x) * max(U(x), 0.0) / (Rs - x)) if x < Rs else math.sqrt(2.0 * K(Rs) * -U(Rs, 1))

    tail, _ = quad(g, split, Rs, weight="alg", wvar=(0.0, 0.5), epsabs=0, epsrel=tol, limit=400)
    return ReducedBounce(Rs, 2.0 * (body + tail), rs.provenance.get("sigma", float("nan")))


def shoot_bounce_reduced(rs: ReducedSystem, eom: str = "full", r_stop: float = 1e-3, rtol: float = 1e-10):
    """Shoot the imaginary-time equation from a turning point at rest.

    ``eom="full"`` is the Euler-Lagrange equation of ``K R'^2/2 + U``:
    ``K R'' + K' R'^2 / 2 = U'``.  ``eom="literal"`` integrates
    ``d/dtau (K R') = U'``, which counts the ``K'`` term at full weight.  The start ``R(0)`` is bisected so the path ends
    at ``R = 0`` with vanishing velocity; the action integral is closed with
    the harmonic tail below ``r_stop * R*``.

    Returns ``(R_start, S_E, max |K R'^2/2 - U| / U_max)``.
    """
    K = CubicSpline(rs.R, rs.K)
    U = CubicSpline(rs.R, rs.U)
    c_k = 0.5 if eom == "full" else 1.0
    if eom not in ("full", "literal"):
        raise ValueError("eom must be 'full' or 'literal'")

    def rhs(t, y):
        R, v = y
        k = K(R)
        return [v, (U(R, 1) - c_k * K(R, 1) * v * v) / k]

    Rs = turning_point(rs)
    stop = r_stop * Rs

    def reach(t, y):
        return y[0] - stop

    reach.terminal = True
    reach.direction = -1

    def turn(t, y):
        return y[1]

    turn.terminal = True
    turn.direction = 1

    def fire(R0, dense=False):
        # start a hair inside the turning point: at rest, U'(R0) < 0 pushes inward
        sol = solve_ivp(rhs, (0.0, 200.0 / rs.omega), [R0, 0.0], method="DOP853", rtol=rtol,
                        atol=rtol * 1e-3 * Rs, events=(reach, turn), dense_output=dense)
        return sol

    def classify(R0):
        sol = fire(R0)
        if sol.t_events[1].size:
            return -1  # turned back: not enough push
        if sol.t_events[0].size:
            v = sol.y_events[0][0][1]
            # arriving with more speed than the zero-energy value means overshoot
            e = 0.5 * K(stop) * v * v - U(stop)
            return 1 if e > 0 else -1
        return -1

    lo, hi = rs.R_Umax, rs.R[-2]
    if classify(hi) != 1:
        raise BracketingFailure("largest start does not overshoot")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if classify(mid) == 1:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-13 * hi:
            break
    R0 = 0.5 * (lo + hi)
    sol = fire(R0, dense=True)
    t = np.linspace(0, sol.t[-1], 20001)
    R, v = sol.sol(t)
    lag = 0.5 * K(R) * v * v + U(R)
    S_half = simpson(lag, x=t)
    # harmonic tail from R_end to 0: int sqrt(2 K U) dR ~ sqrt(K0 U''0) R_end^2 / 2
    S_half += math.sqrt(rs.K0 * rs.Upp0) * R[-1] ** 2 / 2
    energy_dev = float(np.max(np.abs(0.5 * K(R) * v * v - U(R))) / rs.U_max)
    return R0, 2.0 * S_half, energy_dev


def optimize_sigma(a: AnsatzFamily, sigma_range=(0.1, 2.0), tol: float = 1e-4, half_width: float | None = None,
                   n_points: int = 201, quad_tol: float = 1e-10):
    """Minimise the reduced bounce action over the wall width.

    Returns ``(sigma_opt, S_E_opt)``.
    """
    cache = {}

    def action(sig):
        if sig not in cache:
            try:
                cache[sig] = reduced_action(a.with_sigma(sig), half_width, n_points, quad_tol)
            except NoTurningPoint:
                # the wall cost outgrows the volume gain: no bounce for this width
                cache[sig] = math.inf
        return cache[sig]

    lo, hi = sigma_range
    s, val = golden_section(action, lo, hi, xtol=tol * (hi - lo))
    if val >= action(lo) or val >= action(hi) or min(s - lo, hi - s) < 2 * tol * (hi - lo):
        raise NoInteriorMinimum(f"minimum of S_E(sigma) sits at the edge of [{lo}, {hi}]")
    return s, val


def reduced_action(a: AnsatzFamily, half_width: float | None = None, n_points: int = 201, tol: float = 1e-10) -> float:
    """Reduced bounce action for one family (tabulates only R >= 0)."""
    if half_width is None:
        # walk out until U is safely negative past the barrier
        x, step, seen_pos = 0.0, 0.1 * a.sigma, False
        while True:
            x += step
            u = compute_U(a, x, tol)
            seen_pos |= u > 0
            if seen_pos and u < 0:
                half_width = 1.25 * x + 2 * step
                break
            if x > 10 * a.sigma:
                step *= 1.05
            if x > 1e3:
                raise NoTurningPoint("U stays positive")
    grid = Grid(-half_width, half_width, 2 * n_points - 1)
    rs = _tabulate_half(a, grid, tol)
    return solve_bounce_reduced(rs, tol).S_E_reduced


def _tabulate_half(a, grid, tol):
    """Tabulate only the non-negative half and mirror it (symmetric families)."""
    if not a.symmetric:
        return tabulate(a, grid, tol)
    Rp = grid.points[grid.n // 2:]
    K = np.array([compute_K(a, x, tol) for x in Rp])
    U = np.array([compute_U(a, x, tol) for x in Rp])
    R = np.concatenate([-Rp[:0:-1], Rp])
    K = np.concatenate([K[:0:-1], K])
    U = np.concatenate([U[:0:-1], U])
    Upp0 = second_derivative_at_zero(lambda x: compute_U(a, x, tol), 0.05 * a.sigma)
    R_Umax, U_max = locate_barrier(lambda x: compute_U(a, x, tol), R, U, tol=1e-9)
    return ReducedSystem(R, K, U, K[Rp.size - 1], Upp0, R_Umax, U_max, a.dim,
                         provenance={"sigma": a.sigma})


def comparison_statistic(gamma_plateau: float, rs_or_umax, S_E: float) -> float:
    """``-ln(Gamma / U_max) - (S_E - ln(S_E / 2 pi) / 2)``."""
    U_max = rs_or_umax.U_max if isinstance(rs_or_umax, ReducedSystem) else float(rs_or_umax)
    if gamma_plateau <= 0 or U_max <= 0 or S_E <= 0:
        raise ValueError("comparison statistic needs positive inputs")
    return -math.log(gamma_plateau / U_max) - (S_E - 0.5 * math.log(S_E / (2 * math.pi)))
