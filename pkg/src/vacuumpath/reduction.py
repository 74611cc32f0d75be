"""Effective mass K(R) and potential U(R) of a bubble-profile family.

Both are radial integrals over the profile ``phi_R(r)``::

    K(R) = A_{d-1} * int (d phi_R / dR)^2 r^(d-1) dr
    U(R) = A_{d-1} * int [ (d phi_R / dr)^2 / 2 + V(phi_R) - V(phi_F) ] r^(d-1) dr

and are tabulated on a uniform R grid together with the harmonic data at
the false vacuum and the location/height of the barrier top.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .model import AnsatzFamily, Variant, sphere_area
from .quadrature import gauss_kronrod
from .search import golden_section

# |phi_R - phi_F| < 1e-12 * (phi_T - phi_F) beyond |R| + TAIL_WIDTHS * width.
TAIL_WIDTHS = 14.0


class BarrierNotFound(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``lo, lo + dx, ..., hi`` with ``n`` points."""

    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("grid needs at least 3 points")
        if not self.hi > self.lo:
            raise ValueError("grid upper bound must exceed lower bound")

    @property
    def dx(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    @property
    def points(self) -> np.ndarray:
        if abs(self.lo + self.hi) <= 1e-12 * self.hi and self.n % 2 == 1:
            # keep the centre node exactly at 0 and the grid exactly mirrored
            m = self.n // 2
            return self.hi * np.arange(-m, m + 1) / m
        return np.linspace(self.lo, self.hi, self.n)

    @classmethod
    def symmetric(cls, half_width: float, dx: float) -> Grid:
        m = int(math.ceil(half_width / dx))
        return cls(-m * dx, m * dx, 2 * m + 1)


def _breaks(a: AnsatzFamily, R: float):
    R = abs(R)
    w = a.wall_width(R)
    r_cut = R + TAIL_WIDTHS * w + 10.0 * a.sigma
    pts = [0.0, R, r_cut]
    for k in (2.0, 6.0):
        pts.append(max(0.0, R - k * w))
        pts.append(R + k * w)
    return sorted(p for p in pts if p <= r_cut)


def compute_K(a: AnsatzFamily, R: float, tol: float = 1e-10) -> float:
    d = a.dim
    pref = sphere_area(d - 1)

    def f(r):
        g = a.dR(R, r)
        return g * g * r ** (d - 1)

    val, _ = gauss_kronrod(f, _breaks(a, R), tol)
    return pref * val


def compute_U(a: AnsatzFamily, R: float, tol: float = 1e-10) -> float:
    d = a.dim
    pot = a.potential
    pref = sphere_area(d - 1)

    def f(r):
        g = a.dr(R, r)
        eps = a.excess(R, r)
        return (0.5 * g * g + pot.shifted(eps)) * r ** (d - 1)

    val, _ = gauss_kronrod(f, _breaks(a, R), tol)
    return pref * val


def volume_term(a: AnsatzFamily, R: float) -> float:
    """Leading large-|R| behaviour ``A_{d-1}/d * (V_T - V_F) * |R|^d``."""
    d = a.dim
    return sphere_area(d - 1) / d * a.potential.v_true * abs(R) ** d


@dataclass
class ReducedSystem:
    """Tabulated ``K(R)``, ``U(R)`` plus harmonic and barrier data.

    ``interior`` selects which R are counted as "still in the false vacuum":
    ``"between"`` means ``|R| < R_Umax``, ``"below"`` means ``R < R_Umax``
    (used when U has a single barrier on the positive side).
    """

    R: np.ndarray
    K: np.ndarray
    U: np.ndarray
    K0: float
    Upp0: float
    R_Umax: float
    U_max: float
    dim: int
    interior: str = "between"
    provenance: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return Grid(float(self.R[0]), float(self.R[-1]), self.R.size)

    @property
    def omega(self) -> float:
        """Harmonic frequency sqrt(U''(0) / K(0)) at the false vacuum."""
        return math.sqrt(self.Upp0 / self.K0)

    @property
    def harmonic_width(self) -> float:
        return (self.K0 * self.Upp0) ** -0.25

    def K_spline(self):
        return CubicSpline(self.R, self.K)

    def U_spline(self):
        return CubicSpline(self.R, self.U)

    def resample(self, grid: Grid) -> ReducedSystem:
        """Spline-interpolate onto ``grid`` (must lie inside the table)."""
        x = grid.points
        if x[0] < self.R[0] - 1e-12 or x[-1] > self.R[-1] + 1e-12:
            raise ValueError("resample grid extends beyond the tabulated range")
        return ReducedSystem(
            x, self.K_spline()(x), self.U_spline()(x), self.K0, self.Upp0,
            self.R_Umax, self.U_max, self.dim, self.interior, dict(self.provenance),
        )

    def scaled(self, k_factor: float = 1.0, u_factor: float = 1.0) -> ReducedSystem:
        return ReducedSystem(
            self.R.copy(), self.K * k_factor, self.U * u_factor, self.K0 * k_factor,
            self.Upp0 * u_factor, self.R_Umax, self.U_max * u_factor, self.dim,
            self.interior, dict(self.provenance),
        )

    def interior_mask(self, x=None) -> np.ndarray:
        x = self.R if x is None else x
        if self.interior == "below":
            return x <= self.R_Umax
        return np.abs(x) <= self.R_Umax

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["R", "K", "U"])
            for row in zip(self.R, self.K, self.U):
                w.writerow([f"{v:.16e}" for v in row])

    @classmethod
    def from_csv(cls, path, **meta) -> ReducedSystem:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        R, K, U = data.T
        if "K0" not in meta:
            meta["K0"] = float(CubicSpline(R, K)(0.0))
        if "Upp0" not in meta:
            meta["Upp0"] = float(CubicSpline(R, U)(0.0, 2))
        if "R_Umax" not in meta or "U_max" not in meta:
            pos = R > 0
            i = np.argmax(U[pos])
            meta.setdefault("R_Umax", float(R[pos][i]))
            meta.setdefault("U_max", float(U[pos][i]))
        meta.setdefault("dim", 2)
        return cls(R, K, U, **meta)


def second_derivative_at_zero(f, h: float) -> float:
    """Second derivative of ``f`` at 0.

    Fourth-order centred differences at steps ``h`` and ``h/2`` combined by
    one Richardson step.  Families built from ``|R|`` give an even U with a
    ``|R|^3`` term, which leaves the plain stencil with an O(h) error; the
    extrapolation removes it.
    """
    cache = {}

    def fc(x):
        if x not in cache:
            cache[x] = f(x)
        return cache[x]

    def stencil(s):
        return (-fc(2 * s) + 16 * fc(s) - 30 * fc(0.0) + 16 * fc(-s) - fc(-2 * s)) / (12 * s * s)

    return 2.0 * stencil(0.5 * h) - stencil(h)


def locate_barrier(u_of_R, R: np.ndarray, U: np.ndarray, tol: float = 1e-10):
    """Refine the maximum of U over R > 0 starting from a tabulated bracket."""
    pos = np.flatnonzero(R > 0)
    if pos.size < 3:
        raise BarrierNotFound("no positive R values tabulated")
    i = pos[np.argmax(U[pos])]
    if i == pos[-1] or i == pos[0]:
        raise BarrierNotFound("U has no interior maximum for R > 0 on the grid")
    x, fx = golden_section(lambda x: -u_of_R(x), R[i - 1], R[i + 1], xtol=tol)
    return x, -fx


def tabulate(a: AnsatzFamily, grid: Grid, tol: float = 1e-10, h_curv: float | None = None) -> ReducedSystem:
    """Tabulate K and U of the family ``a`` on ``grid``."""
    R = grid.points
    if a.symmetric and abs(grid.lo + grid.hi) > 1e-9 * grid.hi and grid.lo < 0:
        raise ValueError("symmetric families need a grid symmetric about 0")
    K = np.array([compute_K(a, x, tol) for x in R])
    U = np.array([compute_U(a, x, tol) for x in R])
    K0 = compute_K(a, 0.0, tol)
    h = h_curv if h_curv is not None else 0.05 * a.sigma
    Upp0 = second_derivative_at_zero(lambda x: compute_U(a, x, tol), h)
    R_Umax, U_max = locate_barrier(lambda x: compute_U(a, x, tol), R, U, tol=1e-9)
    interior = "below" if a.variant is Variant.ASYMMETRIC else "between"
    prov = {
        "system": "relativistic",
        "eta": a.potential.eta,
        "lambda": a.potential.lam,
        "sigma": a.sigma,
        "dim": a.dim,
        "variant": a.variant.value,
        "tol": tol,
    }
    return ReducedSystem(R, K, U, K0, Upp0, R_Umax, U_max, a.dim, interior, prov)


def default_half_width(a: AnsatzFamily, depth: float = 20.0, tol: float = 1e-10,
                       dx: float | None = None, kdx: float = 2.0) -> float:
    """Smallest L (on a coarse scan) with U(L) < -depth * U_max.

    With ``dx`` given, L is also pushed out until a wave released at the
    barrier top reaches a local wavenumber ``k = sqrt(2 K (U_max - U))``
    with ``k * dx >= kdx`` there, i.e. until it is short enough for the
    fourth-derivative damping to absorb it before it meets the edge.
    """
    step = 0.25 * a.sigma
    x, best = step, -np.inf
    while True:
        u = compute_U(a, x, tol)
        best = max(best, u)
        if best > 0 and u < -depth * best:
            if dx is None:
                return x
            k = math.sqrt(2.0 * compute_K(a, x, tol) * (best - u))
            if k * dx >= kdx:
                return x
        x += step
        if x > 1e3:
            raise BarrierNotFound("U does not fall below the barrier depth")
