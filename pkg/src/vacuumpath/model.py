"""Quartic scalar potential and the tanh-wall families of bubble profiles."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as _gamma_fn


def sphere_area(n: int) -> float:
    """Area of the unit ``n``-sphere embedded in R^(n+1).

    ``sphere_area(0) == 2`` (two points), ``sphere_area(1) == 2*pi``,
    ``sphere_area(2) == 4*pi``.
    """
    if n < 0:
        raise ValueError("sphere dimension must be non-negative")
    if n == 0:
        return 2.0
    if n == 1:
        return 2.0 * math.pi
    if n == 2:
        return 4.0 * math.pi
    return 2.0 * math.pi ** ((n + 1) / 2) / _gamma_fn((n + 1) / 2)


@dataclass(frozen=True)
class ScalarPotential:
    """``V(phi) = eta * (-phi**2/2 - lam*phi**3/3 + phi**4/4) - v_offset``.

    The offset is fixed so that the false vacuum has zero energy.
    """

    eta: float
    lam: float
    phi_false: float = field(init=False)
    phi_true: float = field(init=False)
    v_offset: float = field(init=False)

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")
        root = math.sqrt(self.lam**2 + 4.0)
        object.__setattr__(self, "phi_false", (self.lam - root) / 2.0)
        object.__setattr__(self, "phi_true", (self.lam + root) / 2.0)
        object.__setattr__(self, "v_offset", self._raw(self.phi_false))

    def _raw(self, phi):
        return self.eta * (-0.5 * phi**2 - self.lam * phi**3 / 3.0 + 0.25 * phi**4)

    @property
    def delta_phi(self) -> float:
        return self.phi_true - self.phi_false

    def __call__(self, phi):
        return self._raw(phi) - self.v_offset

    def deriv(self, phi):
        return self.eta * (-phi - self.lam * phi**2 + phi**3)

    def deriv2(self, phi):
        return self.eta * (-1.0 - 2.0 * self.lam * phi + 3.0 * phi**2)

    def shifted(self, eps):
        """``V(phi_F + eps)`` from the Taylor polynomial about the false vacuum.

        Exact (the potential is a quartic) and free of the cancellation that
        ``V(phi) - V(phi_F)`` suffers when ``eps`` is small.
        """
        p = self.phi_false
        c2 = 0.5 * (-1.0 - 2.0 * self.lam * p + 3.0 * p * p)
        c3 = (3.0 * p - self.lam) / 3.0
        return self.eta * eps * eps * (c2 + eps * (c3 + 0.25 * eps))

    @property
    def v_true(self) -> float:
        return self.shifted(self.delta_phi)

    @property
    def mass_false(self) -> float:
        """Curvature mass sqrt(V''(phi_F))."""
        return math.sqrt(self.deriv2(self.phi_false))

    def barrier_field(self) -> float:
        """Field value between the maximum at 0 and phi_T where V returns to 0."""
        from scipy.optimize import brentq

        return brentq(self, 0.0, self.phi_true, xtol=1e-15, rtol=1e-15)


def potential_eval(p: ScalarPotential, phi):
    return p(phi)


def potential_deriv(p: ScalarPotential, phi):
    return p.deriv(phi)


class Variant(str, enum.Enum):
    SYMMETRIC = "symmetric"
    ASYMMETRIC = "asymmetric"
    RDEPENDENT = "rdependent"


def _tanh_diff(x, y):
    """``tanh(x + y) - tanh(x - y)`` without cancellation for small ``y``.

    Uses ``2 sinh(2y) / (cosh 2x + cosh 2y)`` scaled by the largest exponential.
    """
    x = np.abs(x)
    m = 2.0 * np.maximum(x, np.abs(y))
    # expm1 keeps small y accurate; past |y| = 1 the plain difference is exact enough
    small = np.abs(y) < 1.0
    ys = np.where(small, y, 0.0)
    num = 2.0 * np.where(small, np.exp(-2.0 * ys - m) * np.expm1(4.0 * ys), np.exp(2.0 * y - m) - np.exp(-2.0 * y - m))
    den = np.exp(2 * x - m) + np.exp(-2 * x - m) + np.exp(2 * y - m) + np.exp(-2 * y - m)
    return num / den


def _sech2(x):
    # 1 - tanh^2 loses everything past |x| ~ 19; cosh form underflows cleanly.
    x = np.abs(x)
    e = np.exp(-2.0 * x)
    return 4.0 * e / (1.0 + e) ** 2


@dataclass(frozen=True)
class AnsatzFamily:
    """One-parameter family of bubble profiles ``phi_R(r)``.

    ``R`` is the (signed) bubble radius and ``sigma`` the wall width.  The
    ``rdependent`` variant narrows the wall to ``sigma**2 / (|R| + sigma)``.
    """

    potential: ScalarPotential
    sigma: float
    dim: int = 2
    variant: Variant = Variant.SYMMETRIC

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        object.__setattr__(self, "variant", Variant(self.variant))

    @property
    def symmetric(self) -> bool:
        return self.variant is not Variant.ASYMMETRIC

    def with_sigma(self, sigma: float) -> AnsatzFamily:
        return AnsatzFamily(self.potential, sigma, self.dim, self.variant)

    def _inv_width(self, a):
        if self.variant is Variant.RDEPENDENT:
            return (a + self.sigma) / self.sigma**2
        return 1.0 / self.sigma

    def value(self, R, r):
        return self.potential.phi_false + self.excess(R, r)

    def excess(self, R, r):
        """``phi_R(r) - phi_F``, accurate in the tails and near ``R = 0``."""
        half = 0.5 * self.potential.delta_phi
        if self.variant is Variant.ASYMMETRIC:
            w = 1.0 / self.sigma
            return half * _tanh_diff(w * r, w * R)
        a = np.abs(R)
        w = self._inv_width(a)
        return half * _tanh_diff(w * r, w * a)

    def dr(self, R, r):
        half = 0.5 * self.potential.delta_phi
        if self.variant is Variant.ASYMMETRIC:
            w = 1.0 / self.sigma
            return half * w * (_sech2(w * (r + R)) - _sech2(w * (r - R)))
        a = np.abs(R)
        w = self._inv_width(a)
        return half * w * (_sech2(w * (r + a)) - _sech2(w * (r - a)))

    def dR(self, R, r):
        """Partial derivative with respect to ``R``.

        For the even variants the derivative flips sign across ``R = 0``;
        at exactly ``R = 0`` the right-hand limit is returned, so that the
        square (the only thing entering the effective mass) is continuous.
        """
        half = 0.5 * self.potential.delta_phi
        if self.variant is Variant.ASYMMETRIC:
            w = 1.0 / self.sigma
            return half * w * (_sech2(w * (r + R)) + _sech2(w * (r - R)))
        sgn = np.where(np.asarray(R) < 0, -1.0, 1.0)
        a = np.abs(R)
        if self.variant is Variant.SYMMETRIC:
            w = 1.0 / self.sigma
            return sgn * half * w * (_sech2(w * (r + a)) + _sech2(w * (r - a)))
        s2 = self.sigma**2
        w = (a + self.sigma) / s2
        plus = _sech2(w * (r + a)) * ((r + a) / s2 + w)
        minus = _sech2(w * (r - a)) * ((r - a) / s2 - w)
        return sgn * half * (plus - minus)

    def wall_width(self, R) -> float:
        return 1.0 / self._inv_width(abs(R))


def ansatz_value(a: AnsatzFamily, R, r):
    return a.value(R, r)


def ansatz_dr(a: AnsatzFamily, R, r):
    return a.dr(R, r)


def ansatz_dR(a: AnsatzFamily, R, r):
    return a.dR(R, r)
