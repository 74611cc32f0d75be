"""Hot loops of the time stepper.

The Crank-Nicolson system matrix is pentadiagonal and constant in time, so
it is factorised once (banded LU, no pivoting: its Hermitian part is
positive definite) and every step is a banded mat-vec plus two triangular
sweeps.  With numba available the whole stepping loop runs compiled;
otherwise each step goes through ``scipy.linalg.solve_banded``.

Band storage follows LAPACK: ``ab[ku + i - j, j] == A[i, j]``.
"""
import numpy as np
from scipy.linalg import solve_banded

from ._jit import USE_NUMBA, njit


@njit(cache=True)
def _banded_lu_jit(ab, kl, ku):
    n = ab.shape[1]
    lu = ab.copy()
    for k in range(n - 1):
        piv = lu[ku, k]
        for i in range(k + 1, min(k + kl + 1, n)):
            m = lu[ku + i - k, k] / piv
            lu[ku + i - k, k] = m
            for j in range(k + 1, min(k + ku + 1, n)):
                lu[ku + i - j, j] -= m * lu[ku + k - j, j]
    return lu


@njit(cache=True)
def _banded_lu_solve_jit(lu, kl, ku, b, x):
    n = lu.shape[1]
    for i in range(n):
        x[i] = b[i]
    for k in range(n):
        for i in range(k + 1, min(k + kl + 1, n)):
            x[i] -= lu[ku + i - k, k] * x[k]
    for k in range(n - 1, -1, -1):
        s = x[k]
        for j in range(k + 1, min(k + ku + 1, n)):
            s -= lu[ku + k - j, j] * x[j]
        x[k] = s / lu[ku, k]


@njit(cache=True)
def _banded_matvec_jit(ab, kl, ku, x, y):
    n = ab.shape[1]
    for i in range(n):
        s = 0.0j
        for j in range(max(0, i - kl), min(n, i + ku + 1)):
            s += ab[ku + i - j, j] * x[j]
        y[i] = s


@njit(cache=True)
def _evolve_jit(lu, rhs_ab, kl, ku, psi, nsteps, stride, w_false):
    n = psi.shape[0]
    nrec = nsteps // stride + 1
    pf = np.empty(nrec)
    norm = np.empty(nrec)
    tmp = np.empty(n, dtype=np.complex128)
    cur = psi.copy()
    rec = 0
    for step in range(nsteps + 1):
        if step % stride == 0:
            a = 0.0
            b = 0.0
            for i in range(n):
                q = cur[i].real * cur[i].real + cur[i].imag * cur[i].imag
                a += w_false[i] * q
                b += q
            pf[rec] = a
            norm[rec] = b
            rec += 1
        if step == nsteps:
            break
        _banded_matvec_jit(rhs_ab, kl, ku, cur, tmp)
        _banded_lu_solve_jit(lu, kl, ku, tmp, cur)
    return cur, pf, norm


def banded_matvec(ab, kl, ku, x):
    """``A @ x`` for ``A`` in band storage (numpy path)."""
    n = ab.shape[1]
    y = np.zeros(n, dtype=np.result_type(ab, x))
    for off in range(-kl, ku + 1):
        row = ku - off
        if off >= 0:
            y[: n - off] += ab[row, off:] * x[off:]
        else:
            y[-off:] += ab[row, : n + off] * x[: n + off]
    return y


class BandedStepper:
    """Repeated solves of ``lhs @ x = rhs_op @ psi`` for fixed band matrices."""

    def __init__(self, lhs_ab, rhs_ab, kl, ku, use_numba=None):
        self.kl, self.ku = kl, ku
        self.lhs = np.ascontiguousarray(lhs_ab, dtype=np.complex128)
        self.rhs = np.ascontiguousarray(rhs_ab, dtype=np.complex128)
        self.use_numba = USE_NUMBA if use_numba is None else use_numba
        self._lu = _banded_lu_jit(self.lhs, kl, ku) if self.use_numba else None

    def step(self, psi):
        b = banded_matvec(self.rhs, self.kl, self.ku, psi)
        if self.use_numba:
            x = np.empty_like(b)
            _banded_lu_solve_jit(self._lu, self.kl, self.ku, b, x)
            return x
        return solve_banded((self.kl, self.ku), self.lhs, b, check_finite=False)

    def run(self, psi, nsteps, stride, w_false):
        """Advance ``nsteps`` steps; sample ``sum w|psi|^2`` and ``sum |psi|^2`` every ``stride``.

        Returns ``(psi_final, p_false_samples, norm_samples)`` where norms are
        plain sums (multiply by the grid spacing for the L2 norm).
        """
        psi = np.ascontiguousarray(psi, dtype=np.complex128)
        w_false = np.ascontiguousarray(w_false, dtype=np.float64)
        if self.use_numba:
            return _evolve_jit(self._lu, self.rhs, self.kl, self.ku, psi, int(nsteps), int(stride), w_false)
        nrec = nsteps // stride + 1
        pf = np.empty(nrec)
        norm = np.empty(nrec)
        rec = 0
        for step in range(nsteps + 1):
            if step % stride == 0:
                q = psi.real**2 + psi.imag**2
                pf[rec] = w_false @ q
                norm[rec] = q.sum()
                rec += 1
            if step == nsteps:
                break
            psi = self.step(psi)
        return psi, pf, norm
