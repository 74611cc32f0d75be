"""Scalar golden-section minimisation and root bracketing helpers."""
import math

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, a, b, xtol=1e-8, max_iter=200):
    """Minimise a unimodal ``f`` on ``[a, b]``; returns ``(x_min, f(x_min))``."""
    if b < a:
        a, b = b, a
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= xtol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
    if fc < fd:
        return c, fc
    return d, fd
