"""Vectorised golden-section search shared by the solvers."""
from __future__ import annotations

import math

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_minimize(f, lo, hi, iters):
    """Minimise ``f`` independently on each interval [lo_i, hi_i].

    ``f`` maps an array of abscissae (same shape as ``lo``) to values. One
    new evaluation per iteration; the bracket shrinks by 0.618 each time.
    Returns the best abscissa seen and its value.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    fc = f(c)
    fd = f(d)
    for _ in range(iters):
        left = fc < fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        new = np.where(left, hi - INV_PHI * (hi - lo), lo + INV_PHI * (hi - lo))
        fn = f(new)
        c, d, fc, fd = (
            np.where(left, new, d),
            np.where(left, c, new),
            np.where(left, fn, fd),
            np.where(left, fc, fn),
        )
    take_c = fc <= fd
    return np.where(take_c, c, d), np.where(take_c, fc, fd)
