"""Closed-form references for the quadratic Hamiltonian H(p) = |p|^2 / 2 in one dimension."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-linear function with linear tails outside the knots."""

    knots: tuple
    values: tuple
    left_slope: float = 0.0
    right_slope: float = 0.0

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        k = np.asarray(self.knots, dtype=float)
        v = np.asarray(self.values, dtype=float)
        out = np.interp(y, k, v)
        out = np.where(y < k[0], v[0] + self.left_slope * (y - k[0]), out)
        return np.where(y > k[-1], v[-1] + self.right_slope * (y - k[-1]), out)

    def __neg__(self):
        return PiecewiseLinear(self.knots, tuple(-x for x in self.values), -self.left_slope, -self.right_slope)


TENT = PiecewiseLinear((-1.0, 0.0, 1.0), (0.0, 1.0, 0.0))
ABS = PiecewiseLinear((0.0,), (0.0,), -1.0, 1.0)


def hopf_lax(u0: PiecewiseLinear, x, t: float) -> np.ndarray:
    """Exact min_y u0(y) + (x - y)^2 / (2 t) for piecewise-linear u0.

    On each linear piece with slope s the unconstrained minimiser is
    y = x - s t; it is clipped to the piece and the best piece wins.
    """
    x = np.asarray(x, dtype=float)
    k = np.asarray(u0.knots, dtype=float)
    v = np.asarray(u0.values, dtype=float)
    pieces = [(-np.inf, k[0], u0.left_slope, k[0], v[0])]
    for i in range(len(k) - 1):
        s = (v[i + 1] - v[i]) / (k[i + 1] - k[i])
        pieces.append((k[i], k[i + 1], s, k[i], v[i]))
    pieces.append((k[-1], np.inf, u0.right_slope, k[-1], v[-1]))
    best = np.full(x.shape, np.inf)
    for lo, hi, s, y0, v0 in pieces:
        y = np.clip(x - s * t, lo, hi)
        best = np.minimum(best, v0 + s * (y - y0) + (x - y) ** 2 / (2.0 * t))
    return best
