"""Measured regularity of grid data: Lipschitz and second-difference moduli,
supports of differences, and the discrete W^{1,1} distance."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import convolve1d

from .grid import GridFunction


@dataclass
class RegularityReport:
    """Empirical regularity of a grid function on a sub-box.

    ``sc_sup`` bounds semiconcavity (u is semiconcave with constant K iff
    sc_sup <= K); ``sc_inf`` bounds semiconvexity (semiconvex with constant
    K iff sc_inf >= -K). Ratios are sampled along axes and diagonals only,
    so the certified constant carries the factor ``dimension_factor``.
    """

    lip: float
    sc_sup: float
    sc_inf: float
    support_box: list | None
    dimension_factor: float
    kink_upper: bool
    kink_lower: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _index_range(u: GridFunction, subbox):
    if subbox is None:
        return 0, u.n - 1
    ax = u.axis
    idx = np.nonzero(np.abs(ax) <= subbox + 1e-12)[0]
    if len(idx) < 3:
        raise ValueError("sub-box contains fewer than three nodes per axis")
    return int(idx[0]), int(idx[-1])


def _restrict(u: GridFunction, subbox):
    lo, hi = _index_range(u, subbox)
    sl = (slice(lo, hi + 1),) * u.dim
    return u.values[sl]


def lipschitz_estimate(u: GridFunction, subbox: float | None = None) -> float:
    """Largest |forward difference| / dx over axes, inside [-subbox, subbox]^N."""
    w = _restrict(u, subbox)
    best = 0.0
    for ax in range(u.dim):
        d = np.abs(np.diff(w, axis=ax))
        if d.size:
            best = max(best, float(d.max()))
    return best / u.dx


def _directions(dim):
    if dim == 1:
        return [(1,)]
    return [(1, 0), (0, 1), (1, 1), (1, -1)]


def _second_ratios(w, dx, k, d):
    """Second-difference ratios along direction d with step k (arrays of centres)."""
    m = w.shape[0]
    if m <= 2 * k:
        return np.empty(0)
    centre, plus, minus = [], [], []
    for dj in d:
        if dj == 0:
            centre.append(slice(k, m - k))
            plus.append(slice(k, m - k))
            minus.append(slice(k, m - k))
        else:
            centre.append(slice(k, m - k))
            plus.append(slice(k + dj * k, m - k + dj * k))
            minus.append(slice(k - dj * k, m - k - dj * k))
    h2 = (k * dx) ** 2 * sum(abs(dj) for dj in d)
    c = w[tuple(centre)]
    return (w[tuple(plus)] + w[tuple(minus)] - 2.0 * c) / h2


def second_difference_extremes(u: GridFunction, subbox: float | None = None,
                               h_multiples=(1, 2)) -> tuple[float, float]:
    """(max, min) of (u(x+h) + u(x-h) - 2u(x)) / |h|^2 over h = k dx d.

    Directions d are the axes and, in 2-D, both diagonals. Only centres with
    x +- h inside the sub-box contribute.
    """
    w = _restrict(u, subbox)
    hi, lo = -np.inf, np.inf
    for k in h_multiples:
        for d in _directions(u.dim):
            r = _second_ratios(w, u.dx, int(k), d)
            if r.size:
                hi = max(hi, float(r.max()))
                lo = min(lo, float(r.min()))
    if not np.isfinite(hi):
        raise ValueError("sub-box too small for the requested step multiples")
    return hi, lo


def kink_signature(u: GridFunction, subbox: float | None = None,
                   ratio: float = 1.5, jump: float = 0.2) -> tuple[bool, bool]:
    """Detect convex (upper) and concave (lower) kinks at grid scale.

    At a Lipschitz kink the extreme ratio at step dx is about twice the one
    at step 2 dx, because it scales like 1/|h|. A kink is reported when this
    halving is observed and the implied slope jump exceeds ``jump``.
    """
    s1, i1 = second_difference_extremes(u, subbox, (1,))
    s2, i2 = second_difference_extremes(u, subbox, (2,))
    up = s1 * u.dx > jump and s1 > ratio * max(s2, 0.0)
    down = -i1 * u.dx > jump and -i1 > ratio * max(-i2, 0.0)
    return bool(up), bool(down)


def support_of_difference(u: GridFunction, v: GridFunction, tol: float = 1e-6):
    """Per-axis interval hull of nodes where |u - v| > tol, or None if empty."""
    if not u.same_grid(v):
        raise ValueError("incompatible grids")
    mask = np.abs(u.values - v.values) > tol
    if not mask.any():
        return None
    ax = u.axis
    out = []
    for j in range(u.dim):
        other = tuple(i for i in range(u.dim) if i != j)
        hit = mask.any(axis=other) if other else mask
        idx = np.nonzero(hit)[0]
        out.append((float(ax[idx[0]]), float(ax[idx[-1]])))
    return out


def _trapezoid_weights(n, dx):
    w = np.full(n, dx)
    w[0] = w[-1] = 0.5 * dx
    return w


def w11_norm(w: np.ndarray, dx: float, dim: int) -> np.ndarray:
    """Discrete W^{1,1} norm of nodal arrays; leading axes are batch axes."""
    n = w.shape[-1]
    tw = _trapezoid_weights(n, dx)
    if dim == 1:
        l1 = np.abs(w) @ tw
        grad = np.sum(np.abs(np.diff(w, axis=-1)), axis=-1)
        return l1 + grad
    a = np.abs(w)
    l1 = np.einsum("...ij,i,j->...", a, tw, tw)
    g0 = np.einsum("...ij,j->...", np.abs(np.diff(w, axis=-2)), tw)
    g1 = np.einsum("...ij,i->...", np.abs(np.diff(w, axis=-1)), tw)
    return l1 + g0 + g1


def w11_distance(u: GridFunction, v: GridFunction) -> float:
    """Trapezoid L^1 distance plus L^1 distance of forward-difference gradients."""
    if not u.same_grid(v):
        raise ValueError("incompatible grids")
    return float(w11_norm(u.values - v.values, u.dx, u.dim))


def mollify(u: GridFunction, width: float) -> GridFunction:
    """Convolution with the normalised smooth bump exp(-1 / (1 - s^2)) of radius ``width``.

    The kernel is sampled at the nodes and normalised to unit discrete mass,
    then applied along every axis in turn; values beyond the box are taken
    equal to the nearest edge value. A convex average of translates, so the
    discrete Lipschitz constant never increases. The sampled kernel vanishes
    at its end nodes, so a width below two cells leaves the data unchanged.
    """
    if not width > 0:
        raise ValueError("mollifier width must be positive")
    k = int(math.floor(width / u.dx))
    if k < 2:
        return u.with_values(u.values.copy())
    s = np.arange(-k, k + 1) * u.dx / width
    with np.errstate(divide="ignore", over="ignore"):
        ker = np.where(np.abs(s) < 1.0, np.exp(-1.0 / (1.0 - s * s)), 0.0)
    ker /= ker.sum()
    out = u.values
    for axis in range(u.dim):
        out = convolve1d(out, ker, axis=axis, mode="nearest")
    return u.with_values(out)


def regularity_report(u: GridFunction, reference: GridFunction | None = None,
                      subbox: float | None = None, tol: float = 1e-6,
                      h_multiples=(1, 2)) -> RegularityReport:
    sc_sup, sc_inf = second_difference_extremes(u, subbox, h_multiples)
    up, down = kink_signature(u, subbox)
    ref = reference if reference is not None else GridFunction.zeros(u.a, u.n, u.dim)
    return RegularityReport(
        lip=lipschitz_estimate(u, subbox),
        sc_sup=sc_sup,
        sc_inf=sc_inf,
        support_box=support_of_difference(u, ref, tol),
        dimension_factor=math.sqrt(u.dim),
        kink_upper=up,
        kink_lower=down,
    )
