"""Empirical epsilon-entropy in W^{1,1} of finite families of grid functions.

For a finite set F with metric d, a 2 eps-separated subset P (pairwise
distances > 2 eps) and a cover by eps-balls centred at members C satisfy

    log2 |P|  <=  H_eps(F)  <=  log2 |C|,

because a set of diameter <= 2 eps can hold at most one point of P, and each
eps-ball has diameter <= 2 eps. Farthest-first traversal produces P and the
greedy ball cover produces C. Both counts are sample statistics of the
finite family, not of the class the family was drawn from.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateFit, GenerationExhausted, TooManyMembers
from .grid import GridFunction
from .regularity import lipschitz_estimate, second_difference_extremes, support_of_difference, w11_norm

log = logging.getLogger(__name__)

GENERATORS = ("random_piecewise_linear", "bump_grid")
MAX_MEMBERS = 2 ** 16
MAX_REJECTIONS = 100


@dataclass(frozen=True)
class FamilySpec:
    R: float
    M: float
    count: int
    seed: int = 0
    generator: str = "random_piecewise_linear"
    pieces: int = 8

    def __post_init__(self):
        if not (self.R > 0 and self.M > 0):
            raise ValueError("R and M must be positive")
        if self.count < 1:
            raise ValueError("count must be positive")
        if self.generator not in GENERATORS:
            raise ValueError(f"generator must be one of {GENERATORS}")
        if self.pieces < 2:
            raise ValueError("pieces must be at least 2")


# -- class membership ---------------------------------------------------------------


def in_class(u: GridFunction, R: float, M: float, tol: float = 1e-9) -> bool:
    """Support inside [-R, R]^N and discrete Lipschitz constant at most M."""
    if lipschitz_estimate(u) > M + tol:
        return False
    zero = GridFunction.zeros(u.a, u.n, u.dim)
    hull = support_of_difference(u, zero, tol)
    return hull is None or all(lo >= -R - tol and hi <= R + tol for lo, hi in hull)


# -- generators ----------------------------------------------------------------------


def _pl_1d(rng, R, M, pieces):
    """Random zero-mean slopes on an equal partition of [-R, R]; None if |slope| > M."""
    s = rng.uniform(-M, M, pieces)
    s -= s.mean()
    s *= rng.uniform(0.2, 1.0)
    if np.max(np.abs(s)) > M:
        return None
    knots = np.linspace(-R, R, pieces + 1)
    vals = np.concatenate([[0.0], np.cumsum(s * (knots[1] - knots[0]))])
    vals[-1] = 0.0
    return knots, vals


def _lattice_2d(rng, R, M, pieces):
    """Random nodal values on a (pieces+1)^2 lattice over [-R, R]^2 with zero rim."""
    w = 2 * R / pieces
    v = np.zeros((pieces + 1, pieces + 1))
    v[1:-1, 1:-1] = rng.uniform(-1.0, 1.0, (pieces - 1, pieces - 1))
    slope = max(np.max(np.abs(np.diff(v, axis=0))), np.max(np.abs(np.diff(v, axis=1)))) / w
    if slope == 0:
        return None
    return v * (rng.uniform(0.2, 1.0) * M / slope)


def _bilinear(v, R, X):
    k = v.shape[0] - 1
    t = np.clip((X + R) / (2 * R) * k, 0.0, k)
    i = np.clip(np.floor(t), 0, k - 1).astype(int)
    th = t - i
    i0, i1 = i[:, 0], i[:, 1]
    t0, t1 = th[:, 0], th[:, 1]
    a = v[i0, i1] + t0 * (v[i0 + 1, i1] - v[i0, i1])
    b = v[i0, i1 + 1] + t0 * (v[i0 + 1, i1 + 1] - v[i0, i1 + 1])
    out = a + t1 * (b - a)
    inside = np.all(np.abs(X) <= R, axis=1)
    return np.where(inside, out, 0.0)


def bump_profile(s, width, K):
    """C^1 bump on [-width/2, width/2] with |second derivative| <= K.

    Concave cap K w^2/16 - K s^2/2 for |s| <= w/4, convex tails
    (K/2)(w/2 - |s|)^2 out to |s| = w/2, zero beyond. Value and slope
    vanish at the cell edge.
    """
    s = np.abs(np.asarray(s, dtype=float))
    cap = K * width * width / 16.0 - 0.5 * K * s * s
    tail = 0.5 * K * (0.5 * width - s) ** 2
    return np.where(s <= width / 4.0, cap, np.where(s <= width / 2.0, tail, 0.0))


def _bump_cells(X, r, cells, K):
    """Per-cell bump fields, shape (cells**dim, k) for points X of shape (k, dim)."""
    dim = X.shape[1]
    w = 2.0 * r / cells
    centres = -r + w * (np.arange(cells) + 0.5)
    peak = K * w * w / 16.0
    fields = []
    for idx in itertools.product(range(cells), repeat=dim):
        if dim == 1:
            fields.append(bump_profile(X[:, 0] - centres[idx[0]], w, K))
        else:
            # the product of two profiles has Hessian norm <= 2K peak; halve it
            f = bump_profile(X[:, 0] - centres[idx[0]], w, K) * bump_profile(X[:, 1] - centres[idx[1]], w, K)
            fields.append(f / (2.0 * peak))
    return np.array(fields)


def sample_family(fs: FamilySpec, grid, rng: np.random.Generator | None = None) -> list:
    """Members of the class of data with support in [-R, R]^N and Lipschitz constant <= M.

    ``grid`` is a (a, n, dim) triple or a template GridFunction. The stream is
    drawn from ``rng`` when given, else from a generator seeded with ``fs.seed``.
    Every member is checked after generation and resampled on failure.
    """
    a, n, dim = (grid.a, grid.n, grid.dim) if isinstance(grid, GridFunction) else grid
    if a < fs.R:
        raise ValueError("grid box does not contain [-R, R]^N")
    rng = np.random.default_rng(fs.seed) if rng is None else rng
    tmpl = GridFunction.zeros(a, n, dim)
    X = tmpl.coords()
    out = []
    while len(out) < fs.count:
        for _ in range(MAX_REJECTIONS):
            u = _draw(fs, rng, X, tmpl)
            if u is not None and in_class(u, fs.R, fs.M):
                out.append(u)
                break
        else:
            raise GenerationExhausted(f"{MAX_REJECTIONS} consecutive rejections", generator=fs.generator)
    return out


def _draw(fs, rng, X, tmpl):
    dim = tmpl.dim
    if fs.generator == "random_piecewise_linear":
        if dim == 1:
            pl = _pl_1d(rng, fs.R, fs.M, fs.pieces)
            if pl is None:
                return None
            return tmpl.with_values(np.interp(X[:, 0], pl[0], pl[1], left=0.0, right=0.0))
        v = _lattice_2d(rng, fs.R, fs.M, fs.pieces)
        return None if v is None else tmpl.with_values(_bilinear(v, fs.R, X).reshape(tmpl.values.shape))
    cells = max(1, fs.pieces // 2)
    K = 1.0
    fields = _bump_cells(X, fs.R, cells, K)
    coef = rng.uniform(-1.0, 1.0, len(fields))
    vals = coef @ fields
    lip = max(lipschitz_estimate(tmpl.with_values(vals.reshape(tmpl.values.shape))), 1e-300)
    vals *= rng.uniform(0.2, 1.0) * fs.M / lip
    return tmpl.with_values(vals.reshape(tmpl.values.shape))


# -- separated bump family -------------------------------------------------------------


def aligned_n(r: float, cells: int, dx_target: float, a: float | None = None) -> tuple[float, int]:
    """Box half-width and node count whose grid puts every cell edge of [-r, r] on a node."""
    a = r if a is None else a
    w = 2.0 * r / cells
    per_cell = max(1, int(math.ceil(w / dx_target)))
    dx = w / per_cell
    half = int(math.ceil(a / dx - 1e-9))
    return half * dx, 2 * half + 1


@dataclass
class BumpFamily:
    """All sign patterns sigma of sum_i sigma_i b_i over the cells of [-r, r]^N.

    Members are built on demand. Distances use the additivity of the grid
    W^{1,1} norm over disjoint cell supports:
        d(sigma, sigma') = sum_i |sigma_i - sigma'_i| * ||b_i||.
    """

    r: float
    K: float
    cells: int
    template: GridFunction
    fields: np.ndarray
    cell_norms: np.ndarray
    codes: np.ndarray

    def __len__(self):
        return len(self.codes)

    @property
    def n_cells(self) -> int:
        return len(self.fields)

    def signs(self, i: int) -> np.ndarray:
        bits = (int(self.codes[i]) >> np.arange(self.n_cells)) & 1
        return 1.0 - 2.0 * bits

    def __getitem__(self, i: int) -> GridFunction:
        if not -len(self) <= i < len(self):
            raise IndexError(i)
        vals = self.signs(i % len(self)) @ self.fields
        return self.template.with_values(vals.reshape(self.template.values.shape))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def _tables(self):
        nbytes = (self.n_cells + 7) // 8
        tabs = np.zeros((nbytes, 256))
        w = np.zeros(nbytes * 8)
        w[: self.n_cells] = 2.0 * self.cell_norms
        for b in range(nbytes):
            for v in range(256):
                bits = (v >> np.arange(8)) & 1
                tabs[b, v] = bits @ w[8 * b: 8 * b + 8]
        return tabs

    def distances_from(self, i: int) -> np.ndarray:
        if not hasattr(self, "_tab"):
            self._tab = self._tables()
        x = self.codes ^ self.codes[i]
        d = np.zeros(len(self))
        for b in range(self._tab.shape[0]):
            d += self._tab[b][(x >> (8 * b)) & 255]
        return d

    def norms(self) -> np.ndarray:
        return np.full(len(self), float(np.sum(self.cell_norms)))

    @property
    def min_distance(self) -> float:
        return 2.0 * float(np.min(self.cell_norms))

    def sc_extremes(self, sample: int = 8) -> tuple[float, float]:
        """(max sc_sup, min sc_inf) over the first ``sample`` members."""
        hi, lo = -np.inf, np.inf
        for i in range(min(sample, len(self))):
            s, t = second_difference_extremes(self[i])
            hi, lo = max(hi, s), min(lo, t)
        return hi, lo


def separated_bump_family(r: float, K: float, cells_per_axis: int, grid) -> BumpFamily:
    """Sign patterns of C^1 bumps with |second derivative| <= K on cells_per_axis^N cells.

    ``grid`` is an (a, n, dim) triple or a template GridFunction; cell edges
    must fall on nodes (see :func:`aligned_n`) so that cell supports are
    disjoint on the grid and the distance formula is exact.
    """
    if cells_per_axis < 1:
        raise ValueError("cells_per_axis must be positive")
    a, n, dim = (grid.a, grid.n, grid.dim) if isinstance(grid, GridFunction) else grid
    if a < r - 1e-12:
        raise ValueError("grid box does not contain [-r, r]^N")
    count = 2 ** (cells_per_axis ** dim)
    if count > MAX_MEMBERS:
        raise TooManyMembers(f"{count} members exceed the cap of {MAX_MEMBERS}", count=count)
    tmpl = GridFunction.zeros(a, n, dim)
    w = 2.0 * r / cells_per_axis
    ratio = w / tmpl.dx
    if abs(ratio - round(ratio)) > 1e-6 or abs((a - r) / tmpl.dx - round((a - r) / tmpl.dx)) > 1e-6:
        raise ValueError("cell edges do not fall on grid nodes; build the grid with aligned_n")
    fields = _bump_cells(tmpl.coords(), r, cells_per_axis, K)
    norms = w11_norm(fields.reshape((len(fields),) + tmpl.values.shape), tmpl.dx, dim)
    codes = np.arange(count, dtype=np.int64)
    return BumpFamily(r, K, cells_per_axis, tmpl, fields, np.asarray(norms), codes)


def cells_for_epsilon(eps: float, alpha: float = 0.8, dim: int = 1) -> int:
    """Cells per axis so that the sign-pattern count grows like 2^(alpha/eps)^N."""
    return max(1, int(round((alpha / eps) ** (1.0 / dim))))


# -- packing and cover -----------------------------------------------------------------


@dataclass
class CoveringEstimate:
    epsilon: float
    packing_count: int
    cover_count: int
    h_lower: float
    h_upper: float
    size: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def distance_matrix(family) -> np.ndarray:
    """Pairwise W^{1,1} distances of a list of GridFunctions on a shared grid."""
    if not family:
        raise ValueError("family is empty")
    t = family[0]
    V = np.stack([u.values for u in family])
    D = np.zeros((len(V), len(V)))
    for i in range(len(V)):
        D[i, i + 1:] = w11_norm(V[i + 1:] - V[i], t.dx, t.dim)
    return D + D.T


class _Oracle:
    """Uniform access to a distance matrix or a row callable."""

    min_distance = None

    def __init__(self, family, distances=None, norms=None):
        if distances is None and hasattr(family, "distances_from"):
            self.size = len(family)
            self.row = family.distances_from
            self.norms = family.norms()
            self.min_distance = family.min_distance
            return
        if distances is None:
            distances = distance_matrix(list(family))
        if callable(distances):
            self.size = len(family)
            self.row = distances
            if norms is None:
                raise ValueError("a callable distance needs member norms for seeding")
            self.norms = np.asarray(norms, dtype=float)
            return
        D = np.asarray(distances, dtype=float)
        self.size = len(D)
        self.row = lambda i: D[i]
        if norms is None:
            # norm of each member relative to the family centroid, which is
            # unchanged when the same function is added to every member
            norms = _centred_norms(family) if _is_grid_family(family) else D.sum(axis=1)
        self.norms = np.asarray(norms, dtype=float)


def _is_grid_family(family):
    return len(family) > 0 and all(isinstance(u, GridFunction) for u in family)


def _centred_norms(family):
    V = np.stack([u.values for u in family])
    t = family[0]
    return w11_norm(V - V.mean(axis=0), t.dx, t.dim)


def farthest_first(oracle: _Oracle, threshold: float, shortcut: bool = False) -> list:
    """Indices picked by farthest-first traversal while the gap exceeds ``threshold``.

    When every pairwise distance exceeds the threshold the traversal takes
    every member, so the shortcut returns them all without the sweep.
    """
    if shortcut and oracle.min_distance is not None and oracle.min_distance > threshold:
        return list(range(oracle.size))
    seed = int(np.argmax(oracle.norms))
    chosen = [seed]
    mind = oracle.row(seed).astype(float).copy()
    mind[seed] = -np.inf
    while len(chosen) < oracle.size:
        j = int(np.argmax(mind))
        if not mind[j] > threshold:
            break
        chosen.append(j)
        np.minimum(mind, oracle.row(j), out=mind)
        mind[j] = -np.inf
    return chosen


def greedy_cover(oracle: _Oracle, radius: float, shortcut: bool = False) -> list:
    """Centres of a cover by closed balls, taking the first uncovered member each time.

    When every pairwise distance exceeds the radius each ball holds only its
    centre, so the shortcut returns every member without the sweep.
    """
    if shortcut and oracle.min_distance is not None and oracle.min_distance > radius:
        return list(range(oracle.size))
    covered = np.zeros(oracle.size, dtype=bool)
    centres = []
    nxt = 0
    while True:
        rest = np.nonzero(~covered[nxt:])[0]
        if not rest.size:
            break
        c = nxt + int(rest[0])
        centres.append(c)
        covered |= oracle.row(c) <= radius
        covered[c] = True
        nxt = c + 1
    return centres


def packing_and_cover(family, epsilon: float, distances=None, norms=None,
                      shortcut: bool = True) -> CoveringEstimate:
    """Packing at separation 2 eps and greedy cover at radius eps.

    ``distances`` may be a precomputed matrix or a callable i -> row of
    distances; by default W^{1,1} distances are computed on the grid, or
    taken from the family's own ``distances_from`` when it provides one.
    With ``shortcut``, a family that certifies its exact minimum pairwise
    distance skips the traversals whose outcome that minimum already fixes.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if len(family) == 0:
        raise ValueError("family is empty")
    oracle = distances if isinstance(distances, _Oracle) else _Oracle(family, distances, norms)
    n_pack = len(farthest_first(oracle, 2.0 * epsilon, shortcut))
    n_cover = len(greedy_cover(oracle, epsilon, shortcut))
    return CoveringEstimate(float(epsilon), n_pack, n_cover, math.log2(n_pack), math.log2(n_cover),
                            oracle.size)


# -- scaling fit ----------------------------------------------------------------------------


@dataclass
class LineFit:
    slope: float
    intercept: float
    residual: float
    points: int


@dataclass
class ScalingFit:
    lower: LineFit | None
    upper: LineFit | None

    def to_dict(self) -> dict:
        return asdict(self)


def _fit(x, y):
    keep = y > 0
    if keep.sum() < 2 or np.ptp(x[keep]) == 0:
        return None
    xs, ys = x[keep], np.log2(y[keep])
    A = np.stack([xs, np.ones_like(xs)], axis=1)
    coef, *_ = np.linalg.lstsq(A, ys, rcond=None)
    res = ys - A @ coef
    return LineFit(float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(res * res))), int(keep.sum()))


def scaling_fit(estimates) -> ScalingFit:
    """Least squares of log2 H against log2(1/eps), for h_lower and h_upper separately.

    Estimates with H = 0 carry no scaling information and are left out of
    the corresponding fit; a series with fewer than two positive values
    yields None.
    """
    if len(estimates) < 3:
        raise DegenerateFit("need at least three estimates", count=len(estimates))
    eps = np.array([e.epsilon for e in estimates], dtype=float)
    if np.ptp(eps) == 0:
        raise DegenerateFit("all estimates share the same epsilon", epsilon=float(eps[0]))
    x = np.log2(1.0 / eps)
    lo = _fit(x, np.array([e.h_lower for e in estimates]))
    hi = _fit(x, np.array([e.h_upper for e in estimates]))
    return ScalingFit(lo, hi)


# -- experiments ------------------------------------------------------------------------


@dataclass
class EntropyReport:
    kind: str
    estimates: list
    fit: ScalingFit | None
    reference: list
    checks: dict
    constants: dict
    extra: dict = field(default_factory=dict)

    def rows(self):
        """(eps, h_lower, h_upper, Gamma+/eps^N, Gamma-/eps^N) per estimate."""
        return [[e.epsilon, e.h_lower, e.h_upper, ref[0], ref[1]]
                for e, ref in zip(self.estimates, self.reference)]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "note": "h_lower and h_upper are statistics of the finite sampled family",
            "estimates": [e.to_dict() for e in self.estimates],
            "fit": self.fit.to_dict() if self.fit else None,
            "reference": self.reference,
            "checks": self.checks,
            "constants": self.constants,
            "extra": self.extra,
        }


CSV_HEADER = ["epsilon", "h_lower", "h_upper", "Gamma_plus_over_eps_N", "Gamma_minus_over_eps_N"]


def _reference(consts, epsilons, N):
    return [[consts.Gamma_plus / e ** N, consts.Gamma_minus / e ** N] for e in epsilons]


def image_entropy_experiment(spec, R: float, M: float, T: float, epsilons, fs: FamilySpec, grid,
                             cfg, rng: np.random.Generator | None = None, consts=None) -> EntropyReport:
    """Entropy of S_T(family) - S_T 0 at each epsilon, with the a-priori reference curves."""
    from .bounds import constants_report
    from .solver import solve

    a, n, dim = (grid.a, grid.n, grid.dim) if isinstance(grid, GridFunction) else grid
    consts = constants_report(spec, R, M, T) if consts is None else consts
    family = sample_family(fs, (a, n, dim), rng)
    zero = GridFunction.zeros(a, n, dim)
    s0 = solve(spec, zero, T, cfg).final
    images = [solve(spec, u, T, cfg).final - s0 for u in family]
    l_T = consts.l2_lT
    support_ok = True
    for phi in images:
        hull = support_of_difference(phi, zero, 1e-6)
        if hull is not None and any(lo < -l_T or hi > l_T for lo, hi in hull):
            support_ok = False
    D = distance_matrix(images)
    oracle = _Oracle(images, D)
    ests = [packing_and_cover(images, e, oracle) for e in epsilons]
    ref = _reference(consts, epsilons, dim)
    fit = scaling_fit(ests) if len(set(epsilons)) >= 3 and len(epsilons) >= 3 else None
    checks = {
        "support_within_l_T": support_ok,
        "lower_le_upper": all(e.h_lower <= e.h_upper for e in ests),
        "upper_le_Gamma_plus": all(e.h_upper <= r[0] for e, r in zip(ests, ref)),
    }
    return EntropyReport("image", ests, fit, ref, checks, consts.to_dict(),
                         {"members": len(images), "diameter": float(D.max())})


def bump_entropy_experiment(spec, r: float, K: float, epsilons, dx: float = 0.02, alpha: float = 0.8,
                            tau: float = 0.1, cfg=None, attain_samples: int = 2,
                            rng: np.random.Generator | None = None, inner_tol: float = 2.5e-2,
                            outer_tol: float = 1e-3) -> EntropyReport:
    """Separated bump families sized to each epsilon, certified as attainable on samples.

    At each epsilon the family uses cells_for_epsilon(eps, alpha) cells on
    [-r, r]^N. Attainability as time-tau images is checked by running the
    time-reversal reconstruction on ``attain_samples`` randomly chosen
    members per epsilon (pass: inner error <= ``inner_tol``, outer error <=
    ``outer_tol``, class membership). The reference curves use the data
    class that the reconstruction produces, with support 12 r and Lipschitz
    constant 10 m.
    """
    from .bounds import constants_report
    from .controllability import OUTER_FACTOR, SUPPORT_FACTOR, reconstruct
    from .solver import SolverConfig

    rng = np.random.default_rng(0) if rng is None else rng
    dim = spec.dim
    ests, fams, attain = [], [], []
    m_class = 0.0
    for e in epsilons:
        c = cells_for_epsilon(e, alpha, dim)
        a, n = aligned_n(r, c, dx)
        fam = separated_bump_family(r, K, c, (a, n, dim))
        fams.append(fam)
        est = packing_and_cover(fam, e)
        ests.append(est)
        m_class = max(m_class, lipschitz_estimate(fam[0]) / 4.0)
        log.info("eps=%g cells=%d members=%d packing=%d cover=%d", e, c, len(fam),
                 est.packing_count, est.cover_count)
    if attain_samples > 0:
        cfg = SolverConfig(dt=1e-3) if cfg is None else cfg
        for e, fam in zip(epsilons, fams):
            picks = rng.choice(len(fam), size=min(attain_samples, len(fam)), replace=False)
            a_big, n_big = aligned_n(r, fam.cells, fam.template.dx, OUTER_FACTOR * r)
            for i in sorted(int(p) for p in picks):
                signs = fam.signs(i)
                big = GridFunction.zeros(a_big, n_big, dim)
                vals = signs @ _bump_cells(big.coords(), r, fam.cells, K)
                psi = big.with_values(vals.reshape(big.values.shape))
                rec = reconstruct(spec, psi, tau, r, cfg, auto_tau=False)
                attain.append({"epsilon": e, "member": i, "passed": rec.report.passed(inner_tol, outer_tol),
                               **rec.report.to_dict()})
    consts = constants_report(spec, SUPPORT_FACTOR * r, 10.0 * max(m_class, 1e-12), tau, K=K)
    ref = _reference(consts, epsilons, dim)
    fit = scaling_fit(ests) if len(epsilons) >= 3 else None
    checks = {
        "lower_le_upper": all(x.h_lower <= x.h_upper for x in ests),
        "upper_le_Gamma_plus": all(x.h_upper <= rr[0] for x, rr in zip(ests, ref)),
        "min_distance_gt_2eps": all(f.min_distance > 2 * e for f, e in zip(fams, epsilons)),
        "upper_ge_Gamma_minus": all(x.h_upper >= rr[1] for x, rr in zip(ests, ref)),
        "sampled_members_attainable": all(a["passed"] for a in attain),
    }
    extra = {
        "cells": [f.cells for f in fams],
        "members": [len(f) for f in fams],
        "min_distance": [f.min_distance for f in fams],
        "m": m_class,
        "attainability": attain,
    }
    return EntropyReport("bump", ests, fit, ref, checks, consts.to_dict(), extra)
