"""Hamiltonians, their Legendre transforms, and structural validation.

Two analytic families are supported:

* ``quadratic``:       H(x, p) = |p|^2 / 2
* ``gaussian_power``:  H(x, p) = f(x) (1 + |p|^2)^m + g(x),
  with f(x) = a0 + a1 exp(-|x|^2 / sigma_f^2) and
  g(x) = b0 - b1 exp(-|x|^2 / sigma_g^2), m > 1/2.

Every routine is vectorised over a leading batch axis: points are arrays of
shape ``(k, N)``. A single point of shape ``(N,)`` is accepted and the batch
axis is dropped from the result.

The Lagrangian is L(x, q) = sup_p <p, q> - H(x, p). Two routes compute the
maximiser p*. :func:`legendre` runs a damped vector Newton iteration on the
stationarity condition D_p H(x, p) = q. :meth:`Lagrangian.p_star` exploits
the radial structure of both families (D_p H is parallel to p) and reduces
the problem to one scalar equation, which is what the solvers use on hot
paths. The two routes are cross-checked in the tests.
"""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy.stats import qmc

from ._search import golden_minimize
from .errors import NonConvergence, SingularHessian, ValidationFailure

KINDS = ("quadratic", "gaussian_power")
NEWTON_TOL = 1e-10


@dataclass(frozen=True)
class HamiltonianSpec:
    """Immutable description of a Hamiltonian and its declared structure constants.

    ``c1``..``c5`` and ``alpha`` are the constants the user claims for the
    growth, coercivity and spatial-derivative inequalities; they are not
    derived, only checked by :func:`validate_structure`.
    ``reflected`` switches to H(-x, p), used by the time-reversal machinery.
    """

    kind: str = "quadratic"
    dim: int = 1
    m: float = 1.0
    a0: float = 1.0
    a1: float = 0.0
    sigma_f: float = 1.0
    b0: float = 0.0
    b1: float = 0.0
    sigma_g: float = 1.0
    c1: float = 0.0
    c2: float = 0.5
    c3: float = 0.0
    c4: float = 0.0
    c5: float = 0.0
    alpha: float | None = None
    reflected: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown Hamiltonian kind {self.kind!r}; expected one of {KINDS}")
        if self.dim not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if self.kind == "gaussian_power":
            if self.m <= 0.5:
                raise ValueError("exponent m must exceed 1/2")
            if self.a0 <= 0 or self.a0 + min(self.a1, 0.0) <= 0:
                raise ValueError("f must stay positive: need a0 > 0 and a0 + a1 > 0")
            if self.sigma_f <= 0 or self.sigma_g <= 0:
                raise ValueError("Gaussian widths must be positive")
        if self.c2 <= 0:
            raise ValueError("c2 must be positive")
        if self.alpha is None:
            object.__setattr__(self, "alpha", self.default_alpha())
        if self.alpha <= 1:
            raise ValueError("alpha must exceed 1")

    def default_alpha(self) -> float:
        if self.kind == "quadratic":
            return 2.0
        return 2.0 * self.m / (2.0 * self.m - 1.0)

    @classmethod
    def quadratic(cls, dim: int = 1, **overrides) -> "HamiltonianSpec":
        return cls(kind="quadratic", dim=dim, **overrides)

    @classmethod
    def gaussian_power(cls, dim: int = 1, **params) -> "HamiltonianSpec":
        return cls(kind="gaussian_power", dim=dim, **params)

    @property
    def constants(self) -> tuple[float, float, float, float, float]:
        return (self.c1, self.c2, self.c3, self.c4, self.c5)

    def reflect(self) -> "HamiltonianSpec":
        return replace(self, reflected=not self.reflected)

    def to_dict(self) -> dict:
        return asdict(self)

    def spec_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


PRESETS = {
    "quadratic": dict(kind="quadratic"),
    "gaussian_power_unit": dict(kind="gaussian_power", m=1.0, a0=1.0, a1=0.0, b0=0.0, b1=0.0,
                                c1=0.0, c2=0.25, c3=1.0, c4=0.0, c5=0.0, alpha=2.0),
    "gaussian_power_bumped": dict(kind="gaussian_power", m=1.0, a0=1.0, a1=0.5, sigma_f=1.0,
                                  b0=0.0, b1=0.25, sigma_g=1.0, c1=0.0, c2=1.0 / 6.0, c3=1.25,
                                  c4=0.11, c5=0.22, alpha=2.0),
}


def preset(name: str, dim: int = 1) -> HamiltonianSpec:
    """Named Hamiltonians with verified structure constants.

    ``gaussian_power_unit`` has f = 1, g = 0; ``gaussian_power_bumped`` has a
    Gaussian bump in f and a Gaussian well in g.
    """
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    return HamiltonianSpec(dim=dim, **PRESETS[name])


class HEval(NamedTuple):
    """H and its analytic derivatives. ``Dpx[..., i, j]`` is d^2 H / dp_i dx_j."""

    H: np.ndarray
    Dp: np.ndarray
    Dx: np.ndarray
    Dpp: np.ndarray
    Dpx: np.ndarray
    Dxx: np.ndarray


class LEval(NamedTuple):
    """L and its derivatives. ``Dqx[..., i, j]`` is d^2 L / dq_i dx_j."""

    L: np.ndarray
    Dq: np.ndarray
    Dx: np.ndarray
    Dqq: np.ndarray
    Dqx: np.ndarray
    Dxx: np.ndarray


def _batch(x, dim):
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
        single = True
    elif single:
        arr = arr.reshape(1, -1)
    if arr.shape[-1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {np.shape(x)}")
    return arr, single


def _unbatch(tup, single):
    if not single:
        return tup
    return type(tup)(*(v[0] for v in tup))


def _gaussian(x, amp, sigma):
    """amp * exp(-|x|^2/sigma^2) with gradient and Hessian."""
    r2 = np.einsum("ki,ki->k", x, x)
    e = amp * np.exp(-r2 / sigma**2)
    grad = (-2.0 / sigma**2) * e[:, None] * x
    n = x.shape[1]
    outer = np.einsum("ki,kj->kij", x, x)
    hess = e[:, None, None] * ((4.0 / sigma**4) * outer - (2.0 / sigma**2) * np.eye(n))
    return e, grad, hess


def coefficients(spec: HamiltonianSpec, x):
    """f, grad f, Hess f, g, grad g, Hess g at a batch of points (unreflected)."""
    k, n = x.shape
    ef, gf, hf = _gaussian(x, spec.a1, spec.sigma_f)
    eg, gg, hg = _gaussian(x, spec.b1, spec.sigma_g)
    return spec.a0 + ef, gf, hf, spec.b0 - eg, -gg, -hg


def _eval_raw(spec, x, p):
    k, n = p.shape
    eye = np.broadcast_to(np.eye(n), (k, n, n))
    if spec.kind == "quadratic":
        zero_v = np.zeros((k, n))
        zero_m = np.zeros((k, n, n))
        H = 0.5 * np.einsum("ki,ki->k", p, p)
        return HEval(H, p.copy(), zero_v, eye.copy(), zero_m, zero_m.copy())
    f, gf, hf, g, gg, hg = coefficients(spec, x)
    m = spec.m
    s = 1.0 + np.einsum("ki,ki->k", p, p)
    sm = s**m
    sm1 = s ** (m - 1.0)
    H = f * sm + g
    Dp = (2.0 * m * f * sm1)[:, None] * p
    Dx = gf * sm[:, None] + gg
    Dpp = (2.0 * m * f * sm1)[:, None, None] * eye + (
        4.0 * m * (m - 1.0) * f * s ** (m - 2.0)
    )[:, None, None] * np.einsum("ki,kj->kij", p, p)
    Dpx = (2.0 * m * sm1)[:, None, None] * np.einsum("ki,kj->kij", p, gf)
    Dxx = hf * sm[:, None, None] + hg
    return HEval(H, Dp, Dx, Dpp, Dpx, Dxx)


def eval_h(spec: HamiltonianSpec, x, p) -> HEval:
    """Evaluate H with all first and second derivatives."""
    xb, single = _batch(x, spec.dim)
    pb, single_p = _batch(p, spec.dim)
    xb, pb = np.broadcast_arrays(xb, pb)
    if spec.reflected:
        r = _eval_raw(spec, -xb, pb)
        out = HEval(r.H, r.Dp, -r.Dx, r.Dpp, -r.Dpx, r.Dxx)
    else:
        out = _eval_raw(spec, xb, pb)
    return _unbatch(out, single and single_p)


def h_value(spec: HamiltonianSpec, x, p) -> np.ndarray:
    """H only, without derivative overhead. Accepts any broadcastable shapes (..., N)."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    p2 = np.sum(p * p, axis=-1)
    if spec.kind == "quadratic":
        return 0.5 * p2
    if spec.reflected:
        x = -x
    r2 = np.sum(x * x, axis=-1)
    f = spec.a0 + spec.a1 * np.exp(-r2 / spec.sigma_f**2)
    g = spec.b0 - spec.b1 * np.exp(-r2 / spec.sigma_g**2)
    return f * (1.0 + p2) ** spec.m + g


def _f_value(spec, x):
    if spec.reflected:
        x = -x
    r2 = np.sum(x * x, axis=-1)
    f = spec.a0 + spec.a1 * np.exp(-r2 / spec.sigma_f**2)
    g = spec.b0 - spec.b1 * np.exp(-r2 / spec.sigma_g**2)
    return f, g


def _radial_root(sigma, m, tol=1e-13, max_iter=200):
    """Solve 2 m rho (1 + rho^2)^(m-1) = sigma for rho >= 0 (sigma >= 0 array).

    Newton iteration kept inside a shrinking bracket; any iterate that leaves
    the bracket is replaced by the bracket midpoint.
    """
    sigma = np.asarray(sigma, dtype=float)
    if m == 1.0:
        return sigma / 2.0
    lo = np.zeros_like(sigma)
    hi = np.maximum(sigma / (2.0 * m), 1.0)

    def phi(r):
        return 2.0 * m * r * (1.0 + r * r) ** (m - 1.0)

    for _ in range(200):
        short = phi(hi) < sigma
        if not short.any():
            break
        hi = np.where(short, 2.0 * hi, hi)
    rho = np.clip(sigma / (2.0 * m), lo, hi)
    for _ in range(max_iter):
        s = 1.0 + rho * rho
        val = 2.0 * m * rho * s ** (m - 1.0) - sigma
        if np.all(np.abs(val) <= tol * np.maximum(1.0, sigma)):
            return rho
        lo = np.where(val < 0, rho, lo)
        hi = np.where(val > 0, rho, hi)
        der = 2.0 * m * s ** (m - 2.0) * (1.0 + (2.0 * m - 1.0) * rho * rho)
        nxt = rho - val / der
        bad = (nxt <= lo) | (nxt >= hi) | ~np.isfinite(nxt)
        rho = np.where(bad, 0.5 * (lo + hi), nxt)
        if np.all(hi - lo <= 1e-15 * np.maximum(1.0, hi)):
            return rho
    raise NonConvergence("radial Legendre root did not converge", m=m)


class LegendreResult(NamedTuple):
    L: np.ndarray
    p: np.ndarray
    iterations: int
    residual: float


@dataclass
class Lagrangian:
    """Lazily evaluated Lagrangian L(x, q) of a :class:`HamiltonianSpec`."""

    spec: HamiltonianSpec
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.spec.dim

    def p_star(self, x, q) -> np.ndarray:
        """Maximiser p* of <p, q> - H(x, p); arrays broadcast over leading axes."""
        q = np.asarray(q, dtype=float)
        if self.spec.kind == "quadratic":
            return np.broadcast_to(q, np.broadcast_shapes(np.shape(x), q.shape)).copy()
        f, _ = _f_value(self.spec, np.asarray(x, dtype=float))
        qn = np.sqrt(np.sum(q * q, axis=-1))
        rho = _radial_root(qn / f, self.spec.m)
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(qn > 0, rho / np.where(qn > 0, qn, 1.0), 0.0)
        return scale[..., None] * q

    def value(self, x, q) -> np.ndarray:
        """L(x, q) for broadcastable arrays of shape (..., N)."""
        q = np.asarray(q, dtype=float)
        if self.spec.kind == "quadratic":
            return 0.5 * np.sum(q * q, axis=-1)
        x = np.asarray(x, dtype=float)
        f, g = _f_value(self.spec, x)
        qn = np.sqrt(np.sum(q * q, axis=-1))
        m = self.spec.m
        if m == 1.0:
            return qn * qn / (4.0 * f) - f - g
        sigma = qn / f
        rho = _radial_root(sigma, m)
        return f * (rho * sigma - (1.0 + rho * rho) ** m) - g

    def derivatives(self, x, q) -> LEval:
        return lagrangian_derivatives(self, x, q)


def legendre(view: Lagrangian, x, q, tol: float = NEWTON_TOL, max_iter: int = 100) -> LegendreResult:
    """L(x, q) by damped Newton on D_p H(x, p) = q.

    The initial guess is the exact maximiser of the frozen-coefficient
    problem with m = 1, namely q / (2 f(x)) (or q itself for the quadratic
    family). Each Newton step is halved along its ray until the concave
    objective <p, q> - H(x, p) does not decrease.
    """
    spec = view.spec
    xb, single = _batch(x, spec.dim)
    qb, single_q = _batch(q, spec.dim)
    xb, qb = np.broadcast_arrays(xb, qb)
    xb = np.ascontiguousarray(xb)
    if spec.kind == "quadratic":
        p = qb.copy()
    else:
        f, _ = _f_value(spec, xb)
        p = qb / (2.0 * spec.m * f[:, None])

    def objective(pp):
        return np.einsum("ki,ki->k", pp, qb) - h_value(spec, xb, pp)

    it = 0
    res = np.inf
    for it in range(1, max_iter + 1):
        he = eval_h(spec, xb, p)
        r = he.Dp - qb
        res_vec = np.sqrt(np.einsum("ki,ki->k", r, r))
        scale = np.maximum(1.0, np.sqrt(np.einsum("ki,ki->k", qb, qb)))
        res = float(np.max(res_vec / scale))
        if res <= tol:
            break
        step = np.linalg.solve(he.Dpp, r[..., None])[..., 0]
        lam = np.ones(len(p))
        base = objective(p)
        for _ in range(60):
            trial = p - lam[:, None] * step
            worse = objective(trial) < base - 1e-15 * np.abs(base)
            if not worse.any():
                break
            lam = np.where(worse, 0.5 * lam, lam)
        p = p - lam[:, None] * step
    else:
        raise NonConvergence("Legendre Newton iteration did not converge", residual=res)
    Lval = np.einsum("ki,ki->k", p, qb) - h_value(spec, xb, p)
    if single and single_q:
        return LegendreResult(Lval[0], p[0], it, res)
    return LegendreResult(Lval, p, it, res)


def lagrangian_derivatives(view: Lagrangian, x, q, p=None) -> LEval:
    """L and its derivatives via the envelope theorem and implicit differentiation.

    D_q L = p*, D_x L = -D_x H(x, p*), D_qq L = (D_pp H)^{-1},
    D_qx L = -(D_pp H)^{-1} D_px H, D_xx L = -D_xx H + D_xp H (D_pp H)^{-1} D_px H.
    """
    spec = view.spec
    xb, single = _batch(x, spec.dim)
    qb, single_q = _batch(q, spec.dim)
    xb, qb = np.broadcast_arrays(xb, qb)
    pb = view.p_star(xb, qb) if p is None else _batch(p, spec.dim)[0]
    he = eval_h(spec, xb, pb)
    cond = np.linalg.cond(he.Dpp)
    if np.any(~np.isfinite(cond)) or np.any(cond > 1e12):
        raise SingularHessian("D_pp H is singular at the Legendre maximiser", max_cond=float(np.max(cond)))
    inv = np.linalg.inv(he.Dpp)
    Lval = np.einsum("ki,ki->k", pb, qb) - he.H
    Dqx = -inv @ he.Dpx
    Dxp = np.swapaxes(he.Dpx, -1, -2)
    Dxx = -he.Dxx + Dxp @ inv @ he.Dpx
    out = LEval(Lval, pb.copy(), -he.Dx, inv, Dqx, Dxx)
    return _unbatch(out, single and single_q)


@dataclass
class ValidationReport:
    passed: bool
    n_samples: int
    margins: dict
    worst_points: dict
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "n_samples": self.n_samples,
            "margins": self.margins,
            "worst_points": self.worst_points,
            "tolerance": self.tolerance,
        }


def _sample_pairs(dim, box, p_box, n_samples, rng):
    """Sobol samples of (x, p) in a box plus a far-field ring of larger radii."""
    n_box = int(round(0.8 * n_samples))
    n_ring = n_samples - n_box
    with warnings.catch_warnings():
        # counts need not be powers of two; the balance loss is immaterial here
        warnings.simplefilter("ignore", UserWarning)
        u = qmc.Sobol(d=2 * dim, scramble=True, seed=rng).random(n_box) * 2.0 - 1.0
        v = qmc.Sobol(d=2 * dim + 2, scramble=True, seed=rng).random(n_ring)
    x = u[:, :dim] * box
    p = u[:, dim:] * p_box
    rx = box * 10.0 ** v[:, 0]
    rp = p_box * 10.0 ** v[:, 1]
    if dim == 1:
        dx = np.where(v[:, 2:3] < 0.5, -1.0, 1.0)
        dp = np.where(v[:, 3:4] < 0.5, -1.0, 1.0)
    else:
        ax = 2 * np.pi * v[:, 2]
        ap = 2 * np.pi * v[:, 3]
        dx = np.stack([np.cos(ax), np.sin(ax)], axis=1)
        dp = np.stack([np.cos(ap), np.sin(ap)], axis=1)
    x = np.vstack([x, rx[:, None] * dx])
    p = np.vstack([p, rp[:, None] * dp])
    return x, p


def validate_structure(
    spec: HamiltonianSpec,
    box: float = 3.0,
    p_box: float = 5.0,
    n_samples: int = 10_000,
    rng: np.random.Generator | None = None,
    tol: float = 1e-9,
    raise_on_failure: bool = True,
) -> ValidationReport:
    """Check the declared constants against three H and three L inequalities.

    Margins are normalised by the size of the terms involved, so ``tol`` is a
    relative slack for round-off. A margin below ``-tol`` is a violation.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    c1, c2, c3, c4, c5 = spec.constants
    a = spec.alpha
    x, p = _sample_pairs(spec.dim, box, p_box, n_samples, rng)
    q = p
    nx = np.linalg.norm(x, axis=1)
    he = eval_h(spec, x, p)
    dp_norm = np.linalg.norm(he.Dp, axis=1)
    dx_norm = np.linalg.norm(he.Dx, axis=1)
    pdp = np.einsum("ki,ki->k", p, he.Dp)

    view = Lagrangian(spec)
    le = lagrangian_derivatives(view, x, q)
    l_zero = view.value(x, np.zeros_like(x))
    qn = np.linalg.norm(q, axis=1)
    lx_norm = np.linalg.norm(le.Dx, axis=1)
    min_eig = np.linalg.eigvalsh(he.Dpp)[:, 0]

    checks = {
        "H_lower_growth": (he.H, -c1 * (1 + nx)),
        "H_coercivity": (pdp - he.H, c2 * dp_norm**a - c3),
        "H_spatial_derivative": (c4 * dp_norm**a + c5, dx_norm),
        "L_at_zero_velocity": (c1 * (1 + nx), l_zero),
        "L_superlinear_growth": (le.L, c2 * qn**a - c3),
        "L_spatial_derivative": (c4 * qn**a + c5, lx_norm),
        "strict_convexity": (min_eig, np.zeros_like(min_eig)),
    }
    margins = {}
    worst = {}
    passed = True
    for name, (lhs, rhs) in checks.items():
        raw = lhs - rhs
        rel = raw / (1.0 + np.abs(lhs) + np.abs(rhs))
        if name == "strict_convexity":
            rel = np.where(raw > 0, rel, -1.0)
        i = int(np.argmin(rel))
        margins[name] = {"worst_raw": float(raw[i]), "worst_relative": float(rel[i]),
                         "violations": int(np.sum(rel < -tol))}
        worst[name] = {"x": x[i].tolist(), "p": p[i].tolist()}
        if rel[i] < -tol:
            passed = False
    report = ValidationReport(passed, len(x), margins, worst, tol)
    if not passed and raise_on_failure:
        bad = [k for k, v in margins.items() if v["violations"]]
        raise ValidationFailure(f"declared constants violated: {', '.join(bad)}", report=report,
                                violated=bad)
    return report


def conjugate_of_lagrangian(view: Lagrangian, x, p, q_bound: float = 1.0,
                            coarse: int = 201, iters: int = 80) -> np.ndarray:
    """Numerical biconjugate sup_q <p, q> - L(x, q) in one dimension.

    A coarse grid locates the maximiser and a vectorised golden-section
    search refines it. The search interval doubles until the coarse maximiser
    is interior for every sample.
    """
    if view.dim != 1:
        raise ValueError("numerical biconjugate is implemented for N = 1")
    x = np.asarray(x, dtype=float).reshape(-1)
    p = np.asarray(p, dtype=float).reshape(-1)
    bound = q_bound
    while True:
        grid = np.linspace(-bound, bound, coarse)
        vals = p[:, None] * grid[None, :] - view.value(x[:, None, None], grid[None, :, None])
        j = np.argmax(vals, axis=1)
        if np.all((j > 0) & (j < coarse - 1)) or bound > 1e6:
            break
        bound *= 2.0
    h = grid[1] - grid[0]

    def neg(qv):
        return view.value(x[:, None], qv[:, None]) - p * qv

    _, best = golden_minimize(neg, grid[j] - h, grid[j] + h, iters)
    return np.maximum(-best, vals.max(axis=1))
