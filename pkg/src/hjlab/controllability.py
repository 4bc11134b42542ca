"""Time-reversal construction of an initial datum that steers S_tau to a target.

Given a target profile psi on [-r, r]^N that meets S_tau 0 in a C^1 way on
the boundary of the cube, the pipeline is

1. extend psi by S_tau 0 outside the cube (``extend_profile``);
2. solve the reflected equation w_t + H(-x, D w) = 0 from w0(x) = -psi~(-x)
   and recover u(0, x) = -w(tau, -x) (``reverse_solve``);
3. trace backward characteristics from the boundaries of [-r, r]^N and
   [-6r, 6r]^N to obtain nested regions Omega1, Omega2 and carve
       u0#(x) = u(0, x)            on Omega1,
              = max(0, u(0, x))    on Omega2 minus Omega1,
              = 0                  elsewhere
   (``carve_initial_datum``);
4. forward-solve u0# and compare with psi and S_tau 0 (``verify_reconstruction``).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .bounds import semiconvexity_window
from .characteristics import integrate
from .errors import NonNestedRegions, SeamMismatch
from .grid import GridFunction
from .hamiltonian import HamiltonianSpec
from .regularity import lipschitz_estimate, second_difference_extremes, support_of_difference
from .solver import SolverConfig, solve

INNER_FACTOR = 6.0
SUPPORT_FACTOR = 12.0
OUTER_FACTOR = 36.0


def extend_profile(psi: GridFunction, s_tau_0: GridFunction, r: float, blend_width: int = 4,
                   value_tol: float = 1e-6, slope_tol: float | None = None) -> GridFunction:
    """psi inside [-r, r]^N, S_tau 0 outside, with a C^1 check at the seam.

    ``psi`` lives on the same grid as ``s_tau_0``; only its values inside the
    cube are used. When psi and S_tau 0 agree to ``value_tol`` on the seam
    nodes the extension is the plain indicator splice; a residual mismatch
    below the slope tolerance is tapered off with a cubic Hermite profile over
    ``blend_width`` cells. Mismatches above tolerance raise SeamMismatch.
    """
    if not psi.same_grid(s_tau_0):
        raise ValueError("psi and S_tau 0 must share a grid")
    if psi.a < r:
        raise ValueError("grid box does not contain [-r, r]^N")
    h = psi.dx
    slope_tol = 0.25 if slope_tol is None else slope_tol
    inside = psi.box_mask(r)
    seam = inside & ~psi.box_mask(r - h)
    diff = psi.values - s_tau_0.values
    value_gap = float(np.max(np.abs(diff[seam])))
    slope_gap = value_gap / h
    if slope_gap > slope_tol:
        raise SeamMismatch("target and S_tau 0 do not meet in a C^1 way on the cube boundary",
                           value_gap=value_gap, slope_gap=slope_gap)
    out = np.where(inside, psi.values, s_tau_0.values)
    if value_gap > value_tol:
        X = psi.coords()
        Y = np.clip(X, -r, r)
        s = np.max(np.abs(X - Y), axis=1) / (blend_width * h)
        taper = np.where(s < 1.0, 1.0 - s * s * (3.0 - 2.0 * s), 0.0)
        e = psi.with_values(diff).interp(Y)
        out = out + (np.where(inside.ravel(), 0.0, e * taper)).reshape(out.shape)
    return psi.with_values(out)


def default_tau(spec: HamiltonianSpec, tau: float, r: float, lip: float, safety: float = 0.5) -> float:
    """min(tau, safety * tau4) with the window of the reflected Hamiltonian."""
    from .bounds import tau4_scan

    N = spec.dim
    c = max(lip, 1e-6) * math.sqrt(N) * r
    tau4, _ = tau4_scan(spec.reflect(), c, r, max(lip, 1e-6))
    return min(tau, safety * tau4)


@dataclass
class ReverseResult:
    u0: GridFunction
    snapshots: list
    times: np.ndarray
    sc_inf: list


def reverse_solve(spec: HamiltonianSpec, psi_tilde: GridFunction, tau: float, cfg: SolverConfig,
                  check_window: bool = True, R: float | None = None, M: float | None = None,
                  n_snapshots: int = 5) -> ReverseResult:
    """u(0, .) from the reflected equation, so that the classical solution reaches psi~ at tau."""
    if check_window:
        lip = lipschitz_estimate(psi_tilde)
        semiconvexity_window(spec.reflect(), R if R is not None else psi_tilde.a,
                             M if M is not None else max(lip, 1e-6), tau)
    w0 = -psi_tilde.reflect()
    times = list(np.linspace(0.0, tau, n_snapshots))
    sol = solve(spec.reflect(), w0, tau, cfg, times=times)
    u0 = -sol.final.reflect()
    sc = [second_difference_extremes(fr)[1] for fr in sol.frames]
    return ReverseResult(u0, sol.frames, sol.times, sc)


def reversal_transform(w: GridFunction) -> GridFunction:
    """v(x) -> -v(-x); an involution on grid functions."""
    return -w.reflect()


def _boundary_nodes(u: GridFunction, half: float):
    """Grid points on the boundary of [-half, half]^N in boundary order."""
    if u.dim == 1:
        return np.array([[-half], [half]])
    k = max(8, int(round(2 * half / u.dx)))
    t = np.linspace(-half, half, k + 1)[:-1]
    bottom = np.stack([t, np.full_like(t, -half)], 1)
    right = np.stack([np.full_like(t, half), t], 1)
    top = np.stack([-t, np.full_like(t, half)], 1)
    left = np.stack([np.full_like(t, -half), -t], 1)
    return np.vstack([bottom, right, top, left])


def _feet(spec, psi_tilde: GridFunction, ys, tau, steps):
    h = psi_tilde.dx
    p = np.empty_like(ys)
    for ax in range(psi_tilde.dim):
        e = np.zeros(psi_tilde.dim)
        e[ax] = h
        p[:, ax] = (psi_tilde.interp(ys + e) - psi_tilde.interp(ys - e)) / (2 * h)
    tr = integrate(spec, (ys, p), (0.0, tau), steps)
    return tr.xi[0]


@dataclass
class CarveResult:
    u0_sharp: GridFunction
    lambda1: np.ndarray
    lambda2: np.ndarray
    omega1: list
    omega2: list
    nesting: dict
    seam_values: float


def _region_mask(u: GridFunction, feet):
    if u.dim == 1:
        lo, hi = float(feet[0, 0]), float(feet[1, 0])
        ax = u.axis
        return (ax >= lo) & (ax <= hi), [(lo, hi)], None
    import shapely

    poly = shapely.Polygon(feet)
    if not poly.is_valid:
        poly = shapely.make_valid(poly)
    X = u.coords()
    mask = shapely.contains_xy(poly, X[:, 0], X[:, 1]) | shapely.intersects_xy(poly.boundary, X[:, 0], X[:, 1])
    xmin, ymin, xmax, ymax = poly.bounds
    return mask.reshape(u.values.shape), [(xmin, xmax), (ymin, ymax)], poly


def _radius(feet):
    return float(np.max(np.linalg.norm(feet, axis=1)))


def _inner_radius(feet):
    return float(np.min(np.linalg.norm(feet, axis=1)))


def carve_initial_datum(u0_full: GridFunction, spec: HamiltonianSpec, psi_tilde: GridFunction,
                        tau: float, r: float, steps: int = 200) -> CarveResult:
    """Three-branch splice of u(0, .) on the regions enclosed by the boundary-characteristic feet."""
    ys1 = _boundary_nodes(psi_tilde, r)
    ys2 = _boundary_nodes(psi_tilde, INNER_FACTOR * r)
    lam1 = _feet(spec, psi_tilde, ys1, tau, steps)
    lam2 = _feet(spec, psi_tilde, ys2, tau, steps)
    m1, om1, p1 = _region_mask(u0_full, lam1)
    m2, om2, p2 = _region_mask(u0_full, lam2)
    if u0_full.dim == 1:
        nested = om2[0][0] < om1[0][0] and om1[0][1] < om2[0][1]
    else:
        nested = bool(p1.within(p2))
    if not nested:
        raise NonNestedRegions("inner region is not contained in the outer one; reduce tau",
                               omega1=om1, omega2=om2)
    nesting = {
        "omega1_in_ball_2r": _radius(lam1) < 2 * r,
        "ball_2r_in_omega2": _inner_radius(lam2) > 2 * r,
        "omega2_in_ball_12r": _radius(lam2) < SUPPORT_FACTOR * r,
    }
    u = u0_full.values
    out = np.where(m1, u, np.where(m2, np.maximum(0.0, u), 0.0))
    seam = max(float(np.max(np.abs(u0_full.interp(lam1)))), float(np.max(np.abs(u0_full.interp(lam2)))))
    return CarveResult(u0_full.with_values(out), lam1, lam2, om1, om2, nesting, seam)


@dataclass
class ReconstructionReport:
    inner_error: float
    outer_error: float
    support_hull: list | None
    lipschitz: float
    support_target: float
    lipschitz_target: float
    omega1: list
    omega2: list
    nesting: dict = field(default_factory=dict)
    tau: float = 0.0
    m: float = 0.0

    @property
    def membership_ok(self) -> bool:
        sup_ok = self.support_hull is None or all(
            lo >= -self.support_target - 1e-9 and hi <= self.support_target + 1e-9
            for lo, hi in self.support_hull)
        return bool(sup_ok and self.lipschitz <= self.lipschitz_target)

    def passed(self, inner_tol: float, outer_tol: float) -> bool:
        return self.inner_error <= inner_tol and self.outer_error <= outer_tol and self.membership_ok

    def to_dict(self) -> dict:
        d = asdict(self)
        d["membership_ok"] = self.membership_ok
        return d


def verify_reconstruction(spec: HamiltonianSpec, u0_sharp: GridFunction, psi: GridFunction,
                          tau: float, r: float, cfg: SolverConfig, m: float,
                          carve: CarveResult | None = None, lip_tol: float | None = None) -> ReconstructionReport:
    """Forward-solve u0# and 0 to tau and compare against psi and S_tau 0."""
    s_u = solve(spec, u0_sharp, tau, cfg).final
    zero = GridFunction.zeros(u0_sharp.a, u0_sharp.n, u0_sharp.dim)
    s_0 = solve(spec, zero, tau, cfg).final
    inner = u0_sharp.box_mask(r)
    outer = ~inner & u0_sharp.box_mask(OUTER_FACTOR * r)
    inner_err = float(np.max(np.abs(s_u.values - psi.values)[inner]))
    outer_err = float(np.max(np.abs(s_u.values - s_0.values)[outer])) if outer.any() else 0.0
    lip_tol = 1e-3 if lip_tol is None else lip_tol
    return ReconstructionReport(
        inner_error=inner_err,
        outer_error=outer_err,
        support_hull=support_of_difference(u0_sharp, zero, 1e-9),
        lipschitz=lipschitz_estimate(u0_sharp),
        support_target=SUPPORT_FACTOR * r,
        lipschitz_target=10.0 * m + lip_tol,
        omega1=carve.omega1 if carve else [],
        omega2=carve.omega2 if carve else [],
        nesting=carve.nesting if carve else {},
        tau=tau,
        m=m,
    )


def class_m(psi: GridFunction, s_tau_0: GridFunction, r: float) -> float:
    """Smallest m with Lip(psi) <= 4m on the cube and Lip(S_tau 0) <= 2m."""
    return max(lipschitz_estimate(psi, r) / 4.0, lipschitz_estimate(s_tau_0) / 2.0, 1e-12)


@dataclass
class Reconstruction:
    report: ReconstructionReport
    u0_sharp: GridFunction
    psi_tilde: GridFunction
    reverse: ReverseResult
    carve: CarveResult


def reconstruct(spec: HamiltonianSpec, psi: GridFunction, tau: float, r: float, cfg: SolverConfig,
                blend_width: int = 4, auto_tau: bool = True, steps: int = 200) -> Reconstruction:
    """Whole pipeline: extend, reverse, carve, verify."""
    if auto_tau:
        tau = default_tau(spec, tau, r, lipschitz_estimate(psi, r))
    zero = GridFunction.zeros(psi.a, psi.n, psi.dim)
    s0 = solve(spec, zero, tau, cfg).final
    psi_t = extend_profile(psi, s0, r, blend_width)
    rev = reverse_solve(spec, psi_t, tau, cfg, check_window=False)
    carve = carve_initial_datum(rev.u0, spec, psi_t, tau, r, steps)
    m = class_m(psi, s0, r)
    rep = verify_reconstruction(spec, carve.u0_sharp, psi_t, tau, r, cfg, m, carve)
    return Reconstruction(rep, carve.u0_sharp, psi_t, rev, carve)


def cosine_target(a: float, n: int, r: float = 1.0, amplitude: float = 0.02, dim: int = 1) -> GridFunction:
    """C^1 bump amplitude * prod(1 + cos(pi x_i / r)) on [-r, r]^N, zero outside."""
    def f(X):
        inside = np.all(np.abs(X) <= r, axis=1)
        return np.where(inside, amplitude * np.prod(1.0 + np.cos(np.pi * X / r), axis=1), 0.0)

    return GridFunction.from_function(f, a, n, dim)
