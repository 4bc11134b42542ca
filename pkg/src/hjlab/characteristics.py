"""Backward characteristics of the Hamiltonian system

    xi' = D_p H(xi, p),    p' = -D_x H(xi, p),

integrated by classical fixed-step RK4, and optimality checks of the
resulting arcs against a solved value function.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlowUp
from .grid import GridFunction
from .hamiltonian import HamiltonianSpec, Lagrangian, eval_h, h_value, lagrangian_derivatives
from .io import write_csv


@dataclass
class Trajectory:
    times: np.ndarray
    xi: np.ndarray
    p: np.ndarray
    kind: str = "backward"

    def __post_init__(self):
        if self.kind not in ("forward", "backward"):
            raise ValueError("kind must be 'forward' or 'backward'")
        if not (len(self.times) == len(self.xi) == len(self.p)):
            raise ValueError("times, xi and p must have equal length")

    def energy(self, spec: HamiltonianSpec) -> np.ndarray:
        return h_value(spec, self.xi, self.p)

    def energy_drift(self, spec: HamiltonianSpec) -> float:
        e = self.energy(spec)
        return float(np.max(np.abs(e - e[-1])))

    def write_csv(self, path, spec: HamiltonianSpec):
        dim = self.xi.shape[1]
        head = ["s"] + [f"xi{i}" for i in range(dim)] + [f"p{i}" for i in range(dim)] + ["H"]
        e = self.energy(spec)
        rows = ([self.times[k], *self.xi[k], *self.p[k], e[k]] for k in range(len(self.times)))
        return write_csv(path, head, rows)


def _rhs(spec, xi, p):
    he = eval_h(spec, xi, p)
    return he.Dp, -he.Dx


def integrate(spec: HamiltonianSpec, terminal, t_span, steps: int, bound: float = 1e6) -> Trajectory:
    """RK4 backward from (xi, p) at t_span[1] to t_span[0].

    ``terminal`` is a pair (x, p) of arrays of shape (N,), or of shape
    (k, N) to integrate k arcs at once (then ``xi`` and ``p`` in the result
    carry an extra batch axis after time).
    """
    if steps < 4:
        raise ValueError("need at least four steps")
    t0, t1 = map(float, t_span)
    x, p = (np.asarray(v, dtype=float) for v in terminal)
    single = x.ndim == 1
    x = np.atleast_2d(x).copy()
    p = np.atleast_2d(p).copy()
    h = (t1 - t0) / steps
    xs = np.empty((steps + 1,) + x.shape)
    ps = np.empty_like(xs)
    xs[steps], ps[steps] = x, p
    for k in range(steps, 0, -1):
        # integrate in reversed time: d/ds with step -h
        k1x, k1p = _rhs(spec, x, p)
        k2x, k2p = _rhs(spec, x - 0.5 * h * k1x, p - 0.5 * h * k1p)
        k3x, k3p = _rhs(spec, x - 0.5 * h * k2x, p - 0.5 * h * k2p)
        k4x, k4p = _rhs(spec, x - h * k3x, p - h * k3p)
        x = x - (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        p = p - (h / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))) or np.max(np.abs(x)) > bound \
                or np.max(np.abs(p)) > bound:
            raise BlowUp("characteristic left the admissible region", step=k, bound=bound)
        xs[k - 1], ps[k - 1] = x, p
    times = np.linspace(t0, t1, steps + 1)
    if single:
        return Trajectory(times, xs[:, 0], ps[:, 0], "backward")
    return Trajectory(times, xs, ps, "backward")


@dataclass
class MinimizerReport:
    gradient_mismatch: float
    value_residual: float
    euler_lagrange_residual: float
    duality_residual: float
    shock: bool
    jump: float
    initial_covector_in_hull: bool
    energy_drift: float

    def to_dict(self):
        return dict(self.__dict__)


def _node_gradient(u: GridFunction, idx, jump_tol):
    """Central difference at a node, or the smaller one-sided difference at a jump."""
    v = u.values
    h = u.dx
    g = np.empty(u.dim)
    jump = 0.0
    for ax in range(u.dim):
        i = list(idx)
        lo = list(idx)
        hi = list(idx)
        lo[ax] = max(i[ax] - 1, 0)
        hi[ax] = min(i[ax] + 1, u.n - 1)
        left = (v[tuple(i)] - v[tuple(lo)]) / h
        right = (v[tuple(hi)] - v[tuple(i)]) / h
        jump = max(jump, abs(right - left))
        if abs(right - left) > jump_tol:
            g[ax] = left if abs(left) < abs(right) else right
        else:
            g[ax] = 0.5 * (left + right)
    return g, jump


_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def _in_gradient_hull(u0: GridFunction, foot, p0, radius=None, slack=1e-6) -> bool:
    r = 3 * u0.dx if radius is None else radius
    offs = np.linspace(-r, r, 2 * int(np.ceil(r / u0.dx)) + 3)
    ok = True
    for ax in range(u0.dim):
        pts = np.repeat(foot[None, :], len(offs), axis=0)
        pts[:, ax] += offs
        g = u0.interp_gradient(pts)[:, ax]
        ok &= bool(g.min() - slack <= p0[ax] <= g.max() + slack)
    return ok


def arcs_cross(trajectories, tol: float = 1e-9) -> list:
    """Pairs (i, j) of 1-D arcs whose order swaps at an interior time.

    Arcs must share the time grid. Touching at the initial time is allowed.
    """
    xs = np.stack([tr.xi[:, 0] for tr in trajectories])
    bad = []
    for i in range(len(xs)):
        for j in range(i + 1, len(xs)):
            d = xs[i, 1:] - xs[j, 1:]
            final = np.sign(d[-1])
            if final != 0 and np.any(final * d < -tol):
                bad.append((i, j))
    return bad


def _interp_central_gradient(u: GridFunction, pts):
    h = u.dx
    out = np.empty(pts.shape)
    for ax in range(u.dim):
        e = np.zeros(u.dim)
        e[ax] = h
        out[:, ax] = (u.interp(pts + e) - u.interp(pts - e)) / (2 * h)
    return out


def backward_minimizer(spec: HamiltonianSpec, solution, x, t: float | None = None,
                       steps: int = 200, jump_tol: float = 0.25,
                       hull_radius: float | None = None):
    """Backward characteristic from the node nearest x at time t, with optimality residuals.

    ``solution`` is a :class:`~hjlab.solver.Solution`; its frames supply both
    the terminal covector (discrete gradient at time t) and the gradients
    along the arc used for the mismatch check. The initial covector is
    checked against the hull of one-sided difference quotients of u0 within
    ``hull_radius`` of the foot (default three cells), which absorbs the
    grid-scale error of the terminal gradient.
    """
    t = float(solution.times[-1]) if t is None else t
    u_t = solution.at(t)
    idx = u_t.node_index(x)
    node = u_t.axis[list(idx)]
    p_t, jump = _node_gradient(u_t, idx, jump_tol)
    shock = jump > jump_tol
    traj = integrate(spec, (node, p_t), (0.0, t), steps)

    # (a) covector against the solved gradient at interior snapshot times
    mismatch = 0.0
    for s, fr in zip(solution.times, solution.frames):
        if 0.0 < s < t:
            k = int(round(s / t * steps))
            grad = _interp_central_gradient(fr, traj.xi[k:k + 1])[0]
            mismatch = max(mismatch, float(np.linalg.norm(traj.p[k] - grad)))

    # (b) value residual with L(xi, D_p H) = <p, D_p H> - H
    he = eval_h(spec, traj.xi, traj.p)
    lag = np.einsum("ki,ki->k", traj.p, he.Dp) - he.H
    action = float(_trapezoid(lag, traj.times))
    u0 = solution.frames[0]
    value = float(u_t.values[idx])
    residual = abs(value - float(u0.interp(traj.xi[0])) - action)

    # (c) Euler-Lagrange residual from a finite-difference velocity
    view = Lagrangian(spec)
    vel = np.gradient(traj.xi, traj.times, axis=0, edge_order=2)
    le = lagrangian_derivatives(view, traj.xi, vel)
    dq_dot = np.gradient(le.Dq, traj.times, axis=0, edge_order=2)
    el = float(np.max(np.linalg.norm((dq_dot - le.Dx)[2:-2], axis=1)))

    # p(0) against the interval hull of difference quotients of u0 near the foot
    hull_ok = _in_gradient_hull(u0, traj.xi[0], traj.p[0], hull_radius)

    # Legendre duality D_q L(xi, xi') = p along the arc
    duality = float(np.max(np.linalg.norm((le.Dq - traj.p)[2:-2], axis=1)))

    report = MinimizerReport(mismatch, residual, el, duality, bool(shock), float(jump), hull_ok,
                             traj.energy_drift(spec))
    return traj, report
