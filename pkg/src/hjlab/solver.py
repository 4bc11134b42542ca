"""Semi-Lagrangian dynamic programming for u_t + H(x, D_x u) = 0.

One step of length dt replaces u by

    u+(x) = min_q  u(x - q dt) + dt * L(x - q dt / 2, q),

with u evaluated by multilinear interpolation. The minimisation runs over a
coarse grid of velocities in the cube |q|_inf <= q_max and then refines the
best coarse candidate with coordinate-wise golden-section search.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.optimize import minimize

from ._search import golden_minimize
from .errors import FootOutsideBox
from .grid import BOUNDARY_MODES, GridFunction
from .hamiltonian import HamiltonianSpec, Lagrangian, lagrangian_derivatives

log = logging.getLogger(__name__)

CHUNK = 400_000


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 1e-3
    q_max: float | None = None
    q_samples: int = 41
    refine_iters: int = 40
    boundary: str = "extend_linear"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.q_max is not None and not self.q_max > 0:
            raise ValueError("q_max must be positive")
        if self.q_samples < 3:
            raise ValueError("q_samples must be at least 3")
        if self.boundary not in BOUNDARY_MODES:
            raise ValueError(f"boundary must be one of {BOUNDARY_MODES}")

    def to_dict(self) -> dict:
        return asdict(self)


def as_lagrangian(obj) -> Lagrangian:
    if isinstance(obj, Lagrangian):
        return obj
    if isinstance(obj, HamiltonianSpec):
        return Lagrangian(obj)
    raise TypeError("expected a Lagrangian or a HamiltonianSpec")


def default_q_max(spec: HamiltonianSpec, u0: GridFunction, T: float) -> float:
    """1.25 times the a-priori velocity bound for minimisers of data like ``u0``."""
    from .bounds import chi1_bound
    from .regularity import lipschitz_estimate

    lip = lipschitz_estimate(u0)
    chi = chi1_bound(spec, u0.sup_norm(), lip, u0.a, T)
    return 1.25 * max(chi, lip, 1e-3)


def resolve_config(view: Lagrangian, u0: GridFunction, T: float, cfg: SolverConfig) -> SolverConfig:
    if cfg.q_max is None:
        return replace(cfg, q_max=default_q_max(view.spec, u0, T))
    return cfg


def _velocity_grid(dim, q_max, samples):
    if samples % 2 == 0:
        samples += 1
    axis = np.linspace(-q_max, q_max, samples)
    if dim == 1:
        Q = axis[:, None]
    else:
        A, B = np.meshgrid(axis, axis, indexing="ij")
        Q = np.stack([A.ravel(), B.ravel()], axis=1)
    # stable sort by |q| so that argmin resolves ties towards small velocities
    order = np.argsort(np.linalg.norm(Q, axis=1), kind="stable")
    return Q[order], axis[1] - axis[0]


def step(view, u: GridFunction, cfg: SolverConfig, dt: float | None = None) -> GridFunction:
    """One dynamic-programming step; ``dt`` overrides ``cfg.dt`` when given."""
    view = as_lagrangian(view)
    if view.dim != u.dim:
        raise ValueError("Hamiltonian and grid dimensions differ")
    if cfg.q_max is None:
        raise ValueError("q_max must be resolved before stepping (see resolve_config)")
    h = cfg.dt if dt is None else dt
    X = u.coords()
    Q, dq = _velocity_grid(u.dim, cfg.q_max, cfg.q_samples)
    mode = cfg.boundary

    def cost(x, q):
        return u.interp(x - q * h, mode) + h * view.value(x - 0.5 * q * h, q)

    K = len(X)
    best_q = np.empty((K, u.dim))
    best_v = np.empty(K)
    per = max(1, CHUNK // len(Q))
    for s in range(0, K, per):
        xs = X[s:s + per]
        vals = cost(xs[:, None, :], Q[None, :, :])
        j = np.argmin(vals, axis=1)
        best_q[s:s + per] = Q[j]
        best_v[s:s + per] = vals[np.arange(len(xs)), j]

    q = best_q.copy()
    sweeps = 1 if u.dim == 1 else 2
    for _ in range(sweeps):
        for ax in range(u.dim):
            def along(t, ax=ax):
                qq = q.copy()
                qq[:, ax] = t
                return cost(X, qq)

            t_best, v_best = golden_minimize(along, q[:, ax] - dq, q[:, ax] + dq, cfg.refine_iters)
            better = v_best < best_v
            q[better, ax] = t_best[better]
            best_v = np.where(better, v_best, best_v)
            best_q[better] = q[better]
            q = best_q.copy()

    if mode == "clamp":
        feet = X - best_q * h
        out = np.max(np.abs(feet), axis=1) > u.a + 1e-12
        if out.any():
            i = int(np.argmax(out))
            raise FootOutsideBox(
                "optimal foot point leaves the computational box; enlarge the box or use extend_linear",
                node=X[i].tolist(), foot=feet[i].tolist(), count=int(out.sum()))
    return u.with_values(best_v.reshape(u.values.shape))


@dataclass
class Solution:
    """Snapshots of a solve, ordered by time."""

    times: np.ndarray
    frames: list
    config: SolverConfig
    dt_used: float
    n_steps: int

    @property
    def final(self) -> GridFunction:
        return self.frames[-1]

    def at(self, t: float) -> GridFunction:
        return self.frames[int(np.argmin(np.abs(self.times - t)))]


def n_steps_for(T: float, dt: float) -> int:
    return max(1, int(math.ceil(T / dt - 1e-9)))


def solve(view, u0: GridFunction, T: float, cfg: SolverConfig, times=None) -> Solution:
    """Advance ``u0`` to time ``T`` in ceil(T/dt) equal steps.

    The effective step is T / ceil(T/dt) so the last step lands on T.
    Snapshots are kept at t = 0, at T, and at the step nearest to each
    requested time.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    view = as_lagrangian(view)
    cfg = resolve_config(view, u0, T, cfg)
    n = n_steps_for(T, cfg.dt)
    h = T / n
    keep = {0, n}
    for t in times or ():
        if 0 <= t <= T + 1e-12:
            keep.add(int(round(t / h)))
    ts = [0.0]
    frames = [u0]
    u = u0
    for k in range(1, n + 1):
        u = step(view, u, cfg, dt=h)
        if k in keep:
            ts.append(k * h)
            frames.append(u)
    log.debug("solved to T=%g in %d steps of %g", T, n, h)
    return Solution(np.array(ts), frames, cfg, h, n)


def dp_consistency(view, u0: GridFunction, s: float, t: float, cfg: SolverConfig) -> float:
    """Sup-norm gap between one solve to t and a restart at s."""
    if not 0 < s < t:
        raise ValueError("need 0 < s < t")
    view = as_lagrangian(view)
    cfg = resolve_config(view, u0, t, cfg)
    direct = solve(view, u0, t, cfg).final
    mid = solve(view, u0, s, cfg).final
    restarted = solve(view, mid, t - s, cfg).final
    return float(np.max(np.abs(direct.values - restarted.values)))


@dataclass
class PointwiseResult:
    value: float
    knots: np.ndarray
    times: np.ndarray
    descended: bool
    warning: str | None

    def trajectory(self, view):
        from .characteristics import Trajectory

        view = as_lagrangian(view)
        vel = np.diff(self.knots, axis=0) / np.diff(self.times)[:, None]
        vel = np.vstack([vel, vel[-1:]])
        p = view.p_star(self.knots, vel)
        return Trajectory(self.times.copy(), self.knots.copy(), p, "backward")


def pointwise_value(view, u0: GridFunction, t: float, x, n_segments: int = 8,
                    n_starts: int = 9, speed: float | None = None,
                    boundary: str = "extend_linear") -> PointwiseResult:
    """Minimise the action over piecewise-linear arcs ending at (t, x).

    Unknowns are the knots xi_0 .. xi_{n-1}; xi_n = x is fixed. Starts are
    straight lines towards feet spread over [x - speed t, x + speed t]^N.
    Each start is refined by L-BFGS-B with the analytic gradient.
    """
    if n_segments < 2:
        raise ValueError("n_segments must be at least 2")
    view = as_lagrangian(view)
    dim = view.dim
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ds = t / n_segments
    times = np.linspace(0.0, t, n_segments + 1)
    if speed is None:
        from .regularity import lipschitz_estimate

        speed = 1.25 * max(lipschitz_estimate(u0), 1.0)

    def action(z):
        knots = np.vstack([z.reshape(n_segments, dim), x[None, :]])
        vel = np.diff(knots, axis=0) / ds
        mid = 0.5 * (knots[1:] + knots[:-1])
        le = lagrangian_derivatives(view, mid, vel)
        val = float(u0.interp(knots[0], boundary)) + ds * float(np.sum(le.L))
        g = np.zeros_like(knots)
        g[0] += u0.interp_gradient(knots[0], boundary)
        # d/dxi_i of ds * L(mid_i, vel_i) and of ds * L(mid_{i-1}, vel_{i-1})
        g[:-1] += ds * (0.5 * le.Dx - le.Dq / ds)
        g[1:] += ds * (0.5 * le.Dx + le.Dq / ds)
        return val, g[:-1].ravel()

    offsets = np.linspace(-speed * t, speed * t, n_starts)
    if dim == 1:
        feet = x[None, :] + offsets[:, None]
    else:
        A, B = np.meshgrid(offsets, offsets, indexing="ij")
        feet = x[None, :] + np.stack([A.ravel(), B.ravel()], axis=1)
    frac = times[:-1] / t
    best = None
    best_start = np.inf
    for y in feet:
        z0 = (y[None, :] + frac[:, None] * (x - y)[None, :]).ravel()
        v0, _ = action(z0)
        best_start = min(best_start, v0)
        res = minimize(action, z0, jac=True, method="L-BFGS-B")
        cand = (float(res.fun), res.x) if res.fun <= v0 else (v0, z0)
        if best is None or cand[0] < best[0]:
            best = cand
    value, z = best
    knots = np.vstack([z.reshape(n_segments, dim), x[None, :]])
    descended = value < best_start - 1e-13
    warning = None
    if not descended:
        _, g = action(z)
        if np.linalg.norm(g) > 1e-6:
            warning = "NoDescent: no start improved on the best straight-line arc"
            log.warning("%s at x=%s", warning, x.tolist())
    return PointwiseResult(value, knots, times, descended, warning)
