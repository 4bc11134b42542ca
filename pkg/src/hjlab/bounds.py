"""A-priori constants: confinement radii, velocity bounds, Lipschitz and
semiconcavity moduli, entropy prefactors, and the short-time semiconvexity
window. Closed forms are evaluated exactly; suprema of derivatives of H and L
over balls are estimated by low-discrepancy sampling.

Notation shared by the helpers below: ``s`` is a :class:`HamiltonianSpec` (only
its declared constants c1..c5, alpha are read by the closed forms), ``R`` and
``M`` bound the support and Lipschitz constant of the initial data, ``N`` is
the space dimension.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.stats import qmc

from .errors import DegenerateConvexity, WindowEmpty
from .hamiltonian import HamiltonianSpec, Lagrangian, eval_h, lagrangian_derivatives

BETA_KINDS = ("beta1", "beta2", "beta3", "beta4", "beta5")


def unit_ball_volume(N: int) -> float:
    return math.pi ** (N / 2.0) / float(gamma_fn(N / 2.0 + 1.0))


def l1_bound(s: HamiltonianSpec, sup_norm: float, t: float) -> float:
    """Radius controlling |x - xi(0)| for minimisers of data with the given sup norm."""
    c1, c2, c3, _, _ = s.constants
    a = s.alpha
    return (sup_norm + (c1 + c3) * t) / (1.0 + c1 * t) + t * (2.0 * (1.0 + c1 * t) / c2) ** (1.0 / (a - 1.0))


def chi1_bound(s: HamiltonianSpec, sup_norm: float, lip: float, l: float, t: float,
               N: int | None = None, full: bool = False):
    """Velocity bound chi1 for minimisers ending in [-l, l]^N; ``full`` also returns b1, b2."""
    N = s.dim if N is None else N
    c1, c2, c3, c4, c5 = s.constants
    a = s.alpha
    b1 = (c1 / c2) * (1.0 + 1.5 * math.sqrt(N) * l) + (c1 + c3) / c2 + (c1 / c2) * l1_bound(s, sup_norm, t)
    b2 = ((c1 + c3 + c1 * l) * c4 + c2 * c5) / c2**2 * t + 2.0 * c4 * sup_norm / c2**2 + lip / c2
    chi = max(b1, (1.0 + b2) ** (1.0 / (a - 1.0)))
    return (chi, b1, b2) if full else chi


def support_bound(s: HamiltonianSpec, R: float, M: float, t: float, N: int | None = None) -> float:
    """Half-width l2 of a cube containing supp(S_t u0 - S_t 0) for data with support R, slope M."""
    N = s.dim if N is None else N
    rn = math.sqrt(N)
    return 2.0 * l1_bound(s, M * rn * R, t) + 2.0 * rn * R


def r_tilde(s, R, M, T, N=None):
    N = s.dim if N is None else N
    rn = math.sqrt(N)
    return l1_bound(s, M * rn * R, T) + (1.5 * rn + 2.0 * rn) * support_bound(s, R, M, T, N)


def q1_tilde(s, R, M, T, N=None):
    N = s.dim if N is None else N
    lT = support_bound(s, R, M, T, N)
    return chi1_bound(s, M * math.sqrt(N) * R, M, lT, T, N) + 2.0 * math.sqrt(N) * lT


def q2_tilde(s, R, M, T, N=None):
    N = s.dim if N is None else N
    lT = support_bound(s, R, M, T, N)
    return chi1_bound(s, M * math.sqrt(N) * R, M, lT, T, N) + 2.0 * math.sqrt(N) * lT / T


def gamma_plus(R: float, M: float, K: float, N: int) -> float:
    return unit_ball_volume(N) ** N * (4.0 * N * (1.0 + M + (K + 1.0) * R)) ** (4 * N * N)


def gamma_minus(R: float, K: float, N: int) -> float:
    inner = K * unit_ball_volume(N) * R ** (N + 1) / (48.0 * (N + 1) * 2.0 ** (N + 1))
    return inner**N / (8.0 * math.log(2.0))


def entropy_bounds(R: float, M: float, K: float, N: int) -> tuple[float, float]:
    """(upper, lower) prefactors of the 1/eps^N entropy estimates for the class with parameters R, M, K."""
    return gamma_plus(R, M, K, N), gamma_minus(R, K, N)


# -- sampled suprema -------------------------------------------------------------


@dataclass
class BetaEstimate:
    which: str
    value: float
    coarse_value: float
    refinement_gap: float
    n_samples: int
    x_radius: float
    v_radius: float


def _ball_samples(dim, r_x, r_v, n, seed):
    """Sobol points in the product of two balls plus deterministic extreme points."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        u = qmc.Sobol(d=2 * dim, scramble=True, seed=seed).random(n) * 2.0 - 1.0
    x = u[:, :dim]
    v = u[:, dim:]
    for arr in (x, v):
        nrm = np.linalg.norm(arr, axis=1)
        over = nrm > 1.0
        arr[over] /= nrm[over, None]
    ext = [np.zeros(dim)]
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        ext += [e, -e]
    if dim == 2:
        d = np.array([1.0, 1.0]) / math.sqrt(2.0)
        ext += [d, -d, d * [1, -1], d * [-1, 1]]
    ext = np.array(ext)
    ex = np.repeat(ext, len(ext), axis=0)
    ev = np.tile(ext, (len(ext), 1))
    return np.vstack([ex, x]) * r_x, np.vstack([ev, v]) * r_v


def _opnorm(mats):
    if mats.shape[-1] == 1:
        return np.abs(mats[..., 0, 0])
    return np.linalg.norm(mats, ord=2, axis=(-2, -1))


def _beta_value(spec, which, x, v):
    if which in ("beta1", "beta2", "beta4"):
        le = lagrangian_derivatives(Lagrangian(spec), x, v)
        if which == "beta1":
            return float(np.max(np.maximum(np.linalg.norm(le.Dx, axis=1), np.linalg.norm(le.Dq, axis=1))))
        terms = [_opnorm(le.Dxx), _opnorm(le.Dqx)]
        if which == "beta2":
            terms.append(_opnorm(le.Dqq))
        return float(np.max(np.maximum.reduce(terms)))
    he = eval_h(spec, x, v)
    if which == "beta3":
        return float(np.max(np.maximum(_opnorm(he.Dpx), _opnorm(he.Dpp))))
    return float(np.min(np.linalg.eigvalsh(he.Dpp)[:, 0]))


def beta_suprema(spec: HamiltonianSpec, r_bound: float, v_bound: float, which: str,
                 n_samples: int = 2048, seed: int = 20240611) -> BetaEstimate:
    """Sup (inf for beta5) of the named derivative bound over |x| <= r_bound, |q or p| <= v_bound.

    ``n_samples`` Sobol points are compared with ``2 n_samples``; the larger
    sample gives the reported value and the difference is kept as the
    refinement gap.
    """
    if which not in BETA_KINDS:
        raise ValueError(f"which must be one of {BETA_KINDS}")
    x, v = _ball_samples(spec.dim, r_bound, v_bound, 2 * n_samples, seed)
    n_ext = len(x) - 2 * n_samples
    coarse = _beta_value(spec, which, x[: n_ext + n_samples], v[: n_ext + n_samples])
    fine = _beta_value(spec, which, x, v)
    if which == "beta5" and not fine > 0:
        raise DegenerateConvexity("minimal curvature of H in p is not positive on the sampled box",
                                  value=fine)
    return BetaEstimate(which, fine, coarse, abs(fine - coarse), len(x), r_bound, v_bound)


# -- chained constants -------------------------------------------------------------


@dataclass
class LipScBounds:
    l1: float
    l_T: float
    chi1: float
    b1: float
    b2: float
    r_tilde: float
    q1_tilde: float
    q2_tilde: float
    beta1: float
    beta2: float
    mu_T: float
    kappa_T: float
    refinement_gaps: dict = field(default_factory=dict)


def lip_and_sc_bounds(spec: HamiltonianSpec, R: float, M: float, T: float,
                      n_samples: int = 2048) -> LipScBounds:
    """Lipschitz bound mu_T and semiconcavity bound kappa_T of S_T on the data class, with intermediates."""
    N = spec.dim
    rn = math.sqrt(N)
    c = M * rn * R
    l1 = l1_bound(spec, c, T)
    lT = support_bound(spec, R, M, T)
    chi, b1, b2 = chi1_bound(spec, c, M, lT, T, full=True)
    rt = r_tilde(spec, R, M, T)
    qt1 = chi + 2.0 * rn * lT
    qt2 = chi + 2.0 * rn * lT / T
    e1 = beta_suprema(spec, rt, qt1, "beta1", n_samples)
    e2 = beta_suprema(spec, rt, qt2, "beta2", n_samples)
    mu = M + 2.0 * e1.value * T
    kappa = e2.value * (1.0 + (3.0 + T * T) / (3.0 * T))
    return LipScBounds(l1, lT, chi, b1, b2, rt, qt1, qt2, e1.value, e2.value, mu, kappa,
                       {"beta1": e1.refinement_gap, "beta2": e2.refinement_gap})


@dataclass
class WindowBetas:
    tau: float
    r: float
    chi: float
    mu: float
    beta1: float
    beta3: float
    beta4: float
    beta5: float


def window_betas(spec: HamiltonianSpec, c: float, l: float, lip: float, tau: float,
                 n_samples: int = 1024) -> WindowBetas:
    """beta3, beta4, beta5 on the confinement boxes of data with sup norm c and slope lip, up to time tau.

    The radii use the global Lipschitz constant as the seed of the
    radius/Lipschitz fixed point (one sweep).
    """
    N = spec.dim
    rn = math.sqrt(N)
    r = l1_bound(spec, c, tau) + 1.5 * rn * l
    chi = chi1_bound(spec, c, lip, l, tau)
    b1 = beta_suprema(spec, r + 2.0 * rn * l, chi, "beta1", n_samples).value
    mu = lip + 2.0 * b1 * tau
    b3 = beta_suprema(spec, r, mu, "beta3", n_samples).value
    b4 = beta_suprema(spec, r, chi, "beta4", n_samples).value
    b5 = beta_suprema(spec, r, mu, "beta5", n_samples).value
    return WindowBetas(tau, r, chi, mu, b1, b3, b4, b5)


def window_integrand(b3: float, b5: float) -> float:
    return (2.0 / (3.0 * b3)) * math.log(1.0 + 3.0 * b5 / (8.0 * b3))


def window_time_bound(b3: float, b5: float, K: float) -> float:
    """Largest admissible horizon for initial semiconvexity constant K."""
    return (2.0 / (3.0 * b3)) * math.log(1.0 + 3.0 * b5**2 / (4.0 * b3 * (2.0 * b5 + 2.0 * b5 * K + b3 * K * K)))


def tau4_scan(spec, c, l, lip, tau_min=1e-4, tau_max=10.0, points=64, n_samples=1024):
    """sup over tau of min(tau, window_integrand(beta3(tau), beta5(tau))) on a log grid, refined locally."""
    def obj(tau):
        wb = window_betas(spec, c, l, lip, tau, n_samples)
        return min(tau, window_integrand(wb.beta3, wb.beta5))

    taus = np.geomspace(tau_min, tau_max, points)
    vals = np.array([obj(t) for t in taus])
    j = int(np.argmax(vals))
    best_tau, best = taus[j], vals[j]
    lo = taus[max(j - 1, 0)]
    hi = taus[min(j + 1, points - 1)]
    for t in np.geomspace(lo, hi, 17):
        v = obj(t)
        if v > best:
            best, best_tau = v, t
    return best, best_tau


@dataclass
class SemiconvexityWindow:
    tau4: float
    tau4_argmax: float
    K_T: float
    k_T_coeff: float
    C_T: float
    betas: WindowBetas


def semiconvexity_window(spec: HamiltonianSpec, R: float, M: float, T_query: float,
                         K0: float = 0.0, l: float | None = None, c: float | None = None,
                         n_samples: int = 1024) -> SemiconvexityWindow:
    """Short-time window on which S_t preserves semiconvexity, and the resulting lower modulus.

    ``K0`` is the semiconvexity constant of the initial datum; ``l`` the
    half-width of the observation cube (default R) and ``c`` the sup norm
    budget (default M sqrt(N) R). The lower modulus uses C_T = kappa_T from
    :func:`lip_and_sc_bounds` at T_query.
    """
    N = spec.dim
    l = R if l is None else l
    c = M * math.sqrt(N) * R if c is None else c
    tau4, arg = tau4_scan(spec, c, l, M, n_samples=n_samples)
    if T_query >= tau4:
        raise WindowEmpty(f"T={T_query} is not below the semiconvexity window tau4={tau4:.6g}",
                          tau4=tau4)
    wb = window_betas(spec, c, l, M, T_query, n_samples)
    if T_query >= window_time_bound(wb.beta3, wb.beta5, 0.0):
        raise WindowEmpty("no semiconvexity constant is admissible at T_query", tau4=tau4)
    lo, hi = 0.0, 1.0
    while window_time_bound(wb.beta3, wb.beta5, hi) > T_query and hi < 1e12:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if window_time_bound(wb.beta3, wb.beta5, mid) > T_query:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    K_T = lo
    C_T = lip_and_sc_bounds(spec, R, M, T_query, n_samples).kappa_T
    coeff = 0.0 - (8.0 * wb.beta4 * (1.0 + 3.0 * wb.beta3) * (C_T + K0) / 3.0) * (
        1.0 / wb.beta3 + 1.0 / wb.beta5) * (math.exp(1.5 * wb.beta3 * T_query) - 1.0)
    return SemiconvexityWindow(tau4, arg, K_T, coeff, C_T, wb)


# -- controllability constants ----------------------------------------------------


@dataclass
class ControllabilityConstants:
    r_R: float
    m1: float
    m1_formula: str
    c6: float
    c7: float
    empirical: bool = True

    def to_dict(self):
        return asdict(self)


def controllability_constants(R: float, M: float, N: int = 1, c6: float | None = None,
                              c7: float | None = None) -> ControllabilityConstants:
    """r_R = R/12 and m1 = 2 min{M/10, min(c6, c7) / (120 sqrt(N) r_R)}.

    c6 and c7 stand for the confinement budgets at radii 36 r_R and 6 r_R;
    they have no closed form and must be estimated (see
    :func:`estimate_confinement_budgets`). When absent the min-term is
    treated as inactive.
    """
    if R <= 0 or M <= 0:
        raise ValueError("R and M must be positive")
    r = R / 12.0
    budget = min(c for c in (c6, c7, math.inf) if c is not None)
    m1 = 2.0 * min(M / 10.0, budget / (120.0 * math.sqrt(N) * r))
    formula = "2 * min(M/10, min(c6(36 r), c7(6 r)) / (120 sqrt(N) r))"
    return ControllabilityConstants(r, m1, formula, c6 if c6 is not None else math.inf,
                                    c7 if c7 is not None else math.inf, True)


def estimate_c8(spec: HamiltonianSpec, l: float, t: float, n: int = 201, dt: float = 1e-2) -> float:
    """Empirical max |S_s 0| / s over [-l, l]^N and s <= t from one coarse solve."""
    from .grid import GridFunction
    from .solver import SolverConfig, solve

    if spec.dim != 1:
        n = min(n, 41)
    a = 1.5 * l + 1.0
    u0 = GridFunction.zeros(a, n, spec.dim)
    cfg = SolverConfig(dt=dt, q_max=max(1.0, 2.0 * chi1_bound(spec, 0.0, 0.0, l, t)), q_samples=21,
                       refine_iters=25)
    times = list(np.linspace(0, t, 11)[1:])
    sol = solve(spec, u0, t, cfg, times=times)
    mask = u0.box_mask(l)
    best = 0.0
    for s, fr in zip(sol.times[1:], sol.frames[1:]):
        best = max(best, float(np.max(np.abs(fr.values[mask]))) / s)
    return best


def estimate_confinement_budgets(spec: HamiltonianSpec, r: float, tau: float,
                                 n_probe_points: int = 4, iters: int = 6,
                                 c_cap: float | None = None) -> dict:
    """Empirical sup-norm budgets for the two trajectory-confinement properties (1-D).

    c6 tests that minimisers ending in [-36 r, 36 r] stay within 72 r; c7
    tests that minimisers ending outside ]-6 r, 6 r[ stay outside |x|/3.
    A budget c is accepted when both hold for probe data +-c * tent bumps at
    sampled end points; the largest accepted c is found by bisection on
    [0, c_cap] (default 2 r).
    """
    from .grid import GridFunction
    from .solver import pointwise_value

    if spec.dim != 1:
        raise ValueError("confinement budgets are estimated in one dimension")
    c_cap = 2.0 * r if c_cap is None else c_cap

    def probes(c, l):
        a = 3.0 * l
        n = 241
        out = []
        for centre in (0.0, 0.5 * l, l):
            for sign in (1.0, -1.0):
                out.append(GridFunction.from_function(
                    lambda X, c0=centre, s0=sign: s0 * c * np.maximum(0.0, 1.0 - np.abs(X[:, 0] - c0) / l),
                    a, n, 1))
        return out

    def confined6(c):
        l = 36.0 * r
        for u0 in probes(c, l):
            for x in np.linspace(-l, l, n_probe_points):
                res = pointwise_value(spec, u0, tau, [x], n_segments=4, n_starts=5)
                if np.max(np.abs(res.knots)) > 2.0 * l + 1e-9:
                    return False
        return True

    def confined7(c):
        l = 6.0 * r
        for u0 in probes(c, l):
            for x in np.linspace(l, 2.5 * l, n_probe_points):
                for sx in (x, -x):
                    res = pointwise_value(spec, u0, tau, [sx], n_segments=4, n_starts=5)
                    if np.min(np.abs(res.knots)) <= abs(sx) / 3.0:
                        return False
        return True

    out = {}
    for name, test in (("c6", confined6), ("c7", confined7)):
        if test(c_cap):
            out[name] = c_cap
            out[name + "_capped"] = True
            continue
        lo, hi = 0.0, c_cap
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if test(mid):
                lo = mid
            else:
                hi = mid
        out[name] = lo
        out[name + "_capped"] = False
    out["empirical"] = True
    return out


# -- full report ---------------------------------------------------------------------


@dataclass
class ConstantsReport:
    inputs: dict
    l1: float
    chi1: float
    b1: float
    b2: float
    l2_lT: float
    r_tilde: float
    q1_tilde: float
    q2_tilde: float
    beta1: float
    beta2: float
    mu_T: float
    kappa_T: float
    beta3: float | None
    beta4: float | None
    beta5: float | None
    tau4: float | None
    K_T: float | None
    k_T_coeff: float | None
    gamma_plus: float
    Gamma_plus: float
    gamma_minus: float
    Gamma_minus: float
    r_R: float
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        rows = [(k, v) for k, v in self.to_dict().items() if k not in ("inputs", "notes")]
        width = max(len(k) for k, _ in rows)
        out = [f"{k:<{width}}  {v:.10g}" if isinstance(v, float) else f"{k:<{width}}  {v}" for k, v in rows]
        return "\n".join(out)


def constants_report(spec: HamiltonianSpec, R: float, M: float, T: float, K: float = 1.0,
                     K_RM: float | None = None, T_query: float | None = None,
                     n_samples: int = 2048) -> ConstantsReport:
    """Evaluate the whole chain of constants for the data class (R, M) at horizon T.

    ``K`` is the semiconcavity parameter at which the class-level prefactors
    gamma_plus and gamma_minus are evaluated. ``K_RM`` is the semiconcavity
    constant used in the lower prefactor of the image set (defaults to K).
    The semiconvexity window is evaluated at ``T_query`` (default T) and left
    empty, with a note, when T_query is outside it.
    """
    N = spec.dim
    ls = lip_and_sc_bounds(spec, R, M, T, n_samples)
    notes = []
    b3 = b4 = b5 = tau4 = K_T = kc = None
    tq = T if T_query is None else T_query
    try:
        win = semiconvexity_window(spec, R, M, tq, n_samples=max(256, n_samples // 2))
        b3, b4, b5 = win.betas.beta3, win.betas.beta4, win.betas.beta5
        tau4, K_T, kc = win.tau4, win.K_T, win.k_T_coeff
    except WindowEmpty as exc:
        tau4 = exc.details.get("tau4")
        notes.append(f"semiconvexity window empty at T_query={tq}: {exc}")
    r_R = R / 12.0
    kr = K if K_RM is None else K_RM
    gp, gm = entropy_bounds(R, M, K, N)
    return ConstantsReport(
        inputs={"R": R, "M": M, "N": N, "T": T, "K": K, "K_RM": kr, "T_query": tq,
                "c": list(spec.constants), "alpha": spec.alpha},
        l1=ls.l1, chi1=ls.chi1, b1=ls.b1, b2=ls.b2, l2_lT=ls.l_T, r_tilde=ls.r_tilde,
        q1_tilde=ls.q1_tilde, q2_tilde=ls.q2_tilde, beta1=ls.beta1, beta2=ls.beta2,
        mu_T=ls.mu_T, kappa_T=ls.kappa_T, beta3=b3, beta4=b4, beta5=b5, tau4=tau4, K_T=K_T,
        k_T_coeff=kc, gamma_plus=gp, Gamma_plus=gamma_plus(ls.l_T, ls.mu_T, ls.kappa_T, N),
        gamma_minus=gm, Gamma_minus=gamma_minus(r_R, kr, N), r_R=r_R, notes=notes,
    )
