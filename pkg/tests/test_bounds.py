import itertools
import math

import numpy as np
import pytest

from hjlab import HamiltonianSpec, preset
from hjlab.bounds import (
    beta_suprema,
    chi1_bound,
    constants_report,
    controllability_constants,
    entropy_bounds,
    estimate_c8,
    gamma_minus,
    gamma_plus,
    l1_bound,
    lip_and_sc_bounds,
    q1_tilde,
    q2_tilde,
    r_tilde,
    semiconvexity_window,
    support_bound,
    unit_ball_volume,
    window_integrand,
    window_time_bound,
)
from hjlab.errors import WindowEmpty
from reference_formulas import (
    ball_volume,
    expanded_constants,
    lower_prefactor,
    upper_prefactor,
    window_horizon,
)
from reference_formulas import window_integrand as ref_integrand


def _lattice():
    """100 parameter points: 25 structure-constant sets times 4 data classes."""
    rng = np.random.default_rng(2024)
    out = []
    for _ in range(25):
        c = tuple(float(v) for v in rng.uniform(0, 2, 5))
        c = (c[0], c[1] + 0.1, c[2], c[3], c[4])
        alpha = float(rng.uniform(1.2, 3.0))
        for R, M, T, N in ((1.0, 1.0, 1.0, 1), (0.5, 2.0, 0.3, 1), (2.0, 0.5, 1.7, 2), (1.0, 3.0, 0.05, 2)):
            out.append((c, alpha, R, M, T, N))
    return out


LATTICE = _lattice()


def _spec(c, alpha, N):
    return HamiltonianSpec.quadratic(dim=N, c1=c[0], c2=c[1], c3=c[2], c4=c[3], c5=c[4], alpha=alpha)


def test_lattice_has_one_hundred_points():
    assert len(LATTICE) == 100


@pytest.mark.parametrize("point", LATTICE)
def test_closed_forms_match_expanded_rederivation(point):
    c, alpha, R, M, T, N = point
    s = _spec(c, alpha, N)
    ref = expanded_constants(c, alpha, R, M, T, N)
    budget = M * math.sqrt(N) * R
    l_T = support_bound(s, R, M, T)
    chi, b1, b2 = chi1_bound(s, budget, M, l_T, T, full=True)
    got = {"l1": l1_bound(s, budget, T), "l_T": l_T, "b1": b1, "b2": b2, "chi1": chi,
           "r_tilde": r_tilde(s, R, M, T), "q1_tilde": q1_tilde(s, R, M, T), "q2_tilde": q2_tilde(s, R, M, T)}
    for k, v in ref.items():
        assert got[k] == pytest.approx(v, rel=1e-12, abs=1e-12), k
    K = 1.0 + c[3]
    assert gamma_plus(R, M, K, N) == pytest.approx(upper_prefactor(R, M, K, N), rel=1e-12)
    assert gamma_minus(R, K, N) == pytest.approx(lower_prefactor(R, K, N), rel=1e-12)
    assert gamma_minus(R, K, N) < gamma_plus(R, M, K, N)
    b3, b5 = 1.0 + c[0], 0.5 + c[1]
    assert window_integrand(b3, b5) == pytest.approx(ref_integrand(b3, b5), rel=1e-12)
    assert window_time_bound(b3, b5, K) == pytest.approx(window_horizon(b3, b5, K), rel=1e-12)


def test_unit_ball_volumes():
    for N in (1, 2, 3, 4):
        assert unit_ball_volume(N) == pytest.approx(ball_volume(N), rel=1e-14)


def test_quadratic_radii_by_hand(quadratic):
    assert l1_bound(quadratic, 1.0, 1.0) == pytest.approx(5.0)
    assert l1_bound(quadratic, 0.0, 1.0) == pytest.approx(4.0)
    assert l1_bound(quadratic, 0.7, 1e-12) == pytest.approx(0.7)
    assert support_bound(quadratic, 1.0, 1.0, 1.0) == pytest.approx(12.0)
    assert support_bound(quadratic, 1.0, 1.0, 1e-12) == pytest.approx(4.0)


def test_quadratic_velocity_bound_by_hand(quadratic):
    chi, b1, b2 = chi1_bound(quadratic, 1.0, 1.0, 5.0, 1.0, full=True)
    assert (chi, b1, b2) == (pytest.approx(3.0), pytest.approx(0.0), pytest.approx(2.0))
    chi, b1, b2 = chi1_bound(quadratic, 0.0, 0.0, 3.0, 1.0, full=True)
    assert b2 == 0.0 and chi == pytest.approx(max(b1, 1.0))


def test_support_bound_is_nondecreasing_in_time(bumped):
    ts = np.linspace(0.01, 3.0, 60)
    vals = [support_bound(bumped, 1.0, 1.0, t) for t in ts]
    assert np.all(np.diff(vals) >= -1e-12)


def test_quadratic_derivative_suprema(quadratic):
    assert beta_suprema(quadratic, 47.0, 27.0, "beta1").value == pytest.approx(27.0)
    assert beta_suprema(quadratic, 1.0, 3.0, "beta2").value == pytest.approx(1.0)
    assert beta_suprema(quadratic, 1.0, 3.0, "beta3").value == pytest.approx(1.0)
    assert beta_suprema(quadratic, 1.0, 3.0, "beta4").value == pytest.approx(0.0)
    assert beta_suprema(quadratic, 1.0, 3.0, "beta5").value == pytest.approx(1.0)
    with pytest.raises(ValueError):
        beta_suprema(quadratic, 1.0, 1.0, "beta9")


def test_unit_power_convexity_floor(unit_power):
    assert beta_suprema(unit_power, 1.0, 1.0, "beta5").value == pytest.approx(2.0)


@pytest.mark.parametrize("which", ["beta1", "beta2", "beta3", "beta4"])
def test_suprema_grow_with_the_box(bumped, which):
    small = beta_suprema(bumped, 0.5, 1.0, which, n_samples=512).value
    big = beta_suprema(bumped, 1.5, 2.5, which, n_samples=512).value
    assert big >= small - 1e-12


def test_convexity_floor_shrinks_with_the_box(bumped):
    small = beta_suprema(bumped, 0.5, 1.0, "beta5", n_samples=512).value
    big = beta_suprema(bumped, 1.5, 2.5, "beta5", n_samples=512).value
    assert big <= small + 1e-12


def test_chained_quadratic_constants(quadratic):
    ls = lip_and_sc_bounds(quadratic, 1.0, 1.0, 1.0)
    assert ls.l_T == pytest.approx(12.0)
    assert ls.chi1 == pytest.approx(3.0)
    assert ls.q1_tilde == pytest.approx(27.0)
    assert ls.beta1 == pytest.approx(27.0)
    assert ls.mu_T == pytest.approx(55.0)
    assert ls.beta2 == pytest.approx(1.0)
    assert ls.kappa_T == pytest.approx(7.0 / 3.0)


def test_quadratic_semiconvexity_window(quadratic):
    w = semiconvexity_window(quadratic, 1.0, 1.0, 0.1)
    assert w.tau4 == pytest.approx(2.0 / 3.0 * math.log(11.0 / 8.0), rel=1e-9)
    assert w.k_T_coeff == 0.0
    assert w.K_T > 0
    assert window_time_bound(1.0, 1.0, w.K_T) == pytest.approx(0.1, rel=1e-9)
    assert window_time_bound(1.0, 1.0, 0.0) == pytest.approx(window_integrand(1.0, 1.0))
    with pytest.raises(WindowEmpty):
        semiconvexity_window(quadratic, 1.0, 1.0, 0.5)


def test_report_prefactors_are_consistent(quadratic):
    rep = constants_report(quadratic, 1.0, 1.0, 1.0)
    assert rep.gamma_plus == pytest.approx(131072.0)
    assert rep.gamma_minus == pytest.approx(2.0 / 384.0 / (8.0 * math.log(2.0)))
    assert rep.Gamma_plus == pytest.approx(gamma_plus(rep.l2_lT, rep.mu_T, rep.kappa_T, 1))
    assert rep.r_R == pytest.approx(1.0 / 12.0)
    assert rep.tau4 == pytest.approx(0.2123, abs=1e-4)
    assert rep.notes and "window" in rep.notes[0]
    assert "kappa_T" in rep.table()
    assert entropy_bounds(1.0, 1.0, 1.0, 1) == (rep.gamma_plus, rep.gamma_minus)


def test_report_invariants_for_the_bumped_family(bumped):
    rep = constants_report(bumped, 1.0, 1.0, 1.0, T_query=0.02)
    for name in ("beta1", "beta2", "beta3", "beta4", "beta5"):
        assert getattr(rep, name) >= 0
    assert rep.beta5 > 0 and rep.tau4 > 0
    assert rep.Gamma_plus > 0 and rep.Gamma_minus > 0


def test_controllability_radius_and_modulus():
    assert controllability_constants(12.0, 1.0).r_R == pytest.approx(1.0)
    assert controllability_constants(1.0, 1.0).r_R == pytest.approx(1.0 / 12.0)
    assert controllability_constants(12.0, 10.0, c6=1e9, c7=1e9).m1 == pytest.approx(2.0)
    assert controllability_constants(12.0, 10.0, c6=12.0, c7=60.0).m1 == pytest.approx(0.2)
    with pytest.raises(ValueError):
        controllability_constants(0.0, 1.0)


def test_zero_data_do_not_move_for_the_quadratic_hamiltonian(quadratic, bumped):
    assert estimate_c8(quadratic, 1.0, 0.5) == 0.0
    assert estimate_c8(bumped, 1.0, 0.5) > 0.0


def test_independent_lattice_covers_both_dimensions():
    assert {p[5] for p in LATTICE} == {1, 2}
    assert len({p[0] for p in LATTICE}) == 25
    assert all(isinstance(p, tuple) for p in itertools.islice(LATTICE, 3))
