import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hjlab import GridFunction, SolverConfig, solve
from hjlab.experiments import named_initial
from hjlab.regularity import (
    kink_signature,
    lipschitz_estimate,
    mollify,
    regularity_report,
    second_difference_extremes,
    support_of_difference,
    w11_distance,
)

values = st.lists(st.floats(-10.0, 10.0, allow_nan=False), min_size=21, max_size=21)


def _grid(vals):
    return GridFunction(2.0, 21, 1, np.array(vals))


def test_lipschitz_of_absolute_value_and_zero():
    assert lipschitz_estimate(named_initial("abs", 2.0, 41)) == pytest.approx(1.0, abs=1e-12)
    assert lipschitz_estimate(GridFunction.zeros(2.0, 41)) == 0.0


def test_lipschitz_restricted_to_sub_box():
    u = GridFunction.from_function(lambda X: np.where(np.abs(X[:, 0]) > 1.5, 5 * X[:, 0], X[:, 0]), 2.0, 41)
    assert lipschitz_estimate(u, 1.0) == pytest.approx(1.0)


def test_hopf_lax_does_not_raise_the_lipschitz_constant(tent_solution):
    assert lipschitz_estimate(tent_solution.final) <= 1.0 + 1e-9


def test_second_differences_of_a_concave_parabola():
    u = GridFunction.from_function(lambda X: -X[:, 0] ** 2, 2.0, 41)
    hi, lo = second_difference_extremes(u)
    assert hi == pytest.approx(-2.0, abs=1e-9)
    assert lo == pytest.approx(-2.0, abs=1e-9)


def test_convex_kink_of_absolute_value_scales_like_inverse_spacing():
    u = named_initial("abs", 2.0, 41)
    hi, lo = second_difference_extremes(u, h_multiples=(1,))
    assert hi == pytest.approx(2.0 / u.dx)
    assert lo == pytest.approx(0.0, abs=1e-9)
    assert kink_signature(u) == (True, False)


def test_smooth_data_have_no_kink_signature():
    u = GridFunction.from_function(lambda X: np.sin(X[:, 0]), 2.0, 81)
    assert kink_signature(u) == (False, False)


def test_semiconcavity_of_the_tent_image_at_resolved_scale(tent_solution):
    u = tent_solution.final
    hi, _ = second_difference_extremes(u, h_multiples=(8, 16))
    assert hi == pytest.approx(1.0, rel=0.05)


def test_sub_box_must_hold_the_stencil():
    with pytest.raises(ValueError):
        second_difference_extremes(GridFunction.zeros(2.0, 41), 0.05)


def test_two_dimensional_scan_includes_diagonals():
    u = GridFunction.from_function(lambda X: X[:, 0] * X[:, 1], 1.0, 21, 2)
    hi, lo = second_difference_extremes(u)
    # along (1, 1) the second difference of xy is 2 h^2 over |h|^2 = 2 h^2
    assert hi == pytest.approx(1.0)
    assert lo == pytest.approx(-1.0)
    assert regularity_report(u).dimension_factor == pytest.approx(math.sqrt(2))


def test_support_of_equal_functions_is_empty():
    u = named_initial("tent", 2.0, 41)
    assert support_of_difference(u, u) is None
    with pytest.raises(ValueError):
        support_of_difference(u, GridFunction.zeros(2.0, 21))


def test_negative_tent_front_reaches_three_halves(quadratic):
    u0 = named_initial("-tent", 4.0, 401)
    sol = solve(quadratic, u0, 1.0, SolverConfig(dt=2e-3))
    (lo, hi), = support_of_difference(sol.final, GridFunction.zeros(4.0, 401), 1e-6)
    assert lo == pytest.approx(-1.5, abs=0.06)
    assert hi == pytest.approx(1.5, abs=0.06)


def test_w11_of_the_tent():
    u = named_initial("tent", 2.0, 401)
    zero = GridFunction.zeros(2.0, 401)
    assert w11_distance(u, u) == 0.0
    assert w11_distance(u, zero) == pytest.approx(3.0, abs=1e-4)


def test_w11_of_a_two_dimensional_product():
    u = GridFunction.from_function(lambda X: np.prod(np.maximum(0, 1 - np.abs(X)), axis=1), 2.0, 201, 2)
    # integral 1, and each partial derivative has L1 norm 2 * 1
    assert w11_distance(u, GridFunction.zeros(2.0, 201, 2)) == pytest.approx(5.0, rel=1e-3)


def test_report_fields(tent_solution):
    rep = regularity_report(tent_solution.final, subbox=3.0)
    d = rep.to_dict()
    assert set(d) == {"lip", "sc_sup", "sc_inf", "support_box", "dimension_factor", "kink_upper", "kink_lower"}
    assert rep.sc_inf <= rep.sc_sup
    assert rep.lip >= 0


@given(a=values, b=values, c=values)
def test_w11_is_a_metric(a, b, c):
    u, v, w = _grid(a), _grid(b), _grid(c)
    duv = w11_distance(u, v)
    assert duv >= 0
    assert duv == pytest.approx(w11_distance(v, u))
    assert duv <= w11_distance(u, w) + w11_distance(w, v) + 1e-9


@given(a=values, K=st.floats(-5.0, 5.0))
def test_adding_a_parabola_shifts_second_differences_by_its_curvature(a, K):
    u = _grid(a)
    shifted = u.with_values(u.values + 0.5 * K * u.axis ** 2)
    hi, lo = second_difference_extremes(u)
    hi2, lo2 = second_difference_extremes(shifted)
    assert hi2 == pytest.approx(hi + K, abs=1e-8)
    assert lo2 == pytest.approx(lo + K, abs=1e-8)


@given(a=values)
def test_lipschitz_bounds_every_discrete_gradient_component(a):
    u = _grid(a)
    lip = lipschitz_estimate(u)
    assert np.all(np.abs(np.diff(u.values)) / u.dx <= lip + 1e-12)
    assert np.all(np.abs(u.central_gradient()) <= lip + 1e-12)


def test_mollifier_keeps_lipschitz_and_converges():
    u = named_initial("tent", 2.0, 401)
    widths = (0.2, 0.1, 0.05)
    dists = [w11_distance(mollify(u, w), u) for w in widths]
    assert dists[0] > dists[1] > dists[2]
    assert all(lipschitz_estimate(mollify(u, w)) <= 1.0 + 1e-12 for w in widths)
    smooth = mollify(u, 0.2)
    assert not kink_signature(smooth)[1]
    # below two cells the sampled kernel is a delta
    assert np.array_equal(mollify(u, 0.015).values, u.values)
    with pytest.raises(ValueError):
        mollify(u, 0.0)


def test_mollifier_reproduces_affine_data_in_two_dimensions():
    u = GridFunction.from_function(lambda X: 0.3 * X[:, 0] - 0.2 * X[:, 1], 1.0, 41, 2)
    inner = u.box_mask(0.7)
    assert np.allclose(mollify(u, 0.2).values[inner], u.values[inner], atol=1e-12)
