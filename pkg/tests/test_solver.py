import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hjlab import GridFunction, HamiltonianSpec, SolverConfig, preset, solve
from hjlab.bounds import estimate_c8
from hjlab.errors import FootOutsideBox
from hjlab.experiments import named_initial
from hjlab.oracles import ABS, TENT, hopf_lax
from hjlab.solver import dp_consistency, pointwise_value, resolve_config, step


def test_step_keeps_zero_data_at_zero(quadratic):
    u = GridFunction.zeros(2.0, 41)
    assert np.array_equal(step(quadratic, u, SolverConfig(dt=0.1, q_max=2.0)).values, u.values)


def test_step_on_linear_data_matches_one_step_closed_form(quadratic):
    u = GridFunction.from_function(lambda X: X[:, 0], 2.0, 41)
    out = step(quadratic, u, SolverConfig(dt=0.1, q_max=3.0))
    assert np.allclose(out.values, u.axis - 0.05, atol=1e-12)


def test_step_needs_a_resolved_velocity_bound(quadratic):
    with pytest.raises(ValueError):
        step(quadratic, GridFunction.zeros(1.0, 5), SolverConfig())


def test_step_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        step(HamiltonianSpec.quadratic(dim=2), GridFunction.zeros(1.0, 5), SolverConfig(q_max=1.0))


@pytest.mark.parametrize("kwargs", [dict(dt=0.0), dict(q_max=-1.0), dict(q_samples=2), dict(boundary="wrap")])
def test_invalid_solver_settings(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


def test_clamped_boundary_reports_feet_leaving_the_box():
    # the potential well pulls optimal arcs outward at the box edges
    spec = HamiltonianSpec.gaussian_power(b1=2.0, sigma_g=1.0, c3=3.0)
    with pytest.raises(FootOutsideBox):
        step(spec, GridFunction.zeros(1.0, 21), SolverConfig(dt=0.1, q_max=2.0, boundary="clamp"))


def test_default_velocity_bound_follows_a_priori_estimate(quadratic):
    cfg = resolve_config(__import__("hjlab").Lagrangian(quadratic), named_initial("tent", 4.0, 81), 1.0,
                         SolverConfig())
    # chi1 = 3 for sup norm 1, slope 1, quadratic constants
    assert cfg.q_max == pytest.approx(1.25 * 3.0)


def test_zero_data_stays_zero(quadratic):
    sol = solve(quadratic, GridFunction.zeros(4.0, 81), 0.7, SolverConfig(dt=0.05))
    assert sol.final.sup_norm() == 0.0


def test_time_grid_lands_on_horizon(quadratic):
    sol = solve(quadratic, GridFunction.zeros(1.0, 11), 0.25, SolverConfig(dt=0.1), times=[0.1, 0.2])
    assert sol.n_steps == 3
    assert sol.dt_used == pytest.approx(0.25 / 3)
    assert sol.times[-1] == pytest.approx(0.25)
    assert len(sol.frames) == len(sol.times)
    with pytest.raises(ValueError):
        solve(quadratic, GridFunction.zeros(1.0, 11), 0.0, SolverConfig())


def test_absolute_value_follows_hopf_lax_to_first_order(quadratic):
    u0 = named_initial("abs", 4.0, 201)
    sol = solve(quadratic, u0, 0.5, SolverConfig(dt=5e-3))
    err = np.max(np.abs(sol.final.values - hopf_lax(ABS, u0.axis, 0.5)))
    assert err <= 2 * (u0.dx + 5e-3)


def test_aligned_restart_reproduces_the_direct_solve(quadratic):
    u0 = named_initial("tent", 4.0, 101)
    assert dp_consistency(quadratic, u0, 0.2, 0.5, SolverConfig(dt=0.05)) <= 1e-12
    assert dp_consistency(quadratic, GridFunction.zeros(4.0, 101), 0.2, 0.5, SolverConfig(dt=0.05)) == 0.0
    with pytest.raises(ValueError):
        dp_consistency(quadratic, u0, 0.5, 0.2, SolverConfig())


def test_pointwise_value_of_zero_data(quadratic):
    res = pointwise_value(quadratic, GridFunction.zeros(2.0, 41), 1.0, [0.3])
    assert res.value == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(res.knots, 0.3, atol=1e-6)


def test_pointwise_value_of_absolute_value(quadratic):
    res = pointwise_value(quadratic, named_initial("abs", 2.0, 41), 1.0, [0.5])
    assert res.value == pytest.approx(0.125, abs=1e-6)
    assert res.knots[0, 0] == pytest.approx(0.0, abs=1e-4)
    traj = res.trajectory(quadratic)
    assert traj.xi.shape == (9, 1)


def test_pointwise_and_grid_routes_agree_on_the_tent(quadratic, tent_solution):
    u0 = tent_solution.frames[0]
    grid_err = float(np.max(np.abs(tent_solution.final.values - hopf_lax(TENT, u0.axis, 1.0))))
    rng = np.random.default_rng(7)
    nodes = rng.choice(np.nonzero(np.abs(u0.axis) <= 2.5)[0], size=20, replace=False)
    for j in nodes:
        res = pointwise_value(quadratic, u0, 1.0, [u0.axis[j]])
        assert abs(res.value - tent_solution.final.values[j]) <= 2 * grid_err


def test_pointwise_and_grid_routes_agree_for_the_bumped_family(quadratic, bumped):
    u0 = named_initial("tent", 4.0, 201)
    cfg = SolverConfig(dt=2e-3)
    ref = solve(quadratic, u0, 0.5, cfg).final
    grid_err = float(np.max(np.abs(ref.values - hopf_lax(TENT, u0.axis, 0.5))))
    sol = solve(bumped, u0, 0.5, cfg).final
    for x in (-1.5, -0.6, 0.0, 0.3, 1.2):
        res = pointwise_value(bumped, u0, 0.5, [x])
        assert abs(res.value - sol.values[u0.node_index(x)]) <= 2 * grid_err


def test_potential_well_makes_zero_data_move(bumped):
    sol = solve(bumped, GridFunction.zeros(4.0, 161), 0.5, SolverConfig(dt=5e-3))
    c8 = estimate_c8(bumped, 2.0, 0.5)
    inner = sol.final.box_mask(2.0)
    assert sol.final.sup_norm() > 0.1
    assert np.max(np.abs(sol.final.values[inner])) <= c8 * 0.5 + 1e-9


def test_two_dimensional_radial_solve_is_symmetric():
    u0 = named_initial("tent", 2.0, 41, dim=2)
    sol = solve(HamiltonianSpec.quadratic(dim=2), u0, 0.2, SolverConfig(dt=0.05, q_samples=15))
    v = sol.final.values
    assert np.allclose(v, v.T, atol=1e-9)
    assert np.allclose(v, np.flip(v), atol=1e-9)


bumps = st.lists(st.floats(-1.0, 1.0), min_size=5, max_size=5)


def _datum(coeffs):
    return GridFunction.from_function(
        lambda X: sum(c * np.maximum(0, 1 - np.abs(X[:, 0] - 0.75 * (k - 2))) for k, c in enumerate(coeffs)), 3.0, 61)


@given(a=bumps, b=bumps, name=st.sampled_from(["quadratic", "gaussian_power_bumped"]))
def test_solution_operator_is_monotone_and_contractive(a, b, name):
    spec = preset(name)
    u, w = _datum(a), _datum(b)
    lo = u.with_values(np.minimum(u.values, w.values))
    cfg = SolverConfig(dt=0.05, q_max=3.0, q_samples=21)
    su, sw, slo = (solve(spec, v, 0.2, cfg).final for v in (u, w, lo))
    # the dependence cone of speed 3 over time 0.2 stays inside the box from [-2.4, 2.4]
    inner = su.box_mask(2.4)
    assert np.all(slo.values[inner] <= su.values[inner] + 1e-12)
    assert np.all(slo.values[inner] <= sw.values[inner] + 1e-12)
    gap = np.max(np.abs(su.values - sw.values)[inner])
    assert gap <= np.max(np.abs(u.values - w.values)) + 1e-12
