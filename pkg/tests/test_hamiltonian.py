import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hjlab import HamiltonianSpec, Lagrangian, preset, validate_structure
from hjlab.errors import ValidationFailure
from hjlab.hamiltonian import (
    conjugate_of_lagrangian,
    eval_h,
    h_value,
    lagrangian_derivatives,
    legendre,
)

coord = st.floats(-3.0, 3.0, allow_nan=False)
velocity = st.floats(-4.0, 4.0, allow_nan=False)
PRESET_NAMES = ["quadratic", "gaussian_power_unit", "gaussian_power_bumped"]


def test_quadratic_values_and_derivatives():
    he = eval_h(HamiltonianSpec.quadratic(), np.array([0.0]), np.array([2.0]))
    assert he.H == pytest.approx(2.0)
    assert he.Dp == pytest.approx([2.0])
    assert he.Dx == pytest.approx([0.0])


def test_quadratic_hessian_is_identity_in_two_dimensions(rng):
    spec = HamiltonianSpec.quadratic(dim=2)
    x = rng.normal(size=(50, 2))
    p = rng.normal(size=(50, 2))
    he = eval_h(spec, x, p)
    assert np.allclose(he.Dpp, np.eye(2))
    assert np.allclose(he.Dxx, 0.0)


@pytest.mark.parametrize("x", [-2.0, 0.0, 0.7])
def test_unit_power_family_at_unit_covector(unit_power, x):
    he = eval_h(unit_power, np.array([x]), np.array([1.0]))
    assert he.H == pytest.approx(2.0)
    assert he.Dp == pytest.approx([2.0])


def test_power_family_default_exponent():
    spec = HamiltonianSpec.gaussian_power(m=1.5)
    assert spec.alpha == pytest.approx(1.5)
    assert HamiltonianSpec.gaussian_power(m=1.0).alpha == pytest.approx(2.0)


@pytest.mark.parametrize("kwargs", [dict(kind="cubic"), dict(kind="gaussian_power", m=0.5),
                                    dict(kind="gaussian_power", a0=1.0, a1=-1.0), dict(c2=0.0),
                                    dict(alpha=1.0), dict(dim=3)])
def test_invalid_specs_are_rejected(kwargs):
    with pytest.raises(ValueError):
        HamiltonianSpec(**kwargs)


def test_unknown_preset():
    with pytest.raises(ValueError):
        preset("nope")


def test_legendre_closed_forms(quadratic, unit_power):
    res = legendre(Lagrangian(quadratic), np.array([0.3]), np.array([3.0]))
    assert res.L == pytest.approx(4.5)
    assert res.p == pytest.approx([3.0])
    res = legendre(Lagrangian(unit_power), np.array([1.1]), np.array([2.0]))
    assert res.L == pytest.approx(0.0, abs=1e-12)
    assert res.p == pytest.approx([1.0])


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_zero_velocity_cost_is_minus_min_of_h(name):
    spec = preset(name)
    x = np.linspace(-3, 3, 13)[:, None]
    L0 = Lagrangian(spec).value(x, np.zeros_like(x))
    # both families attain min_p H at p = 0
    assert np.allclose(L0, -h_value(spec, x, np.zeros_like(x)))
    assert np.all(L0 <= spec.c1 * (1 + np.abs(x[:, 0])) + 1e-12)


def test_lagrangian_derivative_closed_forms(quadratic, unit_power):
    le = lagrangian_derivatives(Lagrangian(quadratic), np.array([0.5]), np.array([3.0]))
    assert le.Dq == pytest.approx([3.0])
    assert le.Dx == pytest.approx([0.0])
    assert le.Dqq == pytest.approx(np.eye(1))
    le = lagrangian_derivatives(Lagrangian(unit_power), np.array([0.5]), np.array([2.0]))
    assert le.Dq == pytest.approx([1.0])
    assert le.Dqq == pytest.approx(np.array([[0.5]]))


@pytest.mark.parametrize("dim", [1, 2])
def test_lagrangian_derivatives_match_central_differences(bumped, dim, rng):
    spec = preset("gaussian_power_bumped", dim)
    view = Lagrangian(spec)
    x = rng.uniform(-2, 2, size=(20, dim))
    q = rng.uniform(-3, 3, size=(20, dim))
    le = lagrangian_derivatives(view, x, q)
    h = 1e-5
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = h
        dq = (view.value(x, q + e) - view.value(x, q - e)) / (2 * h)
        dx = (view.value(x + e, q) - view.value(x - e, q)) / (2 * h)
        assert np.allclose(le.Dq[:, i], dq, atol=1e-7)
        assert np.allclose(le.Dx[:, i], dx, atol=1e-7)
        gq = (lagrangian_derivatives(view, x, q + e).Dq - lagrangian_derivatives(view, x, q - e).Dq) / (2 * h)
        gx = (lagrangian_derivatives(view, x + e, q).Dx - lagrangian_derivatives(view, x - e, q).Dx) / (2 * h)
        assert np.allclose(le.Dqq[:, :, i], gq, atol=1e-6)
        assert np.allclose(le.Dxx[:, :, i], gx, atol=1e-6)


def test_finite_difference_error_is_second_order():
    # m = 1 makes L quadratic in q, where central differences are exact
    view = Lagrangian(HamiltonianSpec.gaussian_power(m=1.5, a1=0.3, b1=0.2, c2=0.1, c3=2.0))
    x, q = np.array([[0.4]]), np.array([[1.3]])
    exact = lagrangian_derivatives(view, x, q).Dq[0, 0]
    errs = []
    for h in (1e-2, 5e-3):
        fd = (view.value(x, q + h) - view.value(x, q - h))[0] / (2 * h)
        errs.append(abs(fd - exact))
    assert 3.0 < errs[0] / errs[1] < 5.0


@pytest.mark.parametrize("dim", [1, 2])
def test_radial_and_newton_legendre_routes_agree(dim, rng):
    spec = preset("gaussian_power_bumped", dim)
    view = Lagrangian(spec)
    x = rng.uniform(-3, 3, size=(200, dim))
    q = rng.uniform(-5, 5, size=(200, dim))
    res = legendre(view, x, q)
    assert np.allclose(res.L, view.value(x, q), atol=1e-10)
    assert np.allclose(res.p, view.p_star(x, q), atol=1e-9)


def test_non_quadratic_exponent_uses_radial_root(rng):
    spec = HamiltonianSpec.gaussian_power(m=1.5, a1=0.3, b1=0.2, c2=0.1, c3=2.0)
    view = Lagrangian(spec)
    x = rng.uniform(-2, 2, size=(100, 1))
    q = rng.uniform(-6, 6, size=(100, 1))
    assert np.allclose(legendre(view, x, q).L, view.value(x, q), atol=1e-9)


def test_structure_validation_passes_for_declared_presets():
    assert validate_structure(HamiltonianSpec.quadratic()).passed
    assert validate_structure(preset("gaussian_power_unit")).passed
    assert validate_structure(preset("gaussian_power_bumped", 2), n_samples=4000).passed


def test_structure_validation_catches_overstated_coercivity():
    spec = HamiltonianSpec.quadratic(c2=10.0)
    with pytest.raises(ValidationFailure) as info:
        validate_structure(spec)
    assert "H_coercivity" in info.value.details["violated"]
    rep = validate_structure(spec, raise_on_failure=False)
    assert not rep.passed
    assert rep.margins["H_coercivity"]["violations"] > 0


def test_structure_validation_is_seed_deterministic():
    a = validate_structure(preset("gaussian_power_bumped"), rng=np.random.default_rng(3))
    b = validate_structure(preset("gaussian_power_bumped"), rng=np.random.default_rng(3))
    assert a.to_dict() == b.to_dict()


@given(x=coord, q1=velocity, q2=velocity, lam=st.floats(0.0, 1.0))
def test_lagrangian_is_convex_in_velocity(x, q1, q2, lam):
    view = Lagrangian(preset("gaussian_power_bumped"))
    xs = np.array([x])
    mid = view.value(xs, np.array([lam * q1 + (1 - lam) * q2]))
    chord = lam * view.value(xs, np.array([q1])) + (1 - lam) * view.value(xs, np.array([q2]))
    assert mid <= chord + 1e-10


@given(x0=coord, x1=coord, p0=velocity, p1=velocity)
def test_second_derivative_matrices_are_symmetric(x0, x1, p0, p1):
    spec = preset("gaussian_power_bumped", 2)
    x, p = np.array([[x0, x1]]), np.array([[p0, p1]])
    he = eval_h(spec, x, p)
    assert np.allclose(he.Dpp, np.swapaxes(he.Dpp, -1, -2))
    assert np.allclose(he.Dxx, np.swapaxes(he.Dxx, -1, -2))
    le = lagrangian_derivatives(Lagrangian(spec), x, p)
    assert np.allclose(le.Dqq, np.swapaxes(le.Dqq, -1, -2), atol=1e-12)
    assert np.allclose(le.Dxx, np.swapaxes(le.Dxx, -1, -2), atol=1e-10)


@given(x=coord, q=velocity, name=st.sampled_from(PRESET_NAMES))
def test_lagrangian_growth_lower_bound(x, q, name):
    spec = preset(name)
    val = Lagrangian(spec).value(np.array([x]), np.array([q]))
    assert val >= spec.c2 * abs(q) ** spec.alpha - spec.c3 - 1e-10


@given(x=coord, p=st.floats(-3.0, 3.0), name=st.sampled_from(PRESET_NAMES))
def test_biconjugate_recovers_hamiltonian(x, p, name):
    spec = preset(name)
    back = conjugate_of_lagrangian(Lagrangian(spec), [x], [p])
    assert back[0] == pytest.approx(float(h_value(spec, np.array([[x]]), np.array([[p]]))[0]), abs=1e-8)
