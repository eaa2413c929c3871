"""
Tests for the core model and models modules.
"""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.fowler_lab.core_model import (
    auxiliary_f,
    auxiliary_series,
    ball_to_cyl,
    cyl_to_ball,
    hamiltonian,
    limit_acceleration,
    limit_field,
    limit_rhs,
    scalar_hamiltonian,
)
from src.fowler_lab.errors import ValidationError
from src.fowler_lab.fowler_factory import (
    cylinder_necksize,
    profile_from_necksize,
)
from src.fowler_lab.models import CylState, Dimension, Direction, Potential

finite = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)
radius = st.floats(min_value=1e-3, max_value=10.0)
dimension = st.integers(min_value=3, max_value=8)


@pytest.fixture
def dim4():
    """Fixture for dimension four."""
    return Dimension(4)


@pytest.mark.parametrize("n", [2, 0, -1, 3.5, True])
def test_dimension_rejects_invalid(n):
    """Test that dimensions below three or non-integers are rejected."""
    with pytest.raises(ValidationError) as e:
        Dimension(n)
    assert e.value.code == "DIMENSION_RANGE"


@pytest.mark.parametrize("n,sigma", [
    (3, 4 * math.pi),
    (4, 2 * math.pi**2),
    (5, 8 * math.pi**2 / 3),
])
def test_sigma_sphere(n, sigma):
    """Test the volume of the unit sphere."""
    assert Dimension(n).sigma_sphere == pytest.approx(sigma, rel=1e-13)


def test_perturbed_range():
    """Test that perturbed features are limited to 3 <= n <= 5."""
    Dimension(5).require_perturbed_range()
    with pytest.raises(ValidationError) as e:
        Dimension(6).require_perturbed_range()
    assert e.value.code == "DIMENSION_RANGE"


def test_direction_normalizes_and_completes():
    """Test Direction.of and the orthogonal companion."""
    direction = Direction.of(3.0, 4.0)
    np.testing.assert_allclose(direction.lam, [0.6, 0.8])
    np.testing.assert_allclose(direction.lam_bar, [-0.8, 0.6])
    assert direction.eta == pytest.approx(0.75)
    assert Direction.of(1.0, 0.0).eta is None


@pytest.mark.parametrize("lam", [(-0.6, 0.8), (0.6, 0.6)])
def test_direction_rejects_outside_quadrant_circle(lam):
    """Test that directions off the positive quarter circle are rejected."""
    with pytest.raises(ValidationError):
        Direction(lam)


def test_cyl_state_is_read_only():
    """Test that state vectors cannot be mutated."""
    state = CylState(0.0, [1.0, 2.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        state.v[0] = 5.0
    np.testing.assert_array_equal(state.as_vector(), [1.0, 2.0, 0.0, 0.0])
    assert state.is_admissible()
    assert not CylState(0.0, [-1.0, 2.0], [0.0, 0.0]).is_admissible()


def test_ball_to_cyl_bubble_n3():
    """Test the standard bubble maps to cosh(t)^(-1/2)."""
    n = Dimension(3)
    r = 0.5
    u = math.sqrt(2.0 / (1.0 + r * r))
    du = -math.sqrt(2.0) * r * (1.0 + r * r) ** -1.5
    state = ball_to_cyl(n, r, [u, 0.0], [du, 0.0])
    t = -math.log(r)
    v = math.cosh(t) ** -0.5
    assert state.t == pytest.approx(t)
    assert state.v[0] == pytest.approx(v, rel=1e-13)
    assert state.w[0] == pytest.approx(-0.5 * math.tanh(t) * v, rel=1e-12)
    assert state.v[1] == 0.0


def test_ball_to_cyl_scaled_bubble_n4():
    """Test the n = 4 bubble with scale 1/2 along a direction."""
    n = Dimension(4)
    lam = Direction.of(0.6, 0.8).lam
    r = 0.3
    u = 1.0 / (1.0 + r * r / 4.0)
    du = -(r / 2.0) / (1.0 + r * r / 4.0) ** 2
    state = ball_to_cyl(n, r, u * lam, du * lam)
    t = -math.log(r)
    expected = 1.0 / (math.exp(t) + 0.25 * math.exp(-t))
    np.testing.assert_allclose(state.v, expected * lam, rtol=1e-13)


def test_ball_to_cyl_zero_and_bad_radius(dim4):
    """Test the zero field and a nonpositive radius."""
    state = ball_to_cyl(dim4, 0.7, [0.0, 0.0], [0.0, 0.0])
    assert not np.any(state.v) and not np.any(state.w)
    with pytest.raises(ValidationError) as e:
        ball_to_cyl(dim4, 0.0, [1.0, 0.0], [0.0, 0.0])
    assert e.value.code == "RADIUS"


def test_cyl_to_ball_at_unit_radius(dim4):
    """Test the inverse transform at t = 0."""
    r, u, du = cyl_to_ball(dim4, CylState(0.0, [1.0, 0.0], [0.0, 0.0]))
    assert r == 1.0
    np.testing.assert_array_equal(u, [1.0, 0.0])
    np.testing.assert_allclose(du, [-1.0, 0.0])


@given(dimension, radius, finite, finite, finite, finite)
def test_ball_cyl_round_trip(n, r, u1, u2, d1, d2):
    """Test that the transforms are mutually inverse."""
    dim = Dimension(n)
    back_r, u, du = cyl_to_ball(dim, ball_to_cyl(dim, r, [u1, u2], [d1, d2]))
    assert back_r == pytest.approx(r, rel=1e-12)
    np.testing.assert_allclose(u, [u1, u2], rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(du, [d1, d2], rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_limit_rhs_vanishes_on_cylinder(n):
    """Test that the cylinder ray is an equilibrium."""
    dim = Dimension(n)
    lam = Direction.of(0.6, 0.8).lam
    state = CylState(0.0, cylinder_necksize(dim) * lam, [0.0, 0.0])
    dv, dw = limit_rhs(dim, state)
    np.testing.assert_array_equal(dv, [0.0, 0.0])
    np.testing.assert_allclose(dw, [0.0, 0.0], atol=1e-14)


def test_limit_rhs_zero_state(dim4):
    """Test the zero state."""
    dv, dw = limit_rhs(dim4, CylState(0.0, [0.0, 0.0], [0.0, 0.0]))
    assert not np.any(dv) and not np.any(dw)


def test_limit_rhs_worked_example():
    """Test the limit system at V = (0.3, 0.4), W = 0 for n = 3."""
    state = CylState(0.0, [0.3, 0.4], [0.0, 0.0])
    dv, dw = limit_rhs(Dimension(3), state)
    np.testing.assert_array_equal(dv, [0.0, 0.0])
    np.testing.assert_allclose(dw, [0.0609375, 0.08125], rtol=1e-14)


@given(dimension, finite, finite, finite, finite, st.floats(0.0, 2 * math.pi))
def test_limit_rhs_rotation_equivariant(n, v1, v2, w1, w2, angle):
    """Test that the limit system commutes with rotations."""
    dim = Dimension(n)
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    state = CylState(0.0, [v1, v2], [w1, w2])
    turned = CylState(0.0, rot @ state.v, rot @ state.w)
    dv, dw = limit_rhs(dim, state)
    turned_dv, turned_dw = limit_rhs(dim, turned)
    np.testing.assert_allclose(turned_dv, rot @ dv, rtol=1e-12, atol=1e-10)
    np.testing.assert_allclose(turned_dw, rot @ dw, rtol=1e-12, atol=1e-10)


def test_limit_field_matches_rhs(dim4):
    """Test that the packed field agrees with limit_rhs."""
    state = CylState(1.0, [0.3, 0.4], [0.1, -0.2])
    dv, dw = limit_rhs(dim4, state)
    packed = limit_field(dim4)(1.0, state.as_vector())
    np.testing.assert_array_equal(packed, np.concatenate((dv, dw)))


def test_limit_acceleration_is_vectorized(dim4):
    """Test column-wise evaluation on stacked states."""
    v = np.array([[0.3, 0.1], [0.4, 0.2]])
    stacked = limit_acceleration(dim4, v)
    for k in range(2):
        np.testing.assert_allclose(
            stacked[:, k], limit_acceleration(dim4, v[:, k])
        )


@pytest.mark.parametrize("n,v,w,expected", [
    (4, [0.0, 0.0], [0.0, 0.0], 0.0),
    (4, [0.6 / math.sqrt(2), 0.8 / math.sqrt(2)], [0.0, 0.0], -0.125),
    (3, [1.0, 0.0], [0.0, 0.0], 0.0),
])
def test_hamiltonian(n, v, w, expected):
    """Test the half-normalized energy at reference states."""
    state = CylState(0.0, v, w)
    assert hamiltonian(Dimension(n), state) == pytest.approx(
        expected, abs=1e-15
    )


@pytest.mark.parametrize("n,v,expected", [
    (4, 0.0, 0.0),
    (4, 1 / math.sqrt(2), -0.25),
    (5, 0.6**0.75, -1.5 * 0.6**2.5),
])
def test_scalar_hamiltonian(n, v, expected):
    """Test the scalar energy at the origin and at the cylinder."""
    assert scalar_hamiltonian(Dimension(n), v, 0.0) == pytest.approx(
        expected, abs=1e-15
    )


def test_scalar_hamiltonian_n5_value():
    """Test the rounded n = 5 cylinder energy."""
    value = scalar_hamiltonian(Dimension(5), 0.6**0.75, 0.0)
    assert value == pytest.approx(-0.418282, abs=1e-6)


@given(dimension, finite, finite)
def test_scalar_hamiltonian_is_twice_the_energy_on_a_ray(n, v, w):
    """Test scalar_hamiltonian = 2 hamiltonian on the first axis."""
    dim = Dimension(n)
    state = CylState(0.0, [v, 0.0], [w, 0.0])
    assert scalar_hamiltonian(dim, v, w) == pytest.approx(
        2 * hamiltonian(dim, state), rel=1e-12, abs=1e-14
    )


@given(dimension, finite, finite, finite, finite, st.floats(0.0, 2 * math.pi))
def test_hamiltonian_rotation_invariant(n, v1, v2, w1, w2, angle):
    """Test that rotating V and W together preserves the energy."""
    dim = Dimension(n)
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    state = CylState(0.0, [v1, v2], [w1, w2])
    turned = CylState(0.0, rot @ state.v, rot @ state.w)
    assert hamiltonian(dim, turned) == pytest.approx(
        hamiltonian(dim, state), rel=1e-9, abs=1e-12
    )


def test_auxiliary_f(dim4):
    """Test the auxiliary function on zero and cylinder states."""
    zero = CylState(0.0, [0.0, 0.0], [0.0, 0.0])
    assert auxiliary_f(dim4, zero, 1) == 0.0
    ray = CylState(0.0, [1 / math.sqrt(2), 0.0], [0.0, 0.0])
    assert auxiliary_f(dim4, ray, 1) == pytest.approx(0.125)
    with pytest.raises(ValidationError):
        auxiliary_f(dim4, ray, 3)


def test_auxiliary_f_along_a_fowler_ray(dim4):
    """Test that f_1 rises with v_1 and is maximal at the peak."""
    profile = profile_from_necksize(dim4, 0.3)
    lam = Direction.of(0.6, 0.8).lam
    half = profile.period / 2
    rising = profile.state(np.linspace(0.0, half, 401))
    falling = profile.state(np.linspace(half, profile.period, 401))
    f_up = auxiliary_series(dim4, lam[0] * rising[0], lam[0] * rising[1])
    f_down = auxiliary_series(dim4, lam[0] * falling[0], lam[0] * falling[1])
    assert np.all(np.diff(f_up) >= -1e-9)
    assert np.all(np.diff(f_down) <= 1e-9)
    neck = CylState(0.0, 0.3 * lam, [0.0, 0.0])
    peak_v, peak_w = profile.state(half)
    peak = CylState(half, peak_v * lam, peak_w * lam)
    assert auxiliary_f(dim4, peak, 1) > auxiliary_f(dim4, neck, 1)


def test_auxiliary_f_on_a_coordinate_ray(dim4):
    """Test that f_1 is minus half the energy on the first axis."""
    profile = profile_from_necksize(dim4, 0.3)
    v, w = profile.state(np.linspace(0.0, profile.period, 401))
    f = auxiliary_series(dim4, v, w)
    assert np.ptp(f) <= 1e-9
    assert f[0] == pytest.approx(-0.5 * profile.energy, abs=1e-9)


def test_potential_spec():
    """Test the affine potential helpers."""
    potential = Potential([[0.1, 0.0], [0.0, 0.2]], [[0.0, -0.1], [-0.1, 0.0]])
    np.testing.assert_allclose(
        potential.matrix(0.5), [[0.1, -0.05], [-0.05, 0.2]]
    )
    assert potential.symmetric
    assert not potential.is_zero
    assert Potential.zero().is_zero
    assert Potential.scaled_identity(0.1).sup_norm() == pytest.approx(0.1)
    with pytest.raises(ValidationError) as e:
        Potential([[0.1]], [[0.0]])
    assert e.value.code == "INVALID_SCENARIO"
