"""
Tests for the Pohozaev module.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.fowler_lab.core_model import ball_to_cyl, cyl_to_ball
from src.fowler_lab.errors import ValidationError
from src.fowler_lab.fowler_factory import (
    bubble_state,
    cylinder_necksize,
    phase_point_state,
)
from src.fowler_lab.integrator import IntegratorConfig
from src.fowler_lab.models import CylState, Dimension, Direction, Potential
from src.fowler_lab.perturbed import run_limit, run_perturbed
from src.fowler_lab.pohozaev import (
    SignClass,
    classify_sign,
    invariant_closed_form,
    p_ball_radial,
    p_cyl,
    p_drift,
    p_invariant,
    pohozaev_series,
)

DIRECTION = Direction.of(0.6, 0.8)


@pytest.fixture(scope="module")
def fowler_run():
    """Fixture for the unperturbed n = 4 run from necksize 0.3."""
    return run_limit(
        Dimension(4),
        phase_point_state(0.3, DIRECTION),
        20.0,
        IntegratorConfig.precise(),
    )


@pytest.fixture(scope="module")
def perturbed_run():
    """Fixture for the n = 4 run with A = 0.1 Id from necksize 0.3."""
    return run_perturbed(
        Dimension(4),
        phase_point_state(0.3, DIRECTION),
        Potential.scaled_identity(0.1),
        12.0,
        IntegratorConfig.precise(),
    )


def test_p_cyl_reference_values():
    """Test P at the zero, cylinder and bubble states."""
    n = Dimension(4)
    assert p_cyl(n, CylState(0.0, [0.0, 0.0], [0.0, 0.0])) == 0.0
    cylinder = CylState(0.0, cylinder_necksize(n) * DIRECTION.lam, [0, 0])
    assert p_cyl(n, cylinder) == pytest.approx(-2.4674, abs=1e-4)
    assert p_cyl(n, cylinder) == pytest.approx(-0.25 * math.pi**2, rel=1e-12)
    assert p_cyl(n, bubble_state(DIRECTION)) == pytest.approx(0.0, abs=1e-15)


def test_p_ball_bubble_n3():
    """Test the surface integral of the n = 3 bubble at r = 1."""
    n = Dimension(3)
    u = 1.0
    du = -math.sqrt(2.0) * 2.0**-1.5
    assert p_ball_radial(n, 1.0, [u, 0.0], [du, 0.0]) == pytest.approx(
        0.0, abs=1e-9
    )


def test_p_ball_rejects_radius():
    """Test that the radius must be positive."""
    with pytest.raises(ValidationError):
        p_ball_radial(Dimension(3), 0.0, [1.0, 0.0], [0.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(
    st.sampled_from([3, 4, 5]),
    st.floats(-3.0, 3.0),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
    st.floats(-1.0, 1.0),
    st.floats(-1.0, 1.0),
)
def test_ball_and_cylinder_forms_agree(n, t, v1, v2, w1, w2):
    """Test that the surface integral equals sigma times the energy."""
    dim = Dimension(n)
    state = CylState(t, [v1, v2], [w1, w2])
    r, u, du = cyl_to_ball(dim, state)
    assert p_ball_radial(dim, r, u, du) == pytest.approx(
        p_cyl(dim, state), rel=1e-9, abs=1e-11
    )


def test_ball_to_cyl_preserves_p():
    """Test P through the forward transform."""
    n = Dimension(4)
    u, du = np.array([0.4, 0.2]), np.array([-0.3, 0.1])
    state = ball_to_cyl(n, 0.5, u, du)
    assert p_cyl(n, state) == pytest.approx(
        p_ball_radial(n, 0.5, u, du), rel=1e-12
    )


def test_invariant_closed_form_monotone():
    """Test that P(eps) vanishes at zero and decreases toward the cylinder."""
    n = Dimension(4)
    grid = np.linspace(1e-4, 0.999 * cylinder_necksize(n), 50)
    values = np.array([invariant_closed_form(n, eps) for eps in grid])
    assert abs(values[0]) < 1e-6
    assert np.all(np.diff(values) < 0)
    assert values[-1] == pytest.approx(-0.25 * math.pi**2, rel=1e-3)


@pytest.mark.parametrize("value,expected", [
    (-1.0, SignClass.NEGATIVE),
    (1.0, SignClass.POSITIVE),
    (1e-7, SignClass.ZERO),
    (0.0, SignClass.ZERO),
])
def test_classify_sign(value, expected):
    """Test the zero band of the sign classification."""
    assert classify_sign(Dimension(4), value) is expected


def test_fowler_run_invariant(fowler_run):
    """Test the invariant of a Fowler run against the closed form."""
    report = p_invariant(fowler_run)
    assert report.sign_class is SignClass.NEGATIVE
    assert report.limit_estimate == pytest.approx(
        invariant_closed_form(Dimension(4), 0.3), rel=1e-8
    )
    assert report.cauchy_spread <= 1e-8
    np.testing.assert_allclose(report.radii, np.exp(-report.times))


def test_bubble_run_invariant():
    """Test that a bubble run has a zero invariant."""
    run = run_limit(
        Dimension(4),
        bubble_state(DIRECTION),
        8.0,
        IntegratorConfig.precise(),
    )
    assert p_invariant(run).sign_class is SignClass.ZERO


def test_pohozaev_series_is_constant_without_potential(fowler_run):
    """Test that P is constant along the limit system."""
    times, values = pohozaev_series(fowler_run)
    assert times.size == values.size
    assert np.ptp(values) <= 1e-8


def test_drift_vanishes_without_potential(fowler_run):
    """Test both sides of the drift identity for A = 0."""
    check = p_drift(Dimension(4), fowler_run, math.exp(-2), math.exp(-8))
    assert abs(check.lhs) <= 1e-10
    assert abs(check.rhs) <= 1e-10


def test_drift_equal_radii(perturbed_run):
    """Test that equal radii give exactly zero."""
    check = p_drift(Dimension(4), perturbed_run, 0.1, 0.1)
    assert (check.lhs, check.rhs, check.residual) == (0.0, 0.0, 0.0)


def test_drift_identity_with_potential(perturbed_run):
    """Test the drift identity for A = 0.1 Id."""
    check = p_drift(
        Dimension(4), perturbed_run, math.exp(-2), math.exp(-8)
    )
    assert check.lhs != 0.0
    assert check.residual <= 1e-5


@pytest.mark.parametrize("r,s", [(0.1, 0.2), (0.1, 0.0), (2.0, 0.1)])
def test_drift_rejects_radii(perturbed_run, r, s):
    """Test radii out of order or outside the run."""
    with pytest.raises(ValidationError) as e:
        p_drift(Dimension(4), perturbed_run, r, s)
    assert e.value.code == "RANGE"
