"""
Tests for the perturbed module.
"""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from src.fowler_lab.core_model import limit_rhs
from src.fowler_lab.errors import ValidationError
from src.fowler_lab.fowler_factory import bubble_state, phase_point_state
from src.fowler_lab.integrator import IntegratorConfig
from src.fowler_lab.models import CylState, Dimension, Direction, Potential
from src.fowler_lab.perturbed import (
    Removability,
    asymptotic_fit,
    coupling_matrix,
    energy_drift_constant,
    perturbed_rhs,
    removability_classify,
    run_limit,
    run_perturbed,
    validate_potential,
)
from src.fowler_lab.pohozaev import SignClass, invariant_closed_form, p_invariant

DIRECTION = Direction.of(0.6, 0.8)
PRECISE = IntegratorConfig.precise()


@pytest.fixture(scope="module")
def fowler_run():
    """Fixture for the unperturbed n = 4 run from necksize 0.3."""
    return run_perturbed(
        Dimension(4),
        phase_point_state(0.3, DIRECTION),
        Potential.zero(),
        20.0,
        PRECISE,
    )


@pytest.fixture(scope="module")
def perturbed_run():
    """Fixture for the n = 4 run with A = 0.1 Id up to t = 40."""
    return run_perturbed(
        Dimension(4),
        phase_point_state(0.3, DIRECTION),
        Potential.scaled_identity(0.1),
        40.0,
        PRECISE,
    )


@pytest.fixture(scope="module")
def perturbed_fit(perturbed_run):
    """Fixture for the asymptotic fit of the A = 0.1 Id run."""
    return asymptotic_fit(perturbed_run, cfg=PRECISE)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_zero_potential_is_valid(n):
    """Test that A = 0 satisfies every hypothesis."""
    assert validate_potential(Dimension(n), Potential.zero()).ok


@pytest.mark.parametrize("n,c,code", [
    (4, [[0.0, 0.1], [0.1, 0.0]], "H1_VIOLATION"),
    (4, [[0.0, -0.1], [-0.2, 0.0]], "SYMMETRY_VIOLATION"),
    (5, [[1.0, 0.0], [0.0, 2.0]], "H2_VIOLATION"),
])
def test_potential_violations(n, c, code):
    """Test the reported hypothesis violations."""
    potential = Potential(c, np.zeros((2, 2)))
    report = validate_potential(Dimension(n), potential)
    assert code in [v.code for v in report.violations]
    with pytest.raises(ValidationError) as e:
        report.raise_for_violations()
    assert e.value.code == report.violations[0].code


def test_h2_only_applies_to_n5():
    """Test that a non-scalar A(0) is allowed for n = 4."""
    potential = Potential([[1.0, 0.0], [0.0, 2.0]], np.zeros((2, 2)))
    assert validate_potential(Dimension(4), potential).ok


def test_zero_potential_matches_limit_rhs():
    """Test that the perturbed system reduces to the limit system."""
    n = Dimension(4)
    state = CylState(1.5, [0.3, 0.2], [0.1, -0.4])
    dv, dw = perturbed_rhs(n, 1.5, state, Potential.zero())
    ldv, ldw = limit_rhs(n, state)
    np.testing.assert_array_equal(dv, ldv)
    np.testing.assert_array_equal(dw, ldw)


@pytest.mark.parametrize("t", [0.0, 2.0, 10.0])
def test_perturbation_decays(t):
    """Test the exp(-2t) bound on the difference to the limit system."""
    n = Dimension(4)
    potential = Potential([[0.2, -0.1], [-0.1, 0.3]], [[0.1, 0.0], [0.0, 0.1]])
    state = CylState(t, [0.3, 0.2], [0.1, -0.4])
    _, dw = perturbed_rhs(n, t, state, potential)
    _, ldw = limit_rhs(n, state)
    bound = potential.sup_norm() * math.exp(-2 * t) * np.hypot(*state.v)
    assert np.hypot(*(dw - ldw)) <= bound * (1 + 1e-12)


def test_coupling_matrix():
    """Test B(t) = exp(-2t) A(exp(-t))."""
    potential = Potential([[0.1, 0.0], [0.0, 0.1]], [[1.0, 0.0], [0.0, 0.0]])
    np.testing.assert_allclose(
        coupling_matrix(potential, 1.0),
        math.exp(-2) * np.array([[0.1 + math.exp(-1), 0.0], [0.0, 0.1]]),
    )


def test_run_rejects_bad_input():
    """Test the preconditions of a perturbed run."""
    ic = phase_point_state(0.3, DIRECTION)
    with pytest.raises(ValidationError) as e:
        run_perturbed(Dimension(6), ic, Potential.zero(), 10.0)
    assert e.value.code == "DIMENSION_RANGE"
    bad = Potential([[0.0, 0.1], [0.1, 0.0]], np.zeros((2, 2)))
    with pytest.raises(ValidationError) as e:
        run_perturbed(Dimension(4), ic, bad, 10.0)
    assert e.value.code == "H1_VIOLATION"
    negative = CylState(0.0, [-0.1, 0.3], [0.0, 0.0])
    with pytest.raises(ValidationError) as e:
        run_perturbed(Dimension(4), negative, Potential.zero(), 10.0)
    assert e.value.code == "IC_INADMISSIBLE"
    with pytest.raises(ValidationError) as e:
        run_perturbed(Dimension(4), ic, Potential.zero(), 0.0)
    assert e.value.code == "SPAN"


def test_unperturbed_run_diagnostics(fowler_run):
    """Test sup, inf and energy of an unperturbed Fowler run."""
    diagnostics = fowler_run.diagnostics
    assert not fowler_run.truncated
    assert diagnostics.sup_norm < 1.0
    assert diagnostics.inf_norm == pytest.approx(0.3, abs=1e-8)
    assert np.ptp(diagnostics.psi) <= 1e-10


def test_bubble_run_decays():
    """Test that the bubble run decays and is removable."""
    run = run_perturbed(
        Dimension(4),
        bubble_state(DIRECTION),
        Potential.zero(),
        8.0,
        PRECISE,
    )
    w = run.diagnostics.w
    speed = np.hypot(w[0], w[1])
    assert speed[-1] < 1e-2 * np.max(speed)
    assert removability_classify(run) is Removability.REMOVABLE


def test_fowler_run_is_nonremovable(fowler_run):
    """Test the classification of a Fowler run."""
    assert removability_classify(fowler_run) is Removability.NONREMOVABLE


def test_short_run_is_undecided():
    """Test that a short run is undecided."""
    run = run_perturbed(
        Dimension(4),
        phase_point_state(0.3, DIRECTION),
        Potential.zero(),
        2.0,
    )
    assert removability_classify(run) is Removability.UNDECIDED


def test_run_limit_accepts_any_dimension():
    """Test the limit run for n = 7."""
    run = run_limit(
        Dimension(7), phase_point_state(0.3, DIRECTION), 6.0
    )
    assert run.potential.is_zero
    assert run.trajectory.span == (0.0, 6.0)


@pytest.mark.slow
def test_perturbed_run_stays_bounded(perturbed_run):
    """Test that the A = 0.1 Id run is bounded away from zero and infinity."""
    diagnostics = perturbed_run.diagnostics
    assert not perturbed_run.truncated
    assert diagnostics.sup_norm < 1.0
    assert diagnostics.tail_inf_norm > 0.0


@pytest.mark.slow
def test_fit_of_perturbed_run(perturbed_run, perturbed_fit):
    """Test the rate of approach of the A = 0.1 Id run."""
    assert not perturbed_fit.exact_model
    assert perturbed_fit.alpha > 0.0
    assert perturbed_fit.decreasing_windows >= 5
    assert len(perturbed_fit.windows) == 18
    assert perturbed_fit.burn_in == 6
    np.testing.assert_allclose(
        perturbed_fit.lambda_star.lam, DIRECTION.lam, atol=1e-8
    )
    data = perturbed_fit.as_dict()
    assert {"eps_star", "T_star", "lambda_star", "alpha", "windows"} <= set(data)
    assert set(data["windows"][0]) == {"tau", "err"}


def _balanced_state(n, potential):
    """Return a phase-point state whose run ends with zero angular momentum."""

    def momentum(s):
        ic = CylState(0.0, 0.3 * DIRECTION.lam, s * DIRECTION.lam_bar)
        run = run_perturbed(n, ic, potential, 20.0, PRECISE)
        v1, v2, w1, w2 = run.trajectory(20.0)
        return w1 * v2 - v1 * w2

    s = brentq(momentum, -0.2, 0.2, xtol=1e-13)
    return CylState(0.0, 0.3 * DIRECTION.lam, s * DIRECTION.lam_bar)


@pytest.mark.slow
def test_fit_follows_a_moving_direction():
    """Test the per-window direction for A = diag(0.3, 0.1)."""
    n = Dimension(4)
    potential = Potential(np.diag([0.3, 0.1]), np.zeros((2, 2)))
    run = run_perturbed(
        n, _balanced_state(n, potential), potential, 40.0, PRECISE
    )
    fit = asymptotic_fit(run, cfg=PRECISE)
    lams = np.array([w.lambda_star.lam for w in fit.windows])
    assert np.linalg.norm(lams[0] - lams[-1]) > 1e-4
    np.testing.assert_allclose(lams[12:], lams[-1:].repeat(6, 0), atol=1e-6)
    np.testing.assert_array_equal(fit.lambda_star.lam, lams[-1])
    assert not fit.exact_model
    assert fit.alpha > 0.0
    assert fit.eps_star == fit.windows[-1].eps


@pytest.mark.slow
def test_perturbed_invariant_matches_model(perturbed_run, perturbed_fit):
    """Test the Pohozaev limit against the fitted model."""
    report = p_invariant(perturbed_run)
    assert report.sign_class is SignClass.NEGATIVE
    model = invariant_closed_form(Dimension(4), perturbed_fit.eps_star)
    assert report.limit_estimate == pytest.approx(model, rel=0.1)
    assert removability_classify(perturbed_run) is Removability.NONREMOVABLE


def test_fit_of_synthesized_run_is_exact(fowler_run):
    """Test the exact-model flag on an unperturbed run."""
    fit = asymptotic_fit(fowler_run, window_count=12, cfg=PRECISE)
    assert fit.exact_model
    assert fit.alpha is None
    assert fit.eps_star == pytest.approx(0.3, abs=1e-9)


def test_fit_recovers_necksize_off_the_phase_point():
    """Test the model necksize when W is perturbed by 1e-3."""
    n = Dimension(4)
    ic = CylState(0.0, 0.3 * DIRECTION.lam, 1e-3 * DIRECTION.lam)
    run = run_perturbed(n, ic, Potential.zero(), 20.0, PRECISE)
    fit = asymptotic_fit(run, window_count=12, cfg=PRECISE)
    assert fit.exact_model
    h0 = 2 * float(run.diagnostics.psi[0])
    eps = fit.eps_star
    assert eps**4 - eps**2 == pytest.approx(h0, abs=1e-10)
    assert eps == pytest.approx(0.3, abs=1e-3)


@pytest.mark.parametrize("count,length", [(2, 0.75), (18, 0.0), (100, 0.75)])
def test_fit_rejects_windows(fowler_run, count, length):
    """Test invalid window parameters."""
    with pytest.raises(ValidationError) as e:
        asymptotic_fit(fowler_run, count, length)
    assert e.value.code == "WINDOWS"


@pytest.mark.slow
def test_energy_drift_constant(perturbed_run, fowler_run):
    """Test the drift constant against its a-priori bound."""
    estimate = energy_drift_constant(perturbed_run)
    assert 0.0 < estimate.constant <= estimate.bound
    assert energy_drift_constant(fowler_run).bound == 0.0
