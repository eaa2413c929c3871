"""
Fowler factory module for constructing periodic profiles by shooting.

A profile is integrated from a minimum ``(eps, 0)`` of the scalar Fowler
equation; the period is the first return to a minimum, i.e. the first
rising zero of v'.
"""

import logging
import math

import numpy as np
from scipy.integrate import quad
from scipy.optimize import bisect, brentq

from .core_model import fowler_field, scalar_hamiltonian
from .errors import PeriodDetectionError, ValidationError
from .integrator import (
    Crossing,
    IntegratorConfig,
    Trajectory,
    find_events,
    integrate,
    uniform_nodes,
)
from .models import CylState, Dimension, Direction, FowlerProfile

logger = logging.getLogger(__name__)

MAX_SPAN_DOUBLINGS = 8
MIN_EVENT_TIME = 1e-6
PERIOD_MATCH_TOL = 1e-6
MINIMUM_TOL = 1e-8
PERIODICITY_TOL = 1e-7
NECKSIZE_XTOL = 1e-14
# default exclusion of both non-periodic endpoints of the necksize range
RELATIVE_MARGIN = 1e-3


def cylinder_necksize(n: Dimension) -> float:
    """Return the constant solution ((n - 2) / n)^{(n - 2) / 4}."""
    return ((n.n - 2) / n.n) ** ((n.n - 2) / 4)


def energy_floor(n: Dimension) -> float:
    """Return the scalar energy of the cylinder, the lower energy bound."""
    return -((n.n - 2) / 2) * ((n.n - 2) / n.n) ** (n.n / 2)


def limit_period(n: Dimension) -> float:
    """Return the period 2 pi / sqrt(n - 2) of small cylinder oscillations."""
    return 2 * math.pi / math.sqrt(n.n - 2)


def _check_necksize(n: Dimension, eps: float) -> None:
    if not 0.0 < eps < cylinder_necksize(n):
        raise ValidationError(
            f"Necksize must lie in (0, {cylinder_necksize(n):.6f}) "
            f"for n={n.n}, got {eps}",
            code="EPS_RANGE",
        )


def profile_from_necksize(
    n: Dimension, eps: float, cfg: IntegratorConfig | None = None
) -> FowlerProfile:
    """
    Construct the Fowler profile with minimum ``eps`` at t = 0.

    Args:
        n: Dimension
        eps: Necksize in (0, eps_cyl)
        cfg: Integrator tolerances

    Returns:
        FowlerProfile sampled over at least two periods

    Raises:
        ValidationError: If eps is outside the open necksize interval
        PeriodDetectionError: If no clean period is found
    """
    _check_necksize(n, eps)
    field = fowler_field(n)
    span = 2.5 * limit_period(n)
    for _ in range(MAX_SPAN_DOUBLINGS):
        samples = integrate(
            field, [eps, 0.0], (0.0, span), cfg, monitor=lambda y: abs(y[0])
        )
        minima = [
            t
            for t in find_events(samples, lambda y: y[1], Crossing.RISING)
            if t > MIN_EVENT_TIME
        ]
        if len(minima) >= 2:
            break
        span *= 2
    else:
        raise PeriodDetectionError(
            f"No period found for eps={eps} within t={span / 2:.6g}"
        )

    period = minima[0]
    if abs(minima[1] - 2 * period) > PERIOD_MATCH_TOL:
        raise PeriodDetectionError(
            f"Minima at {minima[0]:.12g} and {minima[1]:.12g} "
            "are not equally spaced"
        )
    energy = float(scalar_hamiltonian(n, eps, 0.0))
    profile = FowlerProfile(n, float(eps), float(period), energy, samples)
    _verify_profile(profile)
    logger.info("Fowler profile n=%d eps=%.6g period=%.12g", n.n, eps, period)
    return profile


def _verify_profile(profile: FowlerProfile) -> None:
    ts = np.linspace(0.0, profile.period, 2001)
    v = profile.samples(ts)[0]
    shifted = profile.samples(ts + profile.period)[0]
    if abs(v.min() - profile.eps) > MINIMUM_TOL:
        raise PeriodDetectionError(
            f"Profile minimum {v.min():.12g} differs from eps={profile.eps}"
        )
    if not v.max() < 1.0:
        raise PeriodDetectionError(f"Profile maximum {v.max():.12g} >= 1")
    drift = float(np.max(np.abs(shifted - v)))
    if drift > PERIODICITY_TOL:
        raise PeriodDetectionError(
            f"Profile is not periodic: drift {drift:.3g} over one period"
        )


def necksize_from_energy(n: Dimension, h0: float) -> float:
    """
    Invert the energy on the small-necksize branch.

    Args:
        n: Dimension
        h0: Scalar energy in (energy_floor(n), 0)

    Returns:
        The smaller root eps of scalar_hamiltonian(n, eps, 0) = h0

    Raises:
        ValidationError: If h0 is outside the open energy interval
    """
    floor = energy_floor(n)
    if not floor < h0 < 0.0:
        raise ValidationError(
            f"Energy must lie in ({floor:.6g}, 0) for n={n.n}, got {h0}",
            code="ENERGY_RANGE",
        )
    return bisect(
        lambda eps: scalar_hamiltonian(n, eps, 0.0) - h0,
        0.0,
        cylinder_necksize(n),
        xtol=NECKSIZE_XTOL,
    )


def peak_value(n: Dimension, eps: float) -> float:
    """Return the maximum of the profile with necksize ``eps``."""
    _check_necksize(n, eps)
    h0 = scalar_hamiltonian(n, eps, 0.0)
    return brentq(
        lambda v: scalar_hamiltonian(n, v, 0.0) - h0,
        cylinder_necksize(n),
        1.0,
        xtol=NECKSIZE_XTOL,
    )


def period_by_quadrature(n: Dimension, eps: float) -> float:
    """
    Compute the period from the energy integral.

    The substitution v = mid + half sin(phi) removes the inverse square
    root singularities at both turning points.
    """
    top = peak_value(n, eps)
    h0 = scalar_hamiltonian(n, eps, 0.0)
    mid, half = 0.5 * (top + eps), 0.5 * (top - eps)

    def integrand(phi: float) -> float:
        v = mid + half * math.sin(phi)
        kinetic = h0 - scalar_hamiltonian(n, v, 0.0)
        gap = (half * math.cos(phi)) ** 2
        return math.sqrt(gap / kinetic)

    value, _ = quad(
        integrand,
        -math.pi / 2,
        math.pi / 2,
        epsabs=1e-13,
        epsrel=1e-12,
        limit=200,
    )
    return 2.0 * value


def spherical_profile(
    n: Dimension, span: tuple[float, float] = (-10.0, 10.0)
) -> Trajectory:
    """
    Return the separatrix v = cosh(t)^{-(n - 2) / 2} as a trajectory.

    Its energy is zero; it is the cylindrical form of the standard bubble.
    """

    def evaluate(ts: np.ndarray) -> np.ndarray:
        v = np.cosh(ts) ** (-n.delta)
        return np.vstack((v, -n.delta * np.tanh(ts) * v))

    return Trajectory(span, uniform_nodes(span, 0.05), evaluate, 2, 0)


def phase_point_state(eps: float, direction: Direction) -> CylState:
    """Initial state at a minimum of the profile with necksize ``eps``."""
    return CylState(0.0, eps * direction.lam, np.zeros(2))


def bubble_state(direction: Direction) -> CylState:
    """Initial state at the maximum of the separatrix along ``direction``."""
    return CylState(0.0, direction.lam.copy(), np.zeros(2))
