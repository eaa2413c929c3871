"""
Pohozaev module for computing the Pohozaev integral and its limit.

For radial fields the surface integral over the sphere of radius r equals
the volume of the unit sphere times the cylindrical energy at t = -ln r.
Along the limit system it is constant; with a potential A it drifts by a
volume integral that is evaluated here by quadrature in t.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import quad

from .core_model import cyl_to_ball, hamiltonian, scalar_hamiltonian
from .errors import InsufficientTailError, ValidationError
from .models import CylState, Dimension, PerturbedRun, Potential

logger = logging.getLogger(__name__)

ZERO_BAND = 1e-6
NOISE_BAND = 1e-9
MIN_TAIL_SAMPLES = 8


class SignClass(str, Enum):
    """Sign of a Pohozaev invariant."""

    NEGATIVE = "negative"
    ZERO = "zero"
    POSITIVE = "positive"


@dataclass(frozen=True, eq=False)
class PohozaevReport:
    """
    Pohozaev integral along a run and its estimated limit.

    Attributes:
        times: Cylindrical times t of the samples, r = exp(-t)
        values: P at each sample
        limit_estimate: Mean of P over the last third of the run
        cauchy_spread: Max minus min of P over the last third
        sign_class: Sign of the limit with a zero band
    """

    times: np.ndarray
    values: np.ndarray
    limit_estimate: float
    cauchy_spread: float
    sign_class: SignClass

    @property
    def radii(self) -> np.ndarray:
        """Return the radii r = exp(-t) of the samples."""
        return np.exp(-self.times)


@dataclass(frozen=True)
class DriftCheck:
    """
    Both sides of the Pohozaev drift identity between two radii.

    Attributes:
        lhs: P(r) - P(s) from the surface integrals
        rhs: Volume integral of the potential term
        residual: |lhs - rhs| relative to the larger side
    """

    lhs: float
    rhs: float
    residual: float


def p_cyl(n: Dimension, state: CylState) -> float:
    """Return the Pohozaev integral of a cylindrical state."""
    return n.sigma_sphere * hamiltonian(n, state)


def p_ball_radial(
    n: Dimension, r: float, u: np.ndarray, du_dr: np.ndarray
) -> float:
    """
    Evaluate the Pohozaev surface integral of a radial field at radius r.

    Args:
        n: Dimension
        r: Radius, positive
        u: Field values at r
        du_dr: Radial derivatives at r

    Returns:
        The surface integral over the sphere of radius r

    Raises:
        ValidationError: If r is not positive
    """
    if not r > 0:
        raise ValidationError(f"Radius must be positive, got {r}", code="RADIUS")
    u = np.asarray(u, dtype=float)
    du = np.asarray(du_dr, dtype=float)
    u_sq = float(u @ u)
    du_sq = float(du @ du)
    integrand = (
        n.delta * float(u @ du)
        - 0.5 * r * du_sq
        + r * du_sq
        + r * (n.n - 2) ** 2 / 8 * u_sq ** (n.critical_exponent / 2)
    )
    return n.sigma_sphere * r ** (n.n - 1) * integrand


def invariant_closed_form(n: Dimension, eps: float) -> float:
    """Return the Pohozaev invariant of the Fowler profile ``eps``."""
    return n.sigma_sphere * 0.5 * float(scalar_hamiltonian(n, eps, 0.0))


def classify_sign(n: Dimension, value: float) -> SignClass:
    """Classify a Pohozaev value with the band ZERO_BAND * sigma."""
    if abs(value) <= ZERO_BAND * n.sigma_sphere:
        return SignClass.ZERO
    return SignClass.NEGATIVE if value < 0 else SignClass.POSITIVE


def pohozaev_series(run: PerturbedRun) -> tuple[np.ndarray, np.ndarray]:
    """Return the sample times of a run and P at each of them."""
    diagnostics = run.diagnostics
    return diagnostics.times, run.dim.sigma_sphere * diagnostics.psi


def _state_at(run: PerturbedRun, t: float) -> CylState:
    return CylState.from_vector(t, run.trajectory(t))


def p_drift(
    n: Dimension,
    run: PerturbedRun,
    r: float,
    s: float,
    potential: Potential | None = None,
) -> DriftCheck:
    """
    Check the Pohozaev drift identity between radii s <= r.

    The left side is P(r) - P(s) from two surface integrals. The right side
    is the volume integral of the potential term, written in t as
    -sigma * integral of exp(-2t) <W, A(exp(-t)) V> dt over [-ln r, -ln s].

    Args:
        n: Dimension
        run: Perturbed run covering both radii
        r: Outer radius
        s: Inner radius
        potential: Potential of the volume term; defaults to the run's

    Returns:
        DriftCheck with both sides and the relative residual

    Raises:
        ValidationError: If the radii are out of order or outside the run
    """
    potential = potential or run.potential
    if not 0 < s <= r:
        raise ValidationError(
            f"Radii must satisfy 0 < s <= r, got s={s}, r={r}", code="RANGE"
        )
    t_r, t_s = -math.log(r), -math.log(s)
    lo, hi = run.trajectory.span
    if not lo <= t_r <= t_s <= hi:
        raise ValidationError(
            f"Radii [{s:.6g}, {r:.6g}] are outside the run", code="RANGE"
        )
    if t_r == t_s:
        return DriftCheck(0.0, 0.0, 0.0)

    lhs = p_ball_radial(n, *cyl_to_ball(n, _state_at(run, t_r))) - (
        p_ball_radial(n, *cyl_to_ball(n, _state_at(run, t_s)))
    )

    def integrand(t: float) -> float:
        y = run.trajectory(t)
        return math.exp(-2 * t) * float(
            y[2:] @ (potential.matrix(math.exp(-t)) @ y[:2])
        )

    # the dense output is a polynomial on each integrator step
    nodes = run.trajectory.nodes
    cuts = np.concatenate(
        ([t_r], nodes[(nodes > t_r) & (nodes < t_s)], [t_s])
    )
    total = sum(
        quad(integrand, a, b, epsabs=1e-15, epsrel=1e-12)[0]
        for a, b in zip(cuts[:-1], cuts[1:], strict=True)
    )
    rhs = -n.sigma_sphere * total
    residual = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-14)
    logger.debug(
        "Drift identity on [%.6g, %.6g]: lhs=%.12g rhs=%.12g", s, r, lhs, rhs
    )
    return DriftCheck(float(lhs), float(rhs), float(residual))


def p_invariant(run: PerturbedRun) -> PohozaevReport:
    """
    Estimate the Pohozaev invariant from the tail of a run.

    Raises:
        InsufficientTailError: If the tail is too short or P still varies
            more over the last third than over the middle third
    """
    n = run.dim
    times, values = pohozaev_series(run)
    lo, hi = times[0], times[-1]
    tail = times >= lo + 2 * (hi - lo) / 3
    middle = (times >= lo + (hi - lo) / 3) & ~tail
    if tail.sum() < MIN_TAIL_SAMPLES or middle.sum() < MIN_TAIL_SAMPLES:
        raise InsufficientTailError(
            f"Run tail has {int(tail.sum())} samples; "
            f"need {MIN_TAIL_SAMPLES}"
        )
    spread = float(np.ptp(values[tail]))
    previous = float(np.ptp(values[middle]))
    if spread > previous and spread > NOISE_BAND * n.sigma_sphere:
        raise InsufficientTailError(
            f"Pohozaev spread {spread:.3g} over the tail exceeds "
            f"{previous:.3g} over the middle third"
        )
    limit = float(values[tail].mean())
    return PohozaevReport(
        times, values, limit, spread, classify_sign(n, limit)
    )
