"""
Integrator module for adaptive Runge-Kutta integration with dense output.

The module wraps scipy's DOP853 pair (order 8, dense output of order 7)
behind an immutable ``Trajectory``, refines zero crossings of event
functions on the dense output, and computes monodromy matrices of
periodic mode equations ``psi'' + q(t) psi = 0``.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import bisect

from .errors import IntegrationError, TrajectoryError, ValidationError

logger = logging.getLogger(__name__)

VectorField = Callable[[float, np.ndarray], np.ndarray]
Evaluator = Callable[[np.ndarray], np.ndarray]

BLOWUP_LIMIT = 10.0
EVENT_XTOL = 1e-12
SPAN_SLACK = 1e-12
DET_BAND = 1e-8
# rhs evaluations per accepted DOP853 step, dense output included
DOP853_CALLS_PER_STEP = 16


class Crossing(Enum):
    """Direction of a zero crossing."""

    RISING = "rising"
    FALLING = "falling"
    ANY = "any"


@dataclass(frozen=True)
class IntegratorConfig:
    """
    Tolerances and limits of the adaptive integrator.

    Attributes:
        rel_tol: Relative local error tolerance
        abs_tol: Absolute local error tolerance
        max_step: Largest step in cylindrical time units
        max_steps: Step budget per integration leg
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.5
    max_steps: int = 200_000

    def __post_init__(self) -> None:
        if not 0 < self.rel_tol <= 1e-3:
            raise ValidationError(
                f"rel_tol must lie in (0, 1e-3], got {self.rel_tol}",
                code="TOLERANCE",
            )
        if not 0 < self.abs_tol <= self.rel_tol:
            raise ValidationError(
                f"abs_tol must lie in (0, rel_tol], got {self.abs_tol}",
                code="TOLERANCE",
            )
        if not self.max_step > 0:
            raise ValidationError("max_step must be positive", code="TOLERANCE")
        if self.max_steps < 1:
            raise ValidationError("max_steps must be positive", code="TOLERANCE")

    @classmethod
    def default(cls) -> "IntegratorConfig":
        """Return the default tolerances (rel 1e-10, abs 1e-12)."""
        return cls()

    @classmethod
    def precise(cls) -> "IntegratorConfig":
        """Return tight tolerances (rel 1e-12, abs 1e-14)."""
        return cls(rel_tol=1e-12, abs_tol=1e-14)

    def halved(self) -> "IntegratorConfig":
        """Return a copy with both tolerances halved."""
        return replace(self, rel_tol=self.rel_tol / 2, abs_tol=self.abs_tol / 2)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Immutable dense-output solution.

    Attributes:
        span: Closed interval ``(t0, t1)`` on which evaluation is allowed
        nodes: Strictly increasing sample times (integrator steps)
        evaluator: Maps an array of times to states of shape ``(dim, m)``
        dim: Number of state components
        order: Interpolation order of the dense output (0 for closed forms)
        truncated: True if integration stopped early at the blow-up limit
    """

    span: tuple[float, float]
    nodes: np.ndarray
    evaluator: Evaluator
    dim: int
    order: int = 7
    truncated: bool = False

    def __call__(self, t: float | np.ndarray) -> np.ndarray:
        """
        Evaluate the trajectory.

        Args:
            t: Scalar time or array of times

        Returns:
            State of shape ``(dim,)`` for scalar input, ``(dim, m)`` otherwise

        Raises:
            TrajectoryError: If any time lies outside the span
        """
        times = np.atleast_1d(np.asarray(t, dtype=float))
        lo, hi = self.span
        slack = SPAN_SLACK * max(1.0, abs(lo), abs(hi))
        if np.any(times < lo - slack) or np.any(times > hi + slack):
            raise TrajectoryError(
                f"Evaluation outside span [{lo:.6g}, {hi:.6g}]"
            )
        values = self.evaluator(np.clip(times, lo, hi))
        return values[:, 0] if np.ndim(t) == 0 else values

    def map(
        self,
        transform: Callable[[np.ndarray, np.ndarray], np.ndarray],
        dim: int,
    ) -> "Trajectory":
        """
        Derive a trajectory by transforming states pointwise.

        Args:
            transform: Function of ``(times, states)`` returning new states
            dim: Number of components of the new states

        Returns:
            Trajectory with the same span and nodes
        """
        source = self.evaluator

        def evaluate(times: np.ndarray) -> np.ndarray:
            return transform(times, source(times))

        return Trajectory(
            self.span, self.nodes, evaluate, dim, self.order, self.truncated
        )

    def restrict(self, t0: float, t1: float) -> "Trajectory":
        """Return the same solution on the sub-interval ``[t0, t1]``."""
        lo, hi = self.span
        if not lo <= t0 < t1 <= hi:
            raise TrajectoryError(
                f"[{t0:.6g}, {t1:.6g}] is not inside [{lo:.6g}, {hi:.6g}]"
            )
        inner = self.nodes[(self.nodes > t0) & (self.nodes < t1)]
        nodes = np.concatenate(([t0], inner, [t1]))
        return Trajectory(
            (t0, t1), nodes, self.evaluator, self.dim, self.order, self.truncated
        )

    def grid(self, per_step: int = 4) -> np.ndarray:
        """Return the nodes with ``per_step - 1`` points inserted per step."""
        fractions = np.arange(per_step) / per_step
        starts = self.nodes[:-1, None] + np.diff(self.nodes)[:, None] * fractions
        return np.append(starts.ravel(), self.nodes[-1])


def uniform_nodes(span: tuple[float, float], spacing: float) -> np.ndarray:
    """Return nodes covering ``span`` with at most ``spacing`` between them."""
    count = max(2, math.ceil((span[1] - span[0]) / spacing) + 1)
    return np.linspace(span[0], span[1], count)


class _StepBudgetExceeded(Exception):
    pass


@dataclass(frozen=True)
class _Leg:
    times: np.ndarray
    solution: Callable[[np.ndarray], np.ndarray]
    truncated: bool


def _solve_leg(
    rhs: VectorField,
    y0: np.ndarray,
    t_start: float,
    t_end: float,
    cfg: IntegratorConfig,
    monitor: Callable[[np.ndarray], float] | None,
) -> _Leg:
    budget = cfg.max_steps * DOP853_CALLS_PER_STEP
    calls = 0
    last_t = t_start

    def counted(t: float, y: np.ndarray) -> np.ndarray:
        nonlocal calls, last_t
        calls += 1
        if calls > budget:
            raise _StepBudgetExceeded
        last_t = t
        return rhs(t, y)

    events = None
    if monitor is not None:

        def escape(t: float, y: np.ndarray) -> float:
            return BLOWUP_LIMIT - monitor(y)

        escape.terminal = True
        escape.direction = -1
        events = [escape]

    try:
        sol = solve_ivp(
            counted,
            (t_start, t_end),
            y0,
            method="DOP853",
            rtol=cfg.rel_tol,
            atol=cfg.abs_tol,
            max_step=cfg.max_step,
            dense_output=True,
            events=events,
        )
    except _StepBudgetExceeded:
        raise IntegrationError("step budget exhausted", last_t) from None
    if sol.status == -1:
        raise IntegrationError(sol.message, float(sol.t[-1]))
    truncated = sol.status == 1
    if truncated:
        logger.warning(
            "Solution left |y| < %g at t=%.6g; trajectory truncated",
            BLOWUP_LIMIT,
            sol.t[-1],
        )
    logger.debug(
        "DOP853 leg [%.6g, %.6g]: %d steps, %d rhs calls",
        t_start,
        sol.t[-1],
        sol.t.size - 1,
        sol.nfev,
    )
    return _Leg(sol.t, sol.sol, truncated)


def integrate(
    rhs: VectorField,
    y0: Sequence[float] | np.ndarray,
    span: tuple[float, float],
    cfg: IntegratorConfig | None = None,
    *,
    t0: float | None = None,
    monitor: Callable[[np.ndarray], float] | None = None,
) -> Trajectory:
    """
    Integrate ``y' = rhs(t, y)`` with dense output.

    The initial state is given at the anchor ``t0`` (default: the left end
    of the span). An interior anchor is integrated in both directions and
    the two legs are stitched into one trajectory.

    Args:
        rhs: Vector field ``rhs(t, y)``
        y0: Initial state at the anchor
        span: Interval ``(t_lo, t_hi)`` with ``t_lo < t_hi``
        cfg: Integrator tolerances; defaults to ``IntegratorConfig()``
        t0: Anchor time inside the span
        monitor: Optional scalar size of a state; the integration stops
            (and the trajectory is flagged truncated) once it reaches
            ``BLOWUP_LIMIT``

    Returns:
        Trajectory over the reached part of the span

    Raises:
        ValidationError: If the span is degenerate or ``y0`` is not finite
        IntegrationError: On step budget exhaustion or step-size underflow
    """
    cfg = cfg or IntegratorConfig()
    lo, hi = float(span[0]), float(span[1])
    if not hi > lo:
        raise ValidationError(f"Degenerate span ({lo}, {hi})", code="SPAN")
    state = np.asarray(y0, dtype=float)
    if not np.all(np.isfinite(state)):
        raise ValidationError("Initial state is not finite", code="SPAN")
    anchor = lo if t0 is None else float(t0)
    if not lo <= anchor <= hi:
        raise ValidationError("Anchor lies outside the span", code="SPAN")

    forward = (
        _solve_leg(rhs, state, anchor, hi, cfg, monitor) if anchor < hi else None
    )
    backward = (
        _solve_leg(rhs, state, anchor, lo, cfg, monitor) if anchor > lo else None
    )
    start = float(backward.times[-1]) if backward else anchor
    stop = float(forward.times[-1]) if forward else anchor

    def evaluate(times: np.ndarray) -> np.ndarray:
        out = np.empty((state.size, times.size))
        ahead = times >= anchor
        if forward is not None and ahead.any():
            out[:, ahead] = forward.solution(times[ahead])
        if backward is not None and (~ahead).any():
            out[:, ~ahead] = backward.solution(times[~ahead])
        if forward is None and ahead.any():
            out[:, ahead] = backward.solution(times[ahead])
        return out

    pieces = [leg.times for leg in (backward, forward) if leg is not None]
    nodes = np.unique(np.concatenate(pieces))
    truncated = any(leg.truncated for leg in (backward, forward) if leg)
    return Trajectory((start, stop), nodes, evaluate, state.size, 7, truncated)


def find_events(
    traj: Trajectory,
    event: Callable[[np.ndarray], np.ndarray],
    direction: Crossing = Crossing.ANY,
    per_step: int = 8,
) -> list[float]:
    """
    Locate zero crossings of an event function along a trajectory.

    Sign changes are bracketed on a refined node grid and then bisected on
    the dense output to ``EVENT_XTOL``.

    Args:
        traj: Trajectory to scan
        event: Vectorised scalar function of states ``(dim, m) -> (m,)``
        direction: Which crossings to keep
        per_step: Grid points per integrator step

    Returns:
        Ordered list of crossing times (possibly empty)
    """
    times = traj.grid(per_step)
    values = np.asarray(event(traj(times)), dtype=float)

    def scalar(t: float) -> float:
        return float(np.asarray(event(traj(np.array([t]))))[0])

    found: list[tuple[float, bool]] = []
    for i in np.nonzero(values[:-1] * values[1:] < 0)[0]:
        root = bisect(scalar, times[i], times[i + 1], xtol=EVENT_XTOL)
        found.append((root, values[i] < 0))
    last = values.size - 1
    for i in np.nonzero(values == 0.0)[0]:
        before = values[i - 1] if i > 0 else None
        after = values[i + 1] if i < last else None
        if before is not None and after is not None:
            if before * after < 0:
                found.append((float(times[i]), before < 0))
        elif after is not None and after != 0.0:
            # zero at the left end: direction from the next sample
            found.append((float(times[i]), after > 0))
        elif before is not None and before != 0.0:
            found.append((float(times[i]), before < 0))

    keep = {
        Crossing.RISING: lambda rising: rising,
        Crossing.FALLING: lambda rising: not rising,
        Crossing.ANY: lambda rising: True,
    }[direction]
    return sorted(t for t, rising in found if keep(rising))


def central_derivative(
    traj: Trajectory, times: np.ndarray, channel: int, step: float = 5e-3
) -> np.ndarray:
    """Fourth-order central difference of one trajectory component."""
    samples = [traj(times + k * step)[channel] for k in (-2, -1, 1, 2)]
    return (
        samples[0] - 8.0 * samples[1] + 8.0 * samples[2] - samples[3]
    ) / (12.0 * step)


@dataclass(frozen=True, eq=False)
class Monodromy:
    """
    One-period fundamental matrix of ``psi'' + q(t) psi = 0``.

    The matrix acts on ``(psi, psi')``. It is assembled from a continuous QR
    factorisation, so ``log_det`` (the sum of the log-scaled diagonal of R)
    carries the determinant without cancellation.

    Attributes:
        matrix: 2x2 real monodromy matrix
        period: Period of the coefficient
        multipliers: Eigenvalues of the matrix, largest modulus first
        log_det: Logarithm of the determinant
    """

    matrix: np.ndarray
    period: float
    multipliers: tuple[complex, complex]
    log_det: float

    @property
    def determinant(self) -> float:
        """Determinant carried by the QR log-scale; one for a Hill equation."""
        return math.exp(self.log_det)

    @property
    def trace(self) -> float:
        """Trace of the monodromy matrix."""
        return float(np.trace(self.matrix))


def floquet_multipliers(trace: float, det: float) -> tuple[complex, complex]:
    """Roots of ``mu^2 - trace mu + det``, computed without cancellation."""
    disc = trace * trace - 4.0 * det
    if disc >= 0.0:
        big = 0.5 * (trace + math.copysign(math.sqrt(disc), trace))
        return complex(big), complex(det / big)
    half_gap = 0.5 * math.sqrt(-disc)
    return complex(0.5 * trace, half_gap), complex(0.5 * trace, -half_gap)


def _qr_field(q: Callable[[float], float]) -> VectorField:
    # state (theta, rho1, rho2, r12 * exp(-rho1)); Q = rotation(theta)
    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        theta, rho1, rho2, upper = y
        c, s = math.cos(theta), math.sin(theta)
        qt = float(q(t))
        b11 = c * s * (1.0 - qt)
        b22 = c * s * (qt - 1.0)
        b12 = c * c + qt * s * s
        b21 = -s * s - qt * c * c
        return np.array(
            [b21, b11, b22, (b12 + b21) * math.exp(rho2 - rho1)]
        )

    return rhs


def monodromy(
    q: Callable[[float], float],
    period: float,
    cfg: IntegratorConfig | None = None,
) -> Monodromy:
    """
    Compute the monodromy matrix of ``psi'' + q(t) psi = 0``.

    Args:
        q: Periodic coefficient
        period: Period of ``q``
        cfg: Integrator tolerances

    Returns:
        Monodromy with matrix, multipliers and determinant

    Raises:
        ValidationError: If the period is not positive
        IntegrationError: If the integration fails
    """
    if not period > 0:
        raise ValidationError("Period must be positive", code="PERIOD")
    traj = integrate(_qr_field(q), np.zeros(4), (0.0, period), cfg)
    theta, rho1, rho2, upper = traj(period)
    c, s = math.cos(theta), math.sin(theta)
    rotation = np.array([[c, -s], [s, c]])
    triangle = np.array(
        [[math.exp(rho1), upper * math.exp(rho1)], [0.0, math.exp(rho2)]]
    )
    matrix = rotation @ triangle
    log_det = float(rho1 + rho2)
    multipliers = floquet_multipliers(float(np.trace(matrix)), math.exp(log_det))
    if abs(math.exp(log_det) - 1.0) > DET_BAND:
        logger.warning("Monodromy determinant drifted to %.12g", math.exp(log_det))
    return Monodromy(matrix, float(period), multipliers, log_det)
