"""
Classifier module for diagnostics of the coupled limit system.

Positive solutions of the limit system lie on a fixed ray: the Wronskian
w1 v2 - v1 w2 is conserved, and it vanishes exactly when V / |V| is
constant. The diagnostics below sample a trajectory of (v1, v2, w1, w2)
and report the Wronskian, the direction, the two-sided bounds and the
componentwise positivity dichotomy. Given the dimension they also check
the auxiliary functions f_i, the limits a settling component may have and
the growth of the ball-side fields toward the origin.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core_model import auxiliary_series, energy_series, limit_acceleration
from .errors import ValidationError
from .fowler_factory import cylinder_necksize
from .integrator import Crossing, Trajectory, central_derivative, find_events
from .models import Dimension, Direction, FowlerProfile

logger = logging.getLogger(__name__)

RAY_TOL = 1e-6
ZERO_FLOOR = 1e-12
QUADRANT_SLACK = 1e-12
SAMPLES_PER_STEP = 4
MONOTONE_TOL = 1e-9
SETTLE_TOL = 1e-6
# share of the span at each end inspected for a settled limit
SETTLE_FRACTION = 0.2
ENERGY_FLOOR = 1e-10
BLOWUP_SEGMENTS = 4


class ComponentClass(str, Enum):
    """Behaviour of one component along a trajectory."""

    POSITIVE = "positive"
    ZERO = "zero"
    MIXED = "mixed"


@dataclass(frozen=True)
class NotOnRay:
    """Marker returned when V / |V| is not constant."""

    max_deviation: float
    reason: str = "angular drift"


@dataclass(frozen=True, eq=False)
class WronskianTrace:
    """Sampled Wronskian with its mean and max-minus-min spread."""

    times: np.ndarray
    values: np.ndarray
    mean: float
    spread: float


def _finite_or_none(value: float | None) -> float | None:
    if value is None or not math.isfinite(value):
        return None
    return value


@dataclass(frozen=True)
class AuxiliaryTrace:
    """
    Monotonicity of the auxiliary functions f_i against |v_i|.

    Attributes:
        defects: Per component, the largest move of f_i against the
            direction of |v_i| on sample steps where |v_i| is strictly
            monotone, relative to max(1, sup |f_i|)
        peaks: Per component, the largest value of v_i
    """

    defects: tuple[float, float]
    peaks: tuple[float, float]

    @property
    def monotone(self) -> bool:
        """True if both f_i follow |v_i| within MONOTONE_TOL."""
        return max(self.defects) <= MONOTONE_TOL

    @property
    def below_one(self) -> bool:
        """True if both components stay below one."""
        return max(self.peaks) < 1.0

    def as_dict(self) -> dict:
        """Return the JSON form of the trace."""
        return {
            "defects": list(self.defects),
            "peaks": list(self.peaks),
            "monotone": self.monotone,
            "below_one": self.below_one,
        }


@dataclass(frozen=True)
class LimitCheck:
    """
    Settled values of the components at the two ends of the span.

    A component with a limit C at either end has C <= eps_cyl, and C = 0
    once the energy is nonnegative.

    Attributes:
        head: Per component, the settled value at the left end or None
        tail: Per component, the settled value at the right end or None
        energy: Mean energy along the trajectory
        bound: Cylinder necksize of the dimension
    """

    head: tuple[float | None, float | None]
    tail: tuple[float | None, float | None]
    energy: float
    bound: float

    @property
    def consistent(self) -> bool:
        """True if every settled value respects the bound and the energy."""
        for value in (*self.head, *self.tail):
            if value is None:
                continue
            if value > self.bound + SETTLE_TOL:
                return False
            if self.energy >= -ENERGY_FLOOR and abs(value) > SETTLE_TOL:
                return False
        return True

    def as_dict(self) -> dict:
        """Return the JSON form of the check."""
        return {
            "head": list(self.head),
            "tail": list(self.tail),
            "energy": self.energy,
            "bound": self.bound,
            "consistent": self.consistent,
        }


@dataclass(frozen=True)
class BlowupCheck:
    """
    Growth of the ball-side fields u_i = e^{delta t} v_i as r = e^{-t} -> 0.

    Attributes:
        rates: Per component, the slope of log min u_i between the first
            and last of BLOWUP_SEGMENTS pieces of the span; -inf when v_i
            is not positive throughout
        delta: Conformal weight of the dimension
    """

    rates: tuple[float, float]
    delta: float

    @property
    def both_blow_up(self) -> bool:
        """True if both u_i grow at least like e^{delta t / 2}."""
        return min(self.rates) >= self.delta / 2

    def as_dict(self) -> dict:
        """Return the JSON form of the check."""
        return {
            "rates": [_finite_or_none(rate) for rate in self.rates],
            "both_blow_up": self.both_blow_up,
        }


@dataclass(frozen=True)
class ClassificationReport:
    """
    Summary of the ray classification of a trajectory.

    Attributes:
        wronskian_mean: Mean of w1 v2 - v1 w2
        wronskian_spread: Max minus min of the Wronskian
        direction: Direction, or NotOnRay with the observed deviation
        eta: Ratio v1 / v2 where defined
        bounds: Smallest and largest |V| (the constants c1, c2)
        components: Dichotomy class of each component
        auxiliary: Auxiliary function trace, when the dimension is known
        limits: Settled limit check, when the dimension is known
        blowup: Growth toward the origin, when the dimension is known
    """

    wronskian_mean: float
    wronskian_spread: float
    direction: Direction | NotOnRay
    eta: float | None
    bounds: tuple[float, float]
    components: tuple[ComponentClass, ComponentClass]
    auxiliary: AuxiliaryTrace | None = None
    limits: LimitCheck | None = None
    blowup: BlowupCheck | None = None

    def as_dict(self) -> dict:
        """Return the JSON document of the classify command."""
        if isinstance(self.direction, Direction):
            direction = self.direction.as_list()
        else:
            direction = {
                "not_on_ray": self.direction.reason,
                "max_deviation": _finite_or_none(
                    self.direction.max_deviation
                ),
            }
        data = {
            "wronskian_mean": self.wronskian_mean,
            "wronskian_spread": self.wronskian_spread,
            "direction": direction,
            "eta": self.eta,
            "bounds": list(self.bounds),
            "components": [c.value for c in self.components],
        }
        for key, check in (
            ("auxiliary", self.auxiliary),
            ("limits", self.limits),
            ("blowup", self.blowup),
        ):
            if check is not None:
                data[key] = check.as_dict()
        return data


def _sample(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    times = traj.grid(SAMPLES_PER_STEP)
    return times, traj(times)


def wronskian_trace(traj: Trajectory) -> WronskianTrace:
    """Sample the Wronskian w1 v2 - v1 w2 along a trajectory."""
    times, states = _sample(traj)
    v1, v2, w1, w2 = states
    values = w1 * v2 - v1 * w2
    return WronskianTrace(
        times,
        values,
        float(values.mean()),
        float(values.max() - values.min()),
    )


def _unit_directions(states: np.ndarray) -> np.ndarray:
    norms = np.hypot(states[0], states[1])
    if norms.min() <= ZERO_FLOOR:
        raise ValidationError(
            "|V| vanishes along the trajectory", code="ZERO_STATE"
        )
    return states[:2] / norms


def direction_of(traj: Trajectory) -> Direction | NotOnRay:
    """
    Recover the ray direction of a trajectory.

    Returns:
        The mean of V / |V| if every sample is within RAY_TOL of it,
        otherwise NotOnRay with the largest deviation

    Raises:
        ValidationError: If |V| vanishes
    """
    _, states = _sample(traj)
    units = _unit_directions(states)
    mean = units.mean(axis=1)
    mean /= np.hypot(mean[0], mean[1])
    deviation = float(np.max(np.hypot(*(units - mean[:, None]))))
    if deviation > RAY_TOL:
        return NotOnRay(deviation)
    if np.any(mean < -QUADRANT_SLACK):
        return NotOnRay(deviation, "outside the closed positive quadrant")
    return Direction.of(*np.clip(mean, 0.0, None))


def angular_deviation(traj: Trajectory, direction: Direction) -> float:
    """Return the largest distance between V / |V| and ``direction``."""
    _, states = _sample(traj)
    units = _unit_directions(states)
    return float(np.max(np.hypot(*(units - direction.lam[:, None]))))


def synthesize(
    profile: FowlerProfile,
    direction: Direction,
    shift: float = 0.0,
    periods: int = 10,
) -> Trajectory:
    """
    Build the ray solution V = v(t + shift) L, W = v'(t + shift) L.

    Args:
        profile: Fowler profile v
        direction: Ray direction L
        shift: Phase shift
        periods: Number of periods covered, starting at t = 0

    Returns:
        Trajectory of (v1, v2, w1, w2) on [0, periods * T]
    """
    base = profile.as_trajectory((shift, shift + periods * profile.period))
    lam = direction.lam[:, None]

    def lift(times: np.ndarray, states: np.ndarray) -> np.ndarray:
        return np.vstack((lam * states[0], lam * states[1]))

    ray = base.map(lift, 4)
    return Trajectory(
        (0.0, periods * profile.period),
        ray.nodes - shift,
        lambda times: ray.evaluator(times + shift),
        4,
        ray.order,
    )


def ode_residual(n: Dimension, traj: Trajectory) -> float:
    """
    Residual of the limit system along a 4-component trajectory.

    W' is taken by fourth-order central differences and compared with the
    limit acceleration of V; V' is compared with W directly.
    """
    step = 1e-2
    lo, hi = traj.span
    times = np.linspace(lo + 2 * step, hi - 2 * step, 2001)
    states = traj(times)
    residual = 0.0
    for channel in (0, 1):
        dv = central_derivative(traj, times, channel, step)
        dw = central_derivative(traj, times, channel + 2, step)
        accel = limit_acceleration(n, states[:2])[channel]
        residual = max(
            residual,
            float(np.max(np.abs(dv - states[channel + 2]))),
            float(np.max(np.abs(dw - accel))),
        )
    return residual


def component_dichotomy(
    traj: Trajectory,
) -> tuple[ComponentClass, ComponentClass]:
    """Classify each component as positive, identically zero or mixed."""
    _, states = _sample(traj)
    classes = []
    for component in states[:2]:
        if np.max(np.abs(component)) <= ZERO_FLOOR:
            classes.append(ComponentClass.ZERO)
        elif component.min() > 0.0:
            classes.append(ComponentClass.POSITIVE)
        else:
            classes.append(ComponentClass.MIXED)
    return classes[0], classes[1]


def positivity_exit_time(traj: Trajectory) -> float | None:
    """Return the first time a component turns negative, if any."""
    start = traj(traj.span[0])
    if np.any(start[:2] < 0.0):
        return traj.span[0]
    exits = []
    for channel in (0, 1):
        crossings = find_events(
            traj, lambda y, c=channel: y[c], Crossing.FALLING
        )
        if crossings:
            exits.append(crossings[0])
    return min(exits) if exits else None


def auxiliary_trace(n: Dimension, traj: Trajectory) -> AuxiliaryTrace:
    """
    Check that each f_i rises and falls with |v_i| along a trajectory.

    Steps next to a turning point of |v_i| are skipped.
    """
    _, states = _sample(traj)
    defects, peaks = [], []
    for channel in (0, 1):
        v, w = states[channel], states[channel + 2]
        f = auxiliary_series(n, v, w)
        rise = np.sign(np.diff(np.abs(v)))
        inner = rise[1:-1]
        steady = (inner != 0) & (inner == rise[:-2]) & (inner == rise[2:])
        against = -inner * np.diff(f)[1:-1]
        worst = float(np.max(against[steady], initial=0.0))
        scale = max(1.0, float(np.max(np.abs(f))))
        defects.append(max(worst, 0.0) / scale)
        peaks.append(float(v.max()))
    return AuxiliaryTrace((defects[0], defects[1]), (peaks[0], peaks[1]))


def _settled(values: np.ndarray, end: int) -> float | None:
    if float(np.ptp(values)) > SETTLE_TOL:
        return None
    return float(values[end])


def limit_check(n: Dimension, traj: Trajectory) -> LimitCheck:
    """
    Look for components that settle at either end of the span.

    A component is settled on an end piece of SETTLE_FRACTION of the span
    when it varies there by at most SETTLE_TOL; its limit is taken as the
    outermost sample.
    """
    times, states = _sample(traj)
    lo, hi = traj.span
    reach = SETTLE_FRACTION * (hi - lo)
    head_mask, tail_mask = times <= lo + reach, times >= hi - reach
    head = tuple(_settled(states[c][head_mask], 0) for c in (0, 1))
    tail = tuple(_settled(states[c][tail_mask], -1) for c in (0, 1))
    energy = float(np.mean(energy_series(n, states[:2], states[2:])))
    check = LimitCheck(head, tail, energy, cylinder_necksize(n))
    if not check.consistent:
        logger.warning(
            "Settled limits head=%s tail=%s conflict with energy %.3g",
            head,
            tail,
            energy,
        )
    return check


def blowup_check(n: Dimension, traj: Trajectory) -> BlowupCheck:
    """
    Measure the growth of u_i = e^{delta t} v_i toward the origin.

    The span is cut into BLOWUP_SEGMENTS equal pieces; the rate is the
    slope of log min u_i from the first piece to the last. A positive
    singular solution has rate close to delta in both components, a
    regular one has rate close to zero.
    """
    times, states = _sample(traj)
    lo, hi = traj.span
    edges = np.linspace(lo, hi, BLOWUP_SEGMENTS + 1)
    pieces = [
        (times >= a) & (times <= b) for a, b in zip(edges[:-1], edges[1:])
    ]
    rates = []
    for component in states[:2]:
        if component.min() <= 0.0:
            rates.append(-math.inf)
            continue
        log_u = n.delta * (times - lo) + np.log(component)
        first = float(log_u[pieces[0]].min())
        last = float(log_u[pieces[-1]].min())
        rates.append((last - first) / (edges[-2] - edges[0]))
    return BlowupCheck((rates[0], rates[1]), n.delta)


def classify(
    traj: Trajectory, n: Dimension | None = None
) -> ClassificationReport:
    """
    Aggregate the ray diagnostics of a limit-system trajectory.

    With the dimension given, the report also carries the auxiliary
    function trace, the settled limit check and the blow-up check.
    """
    trace = wronskian_trace(traj)
    _, states = _sample(traj)
    norms = np.hypot(states[0], states[1])
    try:
        direction = direction_of(traj)
    except ValidationError:
        direction = NotOnRay(float("nan"), "|V| vanishes")
    eta = direction.eta if isinstance(direction, Direction) else None
    report = ClassificationReport(
        wronskian_mean=trace.mean,
        wronskian_spread=trace.spread,
        direction=direction,
        eta=eta,
        bounds=(float(norms.min()), float(norms.max())),
        components=component_dichotomy(traj),
        auxiliary=auxiliary_trace(n, traj) if n is not None else None,
        limits=limit_check(n, traj) if n is not None else None,
        blowup=blowup_check(n, traj) if n is not None else None,
    )
    logger.info(
        "Classified trajectory: c=%.3g spread=%.3g direction=%s",
        trace.mean,
        trace.spread,
        direction,
    )
    return report
