"""
Jacobi module for the linearization about a ray solution v_eps L.

Writing a Jacobi field as phi = a L + b Lbar on the mode with spherical
eigenvalue lambda_j decouples it into two Hill equations
psi'' + q(t) psi = 0, a tangential one for a and a normal one for b. Their
monodromy classifies growth; for j = 0 four solutions are known
explicitly.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core_model import fowler_acceleration, norm_power
from .errors import ConvergenceError, ValidationError
from .fowler_factory import cylinder_necksize, profile_from_necksize
from .integrator import (
    IntegratorConfig,
    Monodromy,
    Trajectory,
    central_derivative,
    integrate,
    monodromy,
)
from .models import Dimension, Direction, FowlerProfile

logger = logging.getLogger(__name__)

UNIT_BAND = 1e-4
PARABOLIC_BAND = 1e-6
DEFECT_THRESHOLD = 1e-6
RESIDUAL_BAND = 1e-6
FAMILY_TOL = 1e-3
FAMILY_HALVINGS = 4
FD_STEP = 5e-3
PERIODIC_RATIO = 1.5
# per observed period, for fields growing at most linearly
LINEAR_RATIO = 3.0


class Component(str, Enum):
    """Projection of a Jacobi field onto L or onto Lbar."""

    TANGENTIAL = "tangential"
    NORMAL = "normal"


class GrowthClass(str, Enum):
    """Growth of a Floquet solution over many periods."""

    PERIODIC = "periodic"
    LINEAR = "linear"
    EXP_GROWING = "exp_growing"
    EXP_DECAYING = "exp_decaying"


class FieldKind(str, Enum):
    """Origin of a Jacobi field."""

    PHI1 = "phi1"
    PHI2 = "phi2"
    PHI3 = "phi3"
    PHI4 = "phi4"
    MODE_SOLUTION = "mode_solution"


@dataclass(frozen=True)
class ModeIndex:
    """
    Spherical-harmonic mode.

    Attributes:
        j: Degree
        lambda_k: Eigenvalue j (j + n - 2) of the sphere Laplacian
        multiplicity: Dimension of the degree-j harmonics on S^{n-1}
    """

    j: int
    lambda_k: float
    multiplicity: int


@dataclass(frozen=True)
class ModeOperators:
    """Tangential and normal Hill coefficients of one mode, functions of t."""

    q_tan: object
    q_nor: object

    def coefficient(self, component: Component):
        """Return q for the given component."""
        if component is Component.TANGENTIAL:
            return self.q_tan
        return self.q_nor


@dataclass(frozen=True, eq=False)
class JacobiField:
    """
    Solution of a decoupled mode equation.

    Attributes:
        kind: Which field this is
        mode: Spherical mode
        component: Tangential (along L) or normal (along Lbar)
        direction: Ray direction L
        samples: Trajectory of (psi, psi')
        growth_class: Observed growth over the sampled periods
        residual: Relative residual of psi'' + q psi = 0
    """

    kind: FieldKind
    mode: ModeIndex
    component: Component
    direction: Direction
    samples: Trajectory
    growth_class: GrowthClass
    residual: float

    def vector(self, t: float | np.ndarray) -> np.ndarray:
        """Return phi(t) = psi(t) times the basis vector, shape (2, ...)."""
        basis = (
            self.direction.lam
            if self.component is Component.TANGENTIAL
            else self.direction.lam_bar
        )
        return np.multiply.outer(basis, self.samples(t)[0])


@dataclass(frozen=True)
class MonodromyReport:
    """
    Floquet data of one mode component.

    Attributes:
        mode: Spherical mode
        component: Tangential or normal
        monodromy: One-period monodromy
        classification: Growth class of the two Floquet solutions
    """

    mode: ModeIndex
    component: Component
    monodromy: Monodromy
    classification: tuple[GrowthClass, GrowthClass]

    def as_dict(self) -> dict:
        """Return the JSON entry of this block in the monodromy table."""
        return {
            "j": self.mode.j,
            "lambda": self.mode.lambda_k,
            "component": self.component.value,
            "trace": self.monodromy.trace,
            "det": self.monodromy.determinant,
            "multipliers": [
                [mu.real, mu.imag] for mu in self.monodromy.multipliers
            ],
            "class": [c.value for c in self.classification],
        }


def eigenvalue_table(n: Dimension, jmax: int) -> list[ModeIndex]:
    """
    List the sphere modes of degree 0 to ``jmax``.

    Raises:
        ValidationError: If jmax is negative
    """
    if jmax < 0:
        raise ValidationError(f"jmax must be >= 0, got {jmax}", code="MODE")
    return [
        ModeIndex(
            j,
            float(j * (j + n.n - 2)),
            math.comb(j + n.n - 1, n.n - 1) - math.comb(j + n.n - 3, n.n - 1),
        )
        for j in range(jmax + 1)
    ]


def mode_operators(profile: FowlerProfile, mode: ModeIndex) -> ModeOperators:
    """
    Return the tangential and normal Hill coefficients of a mode.

    q_tan = n (n + 2) / 4 v^{4/(n-2)} - delta^2 - lambda and
    q_nor = n (n - 2) / 4 v^{4/(n-2)} - delta^2 - lambda; both accept
    scalar or array times.
    """
    n = profile.dim
    shift = -n.delta_sq - mode.lambda_k

    def density(t):
        return np.abs(profile.state(t)[0]) ** n.power

    def q_tan(t):
        return n.n * (n.n + 2) / 4 * density(t) + shift

    def q_nor(t):
        return n.coupling * density(t) + shift

    return ModeOperators(q_tan, q_nor)


def full_linearization(
    n: Dimension,
    v0: np.ndarray,
    phi: np.ndarray,
    phi_dd: np.ndarray,
    lambda_k: float,
) -> np.ndarray:
    """
    Apply the coupled linearization about V0 to phi on one mode.

    L phi = phi'' - (delta^2 + lambda) phi
            + N (p |V0|^{p-2} <V0, phi> V0 + |V0|^p phi)

    with N = n (n - 2) / 4 and p = 4 / (n - 2).
    """
    v0 = np.asarray(v0, dtype=float)
    phi = np.asarray(phi, dtype=float)
    v_sq = np.sum(v0 * v0, axis=0)
    weight = norm_power(n, v0)
    projection = np.sum(v0 * phi, axis=0)
    return (
        phi_dd
        - (n.delta_sq + lambda_k) * phi
        + n.coupling
        * (n.power * weight / v_sq * projection * v0 + weight * phi)
    )


def ray_linearization(
    n: Dimension,
    v: np.ndarray,
    direction: Direction,
    phi: np.ndarray,
    phi_dd: np.ndarray,
    lambda_k: float,
) -> np.ndarray:
    """Linearization about V0 = v L with the coupling term n L <L, phi>."""
    lam = direction.lam.reshape((2,) + (1,) * np.ndim(v))
    density = np.abs(v) ** n.power
    projection = np.sum(lam * phi, axis=0)
    return (
        phi_dd
        - (n.delta_sq + lambda_k) * phi
        + n.n * lam * projection * density
        + n.coupling * density * phi
    )


def decoupled_linearization(
    n: Dimension,
    v: np.ndarray,
    direction: Direction,
    phi: np.ndarray,
    phi_dd: np.ndarray,
    lambda_k: float,
) -> np.ndarray:
    """Evaluate the ray linearization through the split phi = a L + b Lbar."""
    shape = (2,) + (1,) * np.ndim(v)
    lam = direction.lam.reshape(shape)
    lam_bar = direction.lam_bar.reshape(shape)
    density = np.abs(v) ** n.power
    shift = -n.delta_sq - lambda_k
    q_tan = n.n * (n.n + 2) / 4 * density + shift
    q_nor = n.coupling * density + shift
    a, b = np.sum(lam * phi, axis=0), np.sum(lam_bar * phi, axis=0)
    a_dd, b_dd = np.sum(lam * phi_dd, axis=0), np.sum(lam_bar * phi_dd, axis=0)
    return (a_dd + q_tan * a) * lam + (b_dd + q_nor * b) * lam_bar


def classify_monodromy(mono: Monodromy) -> tuple[GrowthClass, GrowthClass]:
    """
    Classify the Floquet solutions from a monodromy matrix.

    A trace within PARABOLIC_BAND of +-2 gives a double multiplier +-1,
    linear growth if the matrix is defective. Otherwise multipliers on the
    unit circle give bounded solutions and a real pair gives an
    exponential dichotomy.
    """
    trace = mono.trace
    if abs(abs(trace) - 2.0) <= PARABOLIC_BAND:
        sign = math.copysign(1.0, trace)
        defect = float(np.linalg.norm(mono.matrix - sign * np.eye(2)))
        if defect > DEFECT_THRESHOLD:
            return GrowthClass.PERIODIC, GrowthClass.LINEAR
        return GrowthClass.PERIODIC, GrowthClass.PERIODIC
    moduli = np.abs(np.array(mono.multipliers))
    if np.all(np.abs(moduli - 1.0) <= UNIT_BAND):
        return GrowthClass.PERIODIC, GrowthClass.PERIODIC
    return GrowthClass.EXP_GROWING, GrowthClass.EXP_DECAYING


def floquet_classify(
    profile: FowlerProfile,
    mode: ModeIndex,
    cfg: IntegratorConfig | None = None,
) -> tuple[MonodromyReport, MonodromyReport]:
    """
    Compute the tangential and normal monodromy reports of a mode.

    Raises:
        IntegrationError: If a mode equation cannot be integrated
    """
    operators = mode_operators(profile, mode)
    reports = []
    for component in (Component.TANGENTIAL, Component.NORMAL):
        mono = monodromy(
            operators.coefficient(component), profile.period, cfg
        )
        reports.append(
            MonodromyReport(mode, component, mono, classify_monodromy(mono))
        )
        logger.debug(
            "Mode j=%d %s: trace=%.12g multipliers=%s",
            mode.j,
            component.value,
            mono.trace,
            mono.multipliers,
        )
    return reports[0], reports[1]


def observed_growth(samples: Trajectory, period: float) -> GrowthClass:
    """
    Classify growth by comparing sup |psi| over the last and first period.

    Raises:
        ValidationError: If the samples cover less than two periods
    """
    lo, hi = samples.span
    periods = (hi - lo) / period
    if periods < 2.0:
        raise ValidationError("Growth needs at least two periods of samples")
    first = np.linspace(lo, lo + period, 1001)
    last = np.linspace(hi - period, hi, 1001)
    head = float(np.max(np.abs(samples(first)[0])))
    tail = float(np.max(np.abs(samples(last)[0])))
    ratio = tail / head
    if ratio < 1.0 / PERIODIC_RATIO:
        return GrowthClass.EXP_DECAYING
    if ratio <= PERIODIC_RATIO:
        return GrowthClass.PERIODIC
    if ratio <= LINEAR_RATIO * periods:
        return GrowthClass.LINEAR
    return GrowthClass.EXP_GROWING


def field_residual(field: JacobiField, profile: FowlerProfile) -> float:
    """
    Relative residual of psi'' + q psi = 0 along a field.

    psi'' is a fourth-order central difference of the psi' channel; the
    residual is normalized by max(1, sup |psi|).
    """
    q = mode_operators(profile, field.mode).coefficient(field.component)
    return _hill_residual(field.samples, q)


def _hill_residual(samples: Trajectory, q) -> float:
    lo, hi = samples.span
    times = np.linspace(lo + 2 * FD_STEP, hi - 2 * FD_STEP, 4001)
    psi = samples(times)[0]
    psi_dd = central_derivative(samples, times, 1, FD_STEP)
    scale = max(1.0, float(np.max(np.abs(psi))))
    return float(np.max(np.abs(psi_dd + q(times) * psi))) / scale


def _family_derivative(
    profile: FowlerProfile,
    step: float,
    times: np.ndarray,
    cfg: IntegratorConfig | None,
) -> tuple[np.ndarray, FowlerProfile, FowlerProfile]:
    n, eps = profile.dim, profile.eps
    if not (0.0 < eps - step and eps + step < cylinder_necksize(n)):
        raise ValidationError(
            f"family_step={step} leaves the necksize interval", code="EPS_RANGE"
        )
    upper = profile_from_necksize(n, eps + step, cfg)
    lower = profile_from_necksize(n, eps - step, cfg)
    return (upper.state(times) - lower.state(times)) / (2 * step), upper, lower


def family_difference(
    profile: FowlerProfile,
    step: float,
    times: np.ndarray,
    cfg: IntegratorConfig | None = None,
) -> np.ndarray:
    """Return the centered difference of (v, w) in eps at ``times``."""
    return _family_derivative(profile, step, times, cfg)[0]


def _field(
    kind: FieldKind,
    component: Component,
    samples: Trajectory,
    profile: FowlerProfile,
    direction: Direction,
    mode: ModeIndex,
) -> JacobiField:
    growth = observed_growth(samples, profile.period)
    q = mode_operators(profile, mode).coefficient(component)
    residual = _hill_residual(samples, q)
    if residual > RESIDUAL_BAND:
        logger.warning(
            "Jacobi field %s residual %.3g exceeds %.0e",
            kind.value,
            residual,
            RESIDUAL_BAND,
        )
    return JacobiField(
        kind, mode, component, direction, samples, growth, residual
    )


def explicit_fields(
    profile: FowlerProfile,
    family_step: float = 1e-3,
    direction: Direction | None = None,
    periods: int = 10,
    cfg: IntegratorConfig | None = None,
) -> tuple[JacobiField, JacobiField, JacobiField, JacobiField]:
    """
    Build the four explicit Jacobi fields of the j = 0 mode.

    phi1 = v' L from translations, phi2 = dv/deps L from the family (the
    Richardson combination of the accepted step and its half),
    phi3 = v Lbar from rotations of L and phi4 = v int_0^t v^{-2} Lbar, the
    second normal solution by reduction of order.

    Args:
        profile: Fowler profile
        family_step: Step of the centered difference in eps
        direction: Ray direction, default (1, 1) / sqrt 2
        periods: Number of periods sampled
        cfg: Integrator tolerances

    Returns:
        The fields (phi1, phi2, phi3, phi4)

    Raises:
        ValidationError: If eps +- family_step leaves the necksize interval
        ConvergenceError: If neither family_step nor any of its first
            FAMILY_HALVINGS halvings agrees with its own half to FAMILY_TOL
            relative over one period
    """
    n = profile.dim
    direction = direction or Direction.of(1.0, 1.0)
    mode = eigenvalue_table(n, 0)[0]
    span = (0.0, periods * profile.period)
    base = profile.as_trajectory(span)

    translation = base.map(
        lambda ts, ys: np.vstack((ys[1], fowler_acceleration(n, ys[0]))), 2
    )

    # the difference drifts in phase with t, so agreement is measured over
    # one period
    check_times = np.linspace(0.0, profile.period, 2001)
    step = family_step
    coarse, upper, lower = _family_derivative(profile, step, check_times, cfg)
    for _ in range(FAMILY_HALVINGS):
        fine, half_upper, half_lower = _family_derivative(
            profile, step / 2, check_times, cfg
        )
        change = float(np.max(np.abs(coarse - fine)) / np.max(np.abs(fine)))
        if change <= FAMILY_TOL:
            break
        logger.debug("Family step %.3g changed phi2 by %.3g", step, change)
        step, coarse, upper, lower = step / 2, fine, half_upper, half_lower
    else:
        raise ConvergenceError(
            f"Family difference changed by {change:.3g} after "
            f"{FAMILY_HALVINGS} halvings of the step"
        )

    def family(times: np.ndarray) -> np.ndarray:
        wide = (upper.state(times) - lower.state(times)) / (2 * step)
        narrow = (half_upper.state(times) - half_lower.state(times)) / step
        return (4.0 * narrow - wide) / 3.0

    variation = Trajectory(span, base.nodes, family, 2, base.order)

    eps = profile.eps
    augmented = integrate(
        lambda t, y: np.array(
            [y[1], fowler_acceleration(n, y[0]), y[0] ** -2]
        ),
        [eps, 0.0, 0.0],
        span,
        cfg,
    )
    reduction = augmented.map(
        lambda ts, ys: np.vstack((ys[0] * ys[2], ys[1] * ys[2] + 1 / ys[0])),
        2,
    )

    tangential, normal = Component.TANGENTIAL, Component.NORMAL
    fields = (
        _field(FieldKind.PHI1, tangential, translation, profile, direction, mode),
        _field(FieldKind.PHI2, tangential, variation, profile, direction, mode),
        _field(FieldKind.PHI3, normal, base, profile, direction, mode),
        _field(FieldKind.PHI4, normal, reduction, profile, direction, mode),
    )
    logger.info(
        "Explicit Jacobi fields for eps=%.6g: %s",
        eps,
        ", ".join(f"{f.kind.value}={f.growth_class.value}" for f in fields),
    )
    return fields


def mode_fields(
    profile: FowlerProfile,
    mode: ModeIndex,
    component: Component,
    direction: Direction | None = None,
    periods: int = 3,
    cfg: IntegratorConfig | None = None,
) -> tuple[JacobiField, JacobiField]:
    """
    Integrate the two canonical solutions of one mode equation.

    The solutions start from (psi, psi') = (1, 0) and (0, 1) at t = 0.
    """
    direction = direction or Direction.of(1.0, 1.0)
    q = mode_operators(profile, mode).coefficient(component)
    span = (0.0, periods * profile.period)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return np.array([y[1], -q(t) * y[0]])

    solutions = []
    for start in ([1.0, 0.0], [0.0, 1.0]):
        samples = integrate(rhs, start, span, cfg)
        solutions.append(
            _field(
                FieldKind.MODE_SOLUTION,
                component,
                samples,
                profile,
                direction,
                mode,
            )
        )
    return solutions[0], solutions[1]


def independence_determinant(
    fields: tuple[JacobiField, JacobiField, JacobiField, JacobiField],
) -> float:
    """
    Determinant of the normalized initial data of the four j = 0 fields.

    The tangential pair fills the upper-left 2x2 block and the normal pair
    the lower-right one; each column is scaled to unit length.
    """
    matrix = np.zeros((4, 4))
    for column, field in enumerate(fields):
        data = field.samples(field.samples.span[0])
        rows = slice(0, 2) if field.component is Component.TANGENTIAL else slice(2, 4)
        matrix[rows, column] = data / np.hypot(*data)
    return float(np.linalg.det(matrix))


def linear_growth_constant(field: JacobiField) -> float:
    """Return sup |psi(t)| / (1 + t) over the sampled span."""
    lo, hi = field.samples.span
    times = np.linspace(lo, hi, 4001)
    return float(np.max(np.abs(field.samples(times)[0]) / (1.0 + times)))
