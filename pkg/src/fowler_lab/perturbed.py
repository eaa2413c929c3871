"""
Perturbed module for the radial system with a potential.

In cylindrical time the potential enters as B(t) = exp(-2t) A(exp(-t)), so
solutions approach the limit system and, for nonremovable singularities,
a ray solution v_eps(t + T) L. The fit below measures that approach.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core_model import energy_series, limit_acceleration, limit_field
from .errors import ConvergenceError, InsufficientTailError, ValidationError
from .fowler_factory import necksize_from_energy, profile_from_necksize
from .integrator import (
    Crossing,
    IntegratorConfig,
    Trajectory,
    VectorField,
    find_events,
    integrate,
)
from .models import (
    CylState,
    Dimension,
    Direction,
    FowlerProfile,
    PerturbedRun,
    Potential,
    RunDiagnostics,
)
from .pohozaev import SignClass, p_invariant

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-14
SAMPLES_PER_STEP = 4
WINDOW_SAMPLES = 201
EXACT_MODEL_FLOOR = 1e-6
MIN_CLASSIFY_SPAN = 3.0
TAIL_INF_FLOOR = 1e-8
DECAY_SLOPE = 0.1
DRIFT_FLOOR = 1e-6


class Removability(str, Enum):
    """Verdict on the singularity at the origin."""

    REMOVABLE = "removable"
    NONREMOVABLE = "nonremovable"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class Violation:
    """One failed hypothesis, with the error code it raises under."""

    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    """
    Outcome of the hypothesis checks on a potential.

    Attributes:
        violations: Every violated hypothesis, in check order
    """

    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        """Return True if the potential satisfies every hypothesis."""
        return not self.violations

    def raise_for_violations(self) -> None:
        """
        Raise the first violation.

        Raises:
            ValidationError: With the violation code, if any
        """
        if self.violations:
            first = self.violations[0]
            raise ValidationError(first.message, code=first.code)


@dataclass(frozen=True)
class WindowError:
    """
    Model fitted to one window and its sup error there.

    Attributes:
        tau: Start of the window
        error: Sup of |V - v_eps(t + T) L| over the window
        eps: Necksize of the window model
        t_star: Phase shift of the window model
        lambda_star: Direction of the window model
    """

    tau: float
    error: float
    eps: float
    t_star: float
    lambda_star: Direction


@dataclass(frozen=True, eq=False)
class AsymptoticFit:
    """
    Fowler-type model fitted window by window along a run.

    The reported model is the one of the last window.

    Attributes:
        eps_star: Necksize of the model
        t_star: Phase shift T with model V = v_eps(t + T) L
        lambda_star: Direction L of the model
        alpha: Fitted decay exponent, None when the model is exact
        windows: Model and sup error of each window
        burn_in: Index of the first window used for the rate
        decreasing_windows: Windows after the burn-in whose error is
            below that of the previous window
        exact_model: True if every window error is below the floor
        profile: The model profile v_eps
    """

    eps_star: float
    t_star: float
    lambda_star: Direction
    alpha: float | None
    windows: tuple[WindowError, ...]
    burn_in: int
    decreasing_windows: int
    exact_model: bool
    profile: FowlerProfile

    def as_dict(self) -> dict:
        """Return the fit summary of a perturbed run."""
        return {
            "eps_star": self.eps_star,
            "T_star": self.t_star,
            "lambda_star": self.lambda_star.as_list(),
            "alpha": self.alpha,
            "exact_model": self.exact_model,
            "burn_in": self.burn_in,
            "decreasing_windows": self.decreasing_windows,
            "windows": [{"tau": w.tau, "err": w.error} for w in self.windows],
        }


@dataclass(frozen=True)
class DriftEstimate:
    """
    Observed and a-priori constants of the energy drift.

    Attributes:
        constant: Smallest C with |Psi(t2) - Psi(t1)| <= C exp(-2 t1)
            on the sampled tail
        bound: ||A|| sup|V| sup|W| / 2
    """

    constant: float
    bound: float


def validate_potential(n: Dimension, potential: Potential) -> ValidationReport:
    """
    Check symmetry, cooperativity (H1) and, for n = 5, A(0) = f(0) Id (H2).

    Returns:
        ValidationReport listing every violation
    """
    c, d = potential.c, potential.d
    violations = []
    if (
        abs(c[0, 1] - c[1, 0]) > SYMMETRY_TOL
        or abs(d[0, 1] - d[1, 0]) > SYMMETRY_TOL
    ):
        violations.append(
            Violation("SYMMETRY_VIOLATION", "A12 must equal A21")
        )
    off_diagonal = max(c[0, 1], c[1, 0], c[0, 1] + d[0, 1], c[1, 0] + d[1, 0])
    if off_diagonal > 0.0:
        violations.append(
            Violation(
                "H1_VIOLATION",
                f"-A is not cooperative: A12 reaches {off_diagonal:.6g} > 0",
            )
        )
    if n.n == 5 and not (c[0, 0] == c[1, 1] and c[0, 1] == 0 == c[1, 0]):
        violations.append(
            Violation(
                "H2_VIOLATION", "n=5 requires A(0) to be a multiple of Id"
            )
        )
    return ValidationReport(tuple(violations))


def coupling_matrix(potential: Potential, t: float) -> np.ndarray:
    """Return B(t) = exp(-2t) A(exp(-t))."""
    return math.exp(-2.0 * t) * potential.matrix(math.exp(-t))


def perturbed_acceleration(
    n: Dimension, t: float, v: np.ndarray, potential: Potential
) -> np.ndarray:
    """Return V'' of the perturbed system, limit part plus B(t) V."""
    return limit_acceleration(n, v) + coupling_matrix(potential, t) @ v


def perturbed_rhs(
    n: Dimension, t: float, state: CylState, potential: Potential
) -> tuple[np.ndarray, np.ndarray]:
    """
    Right-hand side of the perturbed radial system.

    Returns:
        Tuple (dV/dt, dW/dt)
    """
    return state.w.copy(), perturbed_acceleration(n, t, state.v, potential)


def perturbed_field(n: Dimension, potential: Potential) -> VectorField:
    """Return the perturbed system as a field on (v1, v2, w1, w2)."""

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return np.concatenate(
            (y[2:], perturbed_acceleration(n, t, y[:2], potential))
        )

    return rhs


def diagnose(n: Dimension, traj: Trajectory) -> RunDiagnostics:
    """Sample a run and compute its energy and average diagnostics."""
    times = traj.grid(SAMPLES_PER_STEP)
    states = traj(times)
    v, w = states[:2], states[2:]
    norms = np.hypot(v[0], v[1])
    lo, hi = traj.span
    tail = times >= lo + 2 * (hi - lo) / 3
    return RunDiagnostics(
        times=times,
        v=v,
        w=w,
        psi=energy_series(n, v, w),
        w_avg=v.sum(axis=0),
        sup_norm=float(norms.max()),
        inf_norm=float(norms.min()),
        tail_inf_norm=float(norms[tail].min()),
    )


def run_perturbed(
    n: Dimension,
    ic: CylState,
    potential: Potential,
    t_end: float,
    cfg: IntegratorConfig | None = None,
) -> PerturbedRun:
    """
    Integrate the perturbed system from ``ic`` up to ``t_end``.

    Args:
        n: Dimension, 3 <= n <= 5
        ic: Admissible initial state
        potential: Potential satisfying the hypotheses
        t_end: Final cylindrical time
        cfg: Integrator tolerances

    Returns:
        PerturbedRun, flagged truncated if |V| reached the blow-up limit

    Raises:
        ValidationError: On a hypothesis violation, inadmissible initial
            state or empty time range
    """
    n.require_perturbed_range()
    validate_potential(n, potential).raise_for_violations()
    if not ic.is_admissible():
        raise ValidationError(
            "Initial state must have nonnegative components",
            code="IC_INADMISSIBLE",
        )
    return _run(n, ic, potential, perturbed_field(n, potential), t_end, cfg)


def run_limit(
    n: Dimension,
    ic: CylState,
    t_end: float,
    cfg: IntegratorConfig | None = None,
) -> PerturbedRun:
    """
    Integrate the limit system from ``ic`` up to ``t_end``.

    Unlike run_perturbed this accepts any dimension n >= 3; the run carries
    the zero potential.
    """
    potential = Potential.zero()
    return _run(n, ic, potential, limit_field(n), t_end, cfg)


def _run(
    n: Dimension,
    ic: CylState,
    potential: Potential,
    rhs: VectorField,
    t_end: float,
    cfg: IntegratorConfig | None,
) -> PerturbedRun:
    if not t_end > ic.t:
        raise ValidationError(
            f"t_end={t_end} must exceed the initial time {ic.t}", code="SPAN"
        )
    traj = integrate(
        rhs,
        ic.as_vector(),
        (ic.t, t_end),
        cfg,
        monitor=lambda y: math.hypot(y[0], y[1]),
    )
    run = PerturbedRun(n, traj, potential, diagnose(n, traj))
    logger.info(
        "Radial run n=%d to t=%.6g: sup|V|=%.6g tail inf|V|=%.6g%s",
        n.n,
        traj.span[1],
        run.diagnostics.sup_norm,
        run.diagnostics.tail_inf_norm,
        " (truncated)" if traj.truncated else "",
    )
    return run


def _fit_window(
    run: PerturbedRun,
    tau: float,
    window_length: float,
    cfg: IntegratorConfig | None,
) -> tuple[FowlerProfile, Direction, float]:
    n = run.dim
    traj = run.trajectory
    lo, hi = traj.span
    diagnostics = run.diagnostics

    # necksize from the energy averaged over the rest of the run
    ahead = diagnostics.times >= tau
    mean_energy = float(diagnostics.psi[ahead].mean())
    profile = profile_from_necksize(
        n, necksize_from_energy(n, 2.0 * mean_energy), cfg
    )
    period = profile.period

    # direction and phase from one model period around the window
    reach = window_length + period
    start = max(lo, min(tau + (window_length - reach) / 2, hi - reach))
    local = traj.restrict(start, min(start + reach, hi))
    v = local(local.grid(SAMPLES_PER_STEP))[:2]
    mean = (v / np.hypot(v[0], v[1])).mean(axis=1)
    lam = Direction.of(*np.clip(mean, 0.0, None))

    along = local.map(
        lambda ts, ys: np.vstack((lam.lam @ ys[:2], lam.lam @ ys[2:])), 2
    )
    minima = find_events(along, lambda y: y[1], Crossing.RISING)
    if not minima:
        raise ConvergenceError(
            f"No minimum of the solution near the window at {tau:.6g}"
        )
    phases = 2 * math.pi * np.mod(-np.asarray(minima), period) / period
    angle = float(np.angle(np.mean(np.exp(1j * phases))))
    t_star = float(np.mod(angle * period / (2 * math.pi), period))
    return profile, lam, t_star


def asymptotic_fit(
    run: PerturbedRun,
    window_count: int = 18,
    window_length: float = 0.75,
    cfg: IntegratorConfig | None = None,
) -> AsymptoticFit:
    """
    Fit a Fowler-type model to a run and measure the rate of approach.

    Windows [tau, tau + L] tile the run from its start. Each window gets
    its own model (eps, T, L): eps from the energy averaged from tau to
    the end of the run, L from the mean of V / |V| and T from the circular
    mean of the phases of the minima, both over one model period centred
    on the window. The window error is the sup of |V(t) - v_eps(t + T) L|
    over the window. The decay exponent is the least-squares slope of log
    error over the windows after the burn-in (first third) whose error is
    below that of the window before.

    Args:
        run: Perturbed run
        window_count: Number of windows
        window_length: Length of each window
        cfg: Tolerances for the model profiles

    Returns:
        AsymptoticFit reporting the model of the last window

    Raises:
        ValidationError: On bad window parameters or an energy outside the
            Fowler interval
        ConvergenceError: If the window errors do not decrease
    """
    if window_count < 3 or not window_length > 0:
        raise ValidationError(
            "Need at least 3 windows of positive length", code="WINDOWS"
        )
    lo, hi = run.trajectory.span
    if lo + window_count * window_length > hi:
        raise ValidationError(
            f"{window_count} windows of length {window_length} "
            f"exceed the run [{lo:.6g}, {hi:.6g}]",
            code="WINDOWS",
        )

    windows = []
    for k in range(window_count):
        tau = lo + k * window_length
        profile, lam, t_star = _fit_window(run, tau, window_length, cfg)
        times = np.linspace(tau, tau + window_length, WINDOW_SAMPLES)
        model = lam.lam[:, None] * profile.state(times + t_star)[0]
        gap = run.trajectory(times)[:2] - model
        error = float(np.max(np.hypot(*gap)))
        windows.append(WindowError(tau, error, profile.eps, t_star, lam))
        logger.debug(
            "Window %d at %.4g: eps=%.12g T=%.6g err=%.3g",
            k,
            tau,
            profile.eps,
            t_star,
            error,
        )

    burn_in = window_count // 3
    errors = np.array([w.error for w in windows])
    last = windows[-1]
    fit = {
        "eps_star": last.eps,
        "t_star": last.t_star,
        "lambda_star": last.lambda_star,
        "windows": tuple(windows),
        "burn_in": burn_in,
        "profile": profile,
    }
    if errors.max() <= EXACT_MODEL_FLOOR:
        logger.info("Run matches its Fowler model to %.3g", errors.max())
        return AsymptoticFit(
            alpha=None, decreasing_windows=0, exact_model=True, **fit
        )

    after = np.arange(max(burn_in, 1), window_count)
    decreasing = after[errors[after] < errors[after - 1]]
    if decreasing.size < 2:
        raise ConvergenceError(
            "Window errors do not decrease after the burn-in"
        )
    taus = np.array([windows[k].tau for k in decreasing])
    slope, _ = np.polyfit(taus, np.log(errors[decreasing]), 1)
    alpha = float(-slope)
    logger.info(
        "Asymptotic fit: eps*=%.12g T*=%.6g alpha=%.4g over %d windows",
        last.eps,
        last.t_star,
        alpha,
        decreasing.size,
    )
    return AsymptoticFit(
        alpha=alpha,
        decreasing_windows=int(decreasing.size),
        exact_model=False,
        **fit,
    )


def _average_decays(run: PerturbedRun) -> bool:
    diagnostics = run.diagnostics
    times = diagnostics.times
    lo, hi = times[0], times[-1]
    tail = times >= lo + 2 * (hi - lo) / 3
    average = diagnostics.w_avg[tail]
    if np.any(average <= 0.0):
        return False
    slope, _ = np.polyfit(times[tail], np.log(average), 1)
    return bool(slope < -DECAY_SLOPE)


def removability_classify(run: PerturbedRun) -> Removability:
    """
    Decide removability from the Pohozaev sign and the tail behaviour.

    Nonremovable needs a negative invariant with |V| bounded below on the
    tail; removable needs a zero invariant with a decaying average.
    """
    lo, hi = run.trajectory.span
    if run.truncated or hi - lo < MIN_CLASSIFY_SPAN:
        return Removability.UNDECIDED
    try:
        report = p_invariant(run)
    except InsufficientTailError as e:
        logger.info("Removability undecided: %s", e)
        return Removability.UNDECIDED
    if (
        report.sign_class is SignClass.NEGATIVE
        and run.diagnostics.tail_inf_norm > TAIL_INF_FLOOR
    ):
        return Removability.NONREMOVABLE
    if report.sign_class is SignClass.ZERO and _average_decays(run):
        return Removability.REMOVABLE
    return Removability.UNDECIDED


def energy_drift_constant(run: PerturbedRun) -> DriftEstimate:
    """
    Estimate C in |Psi(t2) - Psi(t1)| <= C exp(-2 t1) for t2 > t1.

    Times where exp(-2 t1) falls below DRIFT_FLOOR are skipped, since the
    drift there is at integration-noise level.
    """
    diagnostics = run.diagnostics
    times, psi = diagnostics.times, diagnostics.psi
    suffix_max = np.maximum.accumulate(psi[::-1])[::-1]
    suffix_min = np.minimum.accumulate(psi[::-1])[::-1]
    spread = np.maximum(suffix_max - psi, psi - suffix_min)
    weight = np.exp(2.0 * times)
    usable = np.exp(-2.0 * times) >= DRIFT_FLOOR
    constant = float(np.max(spread[usable] * weight[usable], initial=0.0))
    bound = (
        run.potential.sup_norm()
        * diagnostics.sup_norm
        * float(np.max(np.hypot(diagnostics.w[0], diagnostics.w[1])))
        / 2.0
    )
    return DriftEstimate(constant, bound)
