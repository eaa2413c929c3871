"""
Experiments module for running scenarios and shaping their artifacts.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np

from .classifier import classify, positivity_exit_time
from .core_model import limit_field, scalar_hamiltonian
from .errors import LabError, ValidationError
from .fowler_factory import (
    fowler_field,
    limit_period,
    period_by_quadrature,
    phase_point_state,
    profile_from_necksize,
)
from .integrator import IntegratorConfig, integrate
from .jacobi import eigenvalue_table, floquet_classify
from .models import Dimension, Direction
from .perturbed import (
    asymptotic_fit,
    removability_classify,
    run_limit,
    run_perturbed,
)
from .pohozaev import invariant_closed_form, p_invariant, pohozaev_series
from .scenario import DEFAULT_DIRECTION, Scenario
from .writers import Table, series_rows

logger = logging.getLogger(__name__)

PROFILE_SAMPLES_PER_STEP = 4


@dataclass(frozen=True)
class ExperimentResult:
    """
    Artifacts of one experiment.

    Attributes:
        table: Tabular series, written as CSV or as JSON columns and rows
        document: JSON document for the json format
        summary: Side document written next to a CSV table
    """

    table: Table | None = None
    document: Any = None
    summary: dict[str, Any] | None = None


class Experiment(ABC):
    """
    Abstract base class for experiments.

    Attributes:
        json_only: True if the experiment has no CSV form
    """

    json_only: ClassVar[bool] = False

    @abstractmethod
    def run(self, scenario: Scenario, cfg: IntegratorConfig) -> ExperimentResult:
        """
        Run the experiment.

        Args:
            scenario: Validated scenario
            cfg: Integrator tolerances

        Returns:
            Experiment artifacts
        """


class ProfileExperiment(Experiment):
    """Fowler profile over several periods with its energy drift."""

    def run(self, scenario: Scenario, cfg: IntegratorConfig) -> ExperimentResult:
        dim, params = scenario.dim, scenario.params
        profile = profile_from_necksize(dim, params["eps"], cfg)
        span = (0.0, params["periods"] * profile.period)
        traj = integrate(fowler_field(dim), [profile.eps, 0.0], span, cfg)
        times = traj.grid(PROFILE_SAMPLES_PER_STEP)
        v, w = traj(times)
        energy = scalar_hamiltonian(dim, v, w)
        drift = float(np.max(np.abs(energy - profile.energy)))
        table = Table(("t", "v", "w", "H_scalar"), series_rows(times, v, w, energy))
        document = {
            "n": dim.n,
            "eps": profile.eps,
            "period": profile.period,
            "period_quadrature": period_by_quadrature(dim, profile.eps),
            "energy": profile.energy,
            "energy_drift": drift,
            **table.as_dict(),
        }
        logger.info("Profile energy drift %.3g over %s", drift, span)
        return ExperimentResult(table=table, document=document)


class FloquetExperiment(Experiment):
    """Monodromy reports of every mode up to jmax."""

    json_only = True

    def run(self, scenario: Scenario, cfg: IntegratorConfig) -> ExperimentResult:
        dim, params = scenario.dim, scenario.params
        profile = profile_from_necksize(dim, params["eps"], cfg)
        reports = []
        for mode in eigenvalue_table(dim, params["jmax"]):
            for report in floquet_classify(profile, mode, cfg):
                reports.append(report.as_dict())
        return ExperimentResult(document=reports)


class PohozaevExperiment(Experiment):
    """Pohozaev integral along a limit-system run."""

    def run(self, scenario: Scenario, cfg: IntegratorConfig) -> ExperimentResult:
        dim, params = scenario.dim, scenario.params
        run = run_limit(dim, params["ic"], params["t_end"], cfg)
        times, values = pohozaev_series(run)
        table = Table(("r", "P"), series_rows(np.exp(-times), values))
        report = p_invariant(run)
        eps = params["eps"]
        document = {
            "n": dim.n,
            "eps": eps,
            "limit_estimate": report.limit_estimate,
            "cauchy_spread": report.cauchy_spread,
            "sign_class": report.sign_class.value,
            "closed_form": (
                0.0 if eps is None else invariant_closed_form(dim, eps)
            ),
            "removability": removability_classify(run).value,
            **table.as_dict(),
        }
        return ExperimentResult(table=table, document=document)


class ClassifyExperiment(Experiment):
    """Ray classification of a limit-system trajectory."""

    json_only = True

    def run(self, scenario: Scenario, cfg: IntegratorConfig) -> ExperimentResult:
        dim, params = scenario.dim, scenario.params
        ic = params["ic"]
        traj = integrate(
            limit_field(dim),
            ic.as_vector(),
            (ic.t, params["t_end"]),
            cfg,
            monitor=lambda y: math.hypot(y[0], y[1]),
        )
        document = {
            **classify(traj, dim).as_dict(),
            "positivity_exit_time": positivity_exit_time(traj),
            "span": list(traj.span),
            "truncated": traj.truncated,
        }
        return ExperimentResult(document=document)


class PerturbedExperiment(Experiment):
    """Perturbed run, its series and the asymptotic fit summary."""

    def run(self, scenario: Scenario, cfg: IntegratorConfig) -> ExperimentResult:
        dim, params = scenario.dim, scenario.params
        run = run_perturbed(
            dim, params["ic"], params["potential"], params["t_end"], cfg
        )
        diagnostics = run.diagnostics
        table = Table(
            ("t", "v1", "v2", "w1", "w2", "Psi", "w_avg"),
            series_rows(
                diagnostics.times,
                *diagnostics.v,
                *diagnostics.w,
                diagnostics.psi,
                diagnostics.w_avg,
            ),
        )
        summary: dict[str, Any] = {}
        if params["fit"]:
            try:
                fit = asymptotic_fit(
                    run, params["window_count"], params["window_length"], cfg
                )
                summary.update(fit.as_dict())
                summary["model_invariant"] = invariant_closed_form(
                    dim, fit.eps_star
                )
            except LabError as e:
                logger.warning("Asymptotic fit failed: %s", e)
                summary["fit_error"] = e.as_dict()
        summary["removability"] = removability_classify(run).value
        summary["truncated"] = run.truncated
        summary["sup_norm"] = diagnostics.sup_norm
        summary["tail_inf_norm"] = diagnostics.tail_inf_norm
        document = {"fit": summary, **table.as_dict()}
        return ExperimentResult(table=table, document=document, summary=summary)


class ExperimentFactory:
    """
    Factory class for creating experiments.
    """

    _experiments: dict[str, type[Experiment]] = {}

    @classmethod
    def register(cls, kind: str, experiment_class: type[Experiment]) -> None:
        """
        Register an experiment class.

        Args:
            kind: Scenario kind (e.g., 'profile')
            experiment_class: Experiment class
        """
        cls._experiments[kind] = experiment_class

    @classmethod
    def create(cls, kind: str) -> Experiment:
        """
        Create an experiment of the specified kind.

        Raises:
            ValidationError: If the kind is not supported
        """
        experiment_class = cls._experiments.get(kind)
        if not experiment_class:
            supported = ", ".join(cls._experiments.keys())
            raise ValidationError(
                f"Unsupported experiment kind: {kind}. "
                f"Supported kinds: {supported or 'none'}",
                code="SCHEMA",
            )
        return experiment_class()

    @classmethod
    def kinds(cls) -> list[str]:
        """Return the registered kinds in registration order."""
        return list(cls._experiments)


ExperimentFactory.register("profile", ProfileExperiment)
ExperimentFactory.register("floquet", FloquetExperiment)
ExperimentFactory.register("pohozaev", PohozaevExperiment)
ExperimentFactory.register("classify", ClassifyExperiment)
ExperimentFactory.register("perturbed", PerturbedExperiment)


SWEEP_COLUMNS = {
    "pohozaev": ("eps", "P_invariant", "P_closed_form", "sign_class", "status"),
    "period": ("eps", "period", "period_quadrature", "period_ratio", "status"),
}


@dataclass(frozen=True)
class SweepTask:
    """One grid point of a sweep; picklable for worker processes."""

    quantity: str
    n: int
    eps: float
    t_end: float
    rel_tol: float
    abs_tol: float


def evaluate_sweep_point(task: SweepTask) -> tuple[Any, ...]:
    """
    Evaluate one sweep row.

    Failures are recorded in the status column instead of raised.
    """
    dim = Dimension(task.n)
    cfg = IntegratorConfig(rel_tol=task.rel_tol, abs_tol=task.abs_tol)
    width = len(SWEEP_COLUMNS[task.quantity]) - 2
    try:
        if task.quantity == "pohozaev":
            ic = phase_point_state(task.eps, Direction.of(*DEFAULT_DIRECTION))
            report = p_invariant(run_limit(dim, ic, task.t_end, cfg))
            values = (
                report.limit_estimate,
                invariant_closed_form(dim, task.eps),
                report.sign_class.value,
            )
        else:
            profile = profile_from_necksize(dim, task.eps, cfg)
            values = (
                profile.period,
                period_by_quadrature(dim, task.eps),
                profile.period / limit_period(dim),
            )
    except LabError as e:
        logger.warning("Sweep point eps=%.6g failed: %s", task.eps, e)
        return (task.eps, *([None] * width), f"error:{e.code}")
    return (task.eps, *values, "ok")
