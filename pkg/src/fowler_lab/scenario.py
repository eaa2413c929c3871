"""
Scenario module for reading and validating experiment descriptions.

A scenario is a JSON object with a required ``"schema": 1`` field, the
experiment ``kind``, the dimension ``n`` and kind-specific parameters.
Every parameter is checked here, before any computation starts.
"""

import json
import math
import os
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .errors import ScenarioFileError, ValidationError
from .fowler_factory import bubble_state, cylinder_necksize, phase_point_state
from .models import CylState, Dimension, Direction, Potential
from .perturbed import validate_potential

SCHEMA_VERSION = 1
EXPERIMENT_KINDS = (
    "profile",
    "floquet",
    "pohozaev",
    "classify",
    "perturbed",
    "sweep",
)
SWEEP_QUANTITIES = ("pohozaev", "period")
OUTPUT_FORMATS = ("csv", "json")
DEFAULT_DIRECTION = (0.6, 0.8)


@dataclass(frozen=True)
class Scenario:
    """
    Validated experiment description.

    Attributes:
        kind: Experiment kind
        dim: Dimension
        params: Normalized kind-specific parameters
        rel_tol: Relative tolerance, None for the default
        abs_tol: Absolute tolerance, None for the default
        out: Output path, None for standard output
        summary_out: Path of the fit summary JSON, if any
        fmt: Output format, None for the experiment's default
    """

    kind: str
    dim: Dimension
    params: dict[str, Any] = field(default_factory=dict)
    rel_tol: float | None = None
    abs_tol: float | None = None
    out: str | None = None
    summary_out: str | None = None
    fmt: str | None = None

    def with_overrides(self, **overrides: Any) -> "Scenario":
        """Return a copy with every non-None override applied."""
        return replace(
            self, **{k: v for k, v in overrides.items() if v is not None}
        )


def parse_scenario_file(file_path: str) -> Scenario:
    """
    Read and validate a scenario file.

    Args:
        file_path: Path to the JSON file

    Returns:
        Scenario

    Raises:
        ScenarioFileError: If the file does not exist or cannot be read
        ValidationError: If the content is not a valid scenario
    """
    if not os.path.exists(file_path):
        raise ScenarioFileError(f"File not found: {file_path}")
    try:
        with open(file_path, encoding="utf-8") as file:
            data = json.load(file)
    except OSError as e:
        raise ScenarioFileError(f"Cannot read {file_path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ValidationError(
            f"Scenario {file_path} is not valid JSON: {e}", code="SCHEMA"
        ) from e
    return parse_scenario(data)


def parse_scenario(data: Any) -> Scenario:
    """
    Validate a decoded scenario object.

    Raises:
        ValidationError: With code SCHEMA for structural problems and the
            code of the violated precondition otherwise
    """
    if not isinstance(data, dict):
        raise ValidationError("Scenario must be a JSON object", code="SCHEMA")
    if data.get("schema") != SCHEMA_VERSION:
        raise ValidationError(
            f"Unsupported scenario schema: {data.get('schema')!r}. "
            f"Supported schema: {SCHEMA_VERSION}",
            code="SCHEMA",
        )
    kind = data.get("kind")
    if kind not in EXPERIMENT_KINDS:
        raise ValidationError(
            f"Unsupported experiment kind: {kind!r}. "
            f"Supported kinds: {', '.join(EXPERIMENT_KINDS)}",
            code="SCHEMA",
        )
    if "n" not in data:
        raise ValidationError("Scenario must give the dimension n", code="SCHEMA")
    dim = Dimension(_integer(data["n"], "n"))
    tolerances = data.get("tolerances", {})
    outputs = data.get("output", {})
    fmt = outputs.get("format")
    if fmt is not None and fmt not in OUTPUT_FORMATS:
        raise ValidationError(f"Unknown output format {fmt!r}", code="SCHEMA")
    return Scenario(
        kind=kind,
        dim=dim,
        params=validate_params(kind, dim, data.get("params", {})),
        rel_tol=_optional_number(tolerances.get("rel_tol"), "rel_tol"),
        abs_tol=_optional_number(tolerances.get("abs_tol"), "abs_tol"),
        out=outputs.get("path"),
        summary_out=outputs.get("summary"),
        fmt=fmt,
    )


def validate_params(
    kind: str, dim: Dimension, params: dict[str, Any]
) -> dict[str, Any]:
    """
    Normalize and check the parameters of one experiment kind.

    Returns:
        Parameters with defaults filled in and typed values

    Raises:
        ValidationError: If a parameter is missing or out of range
    """
    if not isinstance(params, dict):
        raise ValidationError("params must be an object", code="SCHEMA")
    return _PARAM_VALIDATORS[kind](dim, params)


def _number(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, int | float):
        raise ValidationError(f"{name} must be a number", code="SCHEMA")
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite", code="SCHEMA")
    return float(value)


def _optional_number(value: Any, name: str) -> float | None:
    return None if value is None else _number(value, name)


def _integer(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{name} must be an integer", code="SCHEMA")
    return value


def _required(params: dict[str, Any], name: str) -> Any:
    if name not in params:
        raise ValidationError(f"Missing parameter {name!r}", code="SCHEMA")
    return params[name]


def _necksize(dim: Dimension, value: Any) -> float:
    eps = _number(value, "eps")
    if not 0.0 < eps < cylinder_necksize(dim):
        raise ValidationError(
            f"eps must lie in (0, {cylinder_necksize(dim):.6f}) "
            f"for n={dim.n}, got {eps}",
            code="EPS_RANGE",
        )
    return eps


def _positive(value: Any, name: str) -> float:
    number = _number(value, name)
    if not number > 0:
        raise ValidationError(f"{name} must be positive", code="SCHEMA")
    return number


def _direction(value: Any) -> Direction:
    if not isinstance(value, list | tuple) or len(value) != 2:
        raise ValidationError("direction must be a pair", code="SCHEMA")
    a, b = (_number(x, "direction") for x in value)
    if a < 0 or b < 0:
        raise ValidationError(
            "direction must lie in the closed positive quadrant",
            code="SCHEMA",
        )
    return Direction.of(a, b)


def _pair(value: Any, name: str) -> np.ndarray:
    if not isinstance(value, list | tuple) or len(value) != 2:
        raise ValidationError(f"{name} must be a pair", code="SCHEMA")
    return np.array([_number(x, name) for x in value])


def _matrix(value: Any, name: str) -> np.ndarray:
    if not isinstance(value, list | tuple) or len(value) != 2:
        raise ValidationError(f"{name} must be a 2x2 matrix", code="SCHEMA")
    return np.vstack([_pair(row, name) for row in value])


def _initial_state(dim: Dimension, value: Any) -> CylState:
    if not isinstance(value, dict):
        raise ValidationError("ic must be an object", code="SCHEMA")
    direction = _direction(value.get("direction", DEFAULT_DIRECTION))
    if value.get("bubble"):
        return bubble_state(direction)
    if "eps" in value:
        return phase_point_state(_necksize(dim, value["eps"]), direction)
    return CylState(
        _number(value.get("t", 0.0), "t"),
        _pair(_required(value, "v"), "v"),
        _pair(_required(value, "w"), "w"),
    )


def _potential(dim: Dimension, value: Any) -> Potential:
    if value is None:
        return Potential.zero()
    if not isinstance(value, dict):
        raise ValidationError("potential must be an object", code="SCHEMA")
    zero = [[0.0, 0.0], [0.0, 0.0]]
    potential = Potential(
        _matrix(value.get("c", zero), "c"), _matrix(value.get("d", zero), "d")
    )
    validate_potential(dim, potential).raise_for_violations()
    return potential


def _profile_params(dim: Dimension, params: dict[str, Any]) -> dict[str, Any]:
    return {
        "eps": _necksize(dim, _required(params, "eps")),
        "periods": _positive(params.get("periods", 10), "periods"),
    }


def _floquet_params(dim: Dimension, params: dict[str, Any]) -> dict[str, Any]:
    jmax = _integer(params.get("jmax", 4), "jmax")
    if jmax < 0:
        raise ValidationError("jmax must be >= 0", code="SCHEMA")
    return {"eps": _necksize(dim, _required(params, "eps")), "jmax": jmax}


def _pohozaev_params(dim: Dimension, params: dict[str, Any]) -> dict[str, Any]:
    direction = _direction(params.get("direction", DEFAULT_DIRECTION))
    if params.get("bubble"):
        return {
            "ic": bubble_state(direction),
            "eps": None,
            "t_end": _positive(params.get("t_end", 8.0), "t_end"),
        }
    eps = _necksize(dim, _required(params, "eps"))
    return {
        "ic": phase_point_state(eps, direction),
        "eps": eps,
        "t_end": _positive(params.get("t_end", 20.0), "t_end"),
    }


def _classify_params(dim: Dimension, params: dict[str, Any]) -> dict[str, Any]:
    return {
        "ic": _initial_state(dim, _required(params, "ic")),
        "t_end": _positive(params.get("t_end", 20.0), "t_end"),
    }


def _perturbed_params(
    dim: Dimension, params: dict[str, Any]
) -> dict[str, Any]:
    dim.require_perturbed_range()
    ic = _initial_state(dim, _required(params, "ic"))
    if not ic.is_admissible():
        raise ValidationError(
            "Initial state must have nonnegative components",
            code="IC_INADMISSIBLE",
        )
    t_end = _number(_required(params, "t_end"), "t_end")
    if not t_end > ic.t:
        raise ValidationError("t_end must exceed the initial time", code="SPAN")
    return {
        "ic": ic,
        "potential": _potential(dim, params.get("potential")),
        "t_end": t_end,
        "fit": bool(params.get("fit", True)),
        "window_count": _integer(params.get("window_count", 18), "window_count"),
        "window_length": _positive(
            params.get("window_length", 0.75), "window_length"
        ),
    }


def resolve_grid(dim: Dimension, grid: Any) -> list[float]:
    """
    Expand a sweep grid into necksizes.

    The grid is ``{"eps": [...]}``, ``{"eps_fraction": [...]}`` or
    ``{"range": {"start", "stop", "count", "spacing"}}`` where range
    endpoints are fractions of the cylinder necksize and spacing is
    ``"linear"`` or ``"log"``.

    Raises:
        ValidationError: If the grid is empty or malformed
    """
    if not isinstance(grid, dict):
        raise ValidationError("grid must be an object", code="SCHEMA")
    eps_cyl = cylinder_necksize(dim)
    if "eps" in grid:
        values = [_number(x, "eps") for x in grid["eps"]]
    elif "eps_fraction" in grid:
        values = [eps_cyl * _number(x, "eps_fraction") for x in grid["eps_fraction"]]
    elif "range" in grid:
        bounds = grid["range"]
        start = _positive(_required(bounds, "start"), "start")
        stop = _positive(_required(bounds, "stop"), "stop")
        count = _integer(_required(bounds, "count"), "count")
        spacing = bounds.get("spacing", "linear")
        if spacing not in ("linear", "log"):
            raise ValidationError(f"Unknown spacing {spacing!r}", code="SCHEMA")
        space = np.geomspace if spacing == "log" else np.linspace
        values = [eps_cyl * float(x) for x in space(start, stop, max(count, 0))]
    else:
        raise ValidationError(
            "grid needs one of eps, eps_fraction or range", code="SCHEMA"
        )
    if not values:
        raise ValidationError("Sweep grid is empty", code="EMPTY_GRID")
    return [_necksize(dim, eps) for eps in values]


def _sweep_params(dim: Dimension, params: dict[str, Any]) -> dict[str, Any]:
    quantity = _required(params, "quantity")
    if quantity not in SWEEP_QUANTITIES:
        raise ValidationError(
            f"Unsupported sweep quantity: {quantity!r}. "
            f"Supported quantities: {', '.join(SWEEP_QUANTITIES)}",
            code="SCHEMA",
        )
    return {
        "quantity": quantity,
        "grid": resolve_grid(dim, _required(params, "grid")),
        "t_end": _positive(params.get("t_end", 20.0), "t_end"),
    }


_PARAM_VALIDATORS: dict[
    str, Callable[[Dimension, dict[str, Any]], dict[str, Any]]
] = {
    "profile": _profile_params,
    "floquet": _floquet_params,
    "pohozaev": _pohozaev_params,
    "classify": _classify_params,
    "perturbed": _perturbed_params,
    "sweep": _sweep_params,
}
