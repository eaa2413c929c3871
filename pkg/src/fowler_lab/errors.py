"""
Errors module defining the exception hierarchy used across the lab.

Every exception carries a machine-readable ``code`` so that the command
line front end can report failures as JSON without string matching.
"""


class LabError(Exception):
    """Base class for all lab errors."""

    code = "LAB_ERROR"

    def __init__(self, message: str, code: str | None = None) -> None:
        super().__init__(message)
        if code is not None:
            self.code = code

    def as_dict(self) -> dict[str, str]:
        """Return the error as a JSON-ready mapping."""
        return {"error": self.code, "message": str(self)}


class ValidationError(LabError, ValueError):
    """A precondition of an operation or scenario is violated."""

    code = "VALIDATION"


class ScenarioFileError(LabError, FileNotFoundError):
    """A scenario file is missing or unreadable."""

    code = "MISSING_INPUT"


class IntegrationError(LabError):
    """
    The integrator could not reach the end of the requested span.

    Attributes:
        t_reached: Last cylindrical time reached before the failure
    """

    code = "INTEGRATION_FAILURE"

    def __init__(self, message: str, t_reached: float) -> None:
        super().__init__(f"{message} (reached t={t_reached:.6g})")
        self.t_reached = t_reached


class TrajectoryError(LabError, ValueError):
    """A trajectory was evaluated outside its span."""

    code = "OUTSIDE_SPAN"


class PeriodDetectionError(LabError):
    """No period could be detected along a profile."""

    code = "PERIOD_DETECTION"


class ConvergenceError(LabError):
    """A differencing or fitting procedure did not converge."""

    code = "NO_CONVERGENCE"


class InsufficientTailError(LabError):
    """The tail of a run is too short to estimate a limit."""

    code = "INSUFFICIENT_TAIL"
