"""
Models module for defining data structures shared by the lab.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from .errors import ValidationError
from .integrator import Trajectory

UNIT_TOL = 1e-12


def _pair(values, name: str) -> np.ndarray:
    array = np.array(values, dtype=float).reshape(-1)
    if array.shape != (2,):
        raise ValidationError(f"{name} must have two components")
    if not np.all(np.isfinite(array)):
        raise ValidationError(f"{name} must be finite")
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Dimension:
    """
    Space dimension of the elliptic system.

    Attributes:
        n: Integer dimension, at least 3
    """

    n: int

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 3:
            raise ValidationError(
                f"Dimension must be an integer >= 3, got {self.n}",
                code="DIMENSION_RANGE",
            )
        object.__setattr__(self, "n", int(self.n))

    @property
    def delta(self) -> float:
        """Return the conformal weight (n - 2) / 2."""
        return (self.n - 2) / 2

    @property
    def delta_sq(self) -> float:
        """Return delta squared, the linear coefficient of the limit system."""
        return self.delta * self.delta

    @property
    def coupling(self) -> float:
        """Return the nonlinearity constant n (n - 2) / 4."""
        return self.n * (self.n - 2) / 4

    @property
    def power(self) -> float:
        """Return the exponent 4 / (n - 2) of |V| in the nonlinearity."""
        return 4 / (self.n - 2)

    @property
    def critical_exponent(self) -> float:
        """Return the critical Sobolev exponent 2n / (n - 2)."""
        return 2 * self.n / (self.n - 2)

    @property
    def sigma_sphere(self) -> float:
        """Return the volume of the unit (n - 1)-sphere."""
        return 2 * math.pi ** (self.n / 2) / gamma(self.n / 2)

    def require_perturbed_range(self) -> None:
        """
        Check that perturbed-system features apply in this dimension.

        Raises:
            ValidationError: Unless 3 <= n <= 5
        """
        if not 3 <= self.n <= 5:
            raise ValidationError(
                f"Perturbed systems require 3 <= n <= 5, got n={self.n}",
                code="DIMENSION_RANGE",
            )


@dataclass(frozen=True, eq=False)
class CylState:
    """
    State of the radial system in cylindrical coordinates.

    Attributes:
        t: Cylindrical time, t = -ln r
        v: Components (v1, v2)
        w: Derivatives (w1, w2) = dv/dt
    """

    t: float
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self) -> None:
        if not math.isfinite(self.t):
            raise ValidationError("Cylindrical time must be finite")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "v", _pair(self.v, "V"))
        object.__setattr__(self, "w", _pair(self.w, "W"))

    @classmethod
    def from_vector(cls, t: float, y: np.ndarray) -> "CylState":
        """Build a state from the packed vector (v1, v2, w1, w2)."""
        return cls(t, y[:2], y[2:4])

    def as_vector(self) -> np.ndarray:
        """Return the packed vector (v1, v2, w1, w2)."""
        return np.concatenate((self.v, self.w))

    def is_admissible(self) -> bool:
        """Return True if both components are nonnegative."""
        return bool(np.all(self.v >= 0.0))


@dataclass(frozen=True, eq=False)
class Direction:
    """
    Coupling direction in the closed positive quadrant of the unit circle.

    Attributes:
        lam: Unit vector (L1, L2) with nonnegative entries
        lam_bar: Orthogonal companion (-L2, L1)
    """

    lam: np.ndarray
    lam_bar: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        lam = _pair(self.lam, "Direction")
        if abs(math.hypot(lam[0], lam[1]) - 1.0) > UNIT_TOL:
            raise ValidationError("Direction must be a unit vector")
        if np.any(lam < 0.0):
            raise ValidationError(
                "Direction must lie in the closed positive quadrant"
            )
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "lam_bar", _pair((-lam[1], lam[0]), "lam"))

    @classmethod
    def of(cls, a: float, b: float) -> "Direction":
        """Normalize (a, b) into a direction."""
        norm = math.hypot(a, b)
        if norm == 0.0:
            raise ValidationError("Direction of the zero vector")
        return cls((a / norm, b / norm))

    @property
    def eta(self) -> float | None:
        """Return the ratio L1 / L2, or None on the L1 axis."""
        return float(self.lam[0] / self.lam[1]) if self.lam[1] > 0 else None

    def as_list(self) -> list[float]:
        """Return (L1, L2) as plain floats."""
        return [float(x) for x in self.lam]


@dataclass(frozen=True, eq=False)
class FowlerProfile:
    """
    Periodic solution of the scalar cylindrical Yamabe equation.

    The phase convention puts a minimum at t = 0, so ``v(0) = eps`` and
    ``v'(0) = 0``.

    Attributes:
        dim: Dimension
        eps: Necksize, the minimum of v
        period: Period of v
        energy: Scalar Hamiltonian of the orbit
        samples: Trajectory of (v, w) over at least two periods
    """

    dim: Dimension
    eps: float
    period: float
    energy: float
    samples: Trajectory

    def state(self, t: float | np.ndarray) -> np.ndarray:
        """
        Evaluate (v, w) at any time by periodicity.

        Args:
            t: Scalar time or array of times

        Returns:
            Array of shape (2,) or (2, m)
        """
        return self.samples(np.mod(np.asarray(t, dtype=float), self.period))

    def as_trajectory(self, span: tuple[float, float]) -> Trajectory:
        """Return the profile on ``span`` as a 2-component trajectory."""
        lo, hi = span
        base = self.samples.nodes[self.samples.nodes < self.period]
        first = math.floor(lo / self.period)
        last = math.ceil(hi / self.period)
        tiled = np.concatenate(
            [k * self.period + base for k in range(first, last + 1)]
        )
        inner = tiled[(tiled > lo) & (tiled < hi)]
        nodes = np.concatenate(([lo], inner, [hi]))
        return Trajectory(
            (lo, hi), nodes, self.state, 2, self.samples.order, False
        )


@dataclass(frozen=True, eq=False)
class Potential:
    """
    Radial affine potential A(r) = c + d r.

    Attributes:
        c: 2x2 matrix of constant coefficients
        d: 2x2 matrix of linear coefficients
    """

    c: np.ndarray
    d: np.ndarray

    def __post_init__(self) -> None:
        for name in ("c", "d"):
            matrix = np.array(getattr(self, name), dtype=float)
            if matrix.shape != (2, 2) or not np.all(np.isfinite(matrix)):
                raise ValidationError(
                    f"Potential coefficient {name} must be a finite 2x2 matrix",
                    code="INVALID_SCENARIO",
                )
            matrix.setflags(write=False)
            object.__setattr__(self, name, matrix)

    @classmethod
    def zero(cls) -> "Potential":
        """Return the potential A = 0."""
        return cls(np.zeros((2, 2)), np.zeros((2, 2)))

    @classmethod
    def scaled_identity(cls, scale: float) -> "Potential":
        """Return the constant potential ``scale * Id``."""
        return cls(scale * np.eye(2), np.zeros((2, 2)))

    @property
    def symmetric(self) -> bool:
        """Return True if c and d are symmetric matrices."""
        return bool(
            self.c[0, 1] == self.c[1, 0] and self.d[0, 1] == self.d[1, 0]
        )

    @property
    def is_zero(self) -> bool:
        """Return True if every coefficient vanishes."""
        return not (np.any(self.c) or np.any(self.d))

    def matrix(self, r: float) -> np.ndarray:
        """Return A(r)."""
        return self.c + self.d * r

    def sup_norm(self) -> float:
        """Return the largest spectral norm of A(r) over r in [0, 1]."""
        return float(
            max(np.linalg.norm(self.c, 2), np.linalg.norm(self.c + self.d, 2))
        )

    def as_dict(self) -> dict[str, list[list[float]]]:
        """Return the scenario form {"c": ..., "d": ...}."""
        return {"c": self.c.tolist(), "d": self.d.tolist()}


@dataclass(frozen=True, eq=False)
class RunDiagnostics:
    """
    Sampled diagnostics of a radial run.

    Attributes:
        times: Sample times
        v: Components, shape (2, m)
        w: Derivatives, shape (2, m)
        psi: Energy series (half-normalized Hamiltonian)
        w_avg: Radial average v1 + v2 of the rescaled solution
        sup_norm: Largest |V| over the run
        inf_norm: Smallest |V| over the run
        tail_inf_norm: Smallest |V| over the last third of the run
    """

    times: np.ndarray
    v: np.ndarray
    w: np.ndarray
    psi: np.ndarray
    w_avg: np.ndarray
    sup_norm: float
    inf_norm: float
    tail_inf_norm: float


@dataclass(frozen=True, eq=False)
class PerturbedRun:
    """
    Solution of the radial system with a potential.

    Attributes:
        dim: Dimension
        trajectory: Trajectory of (v1, v2, w1, w2)
        potential: Potential used for the run
        diagnostics: Sampled diagnostics
    """

    dim: Dimension
    trajectory: Trajectory
    potential: Potential
    diagnostics: RunDiagnostics

    @property
    def truncated(self) -> bool:
        """Return True if the run stopped at the blow-up limit."""
        return self.trajectory.truncated
