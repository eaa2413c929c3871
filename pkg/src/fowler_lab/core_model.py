"""
Core model module for the cylindrical form of the critical system.

With t = -ln r and v = r^delta u the radial system becomes the autonomous
limit system v'' = delta^2 v - n (n - 2) / 4 |V|^{4/(n-2)} v, whose energy
is conserved along solutions.
"""

import math

import numpy as np

from .errors import ValidationError
from .integrator import VectorField
from .models import CylState, Dimension


def ball_to_cyl(
    n: Dimension, r: float, u: np.ndarray, du_dr: np.ndarray
) -> CylState:
    """
    Transform radial field data at radius r to a cylindrical state.

    Args:
        n: Dimension
        r: Radius, positive
        u: Field values (u1, u2) at r
        du_dr: Radial derivatives at r

    Returns:
        CylState at t = -ln r

    Raises:
        ValidationError: If r is not positive
    """
    if not r > 0:
        raise ValidationError(f"Radius must be positive, got {r}", code="RADIUS")
    u = np.asarray(u, dtype=float)
    du_dr = np.asarray(du_dr, dtype=float)
    v = r**n.delta * u
    w = -(r ** (n.delta + 1.0)) * du_dr - n.delta * v
    return CylState(-math.log(r), v, w)


def cyl_to_ball(
    n: Dimension, state: CylState
) -> tuple[float, np.ndarray, np.ndarray]:
    """
    Transform a cylindrical state back to radial field data.

    Returns:
        Tuple (r, u, du_dr)
    """
    r = math.exp(-state.t)
    u = state.v * r ** (-n.delta)
    du_dr = -(state.w + n.delta * state.v) * r ** (-n.delta - 1.0)
    return r, u, du_dr


def norm_power(n: Dimension, v: np.ndarray) -> np.ndarray:
    """Return |V|^{4/(n-2)} along axis 0, computed from |V|^2."""
    return np.sum(v * v, axis=0) ** (2.0 / (n.n - 2))


def limit_acceleration(n: Dimension, v: np.ndarray) -> np.ndarray:
    """Return V'' of the limit system for V of shape (2,) or (2, m)."""
    return n.delta_sq * v - n.coupling * norm_power(n, v) * v


def limit_rhs(n: Dimension, state: CylState) -> tuple[np.ndarray, np.ndarray]:
    """
    Right-hand side of the limit system.

    Returns:
        Tuple (dV/dt, dW/dt)
    """
    return state.w.copy(), limit_acceleration(n, state.v)


def limit_field(n: Dimension) -> VectorField:
    """Return the limit system as a field on (v1, v2, w1, w2)."""

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return np.concatenate((y[2:], limit_acceleration(n, y[:2])))

    return rhs


def fowler_acceleration(n: Dimension, v):
    """Return v'' of the scalar Fowler equation."""
    return n.delta_sq * v - n.coupling * np.abs(v) ** n.power * v


def fowler_field(n: Dimension) -> VectorField:
    """Return the scalar Fowler equation as a field on (v, w)."""

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return np.array([y[1], fowler_acceleration(n, y[0])])

    return rhs


def energy_series(n: Dimension, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Half-normalized Hamiltonian for states stacked along axis 1."""
    v_sq = np.sum(v * v, axis=0)
    w_sq = np.sum(w * w, axis=0)
    potential = v_sq ** (n.critical_exponent / 2) - v_sq
    return 0.5 * (w_sq + n.delta_sq * potential)


def hamiltonian(n: Dimension, state: CylState) -> float:
    """
    Energy of the limit system.

    H = (|W|^2 - delta^2 |V|^2 + delta^2 |V|^{2n/(n-2)}) / 2 is conserved
    along solutions and equals the Pohozaev integral divided by the volume
    of the unit sphere.
    """
    return float(energy_series(n, state.v, state.w))


def scalar_hamiltonian(n: Dimension, v, w):
    """
    Energy of the scalar Fowler equation without the factor one half.

    Accepts scalars or arrays of equal shape.
    """
    return w * w + n.delta_sq * (np.abs(v) ** n.critical_exponent - v * v)


def auxiliary_series(n: Dimension, v, w):
    """
    Auxiliary function of one component, vectorised over samples.

    Along the limit system f' = n (n - 2) / 4 v w (|V|^p - |v|^p) with
    p = 4 / (n - 2), so f rises exactly while |v| does.
    """
    return -0.5 * scalar_hamiltonian(n, v, w)


def auxiliary_f(n: Dimension, state: CylState, i: int) -> float:
    """
    Auxiliary function of component i (1 or 2).

    f_i = -w_i^2 / 2 + delta^2 / 2 (v_i^2 - v_i^{2n/(n-2)}).

    Raises:
        ValidationError: If i is not 1 or 2
    """
    if i not in (1, 2):
        raise ValidationError(f"Component index must be 1 or 2, got {i}")
    return float(auxiliary_series(n, state.v[i - 1], state.w[i - 1]))
