"""Control-affine models, fixed-step integrators, and the off-center point
map that turns planar velocity commands into unicycle inputs.

Two closed-form models are provided: the planar single integrator and the
differential drive (unicycle) kinematics. Both have locally Lipschitz drift
and control matrices by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "ControlAffineSystem",
    "single_integrator",
    "unicycle",
    "UnicycleState",
    "wrap_angle",
    "integrate",
    "NidConfig",
    "nid_point",
    "nid_to_unicycle",
]

_TWO_PI = 2.0 * math.pi


def wrap_angle(angle: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    return (angle + math.pi) % _TWO_PI - math.pi


@dataclass(frozen=True)
class ControlAffineSystem:
    """System xdot = f(x) + g(x) u with fixed state and input dimensions.

    angle_indices marks circular state entries; they are rewrapped into
    [-pi, pi) after every integration step.
    """

    name: str
    state_dim: int
    input_dim: int
    drift: Callable[[np.ndarray], np.ndarray]
    control_matrix: Callable[[np.ndarray], np.ndarray]
    angle_indices: tuple[int, ...] = ()


def single_integrator() -> ControlAffineSystem:
    """Planar single integrator, xdot = u."""
    zero = np.zeros(2)
    eye = np.eye(2)
    return ControlAffineSystem(
        name="single_integrator",
        state_dim=2,
        input_dim=2,
        drift=lambda x: zero,
        control_matrix=lambda x: eye,
    )


def unicycle() -> ControlAffineSystem:
    """Differential drive kinematics, state (x, y, phi), input (v, omega)."""

    def g(x):
        phi = float(x[2])
        c = math.cos(phi)
        s = math.sin(phi)
        return np.array([[c, 0.0], [s, 0.0], [0.0, 1.0]])

    zero = np.zeros(3)
    return ControlAffineSystem(
        name="unicycle",
        state_dim=3,
        input_dim=2,
        drift=lambda x: zero,
        control_matrix=g,
        angle_indices=(2,),
    )


@dataclass
class UnicycleState:
    """Pose (x, y, phi) with the heading kept in [-pi, pi)."""

    x: float
    y: float
    phi: float

    def __post_init__(self):
        self.phi = wrap_angle(float(self.phi))

    @classmethod
    def from_array(cls, arr) -> "UnicycleState":
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (3,):
            raise ValueError(f"expected a 3-vector pose, got shape {arr.shape}")
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.phi])


def integrate(
    system: ControlAffineSystem,
    state,
    u,
    dt: float,
    method: str = "rk4",
) -> np.ndarray:
    """One zero-order-hold step of the system under constant input u.

    method is "euler" or "rk4" (classical fourth order). Angle entries are
    rewrapped after the step. Raises ValueError on dimension mismatch and on
    non-finite state, input or step size.
    """
    state = np.asarray(state, dtype=float)
    u = np.asarray(u, dtype=float)
    if state.shape != (system.state_dim,):
        raise ValueError(
            f"{system.name} expects state of shape ({system.state_dim},), got {state.shape}"
        )
    if u.shape != (system.input_dim,):
        raise ValueError(
            f"{system.name} expects input of shape ({system.input_dim},), got {u.shape}"
        )
    if not (np.all(np.isfinite(state)) and np.all(np.isfinite(u))):
        raise ValueError("integrate needs finite state and input")
    dt = float(dt)
    if not (math.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be positive and finite, got {dt}")

    if method == "euler":
        nxt = state + dt * (system.drift(state) + system.control_matrix(state) @ u)
    elif method == "rk4":
        def xdot(x):
            return system.drift(x) + system.control_matrix(x) @ u

        k1 = xdot(state)
        k2 = xdot(state + 0.5 * dt * k1)
        k3 = xdot(state + 0.5 * dt * k2)
        k4 = xdot(state + dt * k3)
        nxt = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    else:
        raise ValueError(f"unknown integration method {method!r}")

    for i in system.angle_indices:
        nxt[i] = wrap_angle(nxt[i])
    return nxt


@dataclass(frozen=True)
class NidConfig:
    """Lookahead distance of the controlled off-center point, in meters."""

    lookahead: float = 0.05

    def __post_init__(self):
        lookahead = float(self.lookahead)
        if not (math.isfinite(lookahead) and lookahead > 0.0):
            raise ValueError(f"lookahead must be positive and finite, got {self.lookahead}")
        object.__setattr__(self, "lookahead", lookahead)


def nid_point(state, cfg: NidConfig) -> np.ndarray:
    """Controlled point p = (x + l cos phi, y + l sin phi) ahead of the axle."""
    state = np.asarray(state, dtype=float)
    if state.shape != (3,):
        raise ValueError(f"expected a 3-vector pose, got shape {state.shape}")
    l = cfg.lookahead
    phi = float(state[2])
    return np.array([state[0] + l * math.cos(phi), state[1] + l * math.sin(phi)])


def nid_to_unicycle(planar_velocity, phi: float, cfg: NidConfig) -> np.ndarray:
    """Map a desired planar velocity of the off-center point to (v, omega).

    v = cos(phi) wx + sin(phi) wy and omega = (-sin(phi) wx + cos(phi) wy) / l.
    Under these inputs the point p = (x + l cos phi, y + l sin phi) moves at
    exactly the commanded planar velocity, which is what lets position
    barriers on p be enforced through the nonholonomic base.
    """
    w = np.asarray(planar_velocity, dtype=float)
    if w.shape != (2,):
        raise ValueError(f"expected a planar velocity 2-vector, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("planar velocity must be finite")
    phi = float(phi)
    c = math.cos(phi)
    s = math.sin(phi)
    v = c * w[0] + s * w[1]
    omega = (-s * w[0] + c * w[1]) / cfg.lookahead
    return np.array([v, omega])
