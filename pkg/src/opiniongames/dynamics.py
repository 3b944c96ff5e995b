"""Kinematic bicycle dynamics for multi-vehicle scenes.

Each agent carries the state (px, py, phi, v): rear-axle position in
meters, yaw in radians, longitudinal speed in m/s. Controls are
(accel, steer). Joint states concatenate the agents in order, so two
vehicles give an 8-dimensional flat vector. Integration is forward
Euler at a fixed step; linearization is analytic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STATE_DIM = 4
CONTROL_DIM = 2


@dataclass(frozen=True)
class VehicleParams:
    """Geometry and actuation limits shared by all vehicles in a scene."""

    wheelbase: float = 2.8
    accel_limits: tuple[float, float] = (-5.0, 5.0)
    steer_limits: tuple[float, float] = (-0.8, 0.8)
    v_min: float = 0.0

    def control_box(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([self.accel_limits[0], self.steer_limits[0]])
        hi = np.array([self.accel_limits[1], self.steer_limits[1]])
        return lo, hi

    def clip_control(self, u: np.ndarray) -> np.ndarray:
        lo, hi = self.control_box()
        return np.clip(np.asarray(u, dtype=float), lo, hi)


@dataclass(frozen=True)
class LinearizedDynamics:
    """One-step affine model ``x+ = A x + sum_i B[i] u_i + c``.

    The residual ``c`` makes the model exact at the linearization point;
    in deviation coordinates only ``A`` and ``B`` matter.
    """

    A: np.ndarray
    B: list
    c: np.ndarray


def _require_finite(arr: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite entries in {name}")
    return arr


def num_agents(x: np.ndarray) -> int:
    n, rem = divmod(len(x), STATE_DIM)
    if rem != 0 or n == 0:
        raise ValueError(f"joint state length {len(x)} is not a multiple of {STATE_DIM}")
    return n


def split_joint(x: np.ndarray) -> np.ndarray:
    """View a joint state as an (n_agents, 4) array."""
    x = np.asarray(x, dtype=float)
    return x.reshape(num_agents(x), STATE_DIM)


def bicycle_rhs(state, control, wheelbase: float) -> np.ndarray:
    """Continuous-time rear-axle bicycle model.

    Returns (px_dot, py_dot, phi_dot, v_dot) =
    (v cos phi, v sin phi, v tan(steer) / wheelbase, accel).
    """
    if wheelbase <= 0:
        raise ValueError("wheelbase must be positive")
    state = _require_finite(state, "state")
    control = _require_finite(control, "control")
    _, _, phi, v = state
    accel, steer = control
    return np.array(
        [v * np.cos(phi), v * np.sin(phi), v * np.tan(steer) / wheelbase, accel]
    )


def joint_rhs(x, controls, params: VehicleParams) -> np.ndarray:
    """Stacked continuous-time dynamics of all agents."""
    states = split_joint(x)
    controls = np.asarray(controls, dtype=float).reshape(-1, CONTROL_DIM)
    if controls.shape[0] != states.shape[0]:
        raise ValueError(
            f"got {controls.shape[0]} controls for {states.shape[0]} agents"
        )
    out = [bicycle_rhs(s, u, params.wheelbase) for s, u in zip(states, controls)]
    return np.concatenate(out)


def step_joint(x, controls, dt: float, params: VehicleParams) -> np.ndarray:
    """One forward-Euler step of the joint dynamics.

    Speeds are clamped below at ``params.v_min`` after the update.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = _require_finite(x, "state")
    x_next = x + dt * joint_rhs(x, controls, params)
    agents = x_next.reshape(-1, STATE_DIM)
    agents[:, 3] = np.maximum(agents[:, 3], params.v_min)
    return agents.reshape(-1)


def linearize_joint(x, controls, dt: float, params: VehicleParams) -> LinearizedDynamics:
    """Analytic Jacobians of the Euler step about (x, controls).

    A is block diagonal across agents; each B_i touches only agent i's
    block of rows. The speed clamp is ignored (the linearization is of
    the smooth interior dynamics).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    states = split_joint(x)
    controls = np.asarray(controls, dtype=float).reshape(-1, CONTROL_DIM)
    n = states.shape[0]
    if controls.shape[0] != n:
        raise ValueError(f"got {controls.shape[0]} controls for {n} agents")
    nx = n * STATE_DIM
    A = np.eye(nx)
    B = [np.zeros((nx, CONTROL_DIM)) for _ in range(n)]
    L = params.wheelbase
    for i, ((_, _, phi, v), (_, steer)) in enumerate(zip(states, controls)):
        r = i * STATE_DIM
        cos_p, sin_p = np.cos(phi), np.sin(phi)
        A[r + 0, r + 2] = -dt * v * sin_p
        A[r + 0, r + 3] = dt * cos_p
        A[r + 1, r + 2] = dt * v * cos_p
        A[r + 1, r + 3] = dt * sin_p
        A[r + 2, r + 3] = dt * np.tan(steer) / L
        B[i][r + 2, 1] = dt * v / (L * np.cos(steer) ** 2)
        B[i][r + 3, 0] = dt
    x = np.asarray(x, dtype=float)
    x_plus = x + dt * joint_rhs(x, controls, params)  # unclamped step
    c = x_plus - A @ x - sum(Bi @ ui for Bi, ui in zip(B, controls))
    return LinearizedDynamics(A=A, B=B, c=c)
