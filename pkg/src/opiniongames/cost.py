"""Stage costs for the parameterized coordination game.

Each player pays a parameter-independent cost (speed tracking, control
effort, soft collision / road / obstacle penalties) plus a
parameter-dependent target reward: a negative cost collected inside the
rectangular region attached to the chosen option. The indicator reward
is kept for reporting; game solving uses a smooth logistic-product
surrogate so that the cost is twice differentiable.

All penalties are squared hinges on signed distances, so gradients are
continuous and the analytic quadratization below stays honest against
finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import CONTROL_DIM, STATE_DIM, split_joint


def _sigmoid(t):
    # numerically safe on both tails
    t = np.asarray(t, dtype=float)
    e = np.exp(-np.abs(t))
    out = np.where(t >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TargetRegion:
    """Axis-aligned target rectangle in meters."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("degenerate target region")

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    def contains(self, px: float, py: float) -> bool:
        return self.x_min <= px <= self.x_max and self.y_min <= py <= self.y_max

    def _axis_product(self, p, lo, hi, kappa):
        """Value and first two derivatives of s(p) = sig(k(p-lo)) sig(k(hi-p))."""
        a = _sigmoid(kappa * (p - lo))
        b = _sigmoid(kappa * (hi - p))
        da = kappa * a * (1.0 - a)
        db = -kappa * b * (1.0 - b)
        dda = kappa**2 * a * (1.0 - a) * (1.0 - 2.0 * a)
        ddb = kappa**2 * b * (1.0 - b) * (1.0 - 2.0 * b)
        f = a * b
        df = da * b + a * db
        ddf = dda * b + 2.0 * da * db + a * ddb
        return f, df, ddf

    def occupancy(self, px: float, py: float, kappa: float):
        """Smooth occupancy in [0, 1] with gradient and Hessian in (px, py).

        Product of logistic ramps over the four edges; tends to the exact
        indicator as kappa grows.
        """
        fx, dfx, ddfx = self._axis_product(px, self.x_min, self.x_max, kappa)
        fy, dfy, ddfy = self._axis_product(py, self.y_min, self.y_max, kappa)
        s = fx * fy
        grad = np.array([dfx * fy, fx * dfy])
        hess = np.array([[ddfx * fy, dfx * dfy], [dfx * dfy, fx * ddfy]])
        return s, grad, hess


@dataclass(frozen=True)
class Obstacle:
    """Circular static obstacle with a soft clearance band."""

    x: float
    y: float
    radius: float
    clearance: float = 1.0


@dataclass(frozen=True)
class CostParams:
    v_ref: float = 3.0
    w_speed: float = 2.0
    w_accel: float = 1.0
    w_steer: float = 4.0
    w_collision: float = 15.0
    d_safe: float = 3.0
    w_road: float = 10.0
    w_obstacle: float = 10.0
    kappa: float = 5.0  # sharpness of the target surrogate, 1/m


@dataclass(frozen=True)
class RoadGeometry:
    y_min: float = 0.0
    y_max: float = 7.0
    margin: float = 0.7


@dataclass(frozen=True)
class QuadratizedCost:
    """Second-order expansion of one player's stage cost.

    Q/q are over the joint state, R/r over the player's own control,
    c0 is the cost value at the expansion point. Q is symmetric; with
    ``regularize`` Q is shifted to be PSD and R to have eigenvalues
    >= 1e-6.
    """

    Q: np.ndarray
    q: np.ndarray
    R: np.ndarray
    r: np.ndarray
    c0: float


R_EIG_FLOOR = 1e-6


def _hinge_sq(z):
    """max(0, z)^2 with first and second derivatives in z."""
    if z <= 0.0:
        return 0.0, 0.0, 0.0
    return z * z, 2.0 * z, 2.0


class _QuadAccumulator:
    """Accumulates value/gradient/Hessian contributions over the joint state."""

    def __init__(self, nx):
        self.value = 0.0
        self.grad = np.zeros(nx)
        self.hess = np.zeros((nx, nx))

    def add(self, value, idx=None, grad=None, hess=None):
        self.value += value
        if idx is not None:
            idx = np.asarray(idx)
            if grad is not None:
                self.grad[idx] += grad
            if hess is not None:
                self.hess[np.ix_(idx, idx)] += hess


def _collision_terms(acc, states, i, params: CostParams, with_derivatives=True):
    """Soft inter-agent collision penalty terms for player i (pays for all pairs
    involving itself)."""
    pi = states[i, :2]
    for j in range(states.shape[0]):
        if j == i:
            continue
        pj = states[j, :2]
        delta = pi - pj
        d = float(np.linalg.norm(delta))
        if d < 1e-12:
            # coincident positions: maximum hinge, symmetric => flat gradient
            acc.add(params.w_collision * params.d_safe**2)
            continue
        h, dh, ddh = _hinge_sq(params.d_safe - d)
        if h == 0.0 and dh == 0.0:
            continue
        acc.value += params.w_collision * h
        if not with_derivatives:
            continue
        n = delta / d
        # d(dist)/d(pi) = n, d(dist)/d(pj) = -n
        g_d = params.w_collision * (-dh)  # d cost / d dist
        gpi = g_d * n
        idx = [i * STATE_DIM, i * STATE_DIM + 1, j * STATE_DIM, j * STATE_DIM + 1]
        grad = np.concatenate([gpi, -gpi])
        proj = (np.eye(2) - np.outer(n, n)) / d
        h_dd = params.w_collision * ddh  # d2 cost / d dist2
        block = h_dd * np.outer(n, n) + g_d * proj
        hess = np.block([[block, -block], [-block, block]])
        acc.add(0.0, idx, grad, hess)


def _road_terms(acc, states, i, params: CostParams, road: RoadGeometry):
    y = states[i, 1]
    iy = i * STATE_DIM + 1
    lo = road.y_min + road.margin
    hi = road.y_max - road.margin
    h, dh, ddh = _hinge_sq(lo - y)
    acc.add(params.w_road * h, [iy], np.array([-params.w_road * dh]),
            np.array([[params.w_road * ddh]]))
    h, dh, ddh = _hinge_sq(y - hi)
    acc.add(params.w_road * h, [iy], np.array([params.w_road * dh]),
            np.array([[params.w_road * ddh]]))


def _obstacle_terms(acc, states, i, params: CostParams, obstacles):
    p = states[i, :2]
    idx = [i * STATE_DIM, i * STATE_DIM + 1]
    for obs in obstacles:
        delta = p - np.array([obs.x, obs.y])
        d = float(np.linalg.norm(delta))
        if d < 1e-12:
            acc.add(params.w_obstacle * (obs.radius + obs.clearance) ** 2)
            continue
        h, dh, ddh = _hinge_sq(obs.radius + obs.clearance - d)
        if h == 0.0 and dh == 0.0:
            continue
        n = delta / d
        g_d = params.w_obstacle * (-dh)
        proj = (np.eye(2) - np.outer(n, n)) / d
        block = params.w_obstacle * ddh * np.outer(n, n) + g_d * proj
        acc.add(params.w_obstacle * h, idx, g_d * n, block)


def _speed_terms(acc, states, i, params: CostParams):
    v = states[i, 3]
    iv = i * STATE_DIM + 3
    dv = v - params.v_ref
    acc.add(params.w_speed * dv * dv, [iv],
            np.array([2.0 * params.w_speed * dv]),
            np.array([[2.0 * params.w_speed]]))


def _target_terms(acc, states, i, region: TargetRegion, weight, kappa):
    px, py = states[i, 0], states[i, 1]
    s, grad, hess = region.occupancy(px, py, kappa)
    idx = [i * STATE_DIM, i * STATE_DIM + 1]
    acc.add(-weight * s, idx, -weight * grad, -weight * hess)


def stage_cost_independent(i, x, u_i, scenario) -> float:
    """Parameter-independent stage cost of player i at joint state x."""
    states = split_joint(x)
    if not 0 <= i < states.shape[0]:
        raise ValueError(f"invalid player id {i}")
    u_i = np.asarray(u_i, dtype=float)
    params = scenario.cost
    acc = _QuadAccumulator(states.size)
    _speed_terms(acc, states, i, params)
    _collision_terms(acc, states, i, params, with_derivatives=False)
    _road_terms(acc, states, i, params, scenario.road)
    _obstacle_terms(acc, states, i, params, scenario.obstacles)
    ctrl = params.w_accel * u_i[0] ** 2 + params.w_steer * u_i[1] ** 2
    return acc.value + ctrl


def stage_cost_dependent(i, x, option, scenario, smooth: bool = False,
                         kappa: float | None = None) -> float:
    """Option-dependent target reward of player i (a cost <= 0).

    With ``smooth`` the logistic-product surrogate is used; otherwise the
    exact indicator.
    """
    states = split_joint(x)
    opts = scenario.agents[i].options
    if not 0 <= option < len(opts):
        raise ValueError(f"unknown option {option} for agent {i}")
    region = opts[option].region
    weight = opts[option].weight
    px, py = states[i, 0], states[i, 1]
    if not smooth:
        return -weight if region.contains(px, py) else 0.0
    k = scenario.cost.kappa if kappa is None else kappa
    s, _, _ = region.occupancy(px, py, k)
    return -weight * s


def _psd_shift(M, floor):
    """Add eps*I so the smallest eigenvalue is at least ``floor``."""
    M = 0.5 * (M + M.T)
    lo = float(np.linalg.eigvalsh(M)[0])
    if lo < floor:
        M = M + (floor - lo) * np.eye(M.shape[0])
    return M


def quadratize(i, x, controls, theta, scenario, regularize: bool = True) -> QuadratizedCost:
    """Analytic second-order expansion of player i's smooth stage cost.

    ``theta`` is the option tuple of the subgame (one option id per
    agent); only agent i's own option enters its cost. With
    ``regularize`` the state Hessian is shifted to PSD and the control
    Hessian floored, which the game recursion relies on; pass False to
    get the raw derivatives (used by the finite-difference checks).
    """
    states = split_joint(x)
    controls = np.asarray(controls, dtype=float).reshape(-1, CONTROL_DIM)
    params = scenario.cost
    acc = _QuadAccumulator(states.size)
    _speed_terms(acc, states, i, params)
    _collision_terms(acc, states, i, params)
    _road_terms(acc, states, i, params, scenario.road)
    _obstacle_terms(acc, states, i, params, scenario.obstacles)
    opt = scenario.agents[i].options[theta[i]]
    _target_terms(acc, states, i, opt.region, opt.weight, params.kappa)

    u = controls[i]
    R = np.diag([2.0 * params.w_accel, 2.0 * params.w_steer])
    r = np.array([2.0 * params.w_accel * u[0], 2.0 * params.w_steer * u[1]])
    c0 = acc.value + params.w_accel * u[0] ** 2 + params.w_steer * u[1] ** 2

    Q = 0.5 * (acc.hess + acc.hess.T)
    if regularize:
        Q = _psd_shift(Q, 0.0)
        R = _psd_shift(R, R_EIG_FLOOR)
    return QuadratizedCost(Q=Q, q=acc.grad.copy(), R=R, r=r, c0=float(c0))


def quadratize_terminal(i, x, theta, scenario, regularize: bool = True) -> QuadratizedCost:
    """State-only expansion used as the terminal cost of the game horizon."""
    zeros = np.zeros((split_joint(x).shape[0], CONTROL_DIM))
    full = quadratize(i, x, zeros, theta, scenario, regularize=regularize)
    m = np.zeros((CONTROL_DIM, CONTROL_DIM))
    return QuadratizedCost(Q=full.Q, q=full.q, R=m, r=np.zeros(CONTROL_DIM), c0=full.c0)


def stage_cost_total(i, x, u_i, theta, scenario, smooth: bool = True) -> float:
    """c_I + c_D for player i; the quantity the game optimizes when smooth."""
    return stage_cost_independent(i, x, u_i, scenario) + stage_cost_dependent(
        i, x, theta[i], scenario, smooth=smooth
    )


def realized_indicator_cost(i, x, u_i, scenario) -> float:
    """Bookkeeping cost with exact-indicator target accounting.

    Sums the reward of every region the agent actually occupies,
    irrespective of any declared option; used for after-the-fact
    comparison of runs.
    """
    total = stage_cost_independent(i, x, u_i, scenario)
    states = split_joint(x)
    px, py = states[i, 0], states[i, 1]
    for opt in scenario.agents[i].options:
        if opt.region.contains(px, py):
            total -= opt.weight
    return total
