"""Iterative linear-quadratic solver for general-sum subgames.

For a fixed option tuple, the subgame is solved by repeatedly
linearizing the joint dynamics and quadratizing every player's stage
cost about the current nominal trajectory, solving the resulting
finite-horizon LQ game with a coupled backward Riccati recursion, and
rolling the new feedback policies forward with a backtracking step on
the affine term. The converged output is a local feedback Nash
approximation: per-player time-varying policies

    u_i(t, x) = u_nom_i(t) + K_i(t) (x - x_nom(t)) + kappa_i(t)

together with quadratic value approximations

    V_i(t, x) ~= 1/2 dx' Z_i(t) dx + zeta_i(t)' dx + v_i(t),

where dx = x - x_nom(t) and v_i(t) is the cost-to-go along the nominal
trajectory. A bank of such solutions (one per option tuple) backs the
opinion dynamics and the QMDP planners.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import cost as cost_mod
from . import dynamics as dyn_mod
from .errors import SolverError

DIVERGENCE_BOUND = 1e7
_COST_SLACK = 1e-9


@dataclass
class SubgameSolution:
    """Feedback Nash policies and quadratic values for one option tuple."""

    theta: tuple
    x_nom: np.ndarray          # (T+1, nx)
    u_nom: np.ndarray          # (T, n_agents, 2)
    K: list                    # per player: (T, 2, nx)
    kappa: list                # per player: (T, 2)
    Z: list                    # per player: (T+1, nx, nx)
    zeta: list                 # per player: (T+1, nx)
    v: list                    # per player: (T+1,)
    lin0: dyn_mod.LinearizedDynamics  # linearization at the first step
    converged: bool = False
    iterations: int = 0
    state_changes: list = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return self.u_nom.shape[0]

    def policy_control(self, player: int, x, t: int) -> np.ndarray:
        """Feedback control of one player at plan step t (unclipped)."""
        dx = np.asarray(x, dtype=float) - self.x_nom[t]
        return self.u_nom[t, player] + self.K[player][t] @ dx + self.kappa[player][t]


def eval_value(solution: SubgameSolution, player: int, x, t: int) -> float:
    """Quadratic value of one player at plan step t and state x."""
    if not 0 <= t <= solution.horizon:
        raise ValueError(f"plan step {t} outside horizon {solution.horizon}")
    dx = np.asarray(x, dtype=float) - solution.x_nom[t]
    Z = solution.Z[player][t]
    zeta = solution.zeta[player][t]
    return float(0.5 * dx @ Z @ dx + zeta @ dx + solution.v[player][t])


class SubgameBank:
    """Solutions for every option tuple of a scenario."""

    def __init__(self, solutions: dict):
        self._solutions = dict(solutions)

    def __len__(self):
        return len(self._solutions)

    @property
    def tuples(self):
        return sorted(self._solutions)

    def get(self, theta) -> SubgameSolution:
        theta = tuple(theta)
        if theta not in self._solutions:
            raise KeyError(f"no subgame solved for option tuple {theta}")
        return self._solutions[theta]

    def items(self):
        return self._solutions.items()

    def value_arrays(self, x, plan_step: int = 0, option_counts=None,
                     linear: bool = False):
        """Per-player value tables evaluated at state x and plan step.

        Returns a list of ndarrays, one per player, with one axis per
        agent's option set. With ``linear`` the quadratic term of each
        value expansion is dropped: off the solved nominals the
        curvature terms are plan-mismatch artifacts that can swamp the
        cross-tuple differences, and callers that differentiate the
        table (opinion-dynamics synthesis inside the two-step planner)
        want the first-order response only.
        """
        counts = option_counts
        if counts is None:
            n_axes = len(next(iter(self._solutions)))
            counts = [0] * n_axes
            for theta in self._solutions:
                for ax, opt in enumerate(theta):
                    counts[ax] = max(counts[ax], opt + 1)
        n_players = len(counts)
        tables = [np.zeros(tuple(counts)) for _ in range(n_players)]
        for theta, sol in self._solutions.items():
            for i in range(n_players):
                if linear:
                    dx = np.asarray(x, dtype=float) - sol.x_nom[plan_step]
                    tables[i][theta] = float(
                        sol.zeta[i][plan_step] @ dx + sol.v[i][plan_step])
                else:
                    tables[i][theta] = eval_value(sol, i, x, plan_step)
        return tables


def solve_lq_game(lin_seq, quad_seq):
    """Coupled backward recursion for a finite-horizon LQ game.

    Parameters
    ----------
    lin_seq : list of LinearizedDynamics, length T.
    quad_seq : list over time of per-player QuadratizedCost, length T+1;
        the last entry is the terminal cost (control parts ignored).

    Returns
    -------
    (K, kappa, Z, zeta, v) : per-player lists as in SubgameSolution,
    using the convention u = u_nom + K dx + kappa.

    Raises
    ------
    SolverError
        If the coupled gain system is singular or the recursion leaves
        the finite range; the failing step index is reported.
    """
    T = len(lin_seq)
    if T < 1:
        raise ValueError("horizon must be at least 1")
    if len(quad_seq) != T + 1:
        raise ValueError("need T+1 cost expansions for T dynamics steps")
    n_players = len(quad_seq[0])
    nx = lin_seq[0].A.shape[0]
    mdims = [lin_seq[0].B[i].shape[1] for i in range(n_players)]

    Z = [np.empty((T + 1, nx, nx)) for _ in range(n_players)]
    zeta = [np.empty((T + 1, nx)) for _ in range(n_players)]
    v = [np.empty(T + 1) for _ in range(n_players)]
    K = [np.empty((T, mdims[i], nx)) for i in range(n_players)]
    kappa = [np.empty((T, mdims[i])) for i in range(n_players)]

    for i in range(n_players):
        Z[i][T] = quad_seq[T][i].Q
        zeta[i][T] = quad_seq[T][i].q
        v[i][T] = quad_seq[T][i].c0

    offsets = np.concatenate([[0], np.cumsum(mdims)])
    m_total = offsets[-1]

    for t in range(T - 1, -1, -1):
        A = lin_seq[t].A
        B = lin_seq[t].B
        S = np.zeros((m_total, m_total))
        Yk = np.zeros((m_total, nx))
        Yc = np.zeros(m_total)
        for i in range(n_players):
            sl_i = slice(offsets[i], offsets[i + 1])
            BiZ = B[i].T @ Z[i][t + 1]
            for j in range(n_players):
                sl_j = slice(offsets[j], offsets[j + 1])
                block = BiZ @ B[j]
                if i == j:
                    block = block + quad_seq[t][i].R
                S[sl_i, sl_j] = block
            Yk[sl_i] = -BiZ @ A
            Yc[sl_i] = -(B[i].T @ zeta[i][t + 1] + quad_seq[t][i].r)
        try:
            sol = np.linalg.solve(S, np.concatenate([Yk, Yc[:, None]], axis=1))
        except np.linalg.LinAlgError as exc:
            raise SolverError(
                f"singular coupled gain system at step {t}", {"step": t}
            ) from exc
        if not np.all(np.isfinite(sol)):
            raise SolverError(f"non-finite gain solve at step {t}", {"step": t})
        for i in range(n_players):
            sl_i = slice(offsets[i], offsets[i + 1])
            K[i][t] = sol[sl_i, :nx]
            kappa[i][t] = sol[sl_i, nx]

        F = A + sum(B[i] @ K[i][t] for i in range(n_players))
        beta = sum(B[i] @ kappa[i][t] for i in range(n_players))
        for i in range(n_players):
            Ri, ri = quad_seq[t][i].R, quad_seq[t][i].r
            Ki, ki = K[i][t], kappa[i][t]
            Zn, zn = Z[i][t + 1], zeta[i][t + 1]
            Z[i][t] = quad_seq[t][i].Q + Ki.T @ Ri @ Ki + F.T @ Zn @ F
            Z[i][t] = 0.5 * (Z[i][t] + Z[i][t].T)
            zeta[i][t] = (quad_seq[t][i].q + Ki.T @ (Ri @ ki + ri)
                          + F.T @ (zn + Zn @ beta))
            v[i][t] = (v[i][t + 1] + quad_seq[t][i].c0 + 0.5 * ki @ Ri @ ki
                       + ri @ ki + 0.5 * beta @ Zn @ beta + zn @ beta)
        if not all(np.all(np.isfinite(Z[i][t])) for i in range(n_players)):
            raise SolverError(f"non-finite value recursion at step {t}", {"step": t})
    return K, kappa, Z, zeta, v


def _quadratize_all(xs, us, theta, scenario):
    T = us.shape[0]
    quad_seq = []
    for t in range(T):
        quad_seq.append([
            cost_mod.quadratize(i, xs[t], us[t], theta, scenario)
            for i in range(scenario.n_agents)
        ])
    quad_seq.append([
        cost_mod.quadratize_terminal(i, xs[T], theta, scenario)
        for i in range(scenario.n_agents)
    ])
    return quad_seq


def _linearize_all(xs, us, dt, params):
    return [dyn_mod.linearize_joint(xs[t], us[t], dt, params) for t in range(us.shape[0])]


def _rollout(x0, x_ref, u_ref, K, kappa, alpha, dt, scenario):
    """Forward pass with feedback about the reference and a scaled affine term."""
    T = u_ref.shape[0]
    n = scenario.n_agents
    xs = np.empty((T + 1, len(x0)))
    us = np.empty_like(u_ref)
    xs[0] = x0
    for t in range(T):
        dx = xs[t] - x_ref[t]
        for i in range(n):
            u = u_ref[t, i] + K[i][t] @ dx + alpha * kappa[i][t]
            us[t, i] = scenario.dynamics.clip_control(u)
        xs[t + 1] = dyn_mod.step_joint(xs[t], us[t], dt, scenario.dynamics)
    return xs, us


def trajectory_costs(xs, us, theta, scenario):
    """Per-player total smooth cost along a trajectory (incl. terminal state)."""
    T = us.shape[0]
    totals = np.zeros(scenario.n_agents)
    for i in range(scenario.n_agents):
        for t in range(T):
            totals[i] += cost_mod.stage_cost_total(i, xs[t], us[t, i], theta, scenario)
        totals[i] += cost_mod.stage_cost_independent(
            i, xs[T], np.zeros(dyn_mod.CONTROL_DIM), scenario
        ) + cost_mod.stage_cost_dependent(i, xs[T], theta[i], scenario, smooth=True)
    return totals


def _target_seeking_controls(x0, theta, scenario, T):
    """Steer-toward-the-committed-region rollout used to seed cold solves.

    A plain zero-control nominal often sits in a straight-line local
    equilibrium outside the target's gradient basin; seeding with a
    simple pursuit profile lets the solve represent genuine commitment
    to the tuple's regions.
    """
    dt = scenario.sim.dt
    n = scenario.n_agents
    params = scenario.dynamics
    us = np.zeros((T, n, dyn_mod.CONTROL_DIM))
    x = np.asarray(x0, dtype=float).copy()
    for t in range(T):
        states = dyn_mod.split_joint(x)
        for i in range(n):
            px, py, phi, v = states[i]
            region = scenario.agents[i].options[theta[i]].region
            cx, cy = region.center
            if px < region.x_max:
                heading = np.arctan2(cy - py, max(cx - px, 1.0))
            else:
                heading = 0.0
            err = (heading - phi + np.pi) % (2.0 * np.pi) - np.pi
            us[t, i] = (
                np.clip(scenario.cost.v_ref - v, *params.accel_limits),
                np.clip(1.5 * err, *params.steer_limits),
            )
        x = dyn_mod.step_joint(x, us[t], dt, params)
    return us


def ilq_solve(x0, theta, scenario, *, horizon=None, max_iters=None, tol=None,
              warm=None) -> SubgameSolution:
    """Solve one subgame by iterative LQ approximation.

    ``warm`` may carry the previous receding-horizon step's solution for
    the same tuple; its trajectory and policies are shifted by one step
    to initialize the nominal. Raises SolverError on divergence.
    """
    theta = tuple(theta)
    x0 = np.asarray(x0, dtype=float)
    if not np.all(np.isfinite(x0)):
        raise ValueError("non-finite initial state")
    T = horizon if horizon is not None else scenario.ilq.horizon
    max_iters = max_iters if max_iters is not None else scenario.ilq.max_iters
    tol = tol if tol is not None else scenario.ilq.tol
    dt = scenario.sim.dt
    n = scenario.n_agents
    nx = len(x0)

    zero_K = [np.zeros((T, dyn_mod.CONTROL_DIM, nx)) for _ in range(n)]
    zero_k = [np.zeros((T, dyn_mod.CONTROL_DIM)) for _ in range(n)]
    if warm is not None and warm.horizon == T:
        u_ref = np.concatenate([warm.u_nom[1:], warm.u_nom[-1:]], axis=0)
        x_ref = np.concatenate([warm.x_nom[1:], warm.x_nom[-1:]], axis=0)
        K_ref = [np.concatenate([warm.K[i][1:], warm.K[i][-1:]]) for i in range(n)]
        k_ref = [np.concatenate([warm.kappa[i][1:], warm.kappa[i][-1:]]) for i in range(n)]
        xs, us = _rollout(x0, x_ref, u_ref, K_ref, k_ref, 1.0, dt, scenario)
    else:
        u_ref = _target_seeking_controls(x0, theta, scenario, T)
        xs, us = _rollout(x0, np.tile(x0, (T + 1, 1)), u_ref, zero_K, zero_k,
                          1.0, dt, scenario)

    best_cost = float(trajectory_costs(xs, us, theta, scenario).sum())
    converged = False
    changes = []
    iterations = 0
    alphas = [0.5**k for k in range(scenario.ilq.line_search_halvings + 1)]

    for iterations in range(1, max_iters + 1):
        lin_seq = _linearize_all(xs, us, dt, scenario.dynamics)
        quad_seq = _quadratize_all(xs, us, theta, scenario)
        K, kappa, *_ = solve_lq_game(lin_seq, quad_seq)

        accepted = False
        for alpha in alphas:
            xs_new, us_new = _rollout(x0, xs, us, K, kappa, alpha, dt, scenario)
            cost_new = float(trajectory_costs(xs_new, us_new, theta, scenario).sum())
            if cost_new <= best_cost + _COST_SLACK * (1.0 + abs(best_cost)):
                accepted = True
                break
        if not accepted:
            break
        change = float(np.max(np.abs(xs_new - xs)))
        changes.append(change)
        xs, us = xs_new, us_new
        best_cost = min(best_cost, cost_new)
        if np.max(np.abs(xs)) > DIVERGENCE_BOUND:
            raise SolverError(
                f"ilq diverged for tuple {theta}",
                {"theta": theta, "iterations": iterations, "changes": changes},
            )
        if change < tol:
            converged = True
            break

    # Final backward pass so policies and values refer to the final nominal.
    lin_seq = _linearize_all(xs, us, dt, scenario.dynamics)
    quad_seq = _quadratize_all(xs, us, theta, scenario)
    K, kappa, Z, zeta, v = solve_lq_game(lin_seq, quad_seq)
    return SubgameSolution(
        theta=theta, x_nom=xs, u_nom=us, K=K, kappa=kappa, Z=Z, zeta=zeta, v=v,
        lin0=lin_seq[0], converged=converged, iterations=iterations,
        state_changes=changes,
    )


def solve_all_subgames(x0, scenario, warm_bank=None, **kwargs) -> SubgameBank:
    """Solve every option-tuple subgame from state x0.

    Solutions are independent; failures are re-raised tagged with the
    offending tuple.
    """
    counts = scenario.option_counts
    if any(c < 1 for c in counts):
        raise ValueError("every agent needs a nonempty option set")
    solutions = {}
    for theta in itertools.product(*[range(c) for c in counts]):
        warm = None
        if warm_bank is not None:
            try:
                warm = warm_bank.get(theta)
            except KeyError:
                warm = None
        try:
            solutions[theta] = ilq_solve(x0, theta, scenario, warm=warm, **kwargs)
        except SolverError as exc:
            raise SolverError(f"subgame {theta} failed: {exc}", exc.context) from exc
    return SubgameBank(solutions)
