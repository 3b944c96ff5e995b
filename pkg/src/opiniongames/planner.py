"""Opinion-weighted QMDP policies.

The level-0 policy substitutes the per-tuple affine one-step dynamics
into each subgame's quadratic value, mixes the tuples with the product
of softmax weights, adds the (exactly quadratic) control cost, and
minimizes the resulting convex QP over the control box. The level-1
policy plans two of its own moves, propagating the opinions through
one step of the saturated opinion dynamics in between, and optimizes
the nonconvex two-step objective by multi-start projected gradient
descent with finite-difference gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import cost as cost_mod
from . import dynamics as dyn_mod
from . import opinion as op_mod
from .errors import SolverError
from .ilq import SubgameBank, eval_value


@dataclass(frozen=True)
class QPProblem:
    """Box-constrained convex QP: min 1/2 u'Pu + q'u + constant."""

    P: np.ndarray
    q: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    constant: float = 0.0
    contributions: dict = field(default_factory=dict)

    def objective(self, u) -> float:
        u = np.asarray(u, dtype=float)
        return float(0.5 * u @ self.P @ u + self.q @ u + self.constant)


@dataclass(frozen=True)
class PlannerOutput:
    control: np.ndarray
    objective: float
    iterations: int
    converged: bool
    contributions: dict = field(default_factory=dict)


def _tuple_weights(z_all, bank: SubgameBank) -> dict:
    """Product-of-softmax weight per option tuple; raises on missing entries."""
    import itertools

    sigmas = [op_mod.softmax(z) for z in z_all]
    weights = {}
    for theta in itertools.product(*[range(len(s)) for s in sigmas]):
        bank.get(theta)  # completeness check
        w = 1.0
        for agent, opt in enumerate(theta):
            w *= sigmas[agent][opt]
        weights[theta] = w
    return weights


def build_l0_objective(player, x, z_all, bank: SubgameBank, scenario,
                       u_expand=None) -> QPProblem:
    """Assemble the level-0 QP for one player.

    Every subgame contributes the quadratic obtained by pushing the
    control through that subgame's step-0 linearization into its
    step-1 value, with the other agents pinned to their subgame
    feedback policies. ``u_expand`` only moves the expansion point of
    the (exactly quadratic) control cost; the assembled P and q do not
    depend on it.
    """
    x = np.asarray(x, dtype=float)
    m = dyn_mod.CONTROL_DIM
    params = scenario.cost
    # control cost is w_a a^2 + w_s s^2 exactly: expand about u_expand and
    # shift back to absolute coordinates
    H = np.diag([2.0 * params.w_accel, 2.0 * params.w_steer])
    if u_expand is None:
        u_expand = np.zeros(m)
    u_expand = np.asarray(u_expand, dtype=float)
    g = H @ u_expand
    P = H.copy()
    q = g - H @ u_expand  # zero: kept explicit so the shift is visible
    constant = cost_mod.stage_cost_independent(player, x, u_expand, scenario) \
        - 0.5 * u_expand @ H @ u_expand    # state-only part of c_I

    weights = _tuple_weights(z_all, bank)
    contributions = {}
    for theta, w in weights.items():
        sol = bank.get(theta)
        lin = sol.lin0
        dx0 = x - sol.x_nom[0]
        Bi = lin.B[player]
        # next-state deviation: dx1 = A dx0 + B_i (u - u_nom_i) + sum_j B_j du_j
        drift = lin.A @ dx0 - Bi @ sol.u_nom[0, player]
        for j in range(scenario.n_agents):
            if j == player:
                continue
            du_j = sol.K[j][0] @ dx0 + sol.kappa[j][0]
            drift = drift + lin.B[j] @ du_j
        Z1 = sol.Z[player][1]
        zeta1 = sol.zeta[player][1]
        P = P + w * (Bi.T @ Z1 @ Bi)
        q = q + w * (Bi.T @ (Z1 @ drift + zeta1))
        const_theta = w * (0.5 * drift @ Z1 @ drift + zeta1 @ drift
                           + sol.v[player][1])
        contributions[theta] = float(const_theta)
        constant += const_theta

    P = 0.5 * (P + P.T)
    lo, hi = scenario.dynamics.control_box()
    return QPProblem(P=P, q=q, lower=lo, upper=hi, constant=float(constant),
                     contributions=contributions)


def solve_qp(qp: QPProblem, tol: float = 1e-8, max_iters: int = 500) -> np.ndarray:
    """Projected gradient descent with fixed step 1/L on a box-constrained QP."""
    eigs = np.linalg.eigvalsh(qp.P)
    if eigs[0] < -1e-9:
        raise SolverError(f"QP matrix is not PSD (min eigenvalue {eigs[0]:.3g})")
    if np.any(qp.lower > qp.upper):
        raise ValueError("empty control box")
    L = max(float(eigs[-1]), 1e-12)
    u = np.clip(np.zeros_like(qp.q), qp.lower, qp.upper)
    for _ in range(max_iters):
        grad = qp.P @ u + qp.q
        u_next = np.clip(u - grad / L, qp.lower, qp.upper)
        if np.linalg.norm(L * (u - u_next)) < tol:
            return u_next
        u = u_next
    return u


def l0_policy(player, x, z_all, bank: SubgameBank, scenario) -> PlannerOutput:
    """Level-0 opinion-weighted policy: build the QP and solve it."""
    qp = build_l0_objective(player, x, z_all, bank, scenario)
    u = solve_qp(qp)
    return PlannerOutput(
        control=u,
        objective=qp.objective(u),
        iterations=1,
        converged=True,
        contributions=qp.contributions,
    )


def _l1_objective_fn(player, x, opinions, attention, bank, scenario, u_others0):
    """Two-step objective closure over the stacked decision (u0, u1)."""
    dt = scenario.sim.dt
    n = scenario.n_agents
    m = dyn_mod.CONTROL_DIM
    opn = scenario.opinion
    zbar = opinions.zbar
    dz = opinions.dz
    lam = attention.lam
    counts = scenario.option_counts

    def objective(uu):
        u0 = uu[:m]
        u1 = uu[m:]
        controls0 = np.array([
            u0 if j == player else u_others0[j] for j in range(n)
        ])
        c0 = cost_mod.stage_cost_independent(player, x, u0, scenario)
        x1 = dyn_mod.step_joint(x, controls0, dt, scenario.dynamics)
        # evolve opinions one step; the synthesis table uses the first-order
        # value response so the control's influence is not buried in
        # curvature extrapolation noise
        table1 = op_mod.make_table(
            bank.value_arrays(x1, plan_step=1, option_counts=counts, linear=True))
        params = op_mod.synthesize_ginod(zbar, table1, opn.damping)
        h = dt / opn.substeps
        dz1 = [np.asarray(d, dtype=float).copy() for d in dz]
        for _ in range(opn.substeps):
            rhs = op_mod.ginod_rhs(params, dz1, lam)
            dz1 = [d + h * r for d, r in zip(dz1, rhs)]
        z1 = [zb + d for zb, d in zip(zbar, dz1)]
        c1 = cost_mod.stage_cost_independent(player, x1, u1, scenario)
        # second step: opponents follow their subgame policies per tuple
        weights = _tuple_weights(z1, bank)
        value = 0.0
        for theta, w in weights.items():
            if w < 1e-12:
                continue
            sol = bank.get(theta)
            controls1 = np.empty((n, m))
            for j in range(n):
                if j == player:
                    controls1[j] = u1
                else:
                    controls1[j] = scenario.dynamics.clip_control(
                        sol.policy_control(j, x1, 1))
            x2 = dyn_mod.step_joint(x1, controls1, dt, scenario.dynamics)
            value += w * eval_value(sol, player, x2, 2)
        return c0 + c1 + value

    return objective


def _projected_gradient_fd(objective, u0, lower, upper, *, fd_step=1e-4,
                           max_iters=25, tol=1e-6):
    """Projected gradient with central-difference gradients and backtracking."""
    u = np.clip(np.asarray(u0, dtype=float).copy(), lower, upper)
    f = objective(u)
    n_iter = 0
    for n_iter in range(1, max_iters + 1):
        grad = np.empty_like(u)
        for k in range(len(u)):
            up, dn = u.copy(), u.copy()
            up[k] += fd_step
            dn[k] -= fd_step
            grad[k] = (objective(up) - objective(dn)) / (2.0 * fd_step)
        step = 1.0
        improved = False
        for _ in range(12):
            cand = np.clip(u - step * grad, lower, upper)
            fc = objective(cand)
            if fc < f - 1e-12:
                u, f = cand, fc
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        if np.linalg.norm(step * grad) < tol:
            break
    return u, f, n_iter


def l1_policy(player, x, opinions, attention, bank: SubgameBank, scenario,
              seed=None) -> PlannerOutput:
    """Level-1 policy: two own moves with one opinion update in between.

    The first move steers the opinions (the value table one step ahead
    depends on it); the second settles the state before the weighted
    value is collected. Solved from several deterministic starts; the
    first returned control is applied.
    """
    m = dyn_mod.CONTROL_DIM
    n = scenario.n_agents
    z_now = opinions.z
    u_others0 = {
        j: l0_policy(j, x, z_now, bank, scenario).control
        for j in range(n) if j != player
    }
    objective = _l1_objective_fn(player, x, opinions, attention, bank, scenario,
                                 u_others0)
    lo, hi = scenario.dynamics.control_box()
    lower = np.concatenate([lo, lo])
    upper = np.concatenate([hi, hi])

    l0_u = l0_policy(player, x, z_now, bank, scenario).control
    starts = [np.concatenate([l0_u, l0_u]), np.zeros(2 * m)]
    rng = np.random.default_rng(scenario.sim.seed if seed is None else seed)
    for _ in range(6):
        starts.append(rng.uniform(lower, upper))

    best_u, best_f, total_iters = None, np.inf, 0
    for s in starts:
        u, f, iters = _projected_gradient_fd(objective, s, lower, upper)
        total_iters += iters
        if np.isfinite(f) and f < best_f:
            best_u, best_f = u, f
    if best_u is None:
        raise SolverError("no level-1 start produced a finite objective")
    return PlannerOutput(
        control=best_u[:m],
        objective=float(best_f),
        iterations=total_iters,
        converged=True,
        contributions={"u_next": best_u[m:]},
    )
