"""Receding-horizon simulation loop.

Each step: re-solve every subgame at the current state (warm-started
from the previous step), move the nominal opinions to the current
opinions, compute each agent's policy from the pre-update opinions,
integrate the physical state, then integrate the opinion deviations
and attentions using the just-solved subgames' value functions
evaluated at the new state (one step into the shifted plan). The full
opinion is recovered as z(t) = zbar(t-1) + dz(t); that bookkeeping is
logged and holds exactly on every row.

The logged row t carries the opinions/attentions the planners saw at
step t; the price-of-indecision column carries the value that drove
the update producing that row.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import cost as cost_mod
from . import dynamics as dyn_mod
from . import opinion as op_mod
from . import planner as planner_mod
from .errors import SolverError
from .ilq import solve_all_subgames
from .opinion import AttentionState, OpinionState
from .scenario import ScenarioConfig, resolved_dict


class TrajectoryLog:
    """Column-ordered per-step record; one row per simulation step."""

    def __init__(self, columns):
        self.columns = list(columns)
        self.rows = []

    def add_row(self, values: dict):
        missing = set(self.columns) - set(values)
        if missing:
            raise ValueError(f"incomplete log row, missing {sorted(missing)}")
        self.rows.append([values[c] for c in self.columns])

    def __len__(self):
        return len(self.rows)

    def column(self, name) -> np.ndarray:
        idx = self.columns.index(name)
        return np.array([row[idx] for row in self.rows])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([_format_cell(v) for v in row])


def _format_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return repr(float(v))


@dataclass
class SimResult:
    log: TrajectoryLog
    config: ScenarioConfig
    final_state: np.ndarray
    error: str | None = None


def _log_columns(config: ScenarioConfig) -> list:
    cols = ["t", "time"]
    for i in range(config.n_agents):
        a = i + 1
        cols += [f"x{a}_px", f"x{a}_py", f"x{a}_phi", f"x{a}_v"]
    for i in range(config.n_agents):
        a = i + 1
        cols += [f"u{a}_accel", f"u{a}_steer"]
    for i, n_opt in enumerate(config.option_counts):
        a = i + 1
        cols += [f"z{a}_{k + 1}" for k in range(n_opt)]
        cols += [f"zbar{a}_{k + 1}" for k in range(n_opt)]
        cols += [f"dz{a}_{k + 1}" for k in range(n_opt)]
        cols += [f"sigma{a}_{k + 1}" for k in range(n_opt)]
        cols += [f"lambda{a}", f"poi{a}"]
    for theta in _tuple_labels(config):
        for i in range(config.n_agents):
            cols.append(f"v{i + 1}_{theta}")
    for theta in _tuple_labels(config):
        cols += [f"ilq_iters_{theta}", f"ilq_converged_{theta}"]
    for i in range(config.n_agents):
        a = i + 1
        cols += [f"planner{a}_objective", f"planner{a}_iters"]
    return cols


def _tuple_labels(config: ScenarioConfig):
    import itertools
    for theta in itertools.product(*[range(c) for c in config.option_counts]):
        yield "".join(str(k + 1) for k in theta)


def initialize_opinions(config: ScenarioConfig) -> OpinionState:
    """Near-neutral start: every opinion entry equals epsilon, deviation zero."""
    eps = config.opinion.epsilon
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    z = tuple(np.full(n, eps) for n in config.option_counts)
    return OpinionState(zbar=z, dz=tuple(np.zeros(n) for n in config.option_counts))


def seed_deviation(state: OpinionState, config: ScenarioConfig) -> OpinionState:
    """Move the initial deviation off the coupling kernel.

    Equal per-option deviations are invariant under the opinion
    exchange (the coupling blocks annihilate them), so an all-equal
    seed can never break a tie. The seed keeps z unchanged but tilts
    each agent's deviation toward its geometrically nearest option
    region, scaled by ``seed_tilt``.
    """
    eps = config.opinion.epsilon
    tilt = config.opinion.seed_tilt
    dz = []
    for i, agent in enumerate(config.agents):
        pos = agent.x0[:2]
        dists = [np.hypot(pos[0] - o.region.center[0], pos[1] - o.region.center[1])
                 for o in agent.options]
        nearest = int(np.argmin(dists))
        d = np.full(len(agent.options), eps)
        d[nearest] += eps * tilt
        dz.append(d)
    z = state.z
    return OpinionState(zbar=tuple(zi - di for zi, di in zip(z, dz)), dz=tuple(dz))


def _poi_all(z_all, table) -> np.ndarray:
    return np.array([
        op_mod.price_of_indecision(i, z_all, table) for i in range(len(z_all))
    ])


def run(config: ScenarioConfig) -> SimResult:
    """Run the receding-horizon loop for the configured number of steps.

    On a solver error the partial log is returned with the error recorded.
    """
    dt = config.sim.dt
    n = config.n_agents
    counts = config.option_counts
    log = TrajectoryLog(_log_columns(config))

    x = config.x0_joint()
    opinions = seed_deviation(initialize_opinions(config), config)
    attention = AttentionState(lam=np.full(n, config.opinion.lambda0))
    poi_logged = None
    error = None

    for t in range(config.sim.steps):
        try:
            # Each step is solved from scratch so the subgame bank is a pure
            # function of the current state; warm-started re-solves can drift
            # across local equilibria and make the value tables path-dependent.
            bank = solve_all_subgames(x, config)
        except SolverError as exc:
            error = str(exc)
            break
        table_now = op_mod.make_table(
            bank.value_arrays(x, plan_step=0, option_counts=counts))
        if t == 0:
            poi_logged = _poi_all(opinions.z, table_now)
        else:
            # integrate deviations and attention: gains from the value table
            # at the new state, Hessians anchored at the previous nominal
            params = op_mod.synthesize_ginod(opinions.zbar, table_now,
                                             config.opinion.damping)
            h = dt / config.opinion.substeps
            dz_prev = [d.copy() for d in opinions.dz]
            for _ in range(config.opinion.substeps):
                rhs = op_mod.ginod_rhs(params, dz_prev, attention.lam)
                dz_prev = [d + h * r for d, r in zip(dz_prev, rhs)]
            z_preview = tuple(zb + d for zb, d in zip(opinions.zbar, dz_prev))
            poi_logged = _poi_all(z_preview, table_now)
            opinions, attention = op_mod.integrate_opinions(
                opinions, attention, params, poi_logged, dt,
                config.opinion.attention_damping, config.opinion.attention_scale,
                lam_max=config.opinion.attention_max,
                substeps=config.opinion.substeps)
        z_now = opinions.z
        opinions = opinions.reset_nominal()  # zbar(t) <- z(t); z unchanged

        controls = np.empty((n, dyn_mod.CONTROL_DIM))
        planner_objs = np.empty(n)
        planner_iters = np.empty(n, dtype=int)
        try:
            for i in range(n):
                if config.agents[i].planner == "l1":
                    out = planner_mod.l1_policy(i, x, opinions, attention, bank,
                                                config)
                else:
                    out = planner_mod.l0_policy(i, x, z_now, bank, config)
                controls[i] = config.dynamics.clip_control(out.control)
                planner_objs[i] = out.objective
                planner_iters[i] = out.iterations
        except SolverError as exc:
            error = str(exc)
            break

        row = {"t": t, "time": t * dt}
        for i in range(n):
            a = i + 1
            px, py, phi, v = dyn_mod.split_joint(x)[i]
            row |= {f"x{a}_px": px, f"x{a}_py": py, f"x{a}_phi": phi, f"x{a}_v": v}
            row |= {f"u{a}_accel": controls[i, 0], f"u{a}_steer": controls[i, 1]}
            sig = op_mod.softmax(z_now[i])
            for k in range(counts[i]):
                row |= {
                    f"z{a}_{k + 1}": z_now[i][k],
                    f"zbar{a}_{k + 1}": opinions.zbar[i][k],
                    f"dz{a}_{k + 1}": opinions.dz[i][k],
                    f"sigma{a}_{k + 1}": sig[k],
                }
            row |= {f"lambda{a}": attention.lam[i], f"poi{a}": poi_logged[i]}
        for label, theta in zip(_tuple_labels(config), bank.tuples):
            sol = bank.get(theta)
            for i in range(n):
                row |= {f"v{i + 1}_{label}": table_now.values[i][theta]}
            row |= {f"ilq_iters_{label}": sol.iterations,
                    f"ilq_converged_{label}": sol.converged}
        for i in range(n):
            row |= {f"planner{i + 1}_objective": planner_objs[i],
                    f"planner{i + 1}_iters": planner_iters[i]}
        log.add_row(row)
        x = dyn_mod.step_joint(x, controls, dt, config.dynamics)

    return SimResult(log=log, config=config, final_state=x, error=error)


def realized_total_cost(result: SimResult, player: int) -> float:
    """Exact-indicator accounting of one player's realized running cost."""
    log = result.log
    n = result.config.n_agents
    states = np.column_stack([
        log.column(f"x{j + 1}_{f}") for j in range(n)
        for f in ("px", "py", "phi", "v")
    ])
    a = player + 1
    controls = np.column_stack([log.column(f"u{a}_accel"),
                                log.column(f"u{a}_steer")])
    total = 0.0
    for x, u in zip(states, controls):
        total += cost_mod.realized_indicator_cost(player, x, u, result.config)
    return total


def write_outputs(result: SimResult, out_dir):
    """Write trajectory.csv and metadata.yaml into ``out_dir``."""
    import pathlib

    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "trajectory.csv"
    result.log.to_csv(csv_path)
    meta = {
        "scenario": resolved_dict(result.config),
        "rows": len(result.log),
        "error": result.error,
    }
    with open(out / "metadata.yaml", "w") as fh:
        yaml.safe_dump(meta, fh, sort_keys=False)
    return csv_path
