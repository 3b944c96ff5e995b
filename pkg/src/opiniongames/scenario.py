"""Scenario configuration: dataclasses, YAML loading, overrides.

A scenario file is a single YAML document with the sections ``sim``,
``dynamics``, ``road``, ``cost``, ``obstacles``, ``agents``, ``ilq``
and ``opinion``. Unknown keys anywhere in the tree are rejected so
typos fail loudly. Three ready-made toll-station scenarios ship with
the package (see :func:`bundled_config_path`).
"""

from __future__ import annotations

import copy
import importlib.resources
from dataclasses import dataclass, field

import numpy as np
import yaml

from .cost import CostParams, Obstacle, RoadGeometry, TargetRegion
from .dynamics import STATE_DIM, VehicleParams
from .errors import ConfigError

PLANNERS = ("l0", "l1")


@dataclass(frozen=True)
class OptionConfig:
    region: TargetRegion
    weight: float


@dataclass(frozen=True)
class AgentConfig:
    x0: np.ndarray
    options: tuple[OptionConfig, ...]
    planner: str = "l0"


@dataclass(frozen=True)
class SimParams:
    dt: float = 0.2
    steps: int = 75
    seed: int = 0


@dataclass(frozen=True)
class IlqParams:
    horizon: int = 10
    max_iters: int = 50
    tol: float = 1e-3
    line_search_halvings: int = 10


@dataclass(frozen=True)
class OpinionParams:
    damping: float = 0.2           # opinion damping d
    attention_damping: float = 2.0  # m
    attention_scale: float = 5.0    # rho
    attention_max: float = float("inf")  # upper clamp on lambda
    substeps: int = 1               # internal Euler stages per sim step
    epsilon: float = 1e-2           # near-neutral initial opinion
    seed_tilt: float = 0.1          # option asymmetry of the deviation seed
    lambda0: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    sim: SimParams
    dynamics: VehicleParams
    road: RoadGeometry
    cost: CostParams
    obstacles: tuple[Obstacle, ...]
    agents: tuple[AgentConfig, ...]
    ilq: IlqParams
    opinion: OpinionParams

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def option_counts(self) -> tuple[int, ...]:
        return tuple(len(a.options) for a in self.agents)

    def x0_joint(self) -> np.ndarray:
        return np.concatenate([a.x0 for a in self.agents])


def _expect_mapping(node, where):
    if not isinstance(node, dict):
        raise ConfigError(f"section '{where}' must be a mapping")
    return node


def _check_keys(node, allowed, where):
    unknown = set(node) - set(allowed)
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key '{key}' in '{where}'")


def _number(node, key, where, default=None, required=False):
    if key not in node:
        if required:
            raise ConfigError(f"missing key '{key}' in '{where}'")
        return default
    val = node[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"key '{where}.{key}' must be a number")
    return float(val)


def _build_section(node, cls, where, casts=None):
    """Populate a flat numeric dataclass from a mapping."""
    node = _expect_mapping(node, where)
    fields = cls.__dataclass_fields__
    _check_keys(node, fields, where)
    kwargs = {}
    casts = casts or {}
    for name in fields:
        if name not in node:
            continue
        if name in casts:
            kwargs[name] = casts[name](node[name], f"{where}.{name}")
        else:
            kwargs[name] = _number(node, name, where)
    return cls(**kwargs)


def _cast_int(val, where):
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"key '{where}' must be an integer")
    return val


def _cast_pair(val, where):
    if not isinstance(val, (list, tuple)) or len(val) != 2:
        raise ConfigError(f"key '{where}' must be a pair [lo, hi]")
    lo, hi = float(val[0]), float(val[1])
    if lo >= hi:
        raise ConfigError(f"key '{where}' must satisfy lo < hi")
    return (lo, hi)


def _build_region(node, where) -> TargetRegion:
    node = _expect_mapping(node, where)
    _check_keys(node, ("x_min", "x_max", "y_min", "y_max"), where)
    try:
        return TargetRegion(
            x_min=_number(node, "x_min", where, required=True),
            x_max=_number(node, "x_max", where, required=True),
            y_min=_number(node, "y_min", where, required=True),
            y_max=_number(node, "y_max", where, required=True),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid region at '{where}': {exc}") from exc


def _build_agent(node, idx) -> AgentConfig:
    where = f"agents[{idx}]"
    node = _expect_mapping(node, where)
    _check_keys(node, ("x0", "options", "planner"), where)
    x0 = node.get("x0")
    if not isinstance(x0, (list, tuple)) or len(x0) != STATE_DIM:
        raise ConfigError(f"key '{where}.x0' must be a list of {STATE_DIM} numbers")
    planner = node.get("planner", "l0")
    if planner not in PLANNERS:
        raise ConfigError(f"key '{where}.planner' must be one of {PLANNERS}")
    raw_opts = node.get("options")
    if not isinstance(raw_opts, list) or len(raw_opts) < 2:
        raise ConfigError(f"key '{where}.options' must list at least 2 options")
    options = []
    for k, opt in enumerate(raw_opts):
        opt_where = f"{where}.options[{k}]"
        opt = _expect_mapping(opt, opt_where)
        _check_keys(opt, ("region", "weight"), opt_where)
        weight = _number(opt, "weight", opt_where, required=True)
        if weight <= 0:
            raise ConfigError(f"key '{opt_where}.weight' must be positive")
        region = _build_region(opt.get("region"), f"{opt_where}.region")
        options.append(OptionConfig(region=region, weight=weight))
    return AgentConfig(
        x0=np.asarray(x0, dtype=float), options=tuple(options), planner=planner
    )


_TOP_LEVEL = ("name", "sim", "dynamics", "road", "cost", "obstacles", "agents",
              "ilq", "opinion")


def config_from_dict(raw: dict) -> ScenarioConfig:
    raw = _expect_mapping(raw, "<root>")
    _check_keys(raw, _TOP_LEVEL, "<root>")

    sim = _build_section(raw.get("sim", {}), SimParams, "sim",
                         casts={"steps": _cast_int, "seed": _cast_int})
    dyn = _build_section(raw.get("dynamics", {}), VehicleParams, "dynamics",
                         casts={"accel_limits": _cast_pair, "steer_limits": _cast_pair})
    road = _build_section(raw.get("road", {}), RoadGeometry, "road")
    cost = _build_section(raw.get("cost", {}), CostParams, "cost")
    ilq = _build_section(raw.get("ilq", {}), IlqParams, "ilq",
                         casts={"horizon": _cast_int, "max_iters": _cast_int,
                                "line_search_halvings": _cast_int})
    opinion = _build_section(raw.get("opinion", {}), OpinionParams, "opinion",
                             casts={"substeps": _cast_int})

    obstacles = []
    for k, node in enumerate(raw.get("obstacles", []) or []):
        where = f"obstacles[{k}]"
        node = _expect_mapping(node, where)
        _check_keys(node, ("x", "y", "radius", "clearance"), where)
        obstacles.append(Obstacle(
            x=_number(node, "x", where, required=True),
            y=_number(node, "y", where, required=True),
            radius=_number(node, "radius", where, required=True),
            clearance=_number(node, "clearance", where, default=1.0),
        ))

    raw_agents = raw.get("agents")
    if not isinstance(raw_agents, list) or len(raw_agents) < 1:
        raise ConfigError("section 'agents' must list at least 1 agent")
    agents = tuple(_build_agent(a, k) for k, a in enumerate(raw_agents))

    if sim.dt <= 0:
        raise ConfigError("key 'sim.dt' must be positive")
    if sim.steps < 1:
        raise ConfigError("key 'sim.steps' must be at least 1")
    if ilq.horizon < 1:
        raise ConfigError("key 'ilq.horizon' must be at least 1")
    if opinion.epsilon <= 0:
        raise ConfigError("key 'opinion.epsilon' must be positive")

    return ScenarioConfig(
        name=str(raw.get("name", "scenario")),
        sim=sim, dynamics=dyn, road=road, cost=cost,
        obstacles=tuple(obstacles), agents=agents, ilq=ilq, opinion=opinion,
    )


def _parse_scalar(text):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value '{text}': {exc}") from exc


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``key.path=value`` overrides onto the raw config tree."""
    out = copy.deepcopy(raw)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        path, _, text = item.partition("=")
        keys = path.strip().split(".")
        node = out
        for k in keys[:-1]:
            if not isinstance(node, dict) or k not in node:
                raise ConfigError(f"override path '{path}' does not exist")
            node = node[k]
        if not isinstance(node, dict) or keys[-1] not in node:
            raise ConfigError(f"override path '{path}' does not exist")
        node[keys[-1]] = _parse_scalar(text.strip())
    return out


def load_raw(path) -> dict:
    try:
        with open(path, "r") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if raw is None:
        raise ConfigError(f"config file {path} is empty")
    return raw


def load_config(path, overrides=None) -> ScenarioConfig:
    raw = load_raw(path)
    if overrides:
        raw = apply_overrides(raw, overrides)
    return config_from_dict(raw)


def resolved_dict(config: ScenarioConfig) -> dict:
    """Plain-dict echo of a config, suitable for metadata files."""

    def region_dict(r):
        return {"x_min": r.x_min, "x_max": r.x_max, "y_min": r.y_min, "y_max": r.y_max}

    return {
        "name": config.name,
        "sim": {"dt": config.sim.dt, "steps": config.sim.steps, "seed": config.sim.seed},
        "dynamics": {
            "wheelbase": config.dynamics.wheelbase,
            "accel_limits": list(config.dynamics.accel_limits),
            "steer_limits": list(config.dynamics.steer_limits),
            "v_min": config.dynamics.v_min,
        },
        "road": {"y_min": config.road.y_min, "y_max": config.road.y_max,
                 "margin": config.road.margin},
        "cost": {f: getattr(config.cost, f) for f in CostParams.__dataclass_fields__},
        "obstacles": [
            {"x": o.x, "y": o.y, "radius": o.radius, "clearance": o.clearance}
            for o in config.obstacles
        ],
        "agents": [
            {
                "x0": [float(v) for v in a.x0],
                "planner": a.planner,
                "options": [
                    {"weight": o.weight, "region": region_dict(o.region)}
                    for o in a.options
                ],
            }
            for a in config.agents
        ],
        "ilq": {f: getattr(config.ilq, f) for f in IlqParams.__dataclass_fields__},
        "opinion": {f: getattr(config.opinion, f)
                    for f in OpinionParams.__dataclass_fields__},
    }


def bundled_config_path(name: str):
    """Path of a packaged scenario (e.g. ``toll_homogeneous``)."""
    resource = importlib.resources.files("opiniongames") / "configs" / f"{name}.yaml"
    if not resource.is_file():
        raise ConfigError(f"no bundled config named '{name}'")
    return resource
