import numpy as np
import pytest

from opiniongames.scenario import bundled_config_path, config_from_dict, load_config


def make_scenario(**over):
    """Small two-agent toll-like scenario for unit tests (cheap to solve)."""
    raw = {
        "name": "mini",
        "sim": {"dt": 0.2, "steps": 10, "seed": 0},
        "dynamics": {"wheelbase": 2.8, "accel_limits": [-5.0, 5.0],
                     "steer_limits": [-0.8, 0.8], "v_min": 0.0},
        "road": {"y_min": 0.0, "y_max": 7.0, "margin": 0.7},
        "cost": {"v_ref": 3.0, "w_speed": 2.0, "w_accel": 1.0, "w_steer": 4.0,
                 "w_collision": 15.0, "d_safe": 3.5, "w_road": 10.0,
                 "w_obstacle": 10.0, "kappa": 5.0},
        "obstacles": [{"x": 32.0, "y": 3.5, "radius": 1.0, "clearance": 1.0}],
        "agents": [
            {"x0": [0.0, 5.0, 0.0, 3.0], "planner": "l0", "options": [
                {"weight": 15.0, "region": {"x_min": 29.0, "x_max": 37.0,
                                            "y_min": 4.2, "y_max": 6.6}},
                {"weight": 15.0, "region": {"x_min": 29.0, "x_max": 37.0,
                                            "y_min": 0.4, "y_max": 2.8}},
            ]},
            {"x0": [5.0, 2.0, 0.0, 3.0], "planner": "l0", "options": [
                {"weight": 15.0, "region": {"x_min": 29.0, "x_max": 37.0,
                                            "y_min": 4.2, "y_max": 6.6}},
                {"weight": 15.0, "region": {"x_min": 29.0, "x_max": 37.0,
                                            "y_min": 0.4, "y_max": 2.8}},
            ]},
        ],
        "ilq": {"horizon": 10, "max_iters": 50, "tol": 1.0e-3,
                "line_search_halvings": 10},
        "opinion": {"damping": 0.2, "attention_damping": 2.0,
                    "attention_scale": 5.0, "epsilon": 1.0e-2,
                    "seed_tilt": 0.1, "lambda0": 0.0},
    }

    def deep_update(dst, src):
        for k, v in src.items():
            if isinstance(v, dict) and isinstance(dst.get(k), dict):
                deep_update(dst[k], v)
            else:
                dst[k] = v

    deep_update(raw, over)
    return config_from_dict(raw)


@pytest.fixture
def scenario():
    return make_scenario()


@pytest.fixture
def homogeneous_config():
    return load_config(bundled_config_path("toll_homogeneous"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
