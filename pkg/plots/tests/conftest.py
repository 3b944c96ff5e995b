import numpy as np
import pytest
import yaml


def synthetic_run(tmp_path, steps=31, dt=0.2, n_agents=2, n_options=2):
    """Schema-conforming synthetic log + metadata for renderer tests."""
    meta = {
        "scenario": {
            "name": "synthetic",
            "sim": {"dt": dt, "steps": steps, "seed": 0},
            "road": {"y_min": 0.0, "y_max": 7.0, "margin": 0.7},
            "obstacles": [{"x": 27.0, "y": 3.5, "radius": 0.6, "clearance": 0.4}],
            "agents": [
                {
                    "x0": [0.0, 5.0 - 3.0 * i, 0.0, 3.0],
                    "planner": "l0",
                    "options": [
                        {"weight": 15.0,
                         "region": {"x_min": 26.0, "x_max": 28.0,
                                    "y_min": 4.4, "y_max": 6.5}},
                        {"weight": 15.0,
                         "region": {"x_min": 26.0, "x_max": 28.0,
                                    "y_min": 0.5, "y_max": 2.6}},
                    ][:n_options],
                }
                for i in range(n_agents)
            ],
        },
        "rows": steps,
        "error": None,
    }
    times = dt * np.arange(steps)
    cols = {"t": np.arange(steps), "time": times}
    for i in range(n_agents):
        a = i + 1
        cols[f"x{a}_px"] = 3.0 * times + 2.0 * i
        cols[f"x{a}_py"] = np.full(steps, 5.0 - 3.0 * i)
        cols[f"x{a}_phi"] = np.zeros(steps)
        cols[f"x{a}_v"] = np.full(steps, 3.0)
        cols[f"u{a}_accel"] = np.zeros(steps)
        cols[f"u{a}_steer"] = np.zeros(steps)
        for k in range(n_options):
            cols[f"z{a}_{k + 1}"] = 0.01 + 0.05 * times * (1 if k == i else -1)
            cols[f"sigma{a}_{k + 1}"] = 0.5 + 0.01 * times * (1 if k == i else -1)
        cols[f"lambda{a}"] = 0.1 * times
        cols[f"poi{a}"] = 1.0 + 0.2 * times
    header = list(cols)
    rows = np.column_stack([cols[c] for c in header])
    csv_path = tmp_path / "trajectory.csv"
    with open(csv_path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    meta_path = tmp_path / "metadata.yaml"
    meta_path.write_text(yaml.safe_dump(meta, sort_keys=False))
    return csv_path, meta_path


@pytest.fixture
def run_files(tmp_path):
    return synthetic_run(tmp_path)
