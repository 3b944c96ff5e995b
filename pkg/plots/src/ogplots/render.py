"""Multi-panel figure assembly."""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib import patches

from .schema import load_log, load_metadata, option_counts

AGENT_COLORS = ["#1f6fb4", "#d45500"]
OPTION_STYLES = ["-", "--", ":"]


@dataclass
class RenderSummary:
    output: str
    snapshot_times: list
    n_timeseries_panels: int
    n_agents: int
    rows: int = 0
    extras: dict = field(default_factory=dict)


def _axis_color(i):
    return AGENT_COLORS[i % len(AGENT_COLORS)]


def _draw_scene(ax, meta, log, counts, snapshot_interval):
    scenario = meta["scenario"]
    road = scenario["road"]
    n = len(counts)
    xs = np.concatenate([log[f"x{i + 1}_px"] for i in range(n)])
    x_lo = float(xs.min()) - 2.0
    x_hi = float(xs.max()) + 3.0

    ax.axhline(road["y_min"], color="0.25", lw=1.5)
    ax.axhline(road["y_max"], color="0.25", lw=1.5)
    for agent in scenario["agents"][:1]:
        # regions are shared across agents in the toll scenarios; draw once
        for k, opt in enumerate(agent["options"]):
            r = opt["region"]
            ax.add_patch(patches.Rectangle(
                (r["x_min"], r["y_min"]), r["x_max"] - r["x_min"],
                r["y_max"] - r["y_min"], facecolor="#b6e3b6", edgecolor="green",
                alpha=0.5, lw=0.8))
            ax.text(r["x_min"] + 0.2, r["y_max"] - 0.45, f"booth {k + 1}",
                    fontsize=7, color="darkgreen")
    for obs in scenario.get("obstacles", []):
        ax.add_patch(patches.Circle((obs["x"], obs["y"]), obs["radius"],
                                    facecolor="0.4", edgecolor="0.2"))

    times = log["time"]
    dt = float(times[1] - times[0]) if len(times) > 1 else 1.0
    stride = max(int(round(snapshot_interval / dt)), 1)
    snap_idx = list(range(0, len(times), stride))
    for i in range(n):
        px, py = log[f"x{i + 1}_px"], log[f"x{i + 1}_py"]
        phi = log[f"x{i + 1}_phi"]
        color = _axis_color(i)
        ax.plot(px, py, color=color, lw=1.2, label=f"car {i + 1}")
        for k in snap_idx:
            ax.plot(px[k], py[k], marker=(3, 0, np.degrees(phi[k]) - 90),
                    markersize=9, color=color, alpha=0.85)
    ax.set_xlim(x_lo, x_hi)
    ax.set_ylim(road["y_min"] - 0.8, road["y_max"] + 0.8)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.legend(loc="upper left", fontsize=7)
    return [float(times[k]) for k in snap_idx]


def _draw_series(ax, log, counts, prefix, ylabel, per_option=True):
    times = log["time"]
    for i in range(len(counts)):
        color = _axis_color(i)
        if per_option:
            for k in range(counts[i]):
                ax.plot(times, log[f"{prefix}{i + 1}_{k + 1}"],
                        OPTION_STYLES[k % len(OPTION_STYLES)], color=color,
                        lw=1.0, label=f"car {i + 1} opt {k + 1}")
        else:
            ax.plot(times, log[f"{prefix}{i + 1}"], color=color, lw=1.0,
                    label=f"car {i + 1}")
    ax.set_ylabel(ylabel, fontsize=8)
    ax.tick_params(labelsize=7)
    ax.legend(loc="upper left", fontsize=6, ncol=2)


def render(csv_path, meta_path, out_path, snapshot_interval=3.0,
           dpi=110) -> RenderSummary:
    """Render the standard run figure and write it to ``out_path``.

    Returns a summary of what was drawn. Output bytes are deterministic
    for fixed inputs and settings (the PNG software tag is stripped).
    """
    if snapshot_interval <= 0:
        raise ValueError("snapshot interval must be positive")
    meta = load_metadata(meta_path)
    log = load_log(csv_path, meta)
    counts = option_counts(meta)

    fig = plt.figure(figsize=(8.0, 10.0))
    gs = fig.add_gridspec(5, 1, height_ratios=[2.2, 1, 1, 1, 1], hspace=0.45)
    ax_scene = fig.add_subplot(gs[0])
    snap_times = _draw_scene(ax_scene, meta, log, counts, snapshot_interval)
    ax_scene.set_title(meta["scenario"].get("name", "run"), fontsize=10)

    ax_z = fig.add_subplot(gs[1])
    _draw_series(ax_z, log, counts, "z", "opinion z")
    ax_s = fig.add_subplot(gs[2], sharex=ax_z)
    _draw_series(ax_s, log, counts, "sigma", "softmax(z)")
    ax_s.set_ylim(-0.05, 1.05)
    ax_l = fig.add_subplot(gs[3], sharex=ax_z)
    _draw_series(ax_l, log, counts, "lambda", "attention", per_option=False)
    ax_p = fig.add_subplot(gs[4], sharex=ax_z)
    _draw_series(ax_p, log, counts, "poi", "price of indecision",
                 per_option=False)
    ax_p.set_xlabel("time [s]")

    fig.savefig(out_path, dpi=dpi, metadata={"Software": None})
    plt.close(fig)
    return RenderSummary(
        output=str(out_path),
        snapshot_times=snap_times,
        n_timeseries_panels=4,
        n_agents=len(counts),
        rows=len(log["time"]),
    )
