"""Offline rendering of coordination-run figures from trajectory CSV logs.

Pure post-processor: consumes the simulator's trajectory.csv and
metadata.yaml contract and produces a single multi-panel figure
(top-down vehicle snapshots plus opinion / softmax / attention /
price-of-indecision time series). Nothing is recomputed from dynamics.
"""

__version__ = "0.1.0"

from .render import RenderSummary, render
from .schema import SchemaError, load_log, required_columns

__all__ = ["render", "RenderSummary", "SchemaError", "load_log",
           "required_columns", "__version__"]
