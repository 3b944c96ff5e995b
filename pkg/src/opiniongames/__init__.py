"""Opinion-driven coordination for multi-vehicle games.

The package couples three layers:

* an iterative linear-quadratic solver that computes feedback Nash
  policies and quadratic value functions for every intent combination
  ("subgame") of a parameterized general-sum game,
* opinion dynamics whose coupling gains are synthesized from the value
  functions, together with attention dynamics driven by the price of
  indecision,
* receding-horizon QMDP planners (a convex-QP level-0 policy and a
  two-step opinion-steering level-1 policy) plus the simulation loop
  that ties everything together.

A small stability toolkit covers the two-player two-option theory.
"""

__version__ = "0.1.0"

from . import cost, dynamics, ilq, opinion, planner, scenario, sim, stability

__all__ = [
    "cost",
    "dynamics",
    "ilq",
    "opinion",
    "planner",
    "scenario",
    "sim",
    "stability",
    "__version__",
]
