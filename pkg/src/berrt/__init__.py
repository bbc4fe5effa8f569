"""Batched-extension RRT# with policy-iteration replanning."""

from .estimator import BatchedPlanner
from .planner import PlannerConfig, PlanResult, pirrt, plan
from .world import State, World, bundled_scenario, load_scenario

__all__ = [
    "BatchedPlanner",
    "PlanResult",
    "PlannerConfig",
    "State",
    "World",
    "bundled_scenario",
    "load_scenario",
    "pirrt",
    "plan",
]

__version__ = "0.1.0"
