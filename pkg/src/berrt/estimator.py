"""Estimator-style wrapper around :func:`berrt.planner.plan`."""

from __future__ import annotations

from pathlib import Path

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .planner import PlannerConfig, plan
from .world import World, load_scenario


class BatchedPlanner(BaseEstimator):
    """Plan a path through a world with batched extension and policy iteration.

    Hyperparameters mirror :class:`PlannerConfig`. ``fit`` takes a :class:`World`
    or a scenario file path and sets ``path_``, ``path_cost_`` and ``result_``.
    """

    def __init__(self, n_samples=1000, batch_size=1, epsilon=1e-6, steer_range=None,
                 gamma=None, seed=0, backend="serial", workers=None, validate=False):
        self.n_samples = n_samples
        self.batch_size = batch_size
        self.epsilon = epsilon
        self.steer_range = steer_range
        self.gamma = gamma
        self.seed = seed
        self.backend = backend
        self.workers = workers
        self.validate = validate

    def _config(self) -> PlannerConfig:
        return PlannerConfig(**self.get_params())

    def fit(self, world, y=None):
        if isinstance(world, (str, Path)):
            world = load_scenario(world)
        if not isinstance(world, World):
            raise TypeError(f"expected a World or scenario path, got {type(world).__name__}")
        self.result_ = plan(world, self._config())
        self.path_ = self.result_.path
        self.path_cost_ = self.result_.path_cost
        return self

    @property
    def g_goal_(self) -> float:
        check_is_fitted(self, "result_")
        return self.result_.g_goal
