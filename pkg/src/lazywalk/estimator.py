"""Estimator-style wrappers: absorption time as a function of laziness."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .chain import AgentClass, LazinessPolicy, build_chain, get_template, parse_goal, resolve_start
from .graph import Graph, parse_graph_spec
from .optimize import minimize_2d, minimize_scalar
from .solver import NonAbsorbingError, batch_expected_time, expected_time


def _setup(est):
    graph = est.graph if isinstance(est.graph, Graph) else parse_graph_spec(est.graph)
    goal = parse_goal(est.goal) if isinstance(est.goal, str) else est.goal
    if not isinstance(est.agents, int) or est.agents < 1:
        raise ValueError(f"agents must be a positive int, got {est.agents!r}")
    classes = (AgentClass(est.agents),)
    return graph, goal, classes, resolve_start(graph, classes, goal, est.start)


class AbsorptionTimeModel(BaseEstimator):
    """Exact expected absorption time for one agent class.

    ``fit`` compiles the chain; ``predict(X)`` maps rows of laziness values
    (one column for a common ``p``, more for ``p_1, p_2, ...``) to times.
    Rows whose chain cannot absorb from the start predict ``inf``.
    """

    def __init__(self, graph="cycle:5", agents=2, goal="distance:2", start="random"):
        self.graph = graph
        self.agents = agents
        self.goal = goal
        self.start = start

    def fit(self, X=None, y=None):
        self.graph_, self.goal_, self.classes_, self.start_ = _setup(self)
        return self

    def predict(self, X):
        check_is_fitted(self, "graph_")
        X = check_array(X, ensure_min_features=1)
        if ((X < 0) | (X > 1)).any():
            raise ValueError("laziness values must lie in [0, 1]")
        return np.array([self._time(tuple(row)) for row in X])

    def _batch(self, width: int):
        template = get_template(self.graph_, self.classes_, self.goal_, (width,))
        return lambda pts: batch_expected_time(template, np.asarray(pts).reshape(-1, width), self.start_)

    def _time(self, pk: tuple[float, ...]) -> float:
        policy = LazinessPolicy.population(pk, 1)
        try:
            return expected_time(build_chain(self.graph_, self.classes_, policy, self.goal_, self.start_))
        except NonAbsorbingError:
            return np.inf


class LazinessOptimizer(BaseEstimator):
    """Laziness minimising the expected absorption time from ``start``.

    With ``population=True`` the stay probability depends on the node
    population (``p_1`` alone, ``p_2`` shared) and both are optimised.
    """

    def __init__(
        self, graph="cycle:5", agents=2, goal="distance:2", start="random",
        population=False, tol=1e-8, grid_step=1e-3,
    ):
        self.graph = graph
        self.agents = agents
        self.goal = goal
        self.start = start
        self.population = population
        self.tol = tol
        self.grid_step = grid_step

    def fit(self, X=None, y=None):
        model = AbsorptionTimeModel(self.graph, self.agents, self.goal, self.start).fit()
        if self.population:
            res = minimize_2d(
                lambda a, b: model._time((a, b)), tol=self.tol, grid_step=self.grid_step,
                batch=model._batch(2),
            )
            self.best_params_ = {"p1": res.argmin[0], "p2": res.argmin[1]}
        else:
            res = minimize_scalar(
                lambda p: model._time((p,)), tol=self.tol, grid_step=self.grid_step,
                batch=model._batch(1),
            )
            self.best_params_ = {"p": res.argmin}
        self.best_time_ = res.value
        self.result_ = res
        self.model_ = model
        return self
