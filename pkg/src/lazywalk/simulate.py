"""Seeded Monte Carlo simulation of lazy random walkers.

Trials run vectorised in fixed-size blocks. Block ``b`` of stream ``k`` draws
from ``SeedSequence(seed, spawn_key=(k, b))``, so results depend only on the
configuration and seed, never on how blocks are scheduled across workers.
"""

from __future__ import annotations

import csv
import math
import warnings
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import IO, Sequence

import numpy as np

from .chain import (
    AgentClass,
    ChainError,
    Capture,
    Distancing,
    Gathering,
    Goal,
    LazinessPolicy,
    Ownership,
    named_placement,
    total_agents,
)
from .graph import Graph

BLOCK = 1024
CSV_HEADER = ("p", "mean", "stderr", "trials", "censored")


@dataclass(frozen=True)
class SimConfig:
    graph: Graph
    classes: tuple[AgentClass, ...]
    policy: LazinessPolicy
    goal: Goal
    start: str | tuple[int, ...] = "gathered"
    trials: int = 5000
    max_steps: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if len(self.policy.values) != len(self.classes):
            raise ChainError("policy does not match agent classes")


@dataclass
class SimResult:
    mean_time: float
    std_error: float
    trials: int
    censored_count: int
    histogram: dict[int, int] = field(default_factory=dict)

    @property
    def censored(self) -> bool:
        return self.censored_count > 0

    def to_dict(self) -> dict:
        return {
            "mean_time": self.mean_time,
            "std_error": self.std_error,
            "trials": self.trials,
            "censored_count": self.censored_count,
            "warning": "censored trials excluded from mean" if self.censored else None,
        }


class _Walkers:
    """Array views of the graph and policy used by the vectorised stepper."""

    def __init__(self, cfg: SimConfig):
        g = cfg.graph
        self.n = g.n
        self.m = total_agents(cfg.classes)
        self.deg = np.array(g.degrees)
        self.nbr = np.zeros((g.n, max(self.deg)), dtype=np.int64)
        for v, adj in enumerate(g.adjacency):
            self.nbr[v, : len(adj)] = adj
        width = max(len(v) for v in cfg.policy.values)
        self.lazy = np.array([v + (v[-1],) * (width - len(v)) for v in cfg.policy.values])
        self.width = width
        self.agent_class = np.repeat(np.arange(len(cfg.classes)), [c.count for c in cfg.classes])
        self.goal = cfg.goal
        self.dist = g.distances
        self.gather = isinstance(cfg.goal, Gathering)
        roles = [c.role for c in cfg.classes for _ in range(c.count)]
        self.searchers = np.array([r == "searcher" for r in roles])
        self.hider = roles.index("hider") if "hider" in roles else None
        self.pairs = np.triu_indices(self.m, 1)

    def done(self, pos: np.ndarray) -> np.ndarray:
        goal = self.goal
        if isinstance(goal, Gathering):
            return (pos == pos[:, :1]).all(axis=1)
        if isinstance(goal, Distancing):
            if self.m < 2:
                return np.ones(len(pos), dtype=bool)
            i, j = self.pairs
            return (self.dist[pos[:, i], pos[:, j]] >= goal.D).all(axis=1)
        if isinstance(goal, Capture):
            return (pos[:, self.searchers] == pos[:, [self.hider]]).any(axis=1)
        if isinstance(goal, Ownership):
            same = pos[:, :, None] == pos[:, None, :]
            return (same.sum(axis=2) == 1).any(axis=1)
        raise ChainError(f"unknown goal {goal!r}")

    def step(self, pos: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        rows = len(pos)
        same = pos[:, :, None] == pos[:, None, :]
        u_stay = rng.random((rows, self.m))
        u_move = rng.random((rows, self.m))
        if self.gather:
            k = np.ones_like(pos)
        else:
            k = same.sum(axis=2)
        p = self.lazy[self.agent_class[None, :], np.minimum(k, self.width) - 1]
        deg = self.deg[pos]
        pick = np.minimum((u_move * deg).astype(np.int64), deg - 1)
        new = np.where(u_stay < p, pos, self.nbr[pos, pick])
        if self.gather:
            leader = same.argmax(axis=2)
            new = np.take_along_axis(new, leader, axis=1)
        return new


def _start_positions(cfg: SimConfig, w: _Walkers, rows: int, rng) -> np.ndarray:
    if isinstance(cfg.start, str):
        if cfg.start in ("random", "uniform"):
            return rng.integers(0, w.n, size=(rows, w.m))
        placement = named_placement(cfg.graph, cfg.start, w.m)
    else:
        placement = [int(v) for v in cfg.start]
        if len(placement) != w.m:
            raise ChainError(f"start lists {len(placement)} nodes for {w.m} agents")
        for v in placement:
            if not 0 <= v < w.n:
                raise ChainError(f"start node {v} out of range")
    return np.tile(np.array(placement, dtype=np.int64), (rows, 1))


def _run_block(cfg: SimConfig, w: _Walkers, stream: int, block: int, rows: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(stream, block)))
    pos = _start_positions(cfg, w, rows, rng)
    times = np.full(rows, -1, dtype=np.int64)
    live = np.flatnonzero(~w.done(pos))
    times[~np.isin(np.arange(rows), live)] = 0
    pos = pos[live]
    t = 0
    while len(live) and t < cfg.max_steps:
        t += 1
        pos = w.step(pos, rng)
        fin = w.done(pos)
        times[live[fin]] = t
        live, pos = live[~fin], pos[~fin]
    return times


def simulate(cfg: SimConfig, n_jobs: int = 1, stream: int = 0) -> SimResult:
    """Mean absorption time over ``cfg.trials`` independent trials.

    Trials still running after ``max_steps`` periods are censored: counted
    and excluded from the mean, and a warning is issued.
    """
    w = _Walkers(cfg)
    sizes = [min(BLOCK, cfg.trials - b * BLOCK) for b in range(math.ceil(cfg.trials / BLOCK))]
    jobs = [(b, rows) for b, rows in enumerate(sizes)]
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            parts = list(pool.map(lambda j: _run_block(cfg, w, stream, *j), jobs))
    else:
        parts = [_run_block(cfg, w, stream, *j) for j in jobs]
    times = np.concatenate(parts)
    finished = times[times >= 0]
    censored = int((times < 0).sum())
    if censored:
        warnings.warn(f"{censored} of {cfg.trials} trials hit max_steps", RuntimeWarning)
    if len(finished) == 0:
        return SimResult(math.nan, math.nan, cfg.trials, censored, {})
    mean = float(finished.mean())
    se = float(finished.std(ddof=1) / math.sqrt(len(finished))) if len(finished) > 1 else 0.0
    hist = {int(k): int(v) for k, v in sorted(Counter(finished.tolist()).items())}
    return SimResult(mean, se, cfg.trials, censored, hist)


@dataclass
class SweepRow:
    p: float
    mean: float
    stderr: float
    trials: int
    censored: int


def sweep_p(cfg: SimConfig, p_values: Sequence[float], n_jobs: int = 1) -> list[SweepRow]:
    """One :func:`simulate` run per common laziness value, each on its own stream."""
    rows = []
    for i, p in enumerate(p_values):
        if not 0.0 <= p < 1.0:
            raise ValueError(f"p={p} outside [0, 1)")
        run = replace(cfg, policy=LazinessPolicy.common(float(p), len(cfg.classes)))
        res = simulate(run, n_jobs=n_jobs, stream=i)
        rows.append(SweepRow(float(p), res.mean_time, res.std_error, res.trials, res.censored_count))
    return rows


def write_csv(rows: Sequence[SweepRow], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([repr(r.p), repr(r.mean), repr(r.stderr), r.trials, r.censored])
