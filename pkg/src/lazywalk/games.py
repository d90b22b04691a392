"""Search games and the first-to-disperse game built on the chain solver."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .chain import (
    AgentClass,
    Capture,
    LazinessPolicy,
    Ownership,
    build_chain,
)
from .graph import Graph, build_cycle, build_line
from .optimize import UPPER_GUARD, SaddleResult, find_saddle
from .solver import NonAbsorbingError, expected_time, solve

C3 = build_cycle(3)


def _param_grid(step: float) -> np.ndarray:
    n = int(round(1.0 / step))
    xs = np.linspace(0.0, 1.0, n + 1)
    xs[-1] = 1.0 - UPPER_GUARD
    return xs


# Team search -------------------------------------------------------------


@dataclass(frozen=True)
class TeamSearchSpec:
    graph: Graph = C3
    searchers: int = 2
    start: object = "random"
    objective: str = "paper"

    def __post_init__(self):
        if self.searchers < 1:
            raise ValueError("need at least one searcher")
        if self.objective not in ("paper", "conditional"):
            raise ValueError(f"unknown objective {self.objective!r}")

    @property
    def classes(self) -> tuple[AgentClass, AgentClass]:
        return (AgentClass(self.searchers, "searcher"), AgentClass(1, "hider"))


def team_search_T(h: float, s: float, spec: TeamSearchSpec = TeamSearchSpec()) -> float:
    """Expected capture time with hider laziness ``h`` and searcher laziness ``s``.

    ``paper`` weighs each transient start state's time by its start
    probability (already-captured mass counts zero). ``conditional`` divides
    by the probability that the start is not already a capture.
    """
    chain = build_chain(
        spec.graph, spec.classes, LazinessPolicy.per_class(s, h), Capture(), spec.start
    )
    t = expected_time(chain)
    if spec.objective == "paper":
        return t
    live = chain.start_transient.sum()
    return t / live if live > 0 else 0.0


def team_search_saddle(spec: TeamSearchSpec = TeamSearchSpec(), tol: float = 1e-12) -> SaddleResult:
    return find_saddle(lambda h, s: team_search_T(h, s, spec), tol=tol)


# Competitive search ------------------------------------------------------


def one_step_capture_prob(s: float, h: float) -> float:
    """Chance a searcher with laziness ``s`` lands on a C3 hider with laziness
    ``h`` next period, from a different node."""
    return (0.25 - 0.75 * h) * s + 0.25 * (h + 1.0)


@dataclass
class CompetitiveOutcome:
    a3: float
    a4: float
    a5: float
    T: float

    @property
    def payoff_1(self) -> float:
        return self.a4 + self.a5 / 2

    @property
    def payoff_2(self) -> float:
        return self.a3 + self.a5 / 2

    def to_dict(self) -> dict:
        return {
            "a3_searcher2_wins": self.a3,
            "a4_searcher1_wins": self.a4,
            "a5_tie": self.a5,
            "T": self.T,
            "payoff_1": self.payoff_1,
            "payoff_2": self.payoff_2,
        }


COMPETITIVE_CLASSES = (
    AgentClass(1, "searcher", "searcher1"),
    AgentClass(1, "searcher", "searcher2"),
    AgentClass(1, "hider", "hider"),
)


def competitive_shares(r: float, s: float, h: float, graph: Graph = C3) -> CompetitiveOutcome:
    """Win/tie probabilities when searcher 1 uses ``r``, searcher 2 ``s``,
    the hider ``h``, everyone placed uniformly at random."""
    chain = build_chain(
        graph, COMPETITIVE_CLASSES, LazinessPolicy.per_class(r, s, h), Capture(), "random"
    )
    report = solve(chain)
    a = dict.fromkeys((3, 4, 5), 0.0)
    for (s1, s2, hid), prob in zip(chain.absorbing, report.start_absorption):
        one, two = s1[0] == hid[0], s2[0] == hid[0]
        a[5 if one and two else 4 if one else 3] += float(prob)
    return CompetitiveOutcome(a[3], a[4], a[5], report.start_time)


def verify_competitive_equilibrium(
    s_star: float, h: float = 1 / 3, grid_step: float = 0.01
) -> dict:
    """Grid check of the searcher-symmetric profile ``(s*, s*, h)``.

    Violations are how much a unilateral deviation gains: the hider raising
    the capture time, or searcher 1 raising its win-plus-half-tie share.
    """
    if not 0 < grid_step <= 0.1:
        raise ValueError("grid_step must lie in (0, 0.1]")
    base = competitive_shares(s_star, s_star, h)
    grid = _param_grid(grid_step)
    hider = [(competitive_shares(s_star, s_star, x).T - base.T, x) for x in grid]
    searcher = [(competitive_shares(x, s_star, h).payoff_1 - base.payoff_1, x) for x in grid]
    hv, hx = max(hider)
    sv, sx = max(searcher)
    return {
        "profile": [s_star, s_star, h],
        "T": base.T,
        "payoff": base.payoff_1,
        "hider_violation": max(0.0, hv),
        "hider_best_deviation": hx,
        "searcher_violation": max(0.0, sv),
        "searcher_best_deviation": sx,
        "max_violation": max(0.0, hv, sv),
    }


# First-to-disperse -------------------------------------------------------


@dataclass(frozen=True)
class DisperseGameSpec:
    """Player 0 (the deviator) uses ``q``; the other ``n - 1`` players use ``p``."""

    n: int = 3
    q: float = 0.5
    p: float = 0.5
    tie_mode: str = "full_share"

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError("exact disperse game supports n = 2 or 3")
        if self.tie_mode not in ("full_share", "modified"):
            raise ValueError(f"unknown tie mode {self.tie_mode!r}")


def _disperse_outcomes(spec: DisperseGameSpec) -> list[tuple[list[int], float]]:
    """(players alone, probability) for every way the game can end."""
    graph = build_line(spec.n)
    classes = tuple(AgentClass(1, "generic", f"player{i}") for i in range(spec.n))
    policy = LazinessPolicy.per_class(spec.q, *[spec.p] * (spec.n - 1))
    chain = build_chain(graph, classes, policy, Ownership(), [0] * spec.n)
    report = solve(chain)
    out = []
    for key, prob in zip(chain.absorbing, report.start_absorption):
        nodes = [part[0] for part in key]
        pop = Counter(nodes)
        out.append(([i for i, v in enumerate(nodes) if pop[v] == 1], float(prob)))
    return out


def disperse_payoffs(spec: DisperseGameSpec) -> np.ndarray:
    """Expected prize of every player; all start at the end node of L_n.

    Players alone at their node at the first period end where anyone is alone
    split the prize equally. ``modified`` zeroes the deviator's tie share.
    """
    pay = np.zeros(spec.n)
    for alone, prob in _disperse_outcomes(spec):
        for i in alone:
            if spec.tie_mode == "modified" and i == 0 and len(alone) > 1:
                continue
            pay[i] += prob / len(alone)
    return pay


def disperse_payoff(spec: DisperseGameSpec) -> float:
    return float(disperse_payoffs(spec)[0])


def tie_probability(spec: DisperseGameSpec) -> float:
    """Probability the game ends with the deviator sharing the prize."""
    return sum(prob for alone, prob in _disperse_outcomes(spec) if 0 in alone and len(alone) > 1)


def verify_no_symmetric_equilibrium(grid_step: float = 0.01, n: int = 3) -> dict:
    """Certify that every symmetric profile ``(p, ..., p)`` admits a profitable
    deviation (n = 3), or that every such profile pays ``1/2`` each (n = 2)."""
    if grid_step > 0.01:
        raise ValueError("grid_step must be <= 0.01")
    ps = _param_grid(grid_step)
    if n == 2:
        inner = ps[(ps > 0) & (ps < 1.0 - UPPER_GUARD)]
        pays = [disperse_payoffs(DisperseGameSpec(2, p, p)) for p in inner]
        dev = max(float(np.abs(x - 0.5).max()) for x in pays)
        return {"n": 2, "points": len(inner), "max_deviation_from_half": dev}
    qs = np.unique(np.concatenate([[0.0, 1.0], ps]))
    rows = []
    for p in ps:
        best, best_q = -np.inf, None
        for q in qs:
            try:
                val = disperse_payoff(DisperseGameSpec(3, float(q), float(p)))
            except NonAbsorbingError:
                continue
            if val > best:
                best, best_q = val, float(q)
        rows.append({"p": float(p), "best_q": best_q, "payoff": best, "margin": best - 1 / 3})
    worst = min(rows, key=lambda r: r["margin"])
    return {
        "n": 3,
        "points": len(rows),
        "min_margin": worst["margin"],
        "worst_p": worst["p"],
        "rows": rows,
    }
