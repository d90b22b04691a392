"""Canonical multi-agent states and absorbing Markov chains for lazy random walks.

Every mover (an agent, or a coalesced group under gathering) independently
stays put with its laziness ``p`` or steps to a uniformly chosen neighbour with
probability ``(1 - p) / degree``. Joint moves are mapped to canonical state
keys: one sorted position tuple per agent class, or the sorted set of occupied
nodes when agents coalesce.

Transition probabilities are compiled once per (graph, classes, goal, policy
shape) into monomial terms ``c * prod(p_s**a_s * (1 - p_s)**b_s)`` so that
re-evaluating a chain at new laziness values is a few array operations.
"""

from __future__ import annotations

import itertools
import math
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .graph import Graph, distancing_feasible, grid_node

DEFAULT_MAX_STATES = 2_000_000

StateKey = tuple[tuple[int, ...], ...]

ROLES = ("generic", "searcher", "hider")


class ChainError(ValueError):
    """Bad chain inputs: invalid classes, policy or start specification."""


class InfeasibleGoalError(ChainError):
    pass


class StateCapError(ChainError):
    pass


@dataclass(frozen=True)
class AgentClass:
    count: int = 1
    role: str = "generic"
    name: str | None = None

    def __post_init__(self):
        if self.count < 1:
            raise ChainError(f"class count must be >= 1, got {self.count}")
        if self.role not in ROLES:
            raise ChainError(f"unknown role {self.role!r}")


# Goals -------------------------------------------------------------------


@dataclass(frozen=True)
class Distancing:
    """Absorb once every pair of agents is at least ``D`` hops apart."""

    D: int = 1

    def __post_init__(self):
        if self.D < 1:
            raise ChainError(f"D must be >= 1, got {self.D}")


@dataclass(frozen=True)
class Gathering:
    """Sticky multi-rendezvous: co-located agents merge, absorb at one node."""


@dataclass(frozen=True)
class Capture:
    """Absorb when some searcher shares a node with the hider."""


@dataclass(frozen=True)
class Ownership:
    """Absorb when at least one agent is alone at its node."""


Goal = Union[Distancing, Gathering, Capture, Ownership]


# Laziness ----------------------------------------------------------------


@dataclass(frozen=True)
class LazinessPolicy:
    """Stay probabilities per agent class.

    ``values[c]`` holds one number (plain lazy walk) or a vector
    ``(p_1, ..., p_K)`` where ``p_k`` is used when the agent's node holds ``k``
    agents in total; populations above ``K`` reuse ``p_K``.
    """

    values: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        vals = tuple(tuple(float(x) for x in v) for v in self.values)
        object.__setattr__(self, "values", vals)
        for v in vals:
            if not v:
                raise ChainError("empty laziness vector")
            for x in v:
                if not 0.0 <= x <= 1.0 or math.isnan(x):
                    raise ChainError(f"laziness {x} outside [0, 1]")

    @classmethod
    def common(cls, p: float, n_classes: int = 1) -> "LazinessPolicy":
        return cls(tuple((p,) for _ in range(n_classes)))

    @classmethod
    def per_class(cls, *ps: float | Sequence[float]) -> "LazinessPolicy":
        return cls(tuple((x,) if np.isscalar(x) else tuple(x) for x in ps))

    @classmethod
    def population(cls, pk: Sequence[float], n_classes: int = 1) -> "LazinessPolicy":
        return cls(tuple(tuple(pk) for _ in range(n_classes)))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(v) for v in self.values)

    def stay(self, cls_index: int, population: int = 1) -> float:
        v = self.values[cls_index]
        return v[min(population, len(v)) - 1]

    def flat(self) -> np.ndarray:
        return np.array([x for v in self.values for x in v], dtype=float)

    @property
    def frozen(self) -> bool:
        return all(x == 1.0 for v in self.values for x in v)


# Canonical states --------------------------------------------------------


def parse_goal(text: str):
    kind, _, arg = text.partition(":")
    if kind in ("distance", "distancing"):
        try:
            return Distancing(int(arg or 1))
        except ValueError:
            raise ChainError(f"bad distance goal {text!r}") from None
    if kind in ("gather", "gathering"):
        return Gathering()
    if kind == "capture":
        return Capture()
    if kind in ("own", "ownership"):
        return Ownership()
    raise ChainError(f"unknown goal {text!r}")


def _check_classes(classes: Sequence[AgentClass], goal: Goal) -> tuple[AgentClass, ...]:
    classes = tuple(classes)
    if not classes:
        raise ChainError("need at least one agent class")
    hiders = [c for c in classes if c.role == "hider"]
    if len(hiders) > 1:
        raise ChainError("at most one hider class")
    if isinstance(goal, Capture):
        if len(hiders) != 1 or hiders[0].count != 1:
            raise ChainError("capture needs exactly one hider class of count 1")
        if not any(c.role == "searcher" for c in classes):
            raise ChainError("capture needs a searcher class")
    if isinstance(goal, Gathering) and len(classes) != 1:
        raise ChainError("gathering takes a single agent class")
    return classes


def total_agents(classes: Sequence[AgentClass]) -> int:
    return sum(c.count for c in classes)


def canonical_key(classes: Sequence[AgentClass], goal: Goal, positions: Sequence[int]) -> StateKey:
    """Canonical state of a labelled placement (agents listed class by class)."""
    positions = [int(x) for x in positions]
    if len(positions) != total_agents(classes):
        raise ChainError(f"expected {total_agents(classes)} positions, got {len(positions)}")
    if isinstance(goal, Gathering):
        return (tuple(sorted(set(positions))),)
    key = []
    i = 0
    for c in classes:
        key.append(tuple(sorted(positions[i:i + c.count])))
        i += c.count
    return tuple(key)


def _flat(key: StateKey) -> list[int]:
    return [v for part in key for v in part]


def is_absorbing(graph: Graph, classes: Sequence[AgentClass], goal: Goal, key: StateKey) -> bool:
    if isinstance(goal, Gathering):
        return len(key[0]) == 1
    if isinstance(goal, Distancing):
        nodes = _flat(key)
        dist = graph.distances
        return all(
            dist[a, b] >= goal.D for i, a in enumerate(nodes) for b in nodes[i + 1:]
        )
    if isinstance(goal, Capture):
        h = next(i for i, c in enumerate(classes) if c.role == "hider")
        hider = key[h][0]
        return any(
            hider in key[i] for i, c in enumerate(classes) if c.role == "searcher"
        )
    if isinstance(goal, Ownership):
        return 1 in Counter(_flat(key)).values()
    raise ChainError(f"unknown goal {goal!r}")


def count_states(graph: Graph, classes: Sequence[AgentClass], goal: Goal) -> int:
    if isinstance(goal, Gathering):
        m = total_agents(classes)
        return sum(math.comb(graph.n, k) for k in range(1, min(m, graph.n) + 1))
    return math.prod(math.comb(graph.n + c.count - 1, c.count) for c in classes)


def _check_goal(graph: Graph, classes: Sequence[AgentClass], goal: Goal) -> None:
    if isinstance(goal, Distancing):
        m = total_agents(classes)
        if not distancing_feasible(graph, goal.D, m):
            raise InfeasibleGoalError(
                f"no placement of {m} agents with pairwise distance >= {goal.D}"
            )


def enumerate_states(
    graph: Graph,
    classes: Sequence[AgentClass],
    goal: Goal,
    max_states: int = DEFAULT_MAX_STATES,
) -> tuple[list[StateKey], list[StateKey]]:
    """All canonical states, split into (transient, absorbing) lists."""
    classes = _check_classes(classes, goal)
    _check_goal(graph, classes, goal)
    size = count_states(graph, classes, goal)
    if size > max_states:
        raise StateCapError(f"{size} states exceeds cap {max_states}")
    if isinstance(goal, Gathering):
        m = total_agents(classes)
        keys: Iterable[StateKey] = (
            (combo,)
            for k in range(1, min(m, graph.n) + 1)
            for combo in itertools.combinations(range(graph.n), k)
        )
    else:
        keys = itertools.product(
            *(itertools.combinations_with_replacement(range(graph.n), c.count) for c in classes)
        )
    transient, absorbing = [], []
    for key in keys:
        (absorbing if is_absorbing(graph, classes, goal, key) else transient).append(key)
    return transient, absorbing


# One-step dynamics -------------------------------------------------------


def _movers(classes: Sequence[AgentClass], goal: Goal, key: StateKey) -> list[tuple[int, int, int]]:
    """(class index, node, population) for every independent mover."""
    if isinstance(goal, Gathering):
        return [(0, v, 1) for v in key[0]]
    pop = Counter(_flat(key))
    return [(ci, v, pop[v]) for ci, part in enumerate(key) for v in part]


def _symbolic_step(graph, classes, goal, key, offsets, shape):
    """Successor terms as {(succ, stays, moves): coefficient}.

    ``stays``/``moves`` are tuples of parameter indices (with repetition) whose
    laziness / speed factors multiply the coefficient.
    """
    movers = _movers(classes, goal, key)
    options = []
    for ci, v, k in movers:
        sym = offsets[ci] + min(k, shape[ci]) - 1
        deg = graph.degree(v)
        opts = [(v, sym, True, 1.0)]
        opts.extend((w, sym, False, 1.0 / deg) for w in graph.adjacency[v])
        options.append(opts)
    terms: dict = defaultdict(float)
    gathering = isinstance(goal, Gathering)
    for combo in itertools.product(*options):
        coef = 1.0
        stays, moves = [], []
        new_pos = []
        for node, sym, stay, w in combo:
            coef *= w
            (stays if stay else moves).append(sym)
            new_pos.append(node)
        if gathering:
            succ = (tuple(sorted(set(new_pos))),)
        else:
            succ, i = [], 0
            for part in key:
                succ.append(tuple(sorted(new_pos[i:i + len(part)])))
                i += len(part)
            succ = tuple(succ)
        terms[(succ, tuple(sorted(stays)), tuple(sorted(moves)))] += coef
    return terms


def _offsets(shape: Sequence[int]) -> list[int]:
    return [0, *itertools.accumulate(shape)][:-1]


def _check_policy(classes, policy: LazinessPolicy) -> None:
    if len(policy.values) != len(classes):
        raise ChainError(
            f"policy has {len(policy.values)} class entries, expected {len(classes)}"
        )


def step_distribution(
    graph: Graph,
    classes: Sequence[AgentClass],
    state: StateKey,
    policy: LazinessPolicy,
    goal: Goal,
) -> dict[StateKey, float]:
    """One-period successor distribution of a canonical state."""
    classes = _check_classes(classes, goal)
    _check_policy(classes, policy)
    shape = policy.shape
    theta = policy.flat()
    out: dict[StateKey, float] = defaultdict(float)
    for (succ, stays, moves), coef in _symbolic_step(
        graph, classes, goal, state, _offsets(shape), shape
    ).items():
        val = coef
        for s in stays:
            val *= theta[s]
        for s in moves:
            val *= 1.0 - theta[s]
        if val:
            out[succ] += val
    return dict(out)


# Start distributions -----------------------------------------------------


def named_placement(graph: Graph, name: str, m: int) -> list[int]:
    """Per-agent start nodes for the named placements used in the analyses.

    ``gathered``/``corner``/``left``: everyone at node 0. ``center``: grid
    cell ``(floor(k/2), floor(k/2))`` counted from 0, so the true centre for
    odd ``k``; line node ``floor(n/2)`` counted from 1.
    ``adjacent``: two agents on the endpoints of an edge at node 0.
    """
    if name in ("gathered", "corner", "left"):
        return [0] * m
    if name == "center":
        if graph.family == "grid":
            k = math.isqrt(graph.n)
            return [grid_node(k, k // 2 + 1, k // 2 + 1)] * m
        if graph.family == "line":
            return [graph.n // 2 - 1] * m
        return [0] * m
    if name == "adjacent":
        if m != 2:
            raise ChainError("'adjacent' start is defined for two agents")
        return [0, graph.adjacency[0][0]]
    raise ChainError(f"unknown start {name!r}")


def uniform_start(graph: Graph, classes: Sequence[AgentClass], goal: Goal) -> dict[StateKey, float]:
    """Canonical-state law of independent uniform placement of every agent."""
    n = graph.n
    per_class = []
    for c in classes:
        entries = []
        for combo in itertools.combinations_with_replacement(range(n), c.count):
            ways = math.factorial(c.count)
            for mult in Counter(combo).values():
                ways //= math.factorial(mult)
            entries.append((combo, ways / n ** c.count))
        per_class.append(entries)
    out: dict[StateKey, float] = defaultdict(float)
    for combo in itertools.product(*per_class):
        prob = math.prod(w for _, w in combo)
        positions = [v for part, _ in combo for v in part]
        out[canonical_key(classes, goal, positions)] += prob
    return dict(out)


StartSpec = Union[str, Sequence[int], Mapping[StateKey, float], None]


def resolve_start(graph: Graph, classes: Sequence[AgentClass], goal: Goal, start: StartSpec):
    """Turn a start spec into ``{state: probability}``.

    Accepts ``"random"``/``"uniform"``, a named placement, a flat list of
    per-agent positions, or an explicit mapping over canonical states.
    """
    if start is None:
        return None
    if isinstance(start, str):
        if start in ("random", "uniform"):
            return uniform_start(graph, classes, goal)
        positions = named_placement(graph, start, total_agents(classes))
        return {canonical_key(classes, goal, positions): 1.0}
    if isinstance(start, Mapping):
        total = sum(start.values())
        if abs(total - 1.0) > 1e-12:
            raise ChainError(f"start distribution sums to {total}")
        return dict(start)
    for v in start:
        if not 0 <= int(v) < graph.n:
            raise ChainError(f"start node {v} out of range")
    return {canonical_key(classes, goal, start): 1.0}


# Chains ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AbsorbingChain:
    """Transient/absorbing partition with ``B`` (T x T) and ``R`` (T x A).

    ``start`` (optional) is a probability vector over ``transient + absorbing``.
    """

    transient: tuple[StateKey, ...]
    absorbing: tuple[StateKey, ...]
    B: np.ndarray
    R: np.ndarray
    start: np.ndarray | None = None
    frozen: bool = False
    index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.index:
            idx = {k: i for i, k in enumerate(self.transient)}
            idx.update({k: len(self.transient) + j for j, k in enumerate(self.absorbing)})
            object.__setattr__(self, "index", idx)

    @property
    def start_transient(self) -> np.ndarray:
        return self.start[: len(self.transient)]

    @property
    def start_absorbing(self) -> np.ndarray:
        return self.start[len(self.transient):]

    def start_vector(self, dist: Mapping[StateKey, float]) -> np.ndarray:
        vec = np.zeros(len(self.transient) + len(self.absorbing))
        for key, prob in dist.items():
            if key not in self.index:
                raise ChainError(f"start state {key} not in chain")
            vec[self.index[key]] += prob
        return vec

    def with_start(self, dist: Mapping[StateKey, float]) -> "AbsorbingChain":
        return AbsorbingChain(
            self.transient, self.absorbing, self.B, self.R,
            self.start_vector(dist), self.frozen, self.index,
        )


class ChainTemplate:
    """Transition structure compiled once, evaluated for any laziness values."""

    def __init__(
        self,
        graph: Graph,
        classes: Sequence[AgentClass],
        goal: Goal,
        shape: Sequence[int] | None = None,
        max_states: int = DEFAULT_MAX_STATES,
    ):
        self.graph = graph
        self.classes = _check_classes(classes, goal)
        self.goal = goal
        self.shape = tuple(shape) if shape is not None else (1,) * len(self.classes)
        if len(self.shape) != len(self.classes):
            raise ChainError("policy shape does not match classes")
        transient, absorbing = enumerate_states(graph, self.classes, goal, max_states)
        self.transient = tuple(transient)
        self.absorbing = tuple(absorbing)
        t_index = {k: i for i, k in enumerate(self.transient)}
        a_index = {k: i for i, k in enumerate(self.absorbing)}
        offsets = _offsets(self.shape)
        n_par = sum(self.shape)

        rows, cols, to_abs, coefs, stay_exp, move_exp = [], [], [], [], [], []
        for i, key in enumerate(self.transient):
            terms = _symbolic_step(graph, self.classes, goal, key, offsets, self.shape)
            for (succ, stays, moves), coef in terms.items():
                rows.append(i)
                if succ in t_index:
                    cols.append(t_index[succ])
                    to_abs.append(False)
                else:
                    cols.append(a_index[succ])
                    to_abs.append(True)
                coefs.append(coef)
                a = np.zeros(n_par, dtype=np.int64)
                b = np.zeros(n_par, dtype=np.int64)
                for s in stays:
                    a[s] += 1
                for s in moves:
                    b[s] += 1
                stay_exp.append(a)
                move_exp.append(b)
        self._rows = np.array(rows, dtype=np.int64)
        self._cols = np.array(cols, dtype=np.int64)
        self._to_abs = np.array(to_abs, dtype=bool)
        self._coef = np.array(coefs, dtype=float)
        self._stay = np.array(stay_exp, dtype=np.int64).reshape(len(rows), n_par)
        self._move = np.array(move_exp, dtype=np.int64).reshape(len(rows), n_par)
        self._index = {k: i for i, k in enumerate(self.transient)}
        self._index.update({k: len(self.transient) + j for j, k in enumerate(self.absorbing)})
        self._starts: dict = {}

    def term_values(self, theta: np.ndarray) -> np.ndarray:
        """Monomial values for one parameter vector, or a row per vector."""
        theta = np.asarray(theta, dtype=float)
        if theta.ndim == 2:
            th = theta[:, None, :]
            return self._coef * np.prod(th ** self._stay * (1.0 - th) ** self._move, axis=2)
        return self._coef * np.prod(theta ** self._stay * (1.0 - theta) ** self._move, axis=1)

    def batch_matrices(self, thetas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Stacked ``B`` (N x T x T) and ``R`` (N x T x A) for N parameter rows."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        vals = self.term_values(thetas)
        nt, na, n = len(self.transient), len(self.absorbing), len(thetas)
        t_mask = ~self._to_abs
        B = np.zeros((n, nt * nt))
        R = np.zeros((n, nt * na))
        flat_b = self._rows[t_mask] * nt + self._cols[t_mask]
        flat_r = self._rows[self._to_abs] * na + self._cols[self._to_abs]
        for out, flat, v in ((B, flat_b, vals[:, t_mask]), (R, flat_r, vals[:, self._to_abs])):
            order = np.argsort(flat, kind="stable")
            uniq, first = np.unique(flat[order], return_index=True)
            out[:, uniq] = np.add.reduceat(v[:, order], first, axis=1) if len(order) else 0.0
        return B.reshape(n, nt, nt), R.reshape(n, nt, na)

    def start_vector(self, start: StartSpec) -> np.ndarray:
        return self._start_vector(start)

    def chain(self, policy: LazinessPolicy, start: StartSpec = None) -> AbsorbingChain:
        _check_policy(self.classes, policy)
        if policy.shape != self.shape:
            raise ChainError(f"policy shape {policy.shape} != template shape {self.shape}")
        if policy.frozen:
            warnings.warn("every laziness is 1: the chain never moves", RuntimeWarning)
        vals = self.term_values(policy.flat())
        nt, na = len(self.transient), len(self.absorbing)
        B = np.zeros((nt, nt))
        R = np.zeros((nt, na))
        t_mask = ~self._to_abs
        np.add.at(B, (self._rows[t_mask], self._cols[t_mask]), vals[t_mask])
        np.add.at(R, (self._rows[self._to_abs], self._cols[self._to_abs]), vals[self._to_abs])
        chain = AbsorbingChain(
            self.transient, self.absorbing, B, R, None, policy.frozen, self._index
        )
        if start is None:
            return chain
        vec = self._start_vector(start)
        return AbsorbingChain(
            self.transient, self.absorbing, B, R, vec, policy.frozen, self._index
        )

    def _start_vector(self, start: StartSpec) -> np.ndarray:
        try:
            key = start if isinstance(start, str) else tuple(start)
            hash(key)
        except TypeError:
            key = None
        if key is not None and key in self._starts:
            return self._starts[key]
        dist = resolve_start(self.graph, self.classes, self.goal, start)
        vec = np.zeros(len(self.transient) + len(self.absorbing))
        for state, prob in dist.items():
            if state not in self._index:
                raise ChainError(f"start state {state} not in chain")
            vec[self._index[state]] += prob
        vec.flags.writeable = False
        if key is not None:
            self._starts[key] = vec
        return vec


@lru_cache(maxsize=64)
def get_template(graph: Graph, classes: tuple[AgentClass, ...], goal: Goal, shape: tuple[int, ...]) -> ChainTemplate:
    return ChainTemplate(graph, classes, goal, shape)


def build_chain(
    graph: Graph,
    classes: Sequence[AgentClass],
    policy: LazinessPolicy,
    goal: Goal,
    start: StartSpec = None,
) -> AbsorbingChain:
    """Absorbing chain for ``classes`` walking lazily on ``graph`` toward ``goal``."""
    template = get_template(graph, tuple(classes), goal, policy.shape)
    return template.chain(policy, start)
