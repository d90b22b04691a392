"""Unit-length undirected graphs, hop distances and distancing feasibility."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np


class GraphError(ValueError):
    """Invalid graph construction or malformed edge-list input."""


@dataclass(frozen=True)
class Graph:
    """Connected simple graph on nodes ``0..n-1``.

    Instances are immutable; use the ``build_*`` helpers or :func:`from_edges`
    rather than the constructor so invariants get checked.
    """

    n: int
    adjacency: tuple[tuple[int, ...], ...]
    family: str | None = None

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @property
    def degrees(self) -> list[int]:
        return [len(a) for a in self.adjacency]

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in self.adjacency[u] if u < v]

    @cached_property
    def distances(self) -> np.ndarray:
        return all_pairs_distance(self)

    def __repr__(self) -> str:
        tag = f", family={self.family!r}" if self.family else ""
        return f"Graph(n={self.n}, edges={len(self.edges())}{tag})"


def from_edges(n: int, edges: Iterable[tuple[int, int]], family: str | None = None) -> Graph:
    if n < 1:
        raise GraphError(f"node count must be positive, got {n}")
    nbrs: list[set[int]] = [set() for _ in range(n)]
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge ({u}, {v}) out of range for n={n}")
        if u == v:
            raise GraphError(f"self-loop at node {u}")
        if v in nbrs[u]:
            raise GraphError(f"duplicate edge ({min(u, v)}, {max(u, v)})")
        nbrs[u].add(v)
        nbrs[v].add(u)
    g = Graph(n, tuple(tuple(sorted(s)) for s in nbrs), family)
    if not _is_connected(g):
        raise GraphError("graph is disconnected")
    return g


def _is_connected(g: Graph) -> bool:
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in g.adjacency[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == g.n


def build_line(n: int) -> Graph:
    if n < 2:
        raise GraphError(f"line needs n >= 2, got {n}")
    return from_edges(n, ((i, i + 1) for i in range(n - 1)), "line")


def build_cycle(n: int) -> Graph:
    if n < 3:
        raise GraphError(f"cycle needs n >= 3, got {n}")
    return from_edges(n, ((i, (i + 1) % n) for i in range(n)), "cycle")


def build_complete(n: int) -> Graph:
    if n < 2:
        raise GraphError(f"complete graph needs n >= 2, got {n}")
    return from_edges(n, ((u, v) for u in range(n) for v in range(u + 1, n)), "complete")


def grid_node(k: int, i: int, j: int) -> int:
    """Node index of 1-indexed grid cell ``(i, j)`` in a ``k x k`` grid."""
    if not (1 <= i <= k and 1 <= j <= k):
        raise GraphError(f"cell ({i}, {j}) outside {k}x{k} grid")
    return (i - 1) * k + (j - 1)


def grid_label(k: int, v: int) -> tuple[int, int]:
    return v // k + 1, v % k + 1


def build_grid(k: int) -> Graph:
    if k < 2:
        raise GraphError(f"grid needs k >= 2, got {k}")
    edges = []
    for i in range(1, k + 1):
        for j in range(1, k + 1):
            if j < k:
                edges.append((grid_node(k, i, j), grid_node(k, i, j + 1)))
            if i < k:
                edges.append((grid_node(k, i, j), grid_node(k, i + 1, j)))
    return from_edges(k * k, edges, "grid")


def parse_edge_list(text: str) -> Graph:
    """Parse the edge-list format: node count, then one ``u v`` pair per line.

    ``#`` starts a comment; blank lines are skipped. Pairs must satisfy
    ``0 <= u < v < n``.
    """
    n = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            values = [int(x) for x in parts]
        except ValueError:
            raise GraphError(f"line {lineno}: expected integers, got {line!r}") from None
        if n is None:
            if len(values) != 1:
                raise GraphError(f"line {lineno}: expected node count")
            n = values[0]
            continue
        if len(values) != 2:
            raise GraphError(f"line {lineno}: expected 'u v', got {line!r}")
        u, v = values
        if u == v:
            raise GraphError(f"line {lineno}: self-loop at node {u}")
        if not 0 <= u < v < n:
            raise GraphError(f"line {lineno}: need 0 <= u < v < {n}, got {u} {v}")
        edges.append((u, v))
    if n is None:
        raise GraphError("empty edge list")
    return from_edges(n, edges, "custom")


def all_pairs_distance(g: Graph) -> np.ndarray:
    """BFS hop counts between every pair of nodes, as a read-only int array."""
    dist = np.full((g.n, g.n), -1, dtype=np.int64)
    for src in range(g.n):
        row = dist[src]
        row[src] = 0
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v in g.adjacency[u]:
                if row[v] < 0:
                    row[v] = row[u] + 1
                    queue.append(v)
    dist.setflags(write=False)
    return dist


def min_pairwise_distance(g: Graph, nodes: Iterable[int]) -> int | None:
    """Smallest distance between any two listed nodes (repeats count as 0)."""
    nodes = list(nodes)
    if len(nodes) < 2:
        return None
    dist = g.distances
    return min(int(dist[a, b]) for i, a in enumerate(nodes) for b in nodes[i + 1:])


def distancing_feasible(g: Graph, D: int, m: int) -> bool:
    """True iff some ``m`` nodes are pairwise at distance ``>= D``.

    Exact backtracking over nodes ordered by degree; meant for small graphs.
    """
    if D < 1:
        raise ValueError(f"D must be >= 1, got {D}")
    if m < 1 or m > g.n:
        return False
    if D == 1 or m == 1:
        return True
    dist = g.distances
    order = sorted(range(g.n), key=lambda v: (g.degree(v), v))

    def extend(chosen: list[int], start: int) -> bool:
        if len(chosen) == m:
            return True
        for idx in range(start, len(order)):
            if len(chosen) + len(order) - idx < m:
                return False
            v = order[idx]
            if all(dist[v, c] >= D for c in chosen):
                chosen.append(v)
                if extend(chosen, idx + 1):
                    return True
                chosen.pop()
        return False

    return extend([], 0)


def parse_graph_spec(spec: str) -> Graph:
    """Build a graph from a compact spec such as ``cycle:5`` or ``file:g.txt``."""
    kind, _, arg = spec.partition(":")
    builders = {
        "line": build_line,
        "cycle": build_cycle,
        "grid": build_grid,
        "complete": build_complete,
    }
    if kind == "file":
        with open(arg, encoding="utf-8") as fh:
            return parse_edge_list(fh.read())
    if kind not in builders:
        raise GraphError(f"unknown graph kind {kind!r}")
    try:
        size = int(arg)
    except ValueError:
        raise GraphError(f"bad size in graph spec {spec!r}") from None
    return builders[kind](size)
