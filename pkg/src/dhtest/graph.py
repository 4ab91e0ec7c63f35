"""Directed agent topologies, generators and hop distances."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

UNREACHABLE = math.inf


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class DirectedGraph:
    """Edge ``(i, j)`` means agent i transmits to agent j. Nodes are 0..n-1."""

    num_nodes: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        if self.num_nodes < 1:
            raise GraphError("graph needs at least one node")
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if not (0 <= i < self.num_nodes and 0 <= j < self.num_nodes):
                raise GraphError(f"edge ({i}, {j}) out of range for {self.num_nodes} nodes")
            if i == j:
                raise GraphError(f"self-loop at node {i}")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_edges(cls, num_nodes: int, edges: Iterable[Iterable[int]]) -> "DirectedGraph":
        pairs = []
        for e in edges:
            e = tuple(e)
            if len(e) != 2:
                raise GraphError(f"malformed edge {e!r}")
            pairs.append(e)
        return cls(num_nodes, frozenset(pairs))

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Boolean matrix with ``adjacency[i, j]`` set iff i transmits to j."""
        a = np.zeros((self.num_nodes, self.num_nodes), dtype=bool)
        for i, j in self.edges:
            a[i, j] = True
        a.setflags(write=False)
        return a

    def in_neighbors(self, i: int) -> list[int]:
        return sorted(j for j, k in self.edges if k == i)

    def out_neighbors(self, i: int) -> list[int]:
        return sorted(k for j, k in self.edges if j == i)

    def out_degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @cached_property
    def metrics(self) -> "GraphMetrics":
        return all_pairs_distances(self)

    @property
    def diameter(self) -> int:
        return self.metrics.diameter


@dataclass(frozen=True)
class GraphMetrics:
    distances: np.ndarray  # float hops, UNREACHABLE where no path
    diameter: int

    @property
    def strongly_connected(self) -> bool:
        return bool(np.all(np.isfinite(self.distances)))


def all_pairs_distances(graph: DirectedGraph) -> GraphMetrics:
    adj = csr_matrix(graph.adjacency.astype(float))
    dist = shortest_path(adj, directed=True, unweighted=True)
    dist.setflags(write=False)
    finite = dist[np.isfinite(dist)]
    return GraphMetrics(dist, int(finite.max()) if finite.size else 0)


def is_strongly_connected(graph: DirectedGraph) -> bool:
    return graph.metrics.strongly_connected


def ring(n: int) -> DirectedGraph:
    """Directed cycle 0 -> 1 -> ... -> n-1 -> 0."""
    if n < 1:
        raise GraphError("ring needs n >= 1")
    if n == 1:
        return DirectedGraph(1, frozenset())
    return DirectedGraph(n, frozenset((i, (i + 1) % n) for i in range(n)))


def complete(n: int) -> DirectedGraph:
    return DirectedGraph(n, frozenset((i, j) for i in range(n) for j in range(n) if i != j))


def generate_named(kind: str, **params) -> DirectedGraph:
    if kind == "ring":
        return ring(int(params["n"]))
    if kind == "complete":
        return complete(int(params["n"]))
    if kind in ("custom", "edges"):
        return DirectedGraph.from_edges(int(params["n"]), params["edges"])
    raise GraphError(f"unknown graph kind {kind!r}")


def generate_geometric(n: int, radius: float, seed: int) -> tuple[DirectedGraph, np.ndarray]:
    """Random geometric graph on the unit square with bidirected proximity edges.

    Two nodes are linked both ways iff their Euclidean distance is at most
    ``radius``. Connectivity is not enforced here.
    """
    if n < 1:
        raise GraphError("geometric graph needs n >= 1")
    if not 0 < radius <= math.sqrt(2):
        raise GraphError(f"radius must lie in (0, sqrt(2)], got {radius}")
    rng = np.random.default_rng(seed)
    pos = rng.random((n, 2))
    diff = pos[:, None, :] - pos[None, :, :]
    close = np.sqrt((diff ** 2).sum(-1)) <= radius
    np.fill_diagonal(close, False)
    ii, jj = np.nonzero(close)
    return DirectedGraph(n, frozenset(zip(ii.tolist(), jj.tolist()))), pos


def connected_geometric(
    n: int, radius: float, seed: int, max_tries: int = 100
) -> tuple[DirectedGraph, np.ndarray, int]:
    """Redraw with derived sub-seeds until strongly connected.

    Returns the graph, node positions and the number of the accepted attempt.
    """
    seq = np.random.SeedSequence(seed)
    for attempt, child in enumerate(seq.spawn(max_tries)):
        graph, pos = generate_geometric(n, radius, child)
        if is_strongly_connected(graph):
            return graph, pos, attempt
    raise GraphError(
        f"no strongly connected geometric graph (n={n}, r={radius}) in {max_tries} attempts"
    )
