"""Brute-force references kept independent of the package's algorithms."""

from __future__ import annotations

import itertools
import math

import numpy as np


def path_distances(n: int, edges) -> list[list[float]]:
    """Shortest hop counts by enumerating every simple directed path."""
    out_nbrs = {i: [j for (a, j) in edges if a == i] for i in range(n)}
    dist = [[math.inf] * n for _ in range(n)]

    def walk(start, node, visited, length):
        if length < dist[start][node]:
            dist[start][node] = length
        for nxt in out_nbrs[node]:
            if nxt not in visited:
                walk(start, nxt, visited | {nxt}, length + 1)

    for s in range(n):
        walk(s, s, {s}, 0)
    return dist


def off_diagonal_pairs(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(n) if i != j]


def all_digraphs(n: int):
    """Every labeled digraph on n nodes as an edge tuple."""
    pairs = off_diagonal_pairs(n)
    for mask in range(1 << len(pairs)):
        yield tuple(p for k, p in enumerate(pairs) if mask >> k & 1)


def digraph_classes(n: int) -> list[tuple[tuple[int, int], ...]]:
    """One labeled representative per isomorphism class of digraphs on n nodes.

    Codes every labeled digraph as a bitmask over off-diagonal pairs and keeps
    the minimum code over all node relabelings.
    """
    pairs = off_diagonal_pairs(n)
    index = {p: k for k, p in enumerate(pairs)}
    codes = np.arange(1 << len(pairs), dtype=np.uint32)
    canon = codes.copy()
    for perm in itertools.permutations(range(n)):
        moved = np.zeros_like(codes)
        for k, (i, j) in enumerate(pairs):
            moved |= ((codes >> np.uint32(k)) & np.uint32(1)) << np.uint32(index[(perm[i], perm[j])])
        np.minimum(canon, moved, out=canon)
    reps = np.unique(canon)
    return [tuple(p for k, p in enumerate(pairs) if int(c) >> k & 1) for c in reps]


def all_bit_assignments(n: int, m: int) -> np.ndarray:
    """All (2^(n m), n, m) boolean arrays."""
    total = n * m
    codes = np.arange(1 << total, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(total)) & 1
    return bits.reshape(-1, n, m).astype(bool)


def candidate_assignments(n: int, m: int, true_state: int) -> np.ndarray:
    """Every assignment of per-agent candidate sets containing ``true_state``
    whose intersection is exactly {true_state}."""
    others = [s for s in range(m) if s != true_state]
    sets = []
    for mask in range(1 << len(others)):
        v = np.zeros(m, dtype=bool)
        v[true_state] = True
        for k, s in enumerate(others):
            if mask >> k & 1:
                v[s] = True
        sets.append(v)
    out = []
    for combo in itertools.product(range(len(sets)), repeat=n):
        stack = np.array([sets[c] for c in combo])
        if stack.all(axis=0).sum() == 1:
            out.append(stack)
    return np.array(out, dtype=bool).reshape(-1, n, m)
