"""Buildable descriptions of models, graphs and protocol settings.

A spec whose ``seed`` is ``None`` draws a fresh instance per run seed, using
a sub-seed derived from the run seed (see :func:`derived_seed`).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Optional

import numpy as np

from . import graph as graphs
from .beliefs import DEFAULT_ALPHA
from .model import REFERENCE_ROWS, HypothesisModel, permuted_model
from .protocols import PROTOCOLS
from .schedule import EpochSchedule, parse_schedule

# spawn-key prefixes used to split one run seed into independent streams
SIGNAL_STREAM = 0
GRAPH_STREAM = 1
MODEL_STREAM = 2


def derived_seed(seed: int, *key: int) -> int:
    """A 64-bit seed obtained from ``seed`` along the spawn path ``key``."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(key))
    return int(seq.generate_state(2, dtype=np.uint32).view(np.uint64)[0])


@dataclass(frozen=True)
class ModelSpec:
    """Either explicit per-agent tables or a permutation generator."""

    kind: str = "permutation"  # "permutation" | "explicit"
    num_agents: Optional[int] = None  # permutation only; None -> graph size
    base: tuple[tuple[float, ...], ...] = tuple(map(tuple, REFERENCE_ROWS.tolist()))
    tables: Optional[tuple] = None
    seed: Optional[int] = None
    permute_first: bool = False
    max_tries: int = 100

    def build(self, run_seed: int, num_agents: int) -> HypothesisModel:
        if self.kind == "explicit":
            return HypothesisModel(tuple(np.asarray(t, dtype=float) for t in self.tables))
        n = self.num_agents or num_agents
        seed = self.seed if self.seed is not None else derived_seed(run_seed, MODEL_STREAM)
        return permuted_model(
            self.base, n, seed, permute_first=self.permute_first, max_tries=self.max_tries
        )


@dataclass(frozen=True)
class GraphSpec:
    kind: str = "geometric"  # geometric | ring | complete | custom
    n: int = 200
    radius: float = 0.15
    edges: Optional[tuple[tuple[int, int], ...]] = None
    seed: Optional[int] = None
    max_tries: int = 100

    def build(self, run_seed: int) -> tuple[graphs.DirectedGraph, Optional[np.ndarray]]:
        if self.kind == "geometric":
            seed = self.seed if self.seed is not None else derived_seed(run_seed, GRAPH_STREAM)
            g, pos, _ = graphs.connected_geometric(self.n, self.radius, seed, self.max_tries)
            return g, pos
        if self.kind == "custom":
            return graphs.generate_named("custom", n=self.n, edges=self.edges or ()), None
        return graphs.generate_named(self.kind, n=self.n), None


@dataclass(frozen=True)
class ProtocolConfig:
    name: str = "poe"
    schedule: Optional[str] = None  # None -> protocol default
    alpha: float = DEFAULT_ALPHA
    bits_per_entry: int = 64
    include_own_mu: bool = False

    def __post_init__(self):
        if self.name not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.name!r}; choose from {', '.join(PROTOCOLS)}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.bits_per_entry < 1:
            raise ValueError("bits_per_entry must be positive")

    def payload_bits(self, num_states: int) -> int:
        """Bits in one broadcast: m for binary vectors, m * b for beliefs."""
        if self.name == "min-rule":
            return num_states * self.bits_per_entry
        return num_states

    def default_schedule(self, diameter: int) -> str:
        if self.name == "poe":
            return "linear"
        if self.name == "poe-fc":
            return f"constant:{max(2 * diameter, 1)}"
        return "constant:1"

    def make_schedule(self, horizon: int, diameter: int) -> EpochSchedule:
        return parse_schedule(self.schedule or self.default_schedule(diameter), horizon)


@dataclass(frozen=True)
class Scenario:
    model: ModelSpec = field(default_factory=ModelSpec)
    graph: GraphSpec = field(default_factory=GraphSpec)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    true_state: int = 2
    horizon: int = 2000
    check_identifiability: bool = True

    def instance(self, run_seed: int):
        """Concrete (model, graph, positions) for one run seed."""
        g, pos = self.graph.build(run_seed)
        model = self.model.build(run_seed, g.num_nodes)
        return model, g, pos

    def with_protocol(self, **changes: Any) -> "Scenario":
        return replace(self, protocol=replace(self.protocol, **changes))

