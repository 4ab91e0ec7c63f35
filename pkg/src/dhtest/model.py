"""Hypothesis space, per-agent likelihood tables and distinguishability structure.

States and signals are integer indices starting at 0. A two-symbol signal
space {H, T} maps to {0, 1}.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

KL_TOL = 1e-12
ROW_SUM_TOL = 1e-9


class ModelError(ValueError):
    """Raised when a likelihood table violates the observation model."""


def kl_divergence(p, q) -> float:
    """Relative entropy D(p || q) in nats, with 0 * ln(0 / q) = 0."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    if np.any(q <= 0):
        raise ValueError("q must be strictly positive")
    support = p > 0
    terms = p[support] * np.log(p[support] / q[support])
    return max(float(terms.sum()), 0.0)


@dataclass(frozen=True, eq=False)
class HypothesisModel:
    """Per-agent likelihoods ``likelihoods[i][theta, w] = l_i(w | theta)``.

    Tables are validated on construction and frozen read-only afterwards.
    """

    likelihoods: tuple[np.ndarray, ...]

    def __post_init__(self):
        tables = []
        for i, raw in enumerate(self.likelihoods):
            table = np.array(raw, dtype=float)
            if table.ndim != 2:
                raise ModelError(f"agent {i}: likelihood table must be 2-D (states x signals)")
            tables.append(table)
        if not tables:
            raise ModelError("model needs at least one agent")
        m = tables[0].shape[0]
        if m < 2:
            raise ModelError("model needs at least two states")
        for i, table in enumerate(tables):
            if table.shape[0] != m:
                raise ModelError(f"agent {i}: expected {m} state rows, got {table.shape[0]}")
            if table.shape[1] < 2:
                raise ModelError(f"agent {i}: signal space needs at least two symbols")
            if not np.all(table > 0):
                raise ModelError(f"agent {i}: likelihoods must be strictly positive")
            sums = table.sum(axis=1)
            bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
            if bad.size:
                raise ModelError(
                    f"agent {i}: likelihood row for state {int(bad[0])} sums to {sums[bad[0]]!r}, not 1"
                )
            table.setflags(write=False)
        object.__setattr__(self, "likelihoods", tuple(tables))

    @property
    def num_states(self) -> int:
        return self.likelihoods[0].shape[0]

    @property
    def num_agents(self) -> int:
        return len(self.likelihoods)

    @property
    def signal_spaces(self) -> tuple[int, ...]:
        return tuple(t.shape[1] for t in self.likelihoods)

    def __eq__(self, other):
        if not isinstance(other, HypothesisModel):
            return NotImplemented
        return len(self.likelihoods) == len(other.likelihoods) and all(
            a.shape == b.shape and np.array_equal(a, b)
            for a, b in zip(self.likelihoods, other.likelihoods)
        )

    __hash__ = None

    def check_state(self, state: int) -> int:
        if not 0 <= state < self.num_states:
            raise IndexError(f"state {state} out of range 0..{self.num_states - 1}")
        return int(state)

    def check_agent(self, agent: int) -> int:
        if not 0 <= agent < self.num_agents:
            raise IndexError(f"agent {agent} out of range 0..{self.num_agents - 1}")
        return int(agent)

    def log_likelihood_array(self) -> np.ndarray:
        """Stacked log-likelihoods of shape (n, m, max |S_i|), NaN-padded."""
        width = max(self.signal_spaces)
        out = np.full((self.num_agents, self.num_states, width), np.nan)
        for i, table in enumerate(self.likelihoods):
            out[i, :, : table.shape[1]] = np.log(table)
        return out


@dataclass(frozen=True)
class IndistinguishableSet:
    agent: int
    anchor: int
    members: frozenset[int]

    def indicator(self, num_states: int) -> np.ndarray:
        v = np.zeros(num_states, dtype=bool)
        v[list(self.members)] = True
        return v


def indistinguishable_set(
    model: HypothesisModel, agent: int, anchor: int, tol: float = KL_TOL
) -> IndistinguishableSet:
    """States agent ``agent`` can never tell apart from ``anchor``."""
    agent = model.check_agent(agent)
    anchor = model.check_state(anchor)
    table = model.likelihoods[agent]
    members = {anchor}
    for theta in range(model.num_states):
        if kl_divergence(table[anchor], table[theta]) <= tol:
            members.add(theta)
    return IndistinguishableSet(agent, anchor, frozenset(members))


def true_state_indicators(model: HypothesisModel, true_state: int, tol: float = KL_TOL) -> np.ndarray:
    """Boolean (n, m) array whose row i marks the states agent i confuses with ``true_state``."""
    return np.stack(
        [indistinguishable_set(model, i, true_state, tol).indicator(model.num_states)
         for i in range(model.num_agents)]
    )


@dataclass(frozen=True)
class Identifiability:
    identifiable: bool
    witness: tuple[int, int] | None = None

    def __bool__(self):
        return self.identifiable


def check_global_identifiability(model: HypothesisModel, tol: float = KL_TOL) -> Identifiability:
    """Every distinct state pair must be separated by at least one agent."""
    for p, q in combinations(range(model.num_states), 2):
        if not any(
            kl_divergence(table[p], table[q]) > tol for table in model.likelihoods
        ):
            return Identifiability(False, (p, q))
    return Identifiability(True)


REFERENCE_ROWS = np.array(
    [[0.5, 0.5], [0.5, 0.5], [0.4, 0.6], [0.4, 0.6], [0.5, 0.5]]
)


def permuted_model(
    base: Sequence[Sequence[float]],
    num_agents: int,
    seed: int,
    *,
    permute_first: bool = False,
    max_tries: int = 100,
) -> HypothesisModel:
    """Each agent gets the base per-state rows under its own random state permutation.

    Agent 0 keeps the base assignment unless ``permute_first``. Permutations are
    redrawn from the same stream until the model is globally identifiable.
    """
    base = np.asarray(base, dtype=float)
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        tables = []
        for i in range(num_agents):
            if i == 0 and not permute_first:
                tables.append(base.copy())
            else:
                tables.append(base[rng.permutation(base.shape[0])])
        model = HypothesisModel(tuple(tables))
        if check_global_identifiability(model):
            return model
    raise ModelError(f"no globally identifiable permutation model after {max_tries} tries")
