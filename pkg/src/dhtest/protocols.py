"""Protocol state machines: PoE, PoE-FC, the min-rule baseline and the argmax wrapper.

Two layers live here. The per-agent functions (``*_emit`` / ``*_round``) are
pure transitions on an :class:`AgentState`; they define the protocols. The
``*_network_step`` functions advance every agent of a network at once on
stacked arrays and are what the simulator runs. Both layers follow the same
synchronous ordering: emit, receive, intersect or aggregate, commit mu at
epoch ends, local Bayes update.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .beliefs import (
    argmax_indicator,
    bayes_update_log,
    intersect,
    log_normalize,
    normalize_candidates,
    round_beliefs,
)
from .schedule import EpochSchedule

PROTOCOLS = ("poe", "poe-fc", "min-rule")


@dataclass(frozen=True)
class AgentState:
    log_pi: np.ndarray
    mu: np.ndarray
    psi: np.ndarray
    psi_prev: np.ndarray
    transmit: bool = False

    @property
    def pi(self) -> np.ndarray:
        return np.exp(self.log_pi)


def initial_state(num_states: int) -> AgentState:
    """Uniform local belief, mu = pi, all states still candidates, silent."""
    log_pi = np.full(num_states, -np.log(num_states))
    ones = np.ones(num_states, dtype=bool)
    return AgentState(log_pi, np.exp(log_pi), ones, ones.copy(), False)


def _log_column(likelihoods: np.ndarray, signal: int) -> np.ndarray:
    return np.log(np.asarray(likelihoods, dtype=float)[:, signal])


def _check_inbox(inbox: Sequence, m: int) -> list[np.ndarray]:
    vectors = [np.asarray(v) for v in inbox]
    for v in vectors:
        if v.shape != (m,):
            raise ValueError(f"inbox vector has shape {v.shape}, expected ({m},)")
    return vectors


# -- PoE ---------------------------------------------------------------------

def poe_emit(state: AgentState, t: int, schedule: EpochSchedule, alpha: float):
    """Reset psi from the local belief at epoch starts; PoE always sends psi."""
    if schedule.is_start(t):
        state = replace(state, psi=round_beliefs(state.pi, alpha))
    return state, state.psi


def poe_round(
    state: AgentState,
    inbox: Sequence,
    local_signal: int,
    t: int,
    schedule: EpochSchedule,
    likelihoods: np.ndarray,
    alpha: float,
):
    """One synchronous PoE round for a single agent.

    ``inbox`` holds the vectors emitted by the in-neighbors in this round.
    Returns the next state and the vector this agent emitted.
    """
    state, out = poe_emit(state, t, schedule, alpha)
    inbox = _check_inbox(inbox, state.psi.shape[0])
    psi = intersect([*inbox, state.psi])
    mu = normalize_candidates(psi) if schedule.is_start(t + 1) else state.mu
    log_pi = bayes_update_log(state.log_pi, _log_column(likelihoods, local_signal))
    return replace(state, log_pi=log_pi, mu=mu, psi=psi), out


# -- PoE-FC ------------------------------------------------------------------

def poe_fc_emit(state: AgentState, t: int, schedule: EpochSchedule, alpha: float):
    """At epoch starts, transmit only if the rounded vector moved since last epoch."""
    if schedule.is_start(t):
        psi = round_beliefs(state.pi, alpha)
        if not np.array_equal(psi, state.psi_prev):
            state = replace(state, psi=psi, psi_prev=psi.copy(), transmit=True)
        else:
            state = replace(state, psi=psi, transmit=False)
    return state, (state.psi if state.transmit else None)


def poe_fc_round(
    state: AgentState,
    inbox: Sequence,
    any_inbound: Optional[bool],
    local_signal: int,
    t: int,
    schedule: EpochSchedule,
    likelihoods: np.ndarray,
    alpha: float,
):
    """One PoE-FC round. ``inbox`` holds only vectors actually transmitted to us.

    ``any_inbound`` defaults to ``bool(inbox)``.
    """
    state, out = poe_fc_emit(state, t, schedule, alpha)
    inbox = _check_inbox(inbox, state.psi.shape[0])
    if any_inbound is None:
        any_inbound = bool(inbox)
    transmit = state.transmit or bool(any_inbound)
    psi = intersect([*inbox, state.psi]) if transmit else state.psi
    if schedule.is_start(t + 1) and transmit:
        mu = normalize_candidates(psi)
    else:
        mu = state.mu
    log_pi = bayes_update_log(state.log_pi, _log_column(likelihoods, local_signal))
    return replace(state, log_pi=log_pi, mu=mu, psi=psi, transmit=transmit), out


# -- min-rule ----------------------------------------------------------------

def min_rule_emit(state: AgentState, t: int, schedule: EpochSchedule):
    """Beliefs are exchanged only on rounds that end at a communication time."""
    return state.mu if schedule.is_start(t + 1) else None


def _min_normalize(stack: np.ndarray, axis: int = 0) -> np.ndarray:
    low = stack.min(axis=axis)
    total = low.sum(axis=-1, keepdims=True)
    m = low.shape[-1]
    return np.where(total > 0, low / np.where(total > 0, total, 1), 1.0 / m)


def min_rule_round(
    state: AgentState,
    inbox: Sequence,
    local_signal: int,
    t: int,
    schedule: EpochSchedule,
    likelihoods: np.ndarray,
    include_own_mu: bool = False,
):
    """Bayes step, then (at communication times) normalized elementwise minimum
    of the neighbors' mu and the agent's freshly updated pi."""
    out = min_rule_emit(state, t, schedule)
    inbox = _check_inbox(inbox, state.mu.shape[0])
    log_pi = bayes_update_log(state.log_pi, _log_column(likelihoods, local_signal))
    mu = state.mu
    if schedule.is_start(t + 1):
        stack = [*inbox, np.exp(log_pi)]
        if include_own_mu:
            stack.append(state.mu)
        mu = _min_normalize(np.stack(stack))
    return replace(state, log_pi=log_pi, mu=mu), out


def finite_time_wrap(mu) -> np.ndarray:
    """Indicator of the currently most believed state (lowest index on ties)."""
    return argmax_indicator(mu)


# -- network-wide steps ------------------------------------------------------

@dataclass
class NetworkState:
    """Stacked agent states; arrays have shape (..., n, m) and (..., n).

    Leading batch axes are allowed for the PoE step.
    """

    log_pi: np.ndarray
    mu: np.ndarray
    psi: np.ndarray
    psi_prev: np.ndarray
    transmit: np.ndarray

    @classmethod
    def initial(cls, num_agents: int, num_states: int, batch: tuple[int, ...] = ()):
        shape = (*batch, num_agents, num_states)
        log_pi = np.full(shape, -np.log(num_states))
        return cls(
            log_pi=log_pi,
            mu=np.exp(log_pi),
            psi=np.ones(shape, dtype=bool),
            psi_prev=np.ones(shape, dtype=bool),
            transmit=np.zeros(shape[:-1], dtype=bool),
        )

    @property
    def pi(self) -> np.ndarray:
        return np.exp(self.log_pi)

    def agent(self, i: int) -> AgentState:
        return AgentState(
            self.log_pi[i].copy(), self.mu[i].copy(), self.psi[i].copy(),
            self.psi_prev[i].copy(), bool(self.transmit[i]),
        )


def _eliminated_by_senders(psi: np.ndarray, receive: np.ndarray, senders=None) -> np.ndarray:
    """``receive[i, j]`` = 1 iff j -> i. True where some sender holds a 0."""
    zeros = (~psi).astype(np.float32)
    if senders is not None:
        zeros = zeros * senders[..., None]
    # one GEMM over the agent axis, batch axes ride along
    hits = np.tensordot(receive, zeros, axes=([1], [-2]))
    return np.moveaxis(hits, 0, -2) > 0


def distributed_intersection(vectors, graph, rounds: int) -> np.ndarray:
    """Iterated neighbor intersection: every agent sends its vector and keeps
    the intersection with what it receives, ``rounds`` times.

    ``vectors`` has shape (..., n, m); leading axes are independent instances.
    """
    v = np.asarray(vectors, dtype=bool)
    receive = np.asarray(graph.adjacency.T, dtype=np.float32)
    for _ in range(rounds):
        v = v & ~_eliminated_by_senders(v, receive)
    return v


def poe_network_step(
    net: NetworkState,
    t: int,
    schedule: EpochSchedule,
    receive: np.ndarray,
    log_columns: np.ndarray,
    alpha: float,
) -> np.ndarray:
    """Advance all agents one PoE round in place; returns the emission mask."""
    if schedule.is_start(t):
        net.psi = round_beliefs(net.pi, alpha)
    emitted = np.ones(net.psi.shape[:-1], dtype=bool)
    net.psi = net.psi & ~_eliminated_by_senders(net.psi, receive)
    if schedule.is_start(t + 1):
        net.mu = normalize_candidates(net.psi)
    net.log_pi = log_normalize(net.log_pi + log_columns)
    return emitted


def poe_fc_network_step(
    net: NetworkState,
    t: int,
    schedule: EpochSchedule,
    receive: np.ndarray,
    log_columns: np.ndarray,
    alpha: float,
) -> np.ndarray:
    if schedule.is_start(t):
        psi = round_beliefs(net.pi, alpha)
        changed = np.any(psi != net.psi_prev, axis=-1)
        net.psi_prev = np.where(changed[..., None], psi, net.psi_prev)
        net.transmit = changed
        net.psi = psi
    emitted = net.transmit.copy()
    inbound = np.moveaxis(np.tensordot(receive, emitted.astype(np.float32), axes=([1], [-1])), 0, -1) > 0
    net.transmit = net.transmit | inbound
    merged = net.psi & ~_eliminated_by_senders(net.psi, receive, emitted)
    net.psi = np.where(net.transmit[..., None], merged, net.psi)
    if schedule.is_start(t + 1):
        net.mu = np.where(net.transmit[..., None], normalize_candidates(net.psi), net.mu)
    net.log_pi = log_normalize(net.log_pi + log_columns)
    return emitted


def in_neighbor_table(receive: np.ndarray) -> np.ndarray:
    """Row i lists the in-neighbors of i, padded with index n (a sentinel row)."""
    n = receive.shape[0]
    lists = [np.flatnonzero(receive[i]) for i in range(n)]
    width = max((len(x) for x in lists), default=0)
    table = np.full((n, max(width, 1)), n, dtype=np.intp)
    for i, x in enumerate(lists):
        table[i, : len(x)] = x
    return table


def min_rule_network_step(
    net: NetworkState,
    t: int,
    schedule: EpochSchedule,
    neighbor_table: np.ndarray,
    log_columns: np.ndarray,
    include_own_mu: bool = False,
) -> np.ndarray:
    n = net.mu.shape[0]
    communicate = schedule.is_start(t + 1)
    net.log_pi = log_normalize(net.log_pi + log_columns)
    if not communicate:
        return np.zeros(n, dtype=bool)
    padded = np.vstack([net.mu, np.full((1, net.mu.shape[1]), np.inf)])
    low = padded[neighbor_table].min(axis=1)
    low = np.minimum(low, net.pi)
    if include_own_mu:
        low = np.minimum(low, net.mu)
    net.mu = _min_normalize(low[None], axis=0)
    return np.ones(n, dtype=bool)
