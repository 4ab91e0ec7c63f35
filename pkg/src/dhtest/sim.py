"""Synchronous discrete-time simulator.

Seed splitting: the signal stream of agent i under run seed s is drawn from
``SeedSequence(s, spawn_key=(0, i))``, so adding agents or extending the
horizon leaves every other agent's stream untouched. Graph and model
instances use spawn keys (1,) and (2,) (see :mod:`dhtest.scenario`).
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import protocols as P
from .beliefs import argmax_indicator, check_alpha, round_beliefs
from .graph import DirectedGraph
from .model import HypothesisModel, check_global_identifiability, true_state_indicators
from .scenario import SIGNAL_STREAM, ProtocolConfig, Scenario
from .schedule import EpochSchedule

log = logging.getLogger(__name__)

TRACE_MODES = ("full", "epoch", "off", "auto")


class PreconditionError(ValueError):
    """A run was requested whose theorem preconditions do not hold."""


@dataclass(frozen=True)
class SamplePath:
    seed: int
    signals: np.ndarray  # (horizon, n); row t holds the signals used in round t

    @property
    def horizon(self) -> int:
        return self.signals.shape[0]


def agent_stream(seed: int, agent: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(SIGNAL_STREAM, agent)))


def generate_sample_path(
    model: HypothesisModel, true_state: int, horizon: int, seed: int
) -> SamplePath:
    """I.i.d. signals from the true-state marginals, one substream per agent.

    Agents are sampled independently; a joint sampler would replace this function.
    """
    true_state = model.check_state(true_state)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    signals = np.empty((horizon, model.num_agents), dtype=np.int64)
    for i, table in enumerate(model.likelihoods):
        cdf = np.cumsum(table[true_state])
        u = agent_stream(seed, i).random(horizon)
        signals[:, i] = np.minimum(np.searchsorted(cdf, u, side="right"), table.shape[1] - 1)
    return SamplePath(int(seed), signals)


def stable_from(ok: np.ndarray) -> Optional[int]:
    """First index from which ``ok`` stays true to the end; None if it ends false."""
    if ok.size == 0 or not ok[-1]:
        return None
    bad = np.flatnonzero(~ok)
    return int(bad[-1]) + 1 if bad.size else 0


@dataclass
class RunRecord:
    protocol: str
    seed: int
    true_state: int
    horizon: int
    num_states: int
    payload_bits: int
    out_degrees: np.ndarray
    emitted: np.ndarray  # (horizon, n) bool, who broadcast in round t
    convergence_step: Optional[int]
    separation_step: Optional[int]
    wrapper_step: Optional[int]
    final_mu: np.ndarray
    trace_times: list[int] = field(default_factory=list)
    trace_mu: Optional[np.ndarray] = None  # (len(trace_times), n, m)
    diameter: int = 0
    schedule: str = ""

    @property
    def converged(self) -> bool:
        return self.convergence_step is not None

    @property
    def num_agents(self) -> int:
        return self.emitted.shape[1]

    def agent_bits(self, t: Optional[int] = None) -> np.ndarray:
        """Cumulative payload bits broadcast by each agent in rounds 0..t-1."""
        t = self.horizon if t is None else t
        return self.emitted[:t].sum(axis=0).astype(np.int64) * self.payload_bits

    def round_network_bits(self) -> np.ndarray:
        """Bits carried over all directed edges, per round."""
        return (self.emitted.astype(np.int64) @ self.out_degrees.astype(np.int64)) * self.payload_bits

    def network_bits(self, t: Optional[int] = None) -> int:
        t = self.horizon if t is None else t
        return int(self.round_network_bits()[:t].sum())

    @property
    def total_bits(self) -> int:
        return self.network_bits()

    def transmissions_between(self, start: int, stop: int) -> int:
        """Number of agent broadcasts in rounds start..stop-1."""
        return int(self.emitted[start:stop].sum())

    def summary_row(self) -> dict:
        bits_at_conv = (
            float(np.median(self.agent_bits(self.convergence_step)))
            if self.converged else None
        )
        return {
            "seed": self.seed,
            "protocol": self.protocol,
            "convergence_step": _fmt_step(self.convergence_step),
            "separation_step": _fmt_step(self.separation_step),
            "wrapper_step": _fmt_step(self.wrapper_step),
            "bits_per_agent_at_convergence": "inf" if bits_at_conv is None else int(bits_at_conv),
            "total_bits": self.total_bits,
            "diameter": self.diameter,
            "success": int(self.converged),
        }


def _fmt_step(step: Optional[int]):
    return "inf" if step is None else step


def check_preconditions(
    model: HypothesisModel,
    graph: DirectedGraph,
    protocol: ProtocolConfig,
    schedule: EpochSchedule,
    true_state: int,
    horizon: int,
    check_identifiability: bool = True,
) -> None:
    model.check_state(true_state)
    if model.num_agents != graph.num_nodes:
        raise PreconditionError(
            f"model has {model.num_agents} agents but graph has {graph.num_nodes} nodes"
        )
    if not graph.metrics.strongly_connected:
        raise PreconditionError("graph is not strongly connected")
    if check_identifiability:
        ident = check_global_identifiability(model)
        if not ident:
            p, q = ident.witness
            raise PreconditionError(f"model is not globally identifiable: no agent separates states {p} and {q}")
    check_alpha(protocol.alpha)
    D = graph.diameter
    lengths = schedule.completed_lengths(horizon)
    if protocol.name == "poe" and not any(L > D for L in lengths):
        raise PreconditionError(
            f"PoE needs an epoch longer than the diameter {D} within horizon {horizon}"
        )
    if protocol.name == "poe-fc":
        short = [L for L in schedule.lengths if L < 2 * D]
        if short or not lengths:
            raise PreconditionError(
                f"PoE-FC needs every epoch of length >= 2D = {2 * D}; got {schedule.spec()}"
            )


def _trace_times(mode: str, n: int, schedule: EpochSchedule, horizon: int) -> set[int]:
    if mode == "auto":
        mode = "full" if n <= 50 else "epoch"
    if mode == "off":
        return {horizon}
    if mode == "full":
        return set(range(horizon + 1))
    return {0, horizon, *schedule.epoch_ends(horizon)}


def run(
    model: HypothesisModel,
    graph: DirectedGraph,
    protocol: ProtocolConfig,
    schedule: Optional[EpochSchedule],
    true_state: int,
    horizon: int,
    seed: int,
    *,
    trace: str = "auto",
    check_identifiability: bool = True,
    engine: str = "vectorized",
    sample_path: Optional[SamplePath] = None,
) -> RunRecord:
    """Run one protocol from the initial state for ``horizon`` rounds.

    ``engine="reference"`` drives the per-agent round functions one agent at a
    time; it is slow and exists to cross-check the vectorized engine.
    """
    if trace not in TRACE_MODES:
        raise ValueError(f"trace must be one of {TRACE_MODES}")
    if schedule is None:
        schedule = protocol.make_schedule(horizon, graph.diameter)
    check_preconditions(model, graph, protocol, schedule, true_state, horizon, check_identifiability)
    if sample_path is None:
        sample_path = generate_sample_path(model, true_state, horizon, seed)
    elif sample_path.horizon < horizon:
        raise ValueError("sample path shorter than horizon")

    n, m = model.num_agents, model.num_states
    truth = true_state_indicators(model, true_state)
    target = np.zeros(m)
    target[true_state] = 1.0
    target_hot = target.astype(bool)
    keep = _trace_times(trace, n, schedule, horizon)

    converged_at = np.zeros(horizon + 1, dtype=bool)
    wrapped_at = np.zeros(horizon + 1, dtype=bool)
    separated_at = np.zeros(horizon + 1, dtype=bool)
    emitted = np.zeros((horizon, n), dtype=bool)
    trace_times, trace_mu = [], []

    def observe(t, mu, pi):
        converged_at[t] = np.all(mu == target)
        wrapped_at[t] = np.all(argmax_indicator(mu) == target_hot)
        separated_at[t] = np.array_equal(round_beliefs(pi, protocol.alpha), truth)
        if t in keep:
            trace_times.append(t)
            trace_mu.append(mu.copy())

    if engine == "vectorized":
        final_mu = _run_vectorized(
            model, graph, protocol, schedule, horizon, sample_path, emitted, observe
        )
    elif engine == "reference":
        final_mu = _run_reference(
            model, graph, protocol, schedule, horizon, sample_path, emitted, observe
        )
    else:
        raise ValueError(f"unknown engine {engine!r}")

    return RunRecord(
        protocol=protocol.name,
        seed=int(seed),
        true_state=int(true_state),
        horizon=horizon,
        num_states=m,
        payload_bits=protocol.payload_bits(m),
        out_degrees=graph.out_degrees(),
        emitted=emitted,
        convergence_step=stable_from(converged_at),
        separation_step=stable_from(separated_at),
        wrapper_step=stable_from(wrapped_at),
        final_mu=final_mu,
        trace_times=trace_times,
        trace_mu=np.stack(trace_mu) if trace_mu else None,
        diameter=graph.diameter,
        schedule=schedule.spec() if schedule.kind != "explicit" else "explicit",
    )


def _run_vectorized(model, graph, protocol, schedule, horizon, path, emitted, observe):
    n, m = model.num_agents, model.num_states
    receive = graph.adjacency.T.astype(np.float32)
    loglik = model.log_likelihood_array()
    agents = np.arange(n)
    net = P.NetworkState.initial(n, m)
    table = P.in_neighbor_table(graph.adjacency.T) if protocol.name == "min-rule" else None
    observe(0, net.mu, net.pi)
    for t in range(horizon):
        cols = loglik[agents, :, path.signals[t]]
        if protocol.name == "poe":
            sent = P.poe_network_step(net, t, schedule, receive, cols, protocol.alpha)
        elif protocol.name == "poe-fc":
            sent = P.poe_fc_network_step(net, t, schedule, receive, cols, protocol.alpha)
        else:
            sent = P.min_rule_network_step(net, t, schedule, table, cols, protocol.include_own_mu)
        emitted[t] = sent
        observe(t + 1, net.mu, net.pi)
    return net.mu.copy()


def _run_reference(model, graph, protocol, schedule, horizon, path, emitted, observe):
    n, m = model.num_agents, model.num_states
    states = [P.initial_state(m) for _ in range(n)]
    in_nbrs = [graph.in_neighbors(i) for i in range(n)]
    alpha = protocol.alpha
    observe(0, np.stack([s.mu for s in states]), np.stack([s.pi for s in states]))
    for t in range(horizon):
        if protocol.name == "poe":
            outbox = [P.poe_emit(s, t, schedule, alpha)[1] for s in states]
        elif protocol.name == "poe-fc":
            outbox = [P.poe_fc_emit(s, t, schedule, alpha)[1] for s in states]
        else:
            outbox = [P.min_rule_emit(s, t, schedule) for s in states]
        nxt = []
        for i, s in enumerate(states):
            inbox = [outbox[j] for j in in_nbrs[i] if outbox[j] is not None]
            signal = int(path.signals[t, i])
            table = model.likelihoods[i]
            if protocol.name == "poe":
                new, _ = P.poe_round(s, inbox, signal, t, schedule, table, alpha)
            elif protocol.name == "poe-fc":
                new, _ = P.poe_fc_round(s, inbox, None, signal, t, schedule, table, alpha)
            else:
                new, _ = P.min_rule_round(s, inbox, signal, t, schedule, table, protocol.include_own_mu)
            nxt.append(new)
        states = nxt
        emitted[t] = [o is not None for o in outbox]
        observe(t + 1, np.stack([s.mu for s in states]), np.stack([s.pi for s in states]))
    return np.stack([s.mu for s in states])


# -- scenarios and batches ---------------------------------------------------

@dataclass
class ScenarioRun:
    record: RunRecord
    model: HypothesisModel
    graph: DirectedGraph
    positions: Optional[np.ndarray]


def run_scenario(scenario: Scenario, seed: int, trace: str = "auto") -> ScenarioRun:
    model, graph, pos = scenario.instance(seed)
    record = run(
        model, graph, scenario.protocol, None, scenario.true_state, scenario.horizon, seed,
        trace=trace, check_identifiability=scenario.check_identifiability,
    )
    return ScenarioRun(record, model, graph, pos)


def _quantiles(values: Sequence[float]) -> dict:
    if not values:
        return {"median": None, "q10": None, "q90": None, "min": None, "max": None}
    a = np.asarray(values, dtype=float)
    return {
        "median": float(np.median(a)),
        "q10": float(np.quantile(a, 0.1)),
        "q90": float(np.quantile(a, 0.9)),
        "min": float(a.min()),
        "max": float(a.max()),
    }


@dataclass
class BatchResult:
    runs: list[ScenarioRun]

    @property
    def records(self) -> list[RunRecord]:
        return [r.record for r in self.runs]

    def aggregates(self) -> dict:
        recs = self.records
        conv = [r.convergence_step for r in recs if r.converged]
        sep = [r.separation_step for r in recs if r.separation_step is not None]
        bits_at_conv = [float(np.median(r.agent_bits(r.convergence_step))) for r in recs if r.converged]
        return {
            "protocol": recs[0].protocol if recs else None,
            "runs": len(recs),
            "success_rate": len(conv) / len(recs) if recs else 0.0,
            "convergence_step": _quantiles(conv),
            "separation_step": _quantiles(sep),
            "bits_per_agent_at_convergence": _quantiles(bits_at_conv),
            "total_bits": _quantiles([r.total_bits for r in recs]),
        }


def _run_one(args):
    scenario, seed, trace = args
    return run_scenario(scenario, seed, trace)


def run_batch(
    scenario: Scenario, seeds: Sequence[int], *, trace: str = "off", workers: int = 1
) -> BatchResult:
    """Independent runs over ``seeds``; optionally spread over processes."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("run_batch needs at least one seed")
    jobs = [(scenario, s, trace) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_one, jobs))
    else:
        runs = [_run_one(j) for j in jobs]
    for r in runs:
        log.info("seed %d: convergence %s", r.record.seed, r.record.convergence_step)
    return BatchResult(runs)


# -- output files ------------------------------------------------------------

def write_trace_csv(record: RunRecord, path: Path) -> None:
    m = record.num_states
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "agent", *[f"mu_{k + 1}" for k in range(m)], "transmitted_bits_cumulative"])
        if record.trace_mu is None:
            return
        for t, mu in zip(record.trace_times, record.trace_mu):
            bits = record.agent_bits(t)
            for i in range(mu.shape[0]):
                w.writerow([t, i, *(repr(float(x)) for x in mu[i]), int(bits[i])])


SUMMARY_FIELDS = [
    "seed", "protocol", "convergence_step", "separation_step", "wrapper_step",
    "bits_per_agent_at_convergence", "total_bits", "diameter", "success",
]


def write_summary_csv(records: Sequence[RunRecord], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow(r.summary_row())


def write_positions_csv(positions: np.ndarray, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["agent", "x", "y"])
        for i, (x, y) in enumerate(positions):
            w.writerow([i, repr(float(x)), repr(float(y))])
