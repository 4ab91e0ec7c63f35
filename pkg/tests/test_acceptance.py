"""Exit criteria. Each test appends one PASS/FAIL line to the terminal summary."""

import math

import numpy as np
import pytest

import oracles
from dhtest import protocols as P
from dhtest.beliefs import bayes_update, round_beliefs
from dhtest.graph import DirectedGraph, all_pairs_distances
from dhtest.model import REFERENCE_ROWS, HypothesisModel, indistinguishable_set
from dhtest.scenario import GraphSpec, ProtocolConfig, Scenario
from dhtest.schedule import make_schedule
from dhtest.sim import generate_sample_path, run_batch, run_scenario, write_trace_csv

SEEDS = range(20)
REFERENCE = Scenario()  # 200 agents, r = 0.15, m = 5, true state index 2, alpha 1e-3, linear epochs


def _line(report, ok, label, detail):
    report(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")


@pytest.fixture(scope="module")
def poe_batch():
    return run_batch(REFERENCE, SEEDS)


def test_c1_reference_scenario_convergence(poe_batch, report):
    steps = [r.record.convergence_step for r in poe_batch.runs]
    converged = all(s is not None for s in steps)
    finite = [s for s in steps if s is not None]
    median = float(np.median(finite)) if finite else math.inf
    in_band = converged and all(40 <= s <= 600 for s in finite)
    ok = converged and 80 <= median <= 300 and in_band
    _line(report, ok, "C1 reference-scenario convergence",
          f"all converged={converged}, median={median} in [80,300], each in [40,600]={in_band}, steps={steps}")
    assert converged
    assert 80 <= median <= 300
    assert in_band, f"runs outside [40, 600]: {[s for s in finite if not 40 <= s <= 600]}"


def test_c2_bandwidth(poe_batch, report):
    exact = True
    per_agent = []
    for r in poe_batch.records:
        bits = r.agent_bits(r.convergence_step)
        exact &= bool(np.all(bits == r.num_states * r.convergence_step))
        per_agent.append(int(bits[0]))
    median = float(np.median(per_agent))
    ok = exact and 400 <= median <= 3000
    _line(report, ok, "C2 bandwidth", f"bits == m*convergence_step: {exact}; median bits/agent={median} in [400,3000]")
    assert exact
    assert 400 <= median <= 3000


def test_c3_diameter_band(poe_batch, report):
    diameters = [r.graph.diameter for r in poe_batch.runs]
    ok = all(7 <= d <= 16 for d in diameters)
    _line(report, ok, "C3 diameter band", f"diameters={diameters} all in [7,16]")
    assert ok


def _strong_digraphs(n):
    for edges in oracles.all_digraphs(n):
        g = DirectedGraph.from_edges(n, edges)
        if all_pairs_distances(g).strongly_connected:
            yield g


def test_c4_poe_exhaustive_epoch(report):
    m = 3
    checked = 0
    failures = []
    for n in range(1, 5):
        batches = [oracles.candidate_assignments(n, m, ts) for ts in range(m)]
        truths = [ts for ts, b in enumerate(batches) for _ in range(len(b))]
        sets = np.concatenate(batches)
        target = np.eye(m)[truths][:, None, :]
        for g in _strong_digraphs(n):
            L = g.diameter + 1
            schedule = make_schedule("constant", L, L)
            net = P.NetworkState.initial(n, m, batch=(len(sets),))
            with np.errstate(divide="ignore"):
                net.log_pi = np.log(sets / sets.sum(-1, keepdims=True))
            receive = g.adjacency.T.astype(np.float32)
            flat = np.zeros_like(net.log_pi)
            for t in range(L):
                P.poe_network_step(net, t, schedule, receive, flat, 1e-3)
            good = np.all(net.mu == target, axis=(-1, -2))
            checked += len(sets)
            if not good.all():
                failures.append((n, sorted(g.edges), sets[~good][0].astype(int).tolist()))
    ok = not failures
    _line(report, ok, "C4 PoE one-epoch exhaustive oracle", f"{checked} (graph, assignment) cases, failures={len(failures)}")
    assert ok, failures[:3]


def test_c5_poe_fc_quiescence(report):
    horizon = 4000
    sc = Scenario(protocol=ProtocolConfig(name="poe-fc"), horizon=horizon)
    batch = run_batch(sc, SEEDS)
    rows = []
    ok = True
    for r in batch.records:
        L = 2 * r.diameter
        conv = r.convergence_step
        enough = conv is not None and horizon - conv >= 10 * L
        tail = r.transmissions_between(horizon - 5 * L, horizon)
        ok &= bool(enough and tail == 0)
        last = int(np.flatnonzero(r.emitted.any(axis=1))[-1])
        rows.append((r.seed, conv, r.separation_step, last, tail))
    _line(report, ok, "C5 PoE-FC quiescence", f"(seed, convergence, separation, last broadcast, tail transmissions)={rows}")
    assert ok, rows


def test_c6_set_intersection_lemma(report):
    cases = 0
    bad = []
    for n in range(1, 6):
        graphs = [DirectedGraph.from_edges(n, e) for e in oracles.digraph_classes(n)]
        graphs = [g for g in graphs if g.metrics.strongly_connected]
        for m in range(1, 4):
            vectors = oracles.all_bit_assignments(n, m)
            want = vectors.all(axis=-2, keepdims=True)
            for g in graphs:
                D = g.diameter
                at_d = P.distributed_intersection(vectors, g, D)
                after = P.distributed_intersection(at_d, g, 1)
                good = np.all(at_d == want, axis=(-1, -2)) & np.all(after == want, axis=(-1, -2))
                cases += len(vectors)
                if not good.all():
                    bad.append((n, m, sorted(g.edges)))
    ok = not bad
    _line(report, ok, "C6 distributed set-intersection lemma",
          f"{cases} (graph class, assignment) cases for n<=5, m<=3; failures={len(bad)}")
    assert ok, bad[:3]


def test_c7_local_separation(report):
    model = HypothesisModel((REFERENCE_ROWS,))
    true_state = 2
    truth = indistinguishable_set(model, 0, true_state).indicator(5)
    column = model.likelihoods[0]
    hits = 0
    for seed in range(100):
        signals = generate_sample_path(model, true_state, 2000, seed).signals[:, 0]
        pi = np.full(5, 0.2)
        for s in signals:
            pi = bayes_update(pi, column[:, s])
        hits += np.array_equal(round_beliefs(pi, 1e-3), truth)
    ok = hits >= 95
    _line(report, ok, "C7 local separation", f"{hits}/100 seeds recover the indistinguishable set at t=2000")
    assert ok


def test_c8_argmax_wrapper_on_min_rule(report):
    sc = Scenario(protocol=ProtocolConfig(name="min-rule", schedule="constant:1"))
    batch = run_batch(sc, SEEDS)
    steps = [r.wrapper_step for r in batch.records]
    successes = sum(s is not None for s in steps)
    ok = successes >= 19
    _line(report, ok, "C8 argmax wrapper on min-rule", f"{successes}/20 eventually constant at e_theta*; steps={steps}")
    assert ok


def test_c9_property_suites(report, tmp_path):
    rng = np.random.default_rng(2024)
    norm_ok = True
    mono_ok = True
    for trial in range(20):
        n, m = int(rng.integers(2, 7)), int(rng.integers(2, 5))
        tables = tuple(rng.dirichlet(np.ones(3), size=m) + 1e-3 for _ in range(n))
        tables = tuple(t / t.sum(1, keepdims=True) for t in tables)
        model = HypothesisModel(tables)
        edges = [(i, (i + 1) % n) for i in range(n)] + [
            (int(a), int(b)) for a, b in rng.integers(0, n, size=(n, 2)) if a != b
        ]
        g = DirectedGraph.from_edges(n, edges)
        schedule = make_schedule("linear", None, 300)
        path = generate_sample_path(model, 0, 300, trial)
        net = P.NetworkState.initial(n, m)
        receive = g.adjacency.T.astype(np.float32)
        loglik = model.log_likelihood_array()
        for t in range(300):
            before = net.psi.copy()
            P.poe_network_step(net, t, schedule, receive, loglik[np.arange(n), :, path.signals[t]], 0.05)
            norm_ok &= bool(np.allclose(net.pi.sum(-1), 1, atol=1e-9) and np.all(net.pi >= 0))
            if not schedule.is_start(t):
                mono_ok &= bool(np.all(net.psi <= before))
    sched_ok = True
    for kind, param in [("constant", 3), ("linear", None), ("exponential", 2), ("exponential", 3)]:
        lengths = make_schedule(kind, param, 5000).lengths
        sched_ok &= all(b >= a for a, b in zip(lengths, lengths[1:]))
    tiny = Scenario(
        graph=GraphSpec(kind="ring", n=6),
        protocol=ProtocolConfig(name="poe-fc", schedule="constant:12"),
        horizon=400,
    )
    texts = []
    for _ in range(2):
        rec = run_scenario(tiny, 11, trace="full").record
        out = tmp_path / f"trace{len(texts)}.csv"
        write_trace_csv(rec, out)
        texts.append(out.read_bytes())
    det_ok = texts[0] == texts[1]
    ok = norm_ok and mono_ok and sched_ok and det_ok
    _line(report, ok, "C9 property suites",
          f"normalization={norm_ok}, in-epoch monotone psi={mono_ok}, nondecreasing epochs={sched_ok}, "
          f"byte-identical traces={det_ok}")
    assert ok
