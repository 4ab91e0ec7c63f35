import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dhtest.graph import DirectedGraph, complete, ring
from dhtest.model import HypothesisModel
from dhtest.scenario import GraphSpec, ModelSpec, ProtocolConfig, Scenario
from dhtest.sim import (
    PreconditionError,
    generate_sample_path,
    run,
    run_batch,
    run_scenario,
    stable_from,
    write_summary_csv,
)

COIN = HypothesisModel(([[0.2, 0.8], [0.7, 0.3]],))

TINY = ModelSpec(kind="explicit", tables=(
    ((0.3, 0.7), (0.6, 0.4), (0.6, 0.4)),
    ((0.6, 0.4), (0.3, 0.7), (0.6, 0.4)),
    ((0.5, 0.5), (0.5, 0.5), (0.5, 0.5)),
    ((0.5, 0.5), (0.5, 0.5), (0.5, 0.5)),
))


def tiny(name="poe", horizon=500, **kw):
    return Scenario(model=TINY, graph=GraphSpec(kind="ring", n=4),
                    protocol=ProtocolConfig(name=name, **kw), true_state=2, horizon=horizon)


def test_stable_from():
    assert stable_from(np.array([True, True])) == 0
    assert stable_from(np.array([False, True, False, True, True])) == 3
    assert stable_from(np.array([True, False])) is None
    assert stable_from(np.array([], dtype=bool)) is None


def test_sample_path_deterministic_and_prefix_stable():
    a = generate_sample_path(COIN, 1, 100, seed=4)
    b = generate_sample_path(COIN, 1, 300, seed=4)
    assert np.array_equal(a.signals, b.signals[:100])
    assert not np.array_equal(a.signals, generate_sample_path(COIN, 1, 100, seed=5).signals)


def test_sample_path_agent_streams_independent_of_count():
    one = HypothesisModel(([[0.2, 0.8], [0.7, 0.3]],))
    three = HypothesisModel(tuple([[[0.2, 0.8], [0.7, 0.3]]] * 3))
    assert np.array_equal(
        generate_sample_path(one, 0, 50, 8).signals[:, 0],
        generate_sample_path(three, 0, 50, 8).signals[:, 0],
    )


def test_sample_path_frequency():
    s = generate_sample_path(COIN, 1, 40000, seed=0).signals[:, 0]
    # P(heads | state 1) = 0.7; five standard errors is about 0.011
    assert abs((s == 0).mean() - 0.7) < 0.012


@settings(max_examples=30)
@given(st.integers(0, 2**31), st.integers(1, 200))
def test_sample_path_symbols_in_range(seed, horizon):
    model = HypothesisModel(([[0.1, 0.2, 0.7], [0.3, 0.3, 0.4]],))
    s = generate_sample_path(model, 0, horizon, seed).signals
    assert s.shape == (horizon, 1) and s.min() >= 0 and s.max() <= 2


def test_single_agent_reaches_truth():
    rec = run(COIN, complete(1), ProtocolConfig(schedule="linear"), None, 1, 400, seed=3)
    assert rec.final_mu.tolist() == [[0.0, 1.0]]
    assert rec.converged
    assert rec.total_bits == 0  # nobody to talk to
    assert rec.agent_bits().tolist() == [400 * 2]


def test_bit_accounting_on_a_pair(two_agent_model, pair_graph):
    rec = run(two_agent_model, pair_graph, ProtocolConfig(schedule="linear"), None, 2, 200, seed=1)
    assert rec.agent_bits(50).tolist() == [150, 150]
    assert rec.network_bits(50) == 2 * 1 * 3 * 50
    mr = run(two_agent_model, pair_graph, ProtocolConfig(name="min-rule", schedule="constant:2",
                                                         bits_per_entry=32), None, 2, 200, seed=1)
    assert mr.payload_bits == 96
    assert mr.agent_bits(10).tolist() == [5 * 96, 5 * 96]


def test_non_identifiable_model_keeps_the_common_set(pair_graph):
    model = HypothesisModel((
        np.array([[0.3, 0.7], [0.6, 0.4], [0.6, 0.4]]),
        np.array([[0.6, 0.4], [0.6, 0.4], [0.6, 0.4]]),
    ))
    with pytest.raises(PreconditionError, match="identifiable"):
        run(model, pair_graph, ProtocolConfig(schedule="linear"), None, 2, 300, seed=0)
    rec = run(model, pair_graph, ProtocolConfig(schedule="linear"), None, 2, 300, seed=0,
              check_identifiability=False)
    assert not rec.converged
    np.testing.assert_allclose(rec.final_mu, [[0, 0.5, 0.5]] * 2)


def test_preconditions(two_agent_model):
    chain = DirectedGraph.from_edges(2, [(0, 1)])
    with pytest.raises(PreconditionError, match="strongly connected"):
        run(two_agent_model, chain, ProtocolConfig(schedule="linear"), None, 0, 10, 0)
    with pytest.raises(PreconditionError, match="agents"):
        run(two_agent_model, ring(3), ProtocolConfig(schedule="linear"), None, 0, 10, 0)
    big = ring(4)
    model4 = TINY.build(0, 4)
    with pytest.raises(PreconditionError, match="2D"):
        run(model4, big, ProtocolConfig(name="poe-fc", schedule="constant:5"), None, 2, 50, 0)
    with pytest.raises(PreconditionError, match="longer than the diameter"):
        run(model4, big, ProtocolConfig(schedule="constant:3"), None, 2, 50, 0)
    with pytest.raises(ValueError, match="trace"):
        run(model4, big, ProtocolConfig(), None, 2, 50, 0, trace="sometimes")


def test_tiny_config_converges_every_seed():
    batch = run_batch(tiny(), range(10))
    assert all(r.converged for r in batch.records)
    agg = batch.aggregates()
    assert agg["runs"] == 10 and agg["success_rate"] == 1.0
    steps = [r.convergence_step for r in batch.records]
    assert agg["convergence_step"]["min"] == min(steps)
    assert agg["convergence_step"]["median"] == float(np.median(steps))


def test_poe_fc_cheaper_than_poe():
    seeds = range(5)
    poe = run_batch(tiny("poe", schedule="constant:6"), seeds)
    fc = run_batch(tiny("poe-fc"), seeds)
    for a, b in zip(poe.records, fc.records):
        assert b.converged
        assert b.total_bits < a.total_bits


def test_trace_modes():
    full = run_scenario(tiny(horizon=60), 0, trace="full").record
    assert full.trace_times == list(range(61))
    epoch = run_scenario(tiny(horizon=60), 0, trace="epoch").record
    assert epoch.trace_times == [0, 1, 3, 6, 10, 15, 21, 28, 36, 45, 55, 60]
    off = run_scenario(tiny(horizon=60), 0, trace="off").record
    assert off.trace_times == [60]
    assert np.array_equal(full.final_mu, off.final_mu)


def test_summary_csv_writes_inf(tmp_path):
    rec = run_scenario(tiny("min-rule", horizon=3), 0, trace="off").record
    write_summary_csv([rec], tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].startswith("seed,protocol,convergence_step")
    assert ",inf," in lines[1]


def test_batch_workers_match_serial():
    a = run_batch(tiny(horizon=80), [0, 1], workers=2)
    b = run_batch(tiny(horizon=80), [0, 1])
    assert [r.convergence_step for r in a.records] == [r.convergence_step for r in b.records]
