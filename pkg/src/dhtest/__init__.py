"""Finite-time distributed hypothesis testing: PoE, PoE-FC and the min-rule baseline."""

__version__ = "0.1.0"

from .beliefs import (
    argmax_indicator,
    bayes_update,
    intersect,
    normalize_candidates,
    round_beliefs,
)
from .graph import DirectedGraph, all_pairs_distances, generate_geometric, generate_named, is_strongly_connected
from .model import (
    HypothesisModel,
    check_global_identifiability,
    indistinguishable_set,
    kl_divergence,
)
from .protocols import finite_time_wrap, min_rule_round, poe_fc_round, poe_round
from .scenario import GraphSpec, ModelSpec, ProtocolConfig, Scenario
from .schedule import EpochSchedule, make_schedule
from .sim import RunRecord, generate_sample_path, run, run_batch, run_scenario

__all__ = [
    "DirectedGraph", "EpochSchedule", "GraphSpec", "HypothesisModel", "ModelSpec",
    "ProtocolConfig", "RunRecord", "Scenario", "all_pairs_distances", "argmax_indicator",
    "bayes_update", "check_global_identifiability", "finite_time_wrap", "generate_geometric",
    "generate_named", "generate_sample_path", "indistinguishable_set", "intersect",
    "is_strongly_connected", "kl_divergence", "make_schedule", "min_rule_round",
    "normalize_candidates", "poe_fc_round", "poe_round", "round_beliefs", "run", "run_batch",
    "run_scenario",
]
