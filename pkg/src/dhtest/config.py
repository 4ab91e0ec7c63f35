"""Experiment configuration files (YAML).

See ``configs/SCHEMA.md`` for the documented layout. Parsing validates
everything it can without running a simulation and reports the offending key.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .model import HypothesisModel, ModelError
from .protocols import PROTOCOLS
from .scenario import GraphSpec, ModelSpec, ProtocolConfig, Scenario
from .schedule import ScheduleError, parse_schedule
from .sim import TRACE_MODES


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: Scenario = field(default_factory=Scenario)
    seeds: tuple[int, ...] = (0,)
    compare: tuple[str, ...] = ()
    out_dir: str = "out"
    trace: str = "auto"

    @property
    def protocols(self) -> tuple[str, ...]:
        return self.compare or (self.scenario.protocol.name,)

    def to_dict(self) -> dict:
        sc = self.scenario
        m = sc.model
        model: dict[str, Any] = {"kind": m.kind, "seed": m.seed}
        if m.kind == "explicit":
            model["tables"] = [[list(row) for row in t] for t in m.tables]
        else:
            model.update(
                base=[list(r) for r in m.base], num_agents=m.num_agents,
                permute_first=m.permute_first, max_tries=m.max_tries,
            )
        g = sc.graph
        graph: dict[str, Any] = {"kind": g.kind, "n": g.n}
        if g.kind == "geometric":
            graph.update(radius=g.radius, seed=g.seed, max_tries=g.max_tries)
        if g.kind == "custom":
            graph["edges"] = [list(e) for e in g.edges]
        p = sc.protocol
        return {
            "model": model,
            "graph": graph,
            "protocol": {
                "name": p.name, "schedule": p.schedule, "alpha": p.alpha,
                "bits_per_entry": p.bits_per_entry, "include_own_mu": p.include_own_mu,
            },
            "true_state": sc.true_state,
            "horizon": sc.horizon,
            "check_identifiability": sc.check_identifiability,
            "seeds": list(self.seeds),
            "compare": list(self.compare),
            "output": {"dir": self.out_dir, "trace": self.trace},
        }

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


_SEED_RANGE = re.compile(r"^\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*$")


def parse_seeds(value, key: str = "seeds") -> tuple[int, ...]:
    """Accept an int, a list of ints, or an inclusive range string ``A..B``."""
    if isinstance(value, bool):
        raise ConfigError(key, "expected seeds, got a boolean")
    if isinstance(value, int):
        return (value,)
    if isinstance(value, str):
        hit = _SEED_RANGE.match(value)
        if not hit:
            raise ConfigError(key, f"expected 'A..B', got {value!r}")
        a, b = int(hit.group(1)), int(hit.group(2))
        if b < a:
            raise ConfigError(key, f"empty seed range {value!r}")
        return tuple(range(a, b + 1))
    if isinstance(value, (list, tuple)) and value and all(
        isinstance(s, int) and not isinstance(s, bool) for s in value
    ):
        return tuple(value)
    raise ConfigError(key, f"expected an int, a nonempty list of ints or 'A..B', got {value!r}")


def _section(raw: dict, key: str) -> dict:
    value = raw.get(key, {}) or {}
    if not isinstance(value, dict):
        raise ConfigError(key, "expected a mapping")
    return value


def _typed(section: dict, key: str, prefix: str, kind: type, default, allow_none=False):
    if key not in section:
        return default
    value = section[key]
    if value is None and allow_none:
        return None
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or (kind is not bool and isinstance(value, bool)):
        where = f"{prefix}.{key}" if prefix else key
        raise ConfigError(where, f"expected {kind.__name__}, got {value!r}")
    return value


def _unknown(section: dict, allowed: set, prefix: str):
    extra = sorted(set(section) - allowed)
    if extra:
        where = f"{prefix}.{extra[0]}" if prefix else extra[0]
        raise ConfigError(where, "unknown key")


def _model_spec(raw: dict) -> ModelSpec:
    sec = _section(raw, "model")
    _unknown(sec, {"kind", "base", "num_agents", "tables", "seed", "permute_first", "max_tries"}, "model")
    kind = _typed(sec, "kind", "model", str, "permutation")
    seed = _typed(sec, "seed", "model", int, None, allow_none=True)
    if kind == "explicit":
        if "tables" not in sec:
            raise ConfigError("model.tables", "missing required key for explicit model")
        tables = sec["tables"]
        try:
            model = HypothesisModel(tuple(tables))
        except (ModelError, ValueError, TypeError) as exc:
            raise ConfigError("model.tables", str(exc)) from None
        return ModelSpec(
            kind="explicit",
            tables=tuple(tuple(tuple(float(x) for x in row) for row in t) for t in model.likelihoods),
            seed=seed,
        )
    if kind != "permutation":
        raise ConfigError("model.kind", f"expected 'permutation' or 'explicit', got {kind!r}")
    base = sec.get("base", ModelSpec.base)
    try:
        HypothesisModel((base,))
    except (ModelError, ValueError, TypeError) as exc:
        raise ConfigError("model.base", str(exc)) from None
    return ModelSpec(
        kind="permutation",
        base=tuple(tuple(float(x) for x in row) for row in base),
        num_agents=_typed(sec, "num_agents", "model", int, None, allow_none=True),
        seed=seed,
        permute_first=_typed(sec, "permute_first", "model", bool, False),
        max_tries=_typed(sec, "max_tries", "model", int, 100),
    )


def _graph_spec(raw: dict) -> GraphSpec:
    sec = _section(raw, "graph")
    _unknown(sec, {"kind", "n", "radius", "edges", "seed", "max_tries"}, "graph")
    kind = _typed(sec, "kind", "graph", str, "geometric")
    if kind not in ("geometric", "ring", "complete", "custom"):
        raise ConfigError("graph.kind", f"unknown graph kind {kind!r}")
    if "n" not in sec and kind != "geometric":
        raise ConfigError("graph.n", "missing required key")
    n = _typed(sec, "n", "graph", int, 200)
    if n < 1:
        raise ConfigError("graph.n", "must be >= 1")
    radius = _typed(sec, "radius", "graph", float, 0.15)
    if kind == "geometric" and not 0 < radius <= 2 ** 0.5:
        raise ConfigError("graph.radius", "must lie in (0, sqrt(2)]")
    edges = None
    if kind == "custom":
        if "edges" not in sec:
            raise ConfigError("graph.edges", "missing required key for custom graph")
        edges = []
        for e in sec["edges"]:
            if not (isinstance(e, (list, tuple)) and len(e) == 2 and all(isinstance(x, int) for x in e)):
                raise ConfigError("graph.edges", f"malformed edge {e!r}")
            if not all(0 <= x < n for x in e) or e[0] == e[1]:
                raise ConfigError("graph.edges", f"edge {list(e)} invalid for {n} nodes")
            edges.append(tuple(e))
        edges = tuple(edges)
    return GraphSpec(
        kind=kind, n=n, radius=radius, edges=edges,
        seed=_typed(sec, "seed", "graph", int, None, allow_none=True),
        max_tries=_typed(sec, "max_tries", "graph", int, 100),
    )


def _protocol(raw: dict) -> ProtocolConfig:
    sec = _section(raw, "protocol")
    _unknown(sec, {"name", "schedule", "alpha", "bits_per_entry", "include_own_mu"}, "protocol")
    name = _typed(sec, "name", "protocol", str, "poe")
    if name not in PROTOCOLS:
        raise ConfigError("protocol.name", f"unknown protocol {name!r}; choose from {', '.join(PROTOCOLS)}")
    schedule = sec.get("schedule")
    if isinstance(schedule, list):
        schedule = "explicit:" + ",".join(str(int(t)) for t in schedule)
    if schedule is not None:
        if not isinstance(schedule, str):
            raise ConfigError("protocol.schedule", f"expected a string, got {schedule!r}")
        try:
            parse_schedule(schedule, 16)
        except (ScheduleError, ValueError) as exc:
            raise ConfigError("protocol.schedule", str(exc)) from None
    alpha = _typed(sec, "alpha", "protocol", float, 1e-3)
    if not 0 < alpha < 1:
        raise ConfigError("protocol.alpha", f"must lie in (0, 1), got {alpha}")
    bits = _typed(sec, "bits_per_entry", "protocol", int, 64)
    if bits < 1:
        raise ConfigError("protocol.bits_per_entry", "must be >= 1")
    return ProtocolConfig(
        name=name, schedule=schedule, alpha=alpha, bits_per_entry=bits,
        include_own_mu=_typed(sec, "include_own_mu", "protocol", bool, False),
    )


TOP_KEYS = {"model", "graph", "protocol", "true_state", "horizon", "check_identifiability",
            "seeds", "compare", "output"}


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    _unknown(raw, TOP_KEYS, "")
    model = _model_spec(raw)
    graph = _graph_spec(raw)
    protocol = _protocol(raw)

    num_states = len(model.tables[0]) if model.kind == "explicit" else len(model.base)
    if "true_state" not in raw:
        raise ConfigError("true_state", "missing required key")
    true_state = _typed(raw, "true_state", "", int, 0)
    if not 0 <= true_state < num_states:
        raise ConfigError("true_state", f"state {true_state} out of range 0..{num_states - 1}")
    num_agents = len(model.tables) if model.kind == "explicit" else (model.num_agents or graph.n)
    if num_agents != graph.n:
        raise ConfigError("model", f"model has {num_agents} agents but graph.n = {graph.n}")
    horizon = _typed(raw, "horizon", "", int, 2000)
    if horizon < 1:
        raise ConfigError("horizon", "must be >= 1")

    compare = raw.get("compare") or []
    if not isinstance(compare, list) or any(c not in PROTOCOLS for c in compare):
        raise ConfigError("compare", f"expected a list drawn from {', '.join(PROTOCOLS)}")

    out = _section(raw, "output")
    _unknown(out, {"dir", "trace"}, "output")
    trace = _typed(out, "trace", "output", str, "auto")
    if trace not in TRACE_MODES:
        raise ConfigError("output.trace", f"expected one of {', '.join(TRACE_MODES)}")

    scenario = Scenario(
        model=model, graph=graph, protocol=protocol, true_state=true_state, horizon=horizon,
        check_identifiability=_typed(raw, "check_identifiability", "", bool, True),
    )
    return ExperimentConfig(
        scenario=scenario,
        seeds=parse_seeds(raw.get("seeds", 0)),
        compare=tuple(compare),
        out_dir=_typed(out, "dir", "output", str, "out"),
        trace=trace,
    )


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from None
    return config_from_dict(raw or {})


def apply_overrides(
    cfg: ExperimentConfig,
    *,
    seed: Optional[int] = None,
    seeds: Optional[str] = None,
    protocol: Optional[str] = None,
    alpha: Optional[float] = None,
    horizon: Optional[int] = None,
    out: Optional[str] = None,
    trace: Optional[str] = None,
) -> ExperimentConfig:
    """Command-line flags win over config values; the result is re-validated."""
    raw = cfg.to_dict()
    if seeds is not None:
        raw["seeds"] = seeds
    if seed is not None:
        raw["seeds"] = [seed]
    if protocol is not None:
        names = [p.strip() for p in protocol.split(",") if p.strip()]
        raw["protocol"]["name"] = names[0]
        raw["compare"] = names if len(names) > 1 else []
        if names[0] != cfg.scenario.protocol.name:
            raw["protocol"]["schedule"] = None
    if alpha is not None:
        raw["protocol"]["alpha"] = alpha
    if horizon is not None:
        raw["horizon"] = horizon
    if out is not None:
        raw["output"]["dir"] = out
    if trace is not None:
        raw["output"]["trace"] = trace
    return config_from_dict(raw)
