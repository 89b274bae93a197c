"""Scenario configuration, its JSON schema, and the bundled experiment sweeps."""

from __future__ import annotations

import copy
import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import yaml

GB = 1 << 30
TB = 1 << 40

TIERS = ("high", "medium", "low")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _thirds(lo: int, hi: int) -> dict[str, list[int]]:
    # equal-width bands, low tier at the bottom
    a = lo + (hi - lo) // 3
    b = lo + 2 * (hi - lo) // 3
    return {"low": [lo, a], "medium": [a + 1, b], "high": [b + 1, hi]}


def _default_fractions():
    return {"high": 1 / 3, "medium": 1 / 3, "low": 1 / 3}


def _default_latency():
    return {"high": [5.0, 10.0], "medium": [10.0, 15.0], "low": [15.0, 20.0]}


def _default_capacity():
    return _thirds(32 * GB, TB)


def _default_load():
    return {"low": [40, 53], "medium": [54, 66], "high": [67, 80]}


def _default_cost():
    from .strategies import CostModel

    return dataclasses.asdict(CostModel())


@dataclass
class ScenarioConfig:
    scenario: str = "custom"
    strategy: str = "latency"
    hosts: int = 50
    producers: int = 100
    consumers: int = 200
    seed: int = 1
    tier_fractions: dict = field(default_factory=_default_fractions)
    tier_latency_ms: dict = field(default_factory=_default_latency)
    tier_capacity_bytes: dict = field(default_factory=_default_capacity)
    tier_load: dict = field(default_factory=_default_load)
    producer_load_fraction: float = 1 / 3
    data_size_bytes: list = field(default_factory=lambda: [GB, 32 * GB])
    chunk_size: int = 1024
    mean_interarrival_ms: float = 5.0
    subscriptions_per_consumer: int = 1
    rtree_max_children: int = 40
    rtree_min_children: int = 20
    world_extent: float = 1000.0
    concentric_step: float | None = None
    latency_jitter_ms: float = 0.0
    replica_threshold: int | None = None
    cost_model: dict = field(default_factory=_default_cost)
    histogram_bins: int = 20
    locations: str | None = None
    validate: bool = False

    def __post_init__(self):
        check_config(self.to_dict())

    @property
    def ring_step(self) -> float:
        return self.concentric_step if self.concentric_step is not None else self.world_extent / 16

    def to_dict(self) -> dict[str, Any]:
        return copy.deepcopy(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScenarioConfig":
        data = copy.deepcopy(dict(data))
        check_config(data, partial=True)
        return cls(**data)

    def replace(self, **changes) -> "ScenarioConfig":
        d = self.to_dict()
        d.update(changes)
        return ScenarioConfig.from_dict(d)

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "ScenarioConfig":
        data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a mapping")
        return cls.from_dict(data)


_range_num = {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2, "maxItems": 2}
_range_int = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2}


def _per_tier(schema):
    return {
        "type": "object",
        "properties": {t: schema for t in TIERS},
        "required": list(TIERS),
        "additionalProperties": False,
    }


CONFIG_SCHEMA: dict[str, Any] = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "edgeplace scenario",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "scenario": {"type": "string", "minLength": 1},
        "strategy": {"enum": ["distance", "latency", "spatial"]},
        "hosts": {"type": "integer", "minimum": 1},
        "producers": {"type": "integer", "minimum": 1},
        "consumers": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "tier_fractions": _per_tier({"type": "number", "minimum": 0, "maximum": 1}),
        "tier_latency_ms": _per_tier(_range_num),
        "tier_capacity_bytes": _per_tier(_range_int),
        "tier_load": _per_tier(_range_int),
        "producer_load_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "data_size_bytes": _range_int,
        "chunk_size": {"type": "integer", "minimum": 1},
        "mean_interarrival_ms": {"type": "number", "exclusiveMinimum": 0},
        "subscriptions_per_consumer": {"type": "integer", "minimum": 1},
        "rtree_max_children": {"type": "integer", "minimum": 2},
        "rtree_min_children": {"type": "integer", "minimum": 1},
        "world_extent": {"type": "number", "exclusiveMinimum": 0},
        "concentric_step": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "latency_jitter_ms": {"type": "number", "minimum": 0},
        "replica_threshold": {"type": ["integer", "null"], "minimum": 1},
        "cost_model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                k: {"type": "number", "minimum": 0}
                for k in (
                    "distance_eval_us",
                    "latency_lookup_us",
                    "comparison_us",
                    "viability_check_us",
                    "node_visit_us",
                    "request_us",
                )
            },
        },
        "histogram_bins": {"type": "integer", "minimum": 1},
        "locations": {"type": ["string", "null"]},
        "validate": {"type": "boolean"},
    },
}


def _path(error: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in error.absolute_path]
    if error.validator == "additionalProperties":
        extra = sorted(set(error.instance) - set(error.schema.get("properties", {})))
        parts.append(extra[0] if extra else "?")
    elif error.validator == "required":
        missing = [r for r in error.validator_value if r not in error.instance]
        parts.append(missing[0] if missing else "?")
    return ".".join(parts) or "<root>"


def check_config(data: dict[str, Any], partial: bool = False) -> None:
    """Validate against CONFIG_SCHEMA plus the cross-field rules.

    With ``partial`` only the schema is checked (defaults fill the rest later).
    """
    validator = jsonschema.Draft7Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(_path(err), err.message)
    if partial:
        return
    fr = data["tier_fractions"]
    if not math.isclose(sum(fr.values()), 1.0, abs_tol=1e-9):
        raise ConfigError("tier_fractions", f"fractions sum to {sum(fr.values())}, expected 1")
    for key in ("tier_latency_ms", "tier_capacity_bytes", "tier_load"):
        for tier, (lo, hi) in data[key].items():
            if lo > hi:
                raise ConfigError(f"{key}.{tier}", f"empty range [{lo}, {hi}]")
    lo, hi = data["data_size_bytes"]
    if lo > hi:
        raise ConfigError("data_size_bytes", f"empty range [{lo}, {hi}]")
    if data["rtree_min_children"] > data["rtree_max_children"] // 2:
        raise ConfigError("rtree_min_children", "must be at most rtree_max_children // 2")
    if data["subscriptions_per_consumer"] > data["producers"]:
        raise ConfigError("subscriptions_per_consumer", "exceeds the number of producers")


def schema_json() -> str:
    return json.dumps(CONFIG_SCHEMA, indent=2, sort_keys=True)


@dataclass
class Sweep:
    """A base config crossed with strategies x consumer counts x seeds."""

    base: ScenarioConfig
    strategies: list[str] = field(default_factory=lambda: ["distance", "latency", "spatial"])
    consumers: list[int] = field(default_factory=lambda: [200])
    seeds: list[int] = field(default_factory=lambda: [1])

    def cells(self) -> list[ScenarioConfig]:
        out = []
        for consumers in self.consumers:
            for strategy in self.strategies:
                for seed in self.seeds:
                    out.append(self.base.replace(strategy=strategy, consumers=consumers, seed=seed))
        return out

    def to_dict(self) -> dict[str, Any]:
        d = self.base.to_dict()
        for k in ("strategy", "consumers", "seed"):
            d.pop(k)
        d["sweep"] = {"strategies": list(self.strategies), "consumers": list(self.consumers), "seeds": list(self.seeds)}
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Sweep":
        data = copy.deepcopy(dict(data))
        sweep = data.pop("sweep", {}) or {}
        if not isinstance(sweep, dict):
            raise ConfigError("sweep", "must be a mapping")
        unknown = set(sweep) - {"strategies", "consumers", "seeds"}
        if unknown:
            raise ConfigError(f"sweep.{sorted(unknown)[0]}", "unknown sweep key")
        name = data.get("scenario")
        if name in SCENARIOS:
            merged = SCENARIOS[name].to_dict()
            merged_sweep = merged.pop("sweep")
            merged.update(data)
            merged_sweep.update(sweep)
            data, sweep = merged, merged_sweep
        base = ScenarioConfig.from_dict(data)
        kw = {}
        for key in ("strategies", "consumers", "seeds"):
            if key in sweep:
                kw[key] = list(sweep[key])
        for s in kw.get("strategies", []):
            if s not in ("distance", "latency", "spatial"):
                raise ConfigError("sweep.strategies", f"unknown strategy {s!r}")
        for c in kw.get("consumers", []):
            if not isinstance(c, int) or c < 0:
                raise ConfigError("sweep.consumers", f"invalid consumer count {c!r}")
        for s in kw.get("seeds", []):
            if not isinstance(s, int) or s < 0:
                raise ConfigError("sweep.seeds", f"invalid seed {s!r}")
        return cls(base=base, **kw)

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @classmethod
    def load(cls, path: str | Path) -> "Sweep":
        data = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a mapping")
        return cls.from_dict(data)


def _e2e_sweep(name: str) -> Sweep:
    return Sweep(
        base=ScenarioConfig(scenario=name, hosts=50, producers=100),
        consumers=[200, 400, 600, 800],
        seeds=[1, 2, 3, 4, 5],
    )


SCENARIOS: dict[str, Sweep] = {
    "e2e_latency": _e2e_sweep("e2e_latency"),
    "replica_count": _e2e_sweep("replica_count"),
    "replication_overhead": _e2e_sweep("replication_overhead"),
    "selection_time": Sweep(
        base=ScenarioConfig(scenario="selection_time", hosts=5000, producers=50),
        consumers=[100, 500, 1000],
        seeds=[1, 2, 3, 4, 5],
    ),
}


def scenario(name: str) -> Sweep:
    try:
        return copy.deepcopy(SCENARIOS[name])
    except KeyError:
        raise ConfigError("scenario", f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
