"""Domain records, placement state and the latency/objective functions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np


class IdentifierError(KeyError):
    """An actor id is unknown, or registered twice."""


class InvariantViolation(AssertionError):
    pass


@dataclass(frozen=True)
class Location:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite location ({self.x}, {self.y})")

    def distance_to(self, other: "Location") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def within(self, extent: float) -> bool:
        return 0.0 <= self.x <= extent and 0.0 <= self.y <= extent


@dataclass(frozen=True)
class ProducerRecord:
    id: int
    location: Location
    data_size: int
    # None means unbounded: replicas are limited only by resource exhaustion.
    replica_threshold: int | None = None

    def __post_init__(self):
        if self.data_size <= 0:
            raise ValueError(f"producer {self.id}: data_size must be positive")
        if self.replica_threshold is not None and self.replica_threshold < 1:
            raise ValueError(f"producer {self.id}: replica_threshold must be >= 1")


@dataclass(frozen=True)
class HostRecord:
    id: int
    location: Location
    capacity: int
    producer_load_threshold: int
    consumer_load_threshold: int
    base_latency: float
    tier: str = "medium"

    def __post_init__(self):
        if self.capacity <= 0:
            raise ValueError(f"host {self.id}: capacity must be positive")
        if self.producer_load_threshold < 1 or self.consumer_load_threshold < 1:
            raise ValueError(f"host {self.id}: load thresholds must be >= 1")
        if self.base_latency < 0:
            raise ValueError(f"host {self.id}: negative base latency")
        if self.tier not in ("high", "medium", "low"):
            raise ValueError(f"host {self.id}: unknown tier {self.tier!r}")


@dataclass(frozen=True)
class ConsumerRecord:
    id: int
    location: Location
    subscriptions: frozenset[int]

    def __post_init__(self):
        if not self.subscriptions:
            raise ValueError(f"consumer {self.id}: empty subscription list")
        object.__setattr__(self, "subscriptions", frozenset(self.subscriptions))


class LatencyModel:
    """Per-chunk link latencies between actors and hosts.

    A link to host ``j`` costs the host's base latency plus an optional
    non-negative jitter drawn per (actor, host) link. Jitter is derived from
    ``seed`` and the link identity alone, so tables are reproducible and
    independent of query order.
    """

    def __init__(self, base_latency: dict[int, float], jitter_ms: float = 0.0, seed: int = 0):
        if jitter_ms < 0:
            raise ValueError("jitter_ms must be >= 0")
        self.base = dict(base_latency)
        self.jitter_ms = float(jitter_ms)
        self.seed = int(seed)
        self._host_ids = np.array(sorted(self.base), dtype=np.int64)
        self._base_vec = np.array([self.base[j] for j in self._host_ids], dtype=float)
        self._vec_cache: dict[tuple[int, int], np.ndarray] = {}

    @classmethod
    def from_hosts(cls, hosts: Iterable[HostRecord], jitter_ms: float = 0.0, seed: int = 0):
        return cls({h.id: h.base_latency for h in hosts}, jitter_ms, seed)

    def _jitter_vector(self, role: int, actor_id: int) -> np.ndarray:
        key = (role, actor_id)
        vec = self._vec_cache.get(key)
        if vec is None:
            rng = np.random.default_rng([self.seed, role, actor_id])
            vec = rng.uniform(0.0, self.jitter_ms, size=len(self._host_ids))
            self._vec_cache[key] = vec
        return vec

    def _link(self, role: int, actor_id: int, host_id: int) -> float:
        if host_id not in self.base:
            raise IdentifierError(f"unknown host {host_id}")
        if self.jitter_ms == 0.0:
            return self.base[host_id]
        idx = int(np.searchsorted(self._host_ids, host_id))
        return self.base[host_id] + float(self._jitter_vector(role, actor_id)[idx])

    def producer_link(self, producer_id: int, host_id: int) -> float:
        """lat_ij: per-chunk latency producer -> host."""
        return self._link(0, producer_id, host_id)

    def consumer_link(self, consumer_id: int, host_id: int) -> float:
        """lat_jk: per-chunk latency host -> consumer."""
        return self._link(1, consumer_id, host_id)

    def host_ids(self) -> np.ndarray:
        return self._host_ids

    def producer_vector(self, producer_id: int) -> np.ndarray:
        """lat_ij for every host, aligned with :meth:`host_ids`."""
        if self.jitter_ms == 0.0:
            return self._base_vec
        return self._base_vec + self._jitter_vector(0, producer_id)

    def consumer_vector(self, consumer_id: int) -> np.ndarray:
        if self.jitter_ms == 0.0:
            return self._base_vec
        return self._base_vec + self._jitter_vector(1, consumer_id)

    def table(self) -> dict[int, float]:
        return dict(self.base)


def chunk_count(data_size: int, chunk_size: int) -> int:
    # partial chunks cost a full transfer
    return -(-data_size // chunk_size)


def path_latency(
    producer: ProducerRecord,
    host: HostRecord,
    consumer: ConsumerRecord,
    latency: LatencyModel,
    chunk_size: int,
) -> float:
    """End-to-end latency of streaming all of a producer's chunks via one host."""
    if chunk_size <= 0:
        raise ValueError("chunk_size must be positive")
    per_chunk = latency.producer_link(producer.id, host.id) + latency.consumer_link(consumer.id, host.id)
    return per_chunk * chunk_count(producer.data_size, chunk_size)


class PlacementState:
    """Sparse path set plus per-host load and storage bookkeeping.

    ``hosting`` holds every (producer, host) residency, including residencies
    created by initial placement before any consumer exists. Load and storage
    counters are derived from residency, which is a superset of the
    (producer, host) pairs that appear in ``paths``.
    """

    def __init__(
        self,
        hosts: Iterable[HostRecord],
        producers: Iterable[ProducerRecord],
        consumers: Iterable[ConsumerRecord] = (),
        chunk_size: int = 1024,
    ):
        if chunk_size <= 0:
            raise ValueError("chunk_size must be positive")
        self.chunk_size = chunk_size
        self.hosts: dict[int, HostRecord] = {}
        self.producers: dict[int, ProducerRecord] = {}
        self.consumers: dict[int, ConsumerRecord] = {}
        for h in hosts:
            self.add_host(h)
        for p in producers:
            self.add_producer(p)
        for c in consumers:
            self.add_consumer(c)

        self.paths: set[tuple[int, int, int]] = set()
        # (producer, consumer) -> host; at most one route per subscribed pair
        self.routes: dict[tuple[int, int], int] = {}
        # producer -> hosts in the order residency was granted
        self.hosting: dict[int, list[int]] = {}
        self.host_producers: dict[int, set[int]] = {j: set() for j in self.hosts}
        # host -> consumer -> number of paths through the host
        self.host_consumers: dict[int, dict[int, int]] = {j: {} for j in self.hosts}
        self.used_storage: dict[int, int] = {j: 0 for j in self.hosts}
        # producer -> consumers served, in grant order
        self.served: dict[int, list[int]] = {}

    # registration

    def add_host(self, host: HostRecord) -> None:
        if host.id in self.hosts:
            raise IdentifierError(f"host {host.id} already registered")
        self.hosts[host.id] = host
        if hasattr(self, "host_producers"):
            self.host_producers[host.id] = set()
            self.host_consumers[host.id] = {}
            self.used_storage[host.id] = 0

    def add_producer(self, producer: ProducerRecord) -> None:
        if producer.id in self.producers:
            raise IdentifierError(f"producer {producer.id} already registered")
        self.producers[producer.id] = producer

    def add_consumer(self, consumer: ConsumerRecord) -> None:
        if consumer.id in self.consumers:
            raise IdentifierError(f"consumer {consumer.id} already registered")
        missing = [i for i in consumer.subscriptions if i not in self.producers]
        if missing:
            raise IdentifierError(f"consumer {consumer.id} subscribes to unknown producers {sorted(missing)}")
        self.consumers[consumer.id] = consumer

    def host(self, host_id: int) -> HostRecord:
        try:
            return self.hosts[host_id]
        except KeyError:
            raise IdentifierError(f"unknown host {host_id}") from None

    def producer(self, producer_id: int) -> ProducerRecord:
        try:
            return self.producers[producer_id]
        except KeyError:
            raise IdentifierError(f"unknown producer {producer_id}") from None

    def consumer(self, consumer_id: int) -> ConsumerRecord:
        try:
            return self.consumers[consumer_id]
        except KeyError:
            raise IdentifierError(f"unknown consumer {consumer_id}") from None

    # queries

    def active_producers(self, host_id: int) -> int:
        return len(self.host_producers[host_id])

    def active_consumers(self, host_id: int) -> int:
        return len(self.host_consumers[host_id])

    def hosts_of(self, producer_id: int) -> list[int]:
        return list(self.hosting.get(producer_id, ()))

    def consumers_of(self, producer_id: int) -> list[int]:
        return list(self.served.get(producer_id, ()))

    def is_resident(self, producer_id: int, host_id: int) -> bool:
        return producer_id in self.host_producers[host_id]

    def replica_pairs(self) -> int:
        return sum(len(v) for v in self.hosting.values())

    # raw mutation; feasibility is the caller's job (see constraints)

    def _add_residency(self, producer_id: int, host_id: int) -> bool:
        if producer_id in self.host_producers[host_id]:
            return False
        self.host_producers[host_id].add(producer_id)
        self.used_storage[host_id] += self.producers[producer_id].data_size
        self.hosting.setdefault(producer_id, []).append(host_id)
        return True

    def _add_path(self, producer_id: int, host_id: int, consumer_id: int) -> None:
        self.paths.add((producer_id, host_id, consumer_id))
        self.routes[(producer_id, consumer_id)] = host_id
        on_host = self.host_consumers[host_id]
        on_host[consumer_id] = on_host.get(consumer_id, 0) + 1
        self.served.setdefault(producer_id, []).append(consumer_id)


def objective_value(state: PlacementState, latency: LatencyModel) -> float:
    """Mean end-to-end latency over all present paths; 0 for an empty state."""
    if not state.paths:
        return 0.0
    total = 0.0
    for i, j, k in state.paths:
        total += path_latency(state.producers[i], state.hosts[j], state.consumers[k], latency, state.chunk_size)
    return total / len(state.paths)


def dense_cube(state: PlacementState):
    """Return (phc, producer_ids, host_ids, consumer_ids) with phc a 0/1 array."""
    pids = sorted(state.producers)
    hids = sorted(state.hosts)
    cids = sorted(state.consumers)
    pi = {v: n for n, v in enumerate(pids)}
    hi = {v: n for n, v in enumerate(hids)}
    ci = {v: n for n, v in enumerate(cids)}
    phc = np.zeros((len(pids), len(hids), len(cids)), dtype=np.int8)
    for i, j, k in state.paths:
        phc[pi[i], hi[j], ci[k]] = 1
    return phc, pids, hids, cids


def dense_objective(state: PlacementState, latency: LatencyModel) -> float:
    """Objective evaluated by walking the full producer x host x consumer cube."""
    phc, pids, hids, cids = dense_cube(state)
    num = 0.0
    den = 0
    for a, i in enumerate(pids):
        n_chunks = chunk_count(state.producers[i].data_size, state.chunk_size)
        for b, j in enumerate(hids):
            for c, k in enumerate(cids):
                if phc[a, b, c]:
                    lat = latency.producer_link(i, j) + latency.consumer_link(k, j)
                    num += lat * n_chunks
                    den += 1
    return num / den if den else 0.0


def validate_state(state: PlacementState) -> list[str]:
    """Re-derive every counter from the raw path set and check all constraints.

    Returns a list of human-readable violations (empty when the state is sound).
    """
    problems: list[str] = []
    phc, pids, hids, cids = dense_cube(state)
    for b, j in enumerate(hids):
        host = state.hosts[j]
        path_producers = {pids[a] for a in np.nonzero(phc[:, b, :].any(axis=1))[0]}
        path_consumers = {cids[c] for c in np.nonzero(phc[:, b, :].any(axis=0))[0]}
        resident = state.host_producers[j]
        if not path_producers <= resident:
            problems.append(f"host {j}: paths use non-resident producers {sorted(path_producers - resident)}")
        if len(resident) != state.active_producers(j):
            problems.append(f"host {j}: producer counter mismatch")
        if len(resident) > host.producer_load_threshold:
            problems.append(f"host {j}: producer load {len(resident)} > {host.producer_load_threshold}")
        if path_consumers != set(state.host_consumers[j]):
            problems.append(f"host {j}: consumer set mismatch")
        if len(path_consumers) > host.consumer_load_threshold:
            problems.append(f"host {j}: consumer load {len(path_consumers)} > {host.consumer_load_threshold}")
        storage = sum(state.producers[i].data_size for i in resident)
        if storage != state.used_storage[j]:
            problems.append(f"host {j}: storage counter {state.used_storage[j]} != {storage}")
        if storage > host.capacity:
            problems.append(f"host {j}: storage {storage} > capacity {host.capacity}")
    for a, i in enumerate(pids):
        for c, k in enumerate(cids):
            n = int(phc[a, :, c].sum())
            subscribed = i in state.consumers[k].subscriptions
            if n and not subscribed:
                problems.append(f"path ({i},*,{k}) without subscription")
            if n > 1:
                problems.append(f"pair ({i},{k}) has {n} paths")
        served = bool(phc[a].any())
        if served and not state.hosting.get(i):
            problems.append(f"producer {i} serves consumers but has no host")
        r = state.producers[i].replica_threshold
        if r is not None and len(state.hosting.get(i, ())) > r:
            problems.append(f"producer {i} exceeds replica threshold {r}")
    for (i, k), j in state.routes.items():
        if (i, j, k) not in state.paths:
            problems.append(f"route ({i},{k})->{j} missing from path set")
    if len(state.routes) != len(state.paths):
        problems.append("route table and path set differ in size")
    return problems


def check_invariants(state: PlacementState) -> None:
    problems = validate_state(state)
    if problems:
        raise InvariantViolation("; ".join(problems))


__all__ = [
    "IdentifierError",
    "InvariantViolation",
    "Location",
    "ProducerRecord",
    "HostRecord",
    "ConsumerRecord",
    "LatencyModel",
    "PlacementState",
    "chunk_count",
    "path_latency",
    "objective_value",
    "dense_cube",
    "dense_objective",
    "validate_state",
    "check_invariants",
]
