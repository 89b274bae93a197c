"""Discrete-event simulation of producer placement, consumer arrivals and
chunked transfers, producing the four placement metrics."""

from __future__ import annotations

import csv
import enum
import heapq
import itertools
import math
import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import TIERS, ConfigError, ScenarioConfig
from .model import (
    ConsumerRecord,
    HostRecord,
    LatencyModel,
    Location,
    PlacementState,
    ProducerRecord,
    chunk_count,
    check_invariants,
)
from .strategies import CostModel, Matchmaker, Route


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent named random stream derived from the top-level seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))


def tier_counts(n: int, fractions: dict[str, float]) -> dict[str, int]:
    """Split ``n`` hosts across tiers by largest remainder."""
    raw = {t: n * fractions[t] for t in TIERS}
    counts = {t: int(math.floor(raw[t] + 1e-9)) for t in TIERS}
    left = n - sum(counts.values())
    order = sorted(TIERS, key=lambda t: (-(raw[t] - counts[t]), TIERS.index(t)))
    for t in order[:left]:
        counts[t] += 1
    return counts


def split_load(total: int, producer_fraction: float) -> tuple[int, int]:
    """(producer threshold, consumer threshold) for a host's total load."""
    frac = Fraction(producer_fraction).limit_denominator(1000)
    plt = max(1, math.floor(total * frac))
    clt = max(1, total - plt)
    return plt, clt


def poisson_arrivals(n: int, mean_interarrival: float, rng: np.random.Generator) -> np.ndarray:
    """Arrival times of a Poisson process, first arrival after one gap."""
    return np.cumsum(rng.exponential(mean_interarrival, size=n))


def load_locations(path: str | Path, extent: float | None = None) -> list[Location]:
    """Read a ``id,x,y`` CSV of coordinates."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames[:3]] != ["id", "x", "y"]:
            raise ConfigError("locations", f"{path}: expected header id,x,y")
        for row in reader:
            loc = Location(float(row["x"]), float(row["y"]))
            if extent is not None and not loc.within(extent):
                raise ConfigError("locations", f"{path}: row id={row['id']} outside [0, {extent}]")
            out.append(loc)
    if not out:
        raise ConfigError("locations", f"{path}: no rows")
    return out


@dataclass
class Fleet:
    hosts: list[HostRecord]
    producers: list[ProducerRecord]
    consumers: list[ConsumerRecord]


def generate_fleet(config: ScenarioConfig, seed: int | None = None) -> Fleet:
    seed = config.seed if seed is None else seed
    fleet_rng = stream(seed, "fleet")
    loc_rng = stream(seed, "locations")
    sub_rng = stream(seed, "subscriptions")
    extent = config.world_extent

    pool = load_locations(config.locations, extent) if config.locations else None

    def place(n):
        if pool is None:
            xy = loc_rng.uniform(0.0, extent, size=(n, 2))
            return [Location(float(x), float(y)) for x, y in xy]
        idx = loc_rng.integers(0, len(pool), size=n)
        return [pool[i] for i in idx]

    counts = tier_counts(config.hosts, config.tier_fractions)
    tiers = [t for t in TIERS for _ in range(counts[t])]
    tiers = [tiers[i] for i in fleet_rng.permutation(len(tiers))]
    host_locs = place(config.hosts)
    hosts = []
    for j, tier in enumerate(tiers):
        lat_lo, lat_hi = config.tier_latency_ms[tier]
        cap_lo, cap_hi = config.tier_capacity_bytes[tier]
        load_lo, load_hi = config.tier_load[tier]
        base = float(fleet_rng.uniform(lat_lo, lat_hi))
        cap = int(fleet_rng.integers(cap_lo, cap_hi, endpoint=True))
        total = int(fleet_rng.integers(load_lo, load_hi, endpoint=True))
        plt, clt = split_load(total, config.producer_load_fraction)
        hosts.append(HostRecord(j, host_locs[j], cap, plt, clt, base, tier))

    size_lo, size_hi = config.data_size_bytes
    sizes = fleet_rng.integers(size_lo, size_hi, size=config.producers, endpoint=True)
    prod_locs = place(config.producers)
    producers = [
        ProducerRecord(i, prod_locs[i], int(sizes[i]), config.replica_threshold) for i in range(config.producers)
    ]

    cons_locs = place(config.consumers)
    consumers = []
    for k in range(config.consumers):
        subs = sub_rng.choice(config.producers, size=config.subscriptions_per_consumer, replace=False)
        consumers.append(ConsumerRecord(k, cons_locs[k], frozenset(int(s) for s in subs)))
    return Fleet(hosts, producers, consumers)


class EventKind(str, enum.Enum):
    PRODUCER_REGISTER = "producer_register"
    CONSUMER_ARRIVE = "consumer_arrive"
    CHUNK_DELIVERED = "chunk_delivered"
    REPLICA_ESTABLISHED = "replica_established"


@dataclass
class Event:
    timestamp: float
    kind: EventKind
    payload: dict = field(default_factory=dict)


class EventQueue:
    """Time-ordered queue; equal timestamps pop in insertion order."""

    def __init__(self):
        self._heap: list = []
        self._seq = itertools.count()

    def push(self, timestamp: float, kind: EventKind, **payload) -> Event:
        ev = Event(float(timestamp), kind, payload)
        heapq.heappush(self._heap, (ev.timestamp, next(self._seq), ev))
        return ev

    def pop(self) -> Event:
        return heapq.heappop(self._heap)[2]

    def __len__(self) -> int:
        return len(self._heap)


@dataclass
class MetricsLedger:
    e2e_ms: list[float] = field(default_factory=list)
    # per producer, ordered by producer id: number of hosts holding its data
    replica_counts: list[int] = field(default_factory=list)
    replication_overhead_ms: list[float] = field(default_factory=list)
    selection_time_ms: list[float] = field(default_factory=list)
    # wall-clock decision times; informative only, not reproducible
    selection_wall_ms: list[float] = field(default_factory=list, compare=False, repr=False)
    consumer_declines: int = 0
    producer_declines: int = 0
    served_existing: int = 0
    served_replica: int = 0
    subscriptions: int = 0
    chunks_delivered: int = 0
    expected_chunks: int = 0
    events: dict = field(default_factory=dict)
    replicas_created: int = 0

    @property
    def declines(self) -> int:
        return self.consumer_declines + self.producer_declines

    def mean_replicas_per_producer(self) -> float:
        return sum(self.replica_counts) / len(self.replica_counts) if self.replica_counts else 0.0


def run(
    config: ScenarioConfig,
    fleet: Fleet | None = None,
    arrivals: Sequence[float] | None = None,
    return_state: bool = False,
):
    """Run one simulation. Returns the ledger (and the final state when asked)."""
    if fleet is None:
        fleet = generate_fleet(config)
    if arrivals is None:
        arrivals = poisson_arrivals(len(fleet.consumers), config.mean_interarrival_ms, stream(config.seed, "arrivals"))
    arrivals = list(arrivals)
    if len(arrivals) != len(fleet.consumers):
        raise ValueError("one arrival time per consumer required")

    state = PlacementState(fleet.hosts, fleet.producers, (), chunk_size=config.chunk_size)
    latency = LatencyModel.from_hosts(
        fleet.hosts, config.latency_jitter_ms, int(stream(config.seed, "latency").integers(2**31))
    )
    mm = Matchmaker(
        state,
        latency,
        config.strategy,
        cost_model=CostModel(**config.cost_model),
        world_extent=config.world_extent,
        ring_step=config.ring_step,
        rtree_max=config.rtree_max_children,
        rtree_min=config.rtree_min_children,
        validate=config.validate,
    )
    ledger = MetricsLedger()
    counts = {k.value: 0 for k in EventKind}
    queue = EventQueue()
    for p in fleet.producers:
        queue.push(0.0, EventKind.PRODUCER_REGISTER, producer=p.id)
    pending_producers = len(fleet.producers)
    free_at = 0.0  # Matchmaker busy until

    def start_consumers(t0: float):
        for c, t in zip(fleet.consumers, arrivals):
            queue.push(t0 + t, EventKind.CONSUMER_ARRIVE, consumer=c)

    if pending_producers == 0:
        mm.end_initial_phase()
        start_consumers(0.0)

    while queue:
        ev = queue.pop()
        t = ev.timestamp
        counts[ev.kind.value] += 1

        if ev.kind is EventKind.PRODUCER_REGISTER:
            start = max(t, free_at)
            out = mm.select_host(ev.payload["producer"], is_replica=False)
            free_at = start + out.cost_ms
            if out.granted:
                queue.push(free_at, EventKind.REPLICA_ESTABLISHED, producer=ev.payload["producer"], host=out.host_id)
            else:
                ledger.producer_declines += 1
            pending_producers -= 1
            if pending_producers == 0:
                # consumer demand starts once every producer has been placed
                mm.end_initial_phase()
                start_consumers(free_at)

        elif ev.kind is EventKind.CONSUMER_ARRIVE:
            consumer = ev.payload["consumer"]
            state.add_consumer(consumer)
            for prod_id in sorted(consumer.subscriptions):
                ledger.subscriptions += 1
                start = max(t, free_at)
                out = mm.route_subscription(prod_id, consumer)
                free_at = start + out.cost_ms
                ledger.selection_time_ms.append(free_at - t)
                ledger.selection_wall_ms.append(out.decision_duration)
                if not out.granted:
                    ledger.consumer_declines += 1
                    continue
                j = out.host_id
                lat_ij = latency.producer_link(prod_id, j)
                per_chunk = lat_ij + latency.consumer_link(consumer.id, j)
                n = chunk_count(state.producers[prod_id].data_size, config.chunk_size)
                ledger.expected_chunks += n
                replica = out.route is Route.REPLICA
                if replica:
                    ledger.served_replica += 1
                    queue.push(free_at + lat_ij, EventKind.REPLICA_ESTABLISHED, producer=prod_id, host=j)
                else:
                    ledger.served_existing += 1
                path = dict(producer=prod_id, host=j, consumer=consumer.id, requested_at=t, replica=replica)
                queue.push(free_at + per_chunk, EventKind.CHUNK_DELIVERED, chunks=1, first=True, last=n == 1,
                           e2e=per_chunk * n, **path)
                if n > 1:
                    queue.push(free_at + per_chunk * n, EventKind.CHUNK_DELIVERED, chunks=n - 1, first=False,
                               last=True, e2e=per_chunk * n, **path)

        elif ev.kind is EventKind.CHUNK_DELIVERED:
            p = ev.payload
            ledger.chunks_delivered += p["chunks"]
            if p["first"] and p["replica"]:
                ledger.replication_overhead_ms.append(t - p["requested_at"])
            if p["last"]:
                ledger.e2e_ms.append(p["e2e"])

        elif ev.kind is EventKind.REPLICA_ESTABLISHED:
            ledger.replicas_created += 1

    ledger.events = counts
    ledger.replica_counts = [len(state.hosting.get(i, ())) for i in sorted(state.producers)]
    if config.validate:
        check_invariants(state)
    if return_state:
        return ledger, state
    return ledger


@dataclass
class MetricSummary:
    mean: float
    count: int
    bin_edges: list[float]
    bin_counts: list[int]


METRICS = ("e2e_ms", "replicas_per_producer", "replication_overhead_ms", "selection_time_ms")


def _samples(ledger: MetricsLedger, metric: str) -> list[float]:
    if metric == "replicas_per_producer":
        return [float(v) for v in ledger.replica_counts]
    return list(getattr(ledger, metric))


def summarize(ledger: MetricsLedger, bins: int = 20) -> dict[str, MetricSummary]:
    """Mean and histogram per metric. Means of empty samples are NaN."""
    out = {}
    for metric in METRICS:
        xs = np.asarray(_samples(ledger, metric), dtype=float)
        if xs.size == 0:
            out[metric] = MetricSummary(math.nan, 0, [], [])
            continue
        counts, edges = np.histogram(xs, bins=bins)
        out[metric] = MetricSummary(float(math.fsum(xs) / xs.size), int(xs.size), edges.tolist(), counts.tolist())
    return out
