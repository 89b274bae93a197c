"""Matchmaker host selection: initial load conditioning, centroid siting,
the distance / latency / spatial strategies and consumer routing."""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .constraints import PlacementRejected, can_host_consumer, can_host_producer, grant_path, place_producer
from .model import ConsumerRecord, HostRecord, LatencyModel, Location, PlacementState, ProducerRecord
from .spatial import RTree


class StrategyKind(str, enum.Enum):
    DISTANCE = "distance"
    LATENCY = "latency"
    SPATIAL = "spatial"


class DeclineReason(str, enum.Enum):
    NO_VIABLE_HOST = "no_viable_host"
    REPLICAS_EXHAUSTED = "replicas_exhausted"


class Route(str, enum.Enum):
    EXISTING = "existing"
    REPLICA = "replica"
    DECLINED = "declined"


@dataclass
class SelectionOutcome:
    host_id: int | None = None
    reason: DeclineReason | None = None
    # wall-clock time of the decision, ms
    decision_duration: float = 0.0
    # modeled Matchmaker compute time, ms (deterministic)
    cost_ms: float = 0.0
    new_residency: bool = False
    # spatial search phase that produced the host (1, 2 or 3)
    phase: int | None = None
    route: Route | None = None

    def __post_init__(self):
        if self.host_id is None and self.reason is None:
            raise ValueError("a decline must carry a reason")
        if self.decision_duration < 0:
            raise ValueError("negative decision duration")

    @property
    def granted(self) -> bool:
        return self.host_id is not None


@dataclass
class OpCounts:
    distance_evals: int = 0
    latency_lookups: int = 0
    comparisons: int = 0
    viability_checks: int = 0
    node_visits: int = 0

    def sort(self, n: int) -> None:
        if n > 1:
            self.comparisons += math.ceil(n * math.log2(n))


@dataclass(frozen=True)
class CostModel:
    """Deterministic cost of Matchmaker work, microseconds per operation.

    Defaults approximate one interpreted Python operation of each kind on a
    commodity core; they only need to be stable, not exact.
    """

    distance_eval_us: float = 0.25
    latency_lookup_us: float = 0.1
    comparison_us: float = 0.05
    viability_check_us: float = 0.5
    node_visit_us: float = 0.3
    request_us: float = 5.0

    def charge_ms(self, ops: OpCounts) -> float:
        us = (
            self.request_us
            + ops.distance_evals * self.distance_eval_us
            + ops.latency_lookups * self.latency_lookup_us
            + ops.comparisons * self.comparison_us
            + ops.viability_checks * self.viability_check_us
            + ops.node_visits * self.node_visit_us
        )
        return us / 1000.0


def centroid(producer: ProducerRecord, consumers: Sequence[ConsumerRecord]) -> Location:
    """Mean of the producer's location and its consumers' locations."""
    xs = [producer.location.x] + [c.location.x for c in consumers]
    ys = [producer.location.y] + [c.location.y for c in consumers]
    return Location(math.fsum(xs) / len(xs), math.fsum(ys) / len(ys))


def initial_load_conditioning(host: HostRecord, initial_phase: bool = True) -> int:
    """Producer threshold in force: half (floored) during initial placement."""
    if initial_phase:
        return host.producer_load_threshold // 2
    return host.producer_load_threshold


class Matchmaker:
    """Single serialized decision point over one PlacementState."""

    def __init__(
        self,
        state: PlacementState,
        latency: LatencyModel,
        strategy: StrategyKind | str,
        tree: RTree | None = None,
        cost_model: CostModel | None = None,
        world_extent: float = 1000.0,
        ring_step: float | None = None,
        rtree_max: int = 40,
        rtree_min: int = 20,
        validate: bool = False,
    ):
        self.state = state
        self.latency = latency
        self.strategy = StrategyKind(strategy)
        self.cost_model = cost_model or CostModel()
        self.world_extent = float(world_extent)
        self.ring_step = ring_step if ring_step is not None else self.world_extent / 16
        if self.ring_step <= 0:
            raise ValueError("ring_step must be positive")
        self.validate = validate
        self.initial_phase = True

        self._ids = np.array(sorted(state.hosts), dtype=np.int64)
        if not np.array_equal(self._ids, latency.host_ids()):
            raise ValueError("latency table does not cover exactly the registered hosts")
        self._hx = np.array([state.hosts[j].location.x for j in self._ids], dtype=float)
        self._hy = np.array([state.hosts[j].location.y for j in self._ids], dtype=float)

        if self.strategy is StrategyKind.SPATIAL and tree is None:
            tree = RTree.build(((j, state.hosts[j].location) for j in self._ids), rtree_max, rtree_min)
        self.tree = tree
        self.ops = OpCounts()

    # phase control

    def end_initial_phase(self) -> None:
        self.initial_phase = False

    def producer_limit(self, host: HostRecord) -> int:
        return initial_load_conditioning(host, self.initial_phase)

    # shared helpers

    def _ranked(self, keys: np.ndarray, ids: np.ndarray | None = None) -> np.ndarray:
        ids = self._ids if ids is None else ids
        self.ops.sort(len(ids))
        return ids[np.lexsort((ids, keys))]

    def _first_viable(self, order, producer: ProducerRecord, consumer: ConsumerRecord | None) -> int | None:
        state = self.state
        for hid in order:
            hid = int(hid)
            host = state.hosts[hid]
            self.ops.viability_checks += 1
            limit = None if consumer is not None else self.producer_limit(host)
            if not can_host_producer(state, host, producer, limit):
                continue
            if consumer is not None and not can_host_consumer(state, host, consumer):
                continue
            return hid
        return None

    def _distances(self, loc: Location) -> np.ndarray:
        self.ops.distance_evals += len(self._ids)
        return np.hypot(self._hx - loc.x, self._hy - loc.y)

    def _latency_keys(self, producer: ProducerRecord, consumer: ConsumerRecord | None, ids=None) -> np.ndarray:
        if ids is None:
            self.ops.latency_lookups += len(self._ids) * (1 if consumer is None else 2)
            keys = self.latency.producer_vector(producer.id)
            if consumer is not None:
                keys = keys + self.latency.consumer_vector(consumer.id)
            return keys
        self.ops.latency_lookups += len(ids) * (1 if consumer is None else 2)
        lat = self.latency
        if consumer is None:
            return np.array([lat.producer_link(producer.id, int(j)) for j in ids], dtype=float)
        return np.array(
            [lat.producer_link(producer.id, int(j)) + lat.consumer_link(consumer.id, int(j)) for j in ids],
            dtype=float,
        )

    # strategies; each returns (host id or None, phase)

    def distance_strategy(self, loc: Location, producer: ProducerRecord, consumer: ConsumerRecord | None):
        if consumer is None:
            keys = self._distances(loc)
        else:
            keys = self._distances(producer.location) + self._distances(consumer.location)
        return self._first_viable(self._ranked(keys), producer, consumer), None

    def latency_strategy(self, producer: ProducerRecord, consumer: ConsumerRecord | None):
        keys = self._latency_keys(producer, consumer)
        return self._first_viable(self._ranked(keys), producer, consumer), None

    def _from_candidates(self, ids: list[int], producer, consumer) -> int | None:
        if not ids:
            return None
        arr = np.array(ids, dtype=np.int64)
        keys = self._latency_keys(producer, consumer, arr)
        return self._first_viable(self._ranked(keys, arr), producer, consumer)

    def spatial_strategy(self, loc: Location, producer: ProducerRecord, consumer: ConsumerRecord | None):
        tree = self.tree
        before = tree.node_visits
        try:
            inside = tree.containing_leaves(loc)
            cands = [h for leaf in inside for h in tree.leaf_hosts(leaf)]
            host = self._from_candidates(cands, producer, consumer)
            if host is not None:
                return host, 1

            near = tree.nearest_leaves(loc, exclude=inside)
            cands = [h for leaf in near for h in tree.leaf_hosts(leaf)]
            host = self._from_candidates(cands, producer, consumer)
            if host is not None:
                return host, 2

            visited = inside + near
            bound = min(math.hypot(self.world_extent, self.world_extent), tree.reach(loc))
            ring = 1
            while (ring - 1) * self.ring_step <= bound:
                cands = tree.concentric_search(loc, ring, self.ring_step, visited=visited)
                host = self._from_candidates(cands, producer, consumer)
                if host is not None:
                    return host, 3
                ring += 1
            return None, None
        finally:
            self.ops.node_visits += tree.node_visits - before

    def _dispatch(self, loc, producer, consumer):
        if self.strategy is StrategyKind.DISTANCE:
            return self.distance_strategy(loc, producer, consumer)
        if self.strategy is StrategyKind.LATENCY:
            return self.latency_strategy(producer, consumer)
        return self.spatial_strategy(loc, producer, consumer)

    def _finish(self, outcome: SelectionOutcome, t0: float) -> SelectionOutcome:
        outcome.decision_duration = (time.perf_counter() - t0) * 1000.0
        outcome.cost_ms = self.cost_model.charge_ms(self.ops)
        return outcome

    # public decisions

    def select_host(self, prod_id: int, is_replica: bool = False, cons_id: int | None = None) -> SelectionOutcome:
        """Pick and grant a host for a producer's first placement or a new replica."""
        t0 = time.perf_counter()
        self.ops = OpCounts()
        outcome = self._select_host(prod_id, is_replica, cons_id)
        return self._finish(outcome, t0)

    def _select_host(self, prod_id, is_replica, cons_id) -> SelectionOutcome:
        state = self.state
        producer = state.producer(prod_id)
        consumer = None
        if is_replica:
            if cons_id is None:
                raise ValueError("a replica request needs the requesting consumer")
            consumer = state.consumer(cons_id)
            r = producer.replica_threshold
            if r is not None and len(state.hosting.get(prod_id, ())) >= r:
                return SelectionOutcome(reason=DeclineReason.REPLICAS_EXHAUSTED, route=Route.DECLINED)
            current = [state.consumers[k] for k in state.consumers_of(prod_id) if k != cons_id]
            loc = centroid(producer, current + [consumer])
        else:
            loc = producer.location

        host_id, phase = self._dispatch(loc, producer, consumer)
        if host_id is None:
            return SelectionOutcome(
                reason=DeclineReason.NO_VIABLE_HOST, phase=phase, route=Route.DECLINED if is_replica else None
            )
        host = state.hosts[host_id]
        if is_replica:
            new = not state.is_resident(prod_id, host_id)
            grant_path(state, producer, host, consumer, validate=self.validate)
            return SelectionOutcome(host_id=host_id, new_residency=new, phase=phase, route=Route.REPLICA)
        new = place_producer(state, producer, host, self.producer_limit(host), validate=self.validate)
        return SelectionOutcome(host_id=host_id, new_residency=new, phase=phase)

    def consumer_host_select(self, cons_id: int) -> list[tuple[int, SelectionOutcome]]:
        """Route every subscription of ``cons_id``: an existing host of the
        producer when one has consumer headroom, otherwise a new replica."""
        state = self.state
        consumer = state.consumer(cons_id)
        results = []
        for prod_id in sorted(consumer.subscriptions):
            results.append((prod_id, self.route_subscription(prod_id, consumer)))
        return results

    def route_subscription(self, prod_id: int, consumer: ConsumerRecord) -> SelectionOutcome:
        t0 = time.perf_counter()
        self.ops = OpCounts()
        state = self.state
        producer = state.producer(prod_id)
        if (prod_id, consumer.id) in state.routes:
            return self._finish(SelectionOutcome(host_id=state.routes[(prod_id, consumer.id)], route=Route.EXISTING), t0)

        nodes = np.array(state.hosts_of(prod_id), dtype=np.int64)
        if len(nodes):
            if self.strategy is StrategyKind.DISTANCE:
                self.ops.distance_evals += len(nodes)
                hx = np.array([state.hosts[int(j)].location.x for j in nodes])
                hy = np.array([state.hosts[int(j)].location.y for j in nodes])
                keys = np.hypot(hx - consumer.location.x, hy - consumer.location.y)
            else:
                self.ops.latency_lookups += len(nodes)
                keys = np.array([self.latency.consumer_link(consumer.id, int(j)) for j in nodes])
            self.ops.sort(len(nodes))
            for hid in nodes[np.lexsort((nodes, keys))]:
                hid = int(hid)
                self.ops.viability_checks += 1
                if can_host_consumer(state, state.hosts[hid], consumer):
                    grant_path(state, producer, state.hosts[hid], consumer, validate=self.validate)
                    return self._finish(SelectionOutcome(host_id=hid, route=Route.EXISTING), t0)

        # same counter: the existing-host scan is charged to the replica decision
        outcome = self._select_host(prod_id, True, consumer.id)
        return self._finish(outcome, t0)


__all__ = [
    "StrategyKind",
    "DeclineReason",
    "Route",
    "SelectionOutcome",
    "CostModel",
    "OpCounts",
    "Matchmaker",
    "centroid",
    "initial_load_conditioning",
    "PlacementRejected",
]
