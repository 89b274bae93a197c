"""Exact minimum of the mean path latency for tiny instances, by enumerating
one host per subscribed (producer, consumer) pair."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

from .model import ConsumerRecord, HostRecord, LatencyModel, ProducerRecord, chunk_count

MAX_ASSIGNMENTS = 10**6


class InstanceTooLarge(ValueError):
    pass


@dataclass
class OracleResult:
    feasible: bool
    objective: float | None = None
    # (producer, host, consumer) triples of the optimal path set
    paths: list[tuple[int, int, int]] = field(default_factory=list)
    assignments_checked: int = 0
    feasible_assignments: int = 0
    # why no assignment was feasible, per constraint: count of assignments it ruled out
    violations: dict[str, int] = field(default_factory=dict)


def subscribed_pairs(consumers: Sequence[ConsumerRecord]) -> list[tuple[int, int]]:
    return sorted((i, c.id) for c in consumers for i in c.subscriptions)


def assignment_violations(
    assignment: Sequence[int],
    pairs: Sequence[tuple[int, int]],
    producers: dict[int, ProducerRecord],
    hosts: dict[int, HostRecord],
) -> list[str]:
    """Constraints broken by routing ``pairs[n]`` through ``assignment[n]``."""
    residents: dict[int, set[int]] = {j: set() for j in hosts}
    served: dict[int, set[int]] = {j: set() for j in hosts}
    replicas: dict[int, set[int]] = {}
    for (i, k), j in zip(pairs, assignment):
        residents[j].add(i)
        served[j].add(k)
        replicas.setdefault(i, set()).add(j)
    broken = []
    for j, host in hosts.items():
        if len(residents[j]) > host.producer_load_threshold:
            broken.append("producer_load")
        if len(served[j]) > host.consumer_load_threshold:
            broken.append("consumer_load")
        if sum(producers[i].data_size for i in residents[j]) > host.capacity:
            broken.append("storage")
    for i, js in replicas.items():
        r = producers[i].replica_threshold
        if r is not None and len(js) > r:
            broken.append("on_demand")
    return broken


def optimal_placement(
    producers: Sequence[ProducerRecord],
    hosts: Sequence[HostRecord],
    consumers: Sequence[ConsumerRecord],
    latency: LatencyModel,
    chunk_size: int = 1024,
    limit: int = MAX_ASSIGNMENTS,
) -> OracleResult:
    """Enumerate every host choice per subscribed pair; keep the feasible one
    with the smallest mean path latency (lexicographically first on ties)."""
    pmap = {p.id: p for p in producers}
    hmap = {h.id: h for h in hosts}
    pairs = subscribed_pairs(consumers)
    host_ids = sorted(hmap)
    if not pairs:
        return OracleResult(feasible=True, objective=0.0)
    if not host_ids:
        return OracleResult(feasible=False, violations={"no_hosts": 1})
    space = len(host_ids) ** len(pairs)
    if space > limit:
        raise InstanceTooLarge(f"{len(host_ids)}^{len(pairs)} = {space} assignments exceeds {limit}")

    # per-pair, per-host path latency
    cost = []
    for i, k in pairs:
        n = chunk_count(pmap[i].data_size, chunk_size)
        cost.append({j: (latency.producer_link(i, j) + latency.consumer_link(k, j)) * n for j in host_ids})

    best_val = None
    best = None
    checked = feasible = 0
    why: dict[str, int] = {}
    for assignment in itertools.product(host_ids, repeat=len(pairs)):
        checked += 1
        broken = assignment_violations(assignment, pairs, pmap, hmap)
        if broken:
            for b in set(broken):
                why[b] = why.get(b, 0) + 1
            continue
        feasible += 1
        val = sum(cost[n][j] for n, j in enumerate(assignment)) / len(pairs)
        if best_val is None or val < best_val:
            best_val, best = val, assignment
    if best is None:
        return OracleResult(False, None, [], checked, 0, why)
    paths = sorted((i, j, k) for (i, k), j in zip(pairs, best))
    return OracleResult(True, best_val, paths, checked, feasible, why)
