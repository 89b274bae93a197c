"""Acceptance criteria, each run at its stated tolerance.

Every test prints (and records for the terminal summary) exactly one
``criterion N: PASS|FAIL`` line before asserting.
"""

import math
import time

import numpy as np
import pytest

from edgeplace.config import ScenarioConfig, scenario
from edgeplace.experiments import (
    run_sweep,
    summary_csv,
    trend_e2e,
    trend_overhead,
    trend_replicas,
    trend_selection,
)
from edgeplace.model import Location, objective_value
from edgeplace.oracle import optimal_placement
from edgeplace.simulator import Fleet, run
from edgeplace.spatial import RTree
from edgeplace.strategies import Matchmaker

import test_constraints
from conftest import ACCEPTANCE_LINES, consumer, host, latency_of, producer, state_of
from oracles import phase_partition, random_points, scan_mbr_nodes, scan_nearest, scan_ring


def report(n, title, ok, detail=""):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


# full-size bundled sweeps, shared by the trend criteria

def rows_of(results):
    return [r.row for r in results]


@pytest.fixture(scope="module")
def e2e_sweep():
    t0 = time.perf_counter()
    results = run_sweep(scenario("e2e_latency"))
    return rows_of(results), time.perf_counter() - t0


@pytest.fixture(scope="module")
def selection_sweep():
    t0 = time.perf_counter()
    results = run_sweep(scenario("selection_time"))
    return rows_of(results), time.perf_counter() - t0


def trend_detail(res, elapsed):
    return "; ".join(res.details) + f"; {elapsed:.1f}s"


# 1

def test_constraint_soundness_fuzz():
    t0 = time.perf_counter()
    error = None
    try:
        for seed in range(10):
            test_constraints.fuzz(seed, steps=1000)
    except AssertionError as exc:
        error = str(exc)
    elapsed = time.perf_counter() - t0
    ok = error is None and elapsed < 10.0
    report(1, "constraint soundness fuzz", ok, f"10 x 1000 steps, {elapsed:.2f}s" + (f", {error}" if error else ""))
    assert ok


# 2

def tiny_instance(rng):
    n_p, n_h, n_c = (int(rng.integers(1, m + 1)) for m in (2, 3, 3))
    tiers = [(5, 10), (10, 15), (15, 20)]
    hs = []
    for j in range(n_h):
        lo, hi = tiers[int(rng.integers(3))]
        hs.append(host(j, *rng.uniform(0, 10, 2), cap=int(rng.integers(4, 13)) * 1024,
                       plt=int(rng.integers(2, 5)), clt=int(rng.integers(1, 4)), lat=float(rng.uniform(lo, hi))))
    ps = [producer(i, *rng.uniform(0, 10, 2), size=int(rng.integers(1, 5)) * 1024) for i in range(n_p)]
    cs = [consumer(k, set(rng.choice(n_p, size=int(rng.integers(1, n_p + 1)), replace=False).tolist()),
                   *rng.uniform(0, 10, 2)) for k in range(n_c)]
    return hs, ps, cs


def strategy_objective(strategy, hs, ps, cs, lat):
    """Objective after a full run of ``strategy``; None if it declined a pair."""
    st = state_of(hs, ps, cs)
    mm = Matchmaker(st, lat, strategy, world_extent=10.0)
    for p in ps:
        mm.select_host(p.id)
    mm.end_initial_phase()
    served = all(o.granted for c in cs for _, o in mm.consumer_host_select(c.id))
    return objective_value(st, lat) if served else None


def test_oracle_dominance():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    instances = feasible = near = 0
    violations = []
    while feasible < 250:
        instances += 1
        hs, ps, cs = tiny_instance(rng)
        lat = latency_of(hs)
        best = optimal_placement(ps, hs, cs, lat)
        if not best.feasible:
            continue
        feasible += 1
        for strategy in ("distance", "latency", "spatial"):
            value = strategy_objective(strategy, hs, ps, cs, lat)
            if value is not None and best.objective > value + 1e-9:
                violations.append((instances, strategy))
            if strategy == "latency" and value is not None and value <= 1.25 * best.objective:
                near += 1
    elapsed = time.perf_counter() - t0
    share = near / feasible
    ok = not violations and share >= 0.80 and elapsed < 60.0
    report(2, "oracle dominance", ok,
           f"{instances} instances, {feasible} feasible, dominance violations {len(violations)}, "
           f"latency within 25% on {share:.1%}, {elapsed:.1f}s")
    assert ok


# 3

def test_rtree_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    step = 1000 / 16
    mismatches = []
    for t in range(100):
        pts = random_points(rng, 500)
        tree = RTree.build(pts.items(), 40, 20)
        loc = Location(*map(float, rng.uniform(-50, 1050, 2)))
        mbr, inside = scan_mbr_nodes(tree, loc)
        near, near_leaves = scan_nearest(tree, loc)
        if tree.mbr_nodes(loc) != mbr:
            mismatches.append((t, "mbr_nodes"))
        if tree.nearest_mbr_nodes(loc) != near:
            mismatches.append((t, "nearest_mbr_nodes"))
        rings = int(math.ceil(tree.reach(loc) / step)) + 1
        for r in range(1, rings + 1):
            if tree.concentric_search(loc, r, step) != scan_ring(tree, loc, r, step, inside + near_leaves):
                mismatches.append((t, f"ring {r}"))
        if sorted(phase_partition(tree, loc, step)) != sorted(pts):
            mismatches.append((t, "partition"))
    elapsed = time.perf_counter() - t0
    ok = not mismatches and elapsed < 30.0
    report(3, "R-Tree equivalence", ok, f"100 trees x 500 hosts, {len(mismatches)} mismatches, {elapsed:.1f}s")
    assert ok


# 4-6: hosts=50, producers=100, consumers 200..800, 5 seeds

def test_end_to_end_latency_trend(e2e_sweep):
    rows, elapsed = e2e_sweep
    res = trend_e2e(rows, margin=0.10)
    ok = res.passed and elapsed < 600
    report(4, "distance e2e latency >= 1.1 x latency and spatial", ok, trend_detail(res, elapsed))
    assert ok


def test_replicas_per_producer_trend(e2e_sweep):
    rows, elapsed = e2e_sweep
    res = trend_replicas(rows, closeness=0.20)
    report(5, "replicas: distance >= latency, spatial; latency ~ spatial", res.passed, trend_detail(res, elapsed))
    assert res.passed


def test_replication_overhead_trend(e2e_sweep):
    rows, elapsed = e2e_sweep
    res = trend_overhead(rows, spread=0.30)
    report(6, "replication overhead within 30% across strategies", res.passed, trend_detail(res, elapsed))
    assert res.passed


# 7: hosts=5000, producers=50

def test_selection_time_trend(selection_sweep):
    rows, elapsed = selection_sweep
    res = trend_selection(rows)
    ok = res.passed and elapsed < 1200
    report(7, "selection time: spatial < latency < distance", ok, trend_detail(res, elapsed))
    assert ok


# 8

def test_determinism():
    outputs = []
    for name, consumers in (("e2e_latency", None), ("selection_time", [100])):
        sw = scenario(name)
        sw.seeds = [7]
        if consumers:
            sw.consumers = consumers
        outputs.append((summary_csv(run_sweep(sw)), summary_csv(run_sweep(sw))))
    ok = all(a == b for a, b in outputs)
    report(8, "same seed gives byte-identical summary CSV", ok, "e2e_latency and selection_time, seed 7")
    assert ok


# 9

def test_closed_form_tiny_run():
    fleet = Fleet([host(0, lat=5.0)], [producer(0, size=2048)], [consumer(0, {0})])
    cfg = ScenarioConfig(hosts=1, producers=1, consumers=1, chunk_size=1024)
    ledger = run(cfg, fleet=fleet)
    ok = ledger.e2e_ms == [20.0]
    report(9, "closed-form tiny run", ok, f"mean e2e {ledger.e2e_ms}")
    assert ok
