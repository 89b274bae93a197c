import itertools

import numpy as np
import pytest

from edgeplace.constraints import PlacementRejected, grant_path
from edgeplace.model import objective_value
from edgeplace.oracle import InstanceTooLarge, assignment_violations, optimal_placement, subscribed_pairs
from edgeplace.strategies import Matchmaker

from conftest import consumer, host, latency_of, producer, state_of


def test_single_candidate():
    hs, ps, cs = [host(0, lat=5.0)], [producer(0, size=2048)], [consumer(0, {0})]
    res = optimal_placement(ps, hs, cs, latency_of(hs))
    assert res.feasible and res.objective == 20.0
    assert res.paths == [(0, 0, 0)] and res.assignments_checked == 1


def test_storage_infeasible_everywhere():
    hs = [host(j, cap=1000) for j in range(3)]
    ps = [producer(0, size=5000)]
    res = optimal_placement(ps, hs, [consumer(0, {0})], latency_of(hs))
    assert not res.feasible and res.objective is None
    assert res.violations == {"storage": 3}


def test_no_subscriptions_is_trivially_optimal():
    hs = [host(0)]
    assert optimal_placement([producer(0)], hs, [], latency_of(hs)).objective == 0.0


def test_size_guard():
    hs = [host(j) for j in range(10)]
    ps = [producer(i) for i in range(3)]
    cs = [consumer(k, {0, 1, 2}) for k in range(3)]
    with pytest.raises(InstanceTooLarge):
        optimal_placement(ps, hs, cs, latency_of(hs))
    small = [host(0), host(1)]
    with pytest.raises(InstanceTooLarge):
        optimal_placement([producer(0)], small, [consumer(0, {0})], latency_of(small), limit=1)


def run_strategy(strategy, hs, ps, cs, lat):
    s = state_of(hs, ps, cs)
    mm = Matchmaker(s, lat, strategy, world_extent=10.0, validate=True)
    for p in ps:
        mm.select_host(p.id)
    mm.end_initial_phase()
    served = all(o.granted for c in cs for _, o in mm.consumer_host_select(c.id))
    return served, s


def test_dominance_on_2x3x2_instance():
    hs = [host(0, 1, 1, lat=5.0, clt=1), host(1, 5, 5, lat=9.0), host(2, 9, 1, lat=14.0, cap=5000)]
    ps = [producer(0, 0, 0, size=4096), producer(1, 9, 9, size=3000)]
    cs = [consumer(0, {0, 1}, 2, 2), consumer(1, {0, 1}, 8, 8)]
    lat = latency_of(hs, jitter=3.0, seed=2)
    best = optimal_placement(ps, hs, cs, lat)
    assert best.feasible and best.assignments_checked == 3**4
    for strategy in ("distance", "latency", "spatial"):
        served, state = run_strategy(strategy, hs, ps, cs, lat)
        assert served
        assert best.objective <= objective_value(state, lat) + 1e-9


@pytest.mark.parametrize("seed", range(30))
def test_feasibility_agrees_with_constraints(seed):
    rng = np.random.default_rng(seed)
    n_h = int(rng.integers(1, 4))
    hs = [host(j, cap=int(rng.integers(2000, 9000)), plt=int(rng.integers(1, 3)), clt=int(rng.integers(1, 3)))
          for j in range(n_h)]
    ps = [producer(i, size=int(rng.integers(1000, 5000)), r=(1 if rng.random() < 0.3 else None)) for i in range(2)]
    cs = [consumer(k, set(rng.choice(2, size=int(rng.integers(1, 3)), replace=False).tolist())) for k in range(3)]
    pmap, hmap = {p.id: p for p in ps}, {h.id: h for h in hs}
    pairs = subscribed_pairs(cs)
    for assignment in itertools.product(range(n_h), repeat=len(pairs)):
        oracle_ok = not assignment_violations(assignment, pairs, pmap, hmap)
        s = state_of(hs, ps, cs)
        ok = True
        try:
            for (i, k), j in zip(pairs, assignment):
                grant_path(s, pmap[i], hmap[j], s.consumers[k])
        except PlacementRejected:
            ok = False
        assert ok == oracle_ok, (assignment, pairs)


def test_lexicographic_tie_break():
    hs = [host(0, lat=5.0), host(1, lat=5.0)]
    res = optimal_placement([producer(0)], hs, [consumer(0, {0})], latency_of(hs))
    assert res.paths == [(0, 0, 0)] and res.feasible_assignments == 2
