"""Shared builders for small hand-made instances."""

from __future__ import annotations

import pytest

from edgeplace.model import ConsumerRecord, HostRecord, LatencyModel, Location, PlacementState, ProducerRecord


def host(j, x=0.0, y=0.0, cap=10**12, plt=5, clt=5, lat=5.0, tier="medium"):
    return HostRecord(j, Location(x, y), cap, plt, clt, lat, tier)


def producer(i, x=0.0, y=0.0, size=2048, r=None):
    return ProducerRecord(i, Location(x, y), size, r)


def consumer(k, subs, x=0.0, y=0.0):
    return ConsumerRecord(k, Location(x, y), frozenset(subs))


def state_of(hosts, producers, consumers=(), chunk_size=1024):
    return PlacementState(hosts, producers, consumers, chunk_size=chunk_size)


def latency_of(hosts, jitter=0.0, seed=0):
    return LatencyModel.from_hosts(hosts, jitter, seed)


@pytest.fixture
def tiny():
    hs = [host(0, lat=5.0)]
    ps = [producer(0, size=2048)]
    cs = [consumer(0, {0})]
    return state_of(hs, ps, cs), latency_of(hs)


# acceptance criteria append one line each; printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
