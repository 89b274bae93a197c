"""Feasibility checks and the only mutating operations on a PlacementState."""

from __future__ import annotations

import enum

from .model import (
    ConsumerRecord,
    HostRecord,
    IdentifierError,
    PlacementState,
    ProducerRecord,
    check_invariants,
)


class Constraint(enum.Enum):
    PRODUCER_LOAD = "producer_load"
    CONSUMER_LOAD = "consumer_load"
    STORAGE = "storage"
    SINGLE_PATH = "single_path"
    ON_DEMAND = "on_demand"
    SUBSCRIPTION = "subscription"


class PlacementRejected(Exception):
    """A grant would violate ``constraint``."""

    def __init__(self, constraint: Constraint, message: str):
        super().__init__(f"{constraint.value}: {message}")
        self.constraint = constraint


def _registered(state: PlacementState, host=None, producer=None, consumer=None):
    if host is not None and host.id not in state.hosts:
        raise IdentifierError(f"unknown host {host.id}")
    if producer is not None and producer.id not in state.producers:
        raise IdentifierError(f"unknown producer {producer.id}")
    if consumer is not None and consumer.id not in state.consumers:
        raise IdentifierError(f"unknown consumer {consumer.id}")


def _effective_limit(host: HostRecord, producer_limit: int | None) -> int:
    # an override can only tighten the threshold, never loosen it
    if producer_limit is None:
        return host.producer_load_threshold
    return min(producer_limit, host.producer_load_threshold)


def can_host_producer(
    state: PlacementState,
    host: HostRecord,
    producer: ProducerRecord,
    producer_limit: int | None = None,
) -> bool:
    """True if ``producer`` is resident on ``host`` or one more residency fits.

    ``producer_limit`` tightens the host's producer load threshold (used by
    initial load conditioning).
    """
    _registered(state, host=host, producer=producer)
    j = host.id
    if producer.id in state.host_producers[j]:
        return True
    limit = _effective_limit(host, producer_limit)
    if len(state.host_producers[j]) + 1 > limit:
        return False
    return state.used_storage[j] + producer.data_size <= host.capacity


def can_host_consumer(state: PlacementState, host: HostRecord, consumer: ConsumerRecord) -> bool:
    _registered(state, host=host, consumer=consumer)
    on_host = state.host_consumers[host.id]
    if consumer.id in on_host:
        return True
    return len(on_host) + 1 <= host.consumer_load_threshold


def _rejection_for_residency(state, host, producer, producer_limit):
    j = host.id
    limit = _effective_limit(host, producer_limit)
    if len(state.host_producers[j]) + 1 > limit:
        return PlacementRejected(
            Constraint.PRODUCER_LOAD,
            f"host {j} already carries {len(state.host_producers[j])}/{limit} producers",
        )
    if state.used_storage[j] + producer.data_size > host.capacity:
        return PlacementRejected(
            Constraint.STORAGE,
            f"host {j} has {host.capacity - state.used_storage[j]} bytes free, producer {producer.id} needs {producer.data_size}",
        )
    r = producer.replica_threshold
    if r is not None and len(state.hosting.get(producer.id, ())) >= r:
        return PlacementRejected(Constraint.ON_DEMAND, f"producer {producer.id} already has {r} replicas")
    return None


def place_producer(
    state: PlacementState,
    producer: ProducerRecord,
    host: HostRecord,
    producer_limit: int | None = None,
    validate: bool = False,
) -> bool:
    """Make ``producer`` resident on ``host`` without routing any consumer.

    Returns False when the producer was already resident (residency is
    idempotent), True when a new residency was created.
    """
    _registered(state, host=host, producer=producer)
    if state.is_resident(producer.id, host.id):
        return False
    err = _rejection_for_residency(state, host, producer, producer_limit)
    if err is not None:
        raise err
    state._add_residency(producer.id, host.id)
    if validate:
        check_invariants(state)
    return True


def grant_path(
    state: PlacementState,
    producer: ProducerRecord,
    host: HostRecord,
    consumer: ConsumerRecord,
    validate: bool = False,
) -> PlacementState:
    """Add the path producer -> host -> consumer, creating residency if needed.

    Raises PlacementRejected naming the violated constraint; the state is
    untouched on rejection.
    """
    _registered(state, host=host, producer=producer, consumer=consumer)
    i, j, k = producer.id, host.id, consumer.id
    if i not in consumer.subscriptions:
        raise PlacementRejected(Constraint.SUBSCRIPTION, f"consumer {k} does not subscribe to producer {i}")
    if (i, k) in state.routes:
        raise PlacementRejected(
            Constraint.SINGLE_PATH,
            f"pair ({i},{k}) already routed via host {state.routes[(i, k)]}",
        )
    if not state.is_resident(i, j):
        err = _rejection_for_residency(state, host, producer, None)
        if err is not None:
            raise err
    if not can_host_consumer(state, host, consumer):
        raise PlacementRejected(
            Constraint.CONSUMER_LOAD,
            f"host {j} already serves {state.active_consumers(j)}/{host.consumer_load_threshold} consumers",
        )
    state._add_residency(i, j)
    state._add_path(i, j, k)
    if validate:
        check_invariants(state)
    else:
        _check_host(state, j)
    return state


def _check_host(state: PlacementState, host_id: int) -> None:
    # cheap post-condition on the touched host; the full audit is validate_state
    host = state.hosts[host_id]
    assert len(state.host_producers[host_id]) <= host.producer_load_threshold
    assert len(state.host_consumers[host_id]) <= host.consumer_load_threshold
    assert state.used_storage[host_id] <= host.capacity
