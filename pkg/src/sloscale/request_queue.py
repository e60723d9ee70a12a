"""Earliest-deadline-first request queue feeding the batch processor."""

from __future__ import annotations

from bisect import insort
from dataclasses import dataclass, field
from typing import Iterator

from .errors import DuplicateId


@dataclass(frozen=True)
class Request:
    """One inference request as seen by the server.

    ``comm_latency_ms`` is the network transfer time already spent before
    the request reached the queue; only the rest of ``slo_ms`` is left for
    queuing and processing.
    """

    id: int
    arrival_time_ms: float
    comm_latency_ms: float
    slo_ms: float
    size_kb: float = 200.0

    @property
    def remaining_budget_ms(self) -> float:
        return self.slo_ms - self.comm_latency_ms

    @property
    def deadline_ms(self) -> float:
        return self.arrival_time_ms + self.remaining_budget_ms

    @property
    def edf_key(self) -> tuple[float, float, int]:
        return (self.deadline_ms, self.arrival_time_ms, self.id)


@dataclass(frozen=True)
class QueueSnapshot:
    requests: tuple[Request, ...] = ()
    cl_max_ms: float = 0.0

    @classmethod
    def of(cls, requests) -> QueueSnapshot:
        requests = tuple(sorted(requests, key=lambda r: r.edf_key))
        cl_max = max((r.comm_latency_ms for r in requests), default=0.0)
        return cls(requests, cl_max)

    def __len__(self) -> int:
        return len(self.requests)


@dataclass
class EDFQueue:
    """Pending requests kept sorted by (deadline, arrival, id)."""

    _items: list[tuple[tuple[float, float, int], Request]] = field(default_factory=list)
    _ids: set[int] = field(default_factory=set)

    def push(self, request: Request, now_ms: float | None = None) -> None:
        if now_ms is not None and request.arrival_time_ms > now_ms:
            raise ValueError(
                f"request {request.id} arrives at {request.arrival_time_ms} ms, after now={now_ms}"
            )
        if request.id in self._ids:
            raise DuplicateId(f"request id {request.id} already queued")
        self._ids.add(request.id)
        insort(self._items, (request.edf_key, request))

    def drain_batch(self, batch_size: int, now_ms: float | None = None) -> list[Request]:
        """Pop up to ``batch_size`` requests from the head; partial batches allowed."""
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        taken = self._items[:batch_size]
        del self._items[:batch_size]
        batch = [req for _, req in taken]
        self._ids.difference_update(req.id for req in batch)
        return batch

    def snapshot(self) -> QueueSnapshot:
        requests = tuple(req for _, req in self._items)
        cl_max = max((r.comm_latency_ms for r in requests), default=0.0)
        return QueueSnapshot(requests, cl_max)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[Request]:
        return (req for _, req in self._items)

    def __bool__(self) -> bool:
        return bool(self._items)
