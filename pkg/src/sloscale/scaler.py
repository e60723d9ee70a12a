"""Per-window choice of CPU cores and batch size.

The decision problem is a tiny integer program:

    minimise    c + delta * b
    subject to  every queued batch finishes before the tightest deadline,
                throughput(b, c) >= lambda,
                1 <= c <= c_max, 1 <= b <= b_max.

With ``c_max = b_max = 16`` there are only 256 candidates, so it is solved
by exhaustive sweep.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

from .errors import Infeasible
from .perf_model import LatencyModel, predict_latency, throughput
from .request_queue import QueueSnapshot


@dataclass(frozen=True)
class ScalerParams:
    c_max: int = 16
    b_max: int = 16
    delta_penalty: float = 0.01
    enforce_rate_constraint: bool = True

    def __post_init__(self):
        if self.c_max < 1 or self.b_max < 1:
            raise ValueError("c_max and b_max must be >= 1")
        # the batch penalty may break ties between batch sizes but must never
        # outweigh a core, so the cheapest pair is always the lowest c first
        if not 0 <= self.delta_penalty * max(self.b_max - 1, 1) < 1:
            raise ValueError(f"delta_penalty must satisfy 0 <= delta * (b_max - 1) < 1, got {self.delta_penalty}")


@dataclass(frozen=True, order=True)
class Allocation:
    cores: int
    batch: int

    def __post_init__(self):
        if self.cores < 1 or self.batch < 1:
            raise ValueError(f"cores and batch must be >= 1, got {self.cores}, {self.batch}")


@dataclass(frozen=True)
class RateEstimate:
    lambda_rps: float = 0.0
    window_ms: float = 1000.0


def estimate_rate(arrival_times_ms: Sequence[float], now_ms: float, window_ms: float) -> RateEstimate:
    """Arrivals in the half-open window ``(now - window, now]`` per second.

    ``arrival_times_ms`` must be sorted ascending.
    """
    if window_ms <= 0:
        raise ValueError("window_ms must be > 0")
    lo = bisect_right(arrival_times_ms, now_ms - window_ms)
    hi = bisect_right(arrival_times_ms, now_ms)
    return RateEstimate((hi - lo) / (window_ms / 1000.0), window_ms)


def objective(alloc: Allocation, params: ScalerParams) -> float:
    return alloc.cores + params.delta_penalty * alloc.batch


def check_feasible(
    model: LatencyModel,
    cores: int,
    batch: int,
    snap: QueueSnapshot,
    slo_ms: float,
    rate: RateEstimate,
    params: ScalerParams,
) -> bool:
    """True iff (cores, batch) drains the snapshot in time and keeps up with ``rate``.

    Batch ``i`` (0-based) waits for the ``i`` batches ahead of it, and every
    batch is charged the largest communication latency in the queue.
    """
    latency = predict_latency(model, batch, cores)
    waited = 0.0
    for _ in range(0, len(snap.requests), batch):
        if latency + snap.cl_max_ms + waited >= slo_ms:
            return False
        waited += latency
    if params.enforce_rate_constraint and throughput(model, batch, cores) < rate.lambda_rps:
        return False
    return True


def solve(
    model: LatencyModel,
    snap: QueueSnapshot,
    slo_ms: float,
    rate: RateEstimate,
    params: ScalerParams,
) -> Allocation:
    """Cheapest feasible allocation; ties go to fewer cores, then smaller batch.

    Raises ``Infeasible`` when nothing in the search box works. For
    ``delta_penalty <= 1/b_max`` the answer is the first feasible pair in
    cores-major ascending order.
    """
    if snap.requests and slo_ms <= snap.cl_max_ms:
        raise Infeasible(
            f"no processing budget left: slo {slo_ms} ms <= cl_max {snap.cl_max_ms} ms"
        )
    best: tuple[float, int, int] | None = None
    for cores in range(1, params.c_max + 1):
        # every later candidate costs at least cores + delta
        if best is not None and cores + params.delta_penalty > best[0]:
            break
        for batch in range(1, params.b_max + 1):
            cost = cores + params.delta_penalty * batch
            if best is not None and cost > best[0]:
                break
            if check_feasible(model, cores, batch, snap, slo_ms, rate, params):
                key = (cost, cores, batch)
                if best is None or key < best:
                    best = key
                break  # larger batches only cost more at this core count
    if best is None:
        raise Infeasible(
            f"no allocation within c_max={params.c_max}, b_max={params.b_max} meets slo {slo_ms} ms"
        )
    return Allocation(best[1], best[2])
