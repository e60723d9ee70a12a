"""Deterministic discrete-event simulation of a single-model serving system.

Actors: a workload generator, an uplink whose bandwidth follows a trace,
an EDF queue, one or more batch servers, and a scaling policy consulted
every adaptation period. Event time is kept in integer microseconds so
that ordering (and therefore every result) is exact and reproducible.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ScenarioInvalid
from .network import BandwidthTrace, bandwidth_at, comm_latency
from .perf_model import LatencyModel, predict_latency
from .policies import Action, ScalingPolicy
from .request_queue import EDFQueue, Request
from .scaler import Allocation, estimate_rate

ARRIVAL_MODES = ("fixed", "poisson")

# tie order at equal timestamps
TICK, RECONFIG, ARRIVAL, COMPLETION = range(4)


def to_us(ms: float) -> int:
    return int(round(ms * 1000.0))


def generate_arrivals(rate_rps: float, duration_s: float, mode: str = "fixed", seed: int = 0) -> list[float]:
    """Send times in ms, ascending.

    ``fixed`` spaces ``floor(rate * duration)`` requests exactly ``1/rate``
    apart starting at 0. ``poisson`` draws exponential gaps from a
    generator seeded with ``seed``.
    """
    if rate_rps <= 0:
        raise ValueError("rate_rps must be > 0")
    if mode == "fixed":
        n = math.floor(rate_rps * duration_s + 1e-9)
        return [i * 1000.0 / rate_rps for i in range(n)]
    if mode == "poisson":
        rng = np.random.default_rng(seed)
        horizon_ms = duration_s * 1000.0
        mean_gap_ms = 1000.0 / rate_rps
        chunk = max(16, int(rate_rps * duration_s * 1.2) + 16)
        times: list[float] = []
        t = 0.0
        while True:
            gaps = rng.exponential(mean_gap_ms, size=chunk)
            for gap in gaps:
                t += float(gap)
                if t >= horizon_ms:
                    return times
                times.append(t)
    raise ValueError(f"unknown arrival mode {mode!r}")


@dataclass(frozen=True)
class Scenario:
    duration_s: float
    rate_rps: float
    slo_ms: float
    trace: BandwidthTrace
    model: LatencyModel
    request_size_kb: float = 200.0
    arrival_mode: str = "fixed"
    adaptation_period_ms: float = 1000.0
    seed: int = 0

    def validate(self) -> None:
        problems = []
        if not self.duration_s > 0:
            problems.append("duration_s must be > 0")
        if not self.rate_rps > 0:
            problems.append("rate_rps must be > 0")
        if not self.slo_ms > 0:
            problems.append("slo_ms must be > 0")
        if not self.request_size_kb > 0:
            problems.append("request_size_kb must be > 0")
        if not self.adaptation_period_ms > 0:
            problems.append("adaptation_period_ms must be > 0")
        if self.arrival_mode not in ARRIVAL_MODES:
            problems.append(f"arrival_mode must be one of {ARRIVAL_MODES}")
        if not 0 <= self.seed < 2**64:
            problems.append("seed must be a 64-bit unsigned integer")
        if problems:
            raise ScenarioInvalid("; ".join(problems))


@dataclass(frozen=True)
class RequestOutcome:
    id: int
    send_time_ms: float
    comm_latency_ms: float
    queue_latency_ms: float
    processing_latency_ms: float
    e2e_latency_ms: float
    violated: bool
    allocation_at_service: Allocation
    replica: int = 0

    @property
    def arrival_ms(self) -> float:
        return self.send_time_ms + self.comm_latency_ms

    @property
    def start_ms(self) -> float:
        return self.arrival_ms + self.queue_latency_ms

    @property
    def completion_ms(self) -> float:
        return self.start_ms + self.processing_latency_ms


@dataclass(frozen=True)
class Window:
    start_ms: float
    length_ms: float
    allocation: Allocation
    violations: int
    cores_allocated: float
    saturated: bool = False
    replicas: int = 1
    max_queue: int = 0
    core_ms: float = 0.0


@dataclass
class SimResult:
    outcomes: list[RequestOutcome]
    windows: list[Window]
    total_core_ms: float
    slo_ms: float = 0.0
    policy: str = ""

    @property
    def duration_ms(self) -> float:
        return sum(w.length_ms for w in self.windows)


@dataclass
class _Server:
    sid: int
    busy: bool = False
    retiring: bool = False


@dataclass
class _Engine:
    scenario: Scenario
    policy: ScalingPolicy
    events: list = field(default_factory=list)
    seq: int = 0

    def push(self, t_us: int, kind: int, payload=None) -> None:
        heapq.heappush(self.events, (t_us, kind, self.seq, payload))
        self.seq += 1


def run(scenario: Scenario, policy: ScalingPolicy) -> SimResult:
    """Simulate ``scenario`` under ``policy`` and return every outcome."""
    scenario.validate()
    sc = scenario
    model = sc.model
    period_us = to_us(sc.adaptation_period_ms)
    duration_us = to_us(sc.duration_s * 1000.0)

    send_ms = generate_arrivals(sc.rate_rps, sc.duration_s, sc.arrival_mode, sc.seed)
    eng = _Engine(sc, policy)
    for rid, t_ms in enumerate(send_ms):
        send_us = to_us(t_ms)
        comm_us = to_us(comm_latency(sc.request_size_kb, bandwidth_at(sc.trace, send_us / 1e6)))
        eng.push(send_us + comm_us, ARRIVAL, (rid, send_us, comm_us))
    eng.push(0, TICK)

    queue = EDFQueue()
    servers: list[_Server] = []
    next_sid = 0
    rr = 0
    in_flight = 0
    arrivals_left = len(send_ms)
    queue_arrivals_ms: list[float] = []
    send_of: dict[int, int] = {}

    alloc = Allocation(1, 1)  # in effect for dispatch
    outcomes: list[RequestOutcome] = []
    windows: list[dict] = []
    core_us = 0          # integral over the open window, cores * us
    cores_now = 0
    last_us = 0
    win_max_queue = 0
    last_done_us = 0

    def account(now_us: int) -> None:
        nonlocal core_us, last_us
        core_us += cores_now * (now_us - last_us)
        last_us = now_us

    def resize_pool(now_us: int) -> None:
        nonlocal next_sid, cores_now
        target = policy.ready_replicas(now_us / 1000.0)
        active = [s for s in servers if not s.retiring]
        while len(active) < target:
            srv = _Server(next_sid)
            next_sid += 1
            servers.append(srv)
            active.append(srv)
        surplus = len(active) - target
        for srv in sorted(active, key=lambda s: (s.busy, -s.sid)):
            if surplus <= 0:
                break
            if srv.busy:
                srv.retiring = True
            else:
                servers.remove(srv)
            surplus -= 1
        account(now_us)
        cores_now = alloc.cores * (target + policy.pending_replicas())

    def dispatch(now_us: int) -> None:
        nonlocal rr, in_flight
        n = len(servers)
        order = [servers[(rr + k) % n] for k in range(n)]
        for srv in order:
            if not queue:
                return
            if srv.busy or srv.retiring:
                continue
            batch = queue.drain_batch(alloc.batch)
            proc_us = max(1, to_us(predict_latency(model, len(batch), alloc.cores)))
            srv.busy = True
            in_flight += 1
            eng.push(now_us + proc_us, COMPLETION, (srv, batch, now_us, proc_us, alloc))
            rr = (servers.index(srv) + 1) % n

    def apply(action_alloc: Allocation, now_us: int) -> None:
        nonlocal alloc, cores_now
        account(now_us)
        alloc = action_alloc
        cores_now = alloc.cores * (policy.ready_replicas(now_us / 1000.0) + policy.pending_replicas())

    resize_pool(0)

    while eng.events:
        now_us, kind, _, payload = heapq.heappop(eng.events)

        if kind == TICK:
            if now_us >= duration_us and not (arrivals_left or in_flight or queue):
                continue
            account(now_us)
            if windows:
                windows[-1]["core_us"] = core_us
                windows[-1]["max_queue"] = win_max_queue
            core_us = 0
            win_max_queue = len(queue)
            now_ms = now_us / 1000.0
            snap = queue.snapshot()
            rate = estimate_rate(queue_arrivals_ms, now_ms, sc.adaptation_period_ms)
            action: Action = policy.decide(model, snap, rate, sc.slo_ms, now_ms)
            windows.append({
                "start_us": now_us, "allocation": action.allocation,
                "saturated": action.saturated,
            })
            delay_us = to_us(policy.resize_delay_ms)
            if delay_us > 0 and action.allocation != alloc:
                eng.push(now_us + delay_us, RECONFIG, action.allocation)
            else:
                apply(action.allocation, now_us)
            for t_ms in action.wakeups_ms:
                eng.push(to_us(t_ms), RECONFIG, None)
            resize_pool(now_us)
            windows[-1]["replicas"] = policy.ready_replicas(now_ms)
            dispatch(now_us)
            eng.push(now_us + period_us, TICK)

        elif kind == RECONFIG:
            if payload is not None:
                apply(payload, now_us)
            resize_pool(now_us)
            dispatch(now_us)

        elif kind == ARRIVAL:
            rid, send_us, comm_us = payload
            arrivals_left -= 1
            send_of[rid] = send_us
            queue.push(Request(rid, now_us / 1000.0, comm_us / 1000.0, sc.slo_ms, sc.request_size_kb))
            queue_arrivals_ms.append(now_us / 1000.0)
            win_max_queue = max(win_max_queue, len(queue))
            dispatch(now_us)

        else:  # COMPLETION
            srv, batch, start_us, proc_us, used = payload
            last_done_us = now_us
            in_flight -= 1
            srv.busy = False
            if srv.retiring:
                servers.remove(srv)
                rr = rr % len(servers) if servers else 0
            for req in batch:
                send_us = send_of.pop(req.id)
                arrival_us = to_us(req.arrival_time_ms)
                comm = (arrival_us - send_us) / 1000.0
                queued = (start_us - arrival_us) / 1000.0
                proc = proc_us / 1000.0
                e2e = comm + queued + proc
                outcomes.append(RequestOutcome(
                    id=req.id,
                    send_time_ms=send_us / 1000.0,
                    comm_latency_ms=comm,
                    queue_latency_ms=queued,
                    processing_latency_ms=proc,
                    e2e_latency_ms=e2e,
                    violated=e2e > sc.slo_ms,
                    allocation_at_service=used,
                    replica=srv.sid,
                ))
            dispatch(now_us)

    end_us = max(duration_us, last_done_us)
    account(end_us)
    if windows:
        windows[-1]["core_us"] = core_us
        windows[-1]["max_queue"] = win_max_queue

    outcomes.sort(key=lambda o: o.id)
    return _finish(outcomes, windows, end_us, sc.slo_ms, policy.name)


def _finish(outcomes, raw_windows, end_us, slo_ms, policy_name) -> SimResult:
    starts = [w["start_us"] for w in raw_windows]
    violations = [0] * len(raw_windows)
    for o in outcomes:
        if o.violated:
            idx = np.searchsorted(starts, to_us(o.send_time_ms), side="right") - 1
            violations[max(int(idx), 0)] += 1
    windows = []
    for i, w in enumerate(raw_windows):
        stop = starts[i + 1] if i + 1 < len(starts) else max(end_us, w["start_us"])
        length_us = stop - w["start_us"]
        windows.append(Window(
            start_ms=w["start_us"] / 1000.0,
            length_ms=length_us / 1000.0,
            allocation=w["allocation"],
            violations=violations[i],
            cores_allocated=w["core_us"] / length_us if length_us else float(w["allocation"].cores),
            saturated=w["saturated"],
            replicas=w.get("replicas", 1),
            max_queue=w.get("max_queue", 0),
            core_ms=w["core_us"] / 1000.0,
        ))
    return SimResult(outcomes, windows, sum(w.core_ms for w in windows), slo_ms, policy_name)
