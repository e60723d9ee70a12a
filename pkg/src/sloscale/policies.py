"""Scaling policies invoked once per adaptation window.

``SpongePolicy`` resizes a single instance in place via :func:`scaler.solve`.
``StaticPolicy`` pins one allocation forever. ``HorizontalPolicy`` is the
replica-count baseline: 1-core replicas that only become usable after a
cold start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import Infeasible
from .perf_model import LatencyModel, predict_latency, throughput
from .request_queue import QueueSnapshot
from .scaler import Allocation, RateEstimate, ScalerParams, solve


@dataclass(frozen=True)
class Action:
    """What a policy wants for the coming window.

    ``allocation`` is per replica. ``wakeups_ms`` lists future instants at
    which the policy's ready replica count changes.
    """

    allocation: Allocation
    saturated: bool = False
    wakeups_ms: tuple[float, ...] = ()


class ScalingPolicy:
    kind = "base"
    #: delay before a new allocation takes effect (vertical resize cost)
    resize_delay_ms: float = 0.0

    @property
    def name(self) -> str:
        return self.kind

    def decide(
        self,
        model: LatencyModel,
        snap: QueueSnapshot,
        rate: RateEstimate,
        slo_ms: float,
        now_ms: float,
    ) -> Action:
        raise NotImplementedError

    def ready_replicas(self, now_ms: float) -> int:
        return 1

    def pending_replicas(self) -> int:
        return 0


@dataclass
class SpongePolicy(ScalingPolicy):
    params: ScalerParams = field(default_factory=ScalerParams)
    resize_delay_ms: float = 0.0
    previous: Allocation = field(default_factory=lambda: Allocation(1, 1))

    kind = "sponge"

    def decide(self, model, snap, rate, slo_ms, now_ms):
        try:
            alloc = solve(model, snap, slo_ms, rate, self.params)
            saturated = False
        except Infeasible:
            # keep the batch, throw every core at the backlog
            alloc = Allocation(self.params.c_max, min(self.previous.batch, self.params.b_max))
            saturated = True
        self.previous = alloc
        return Action(alloc, saturated)


def largest_batch_within(
    model: LatencyModel, cores: int, budget_ms: float, b_max: int
) -> int | None:
    """Largest b <= b_max with l(b, cores) < budget_ms, or None."""
    best = None
    for b in range(1, b_max + 1):
        if predict_latency(model, b, cores) < budget_ms:
            best = b
    return best


@dataclass
class StaticPolicy(ScalingPolicy):
    cores: int = 8
    batch: int | None = None
    b_max: int = 16

    kind = "static"

    def __post_init__(self):
        if self.cores < 1:
            raise ValueError("static policy needs cores >= 1")
        if self.batch is not None and self.batch < 1:
            raise ValueError("static policy needs batch >= 1")

    @property
    def name(self) -> str:
        return f"static{self.cores}"

    def resolve_batch(self, model: LatencyModel, slo_ms: float) -> int:
        if self.batch is None:
            self.batch = largest_batch_within(model, self.cores, slo_ms, self.b_max) or 1
        return self.batch

    def decide(self, model, snap, rate, slo_ms, now_ms):
        return Action(Allocation(self.cores, self.resolve_batch(model, slo_ms)))


@dataclass
class HorizontalState:
    ready_replicas: int = 1
    pending_ready_at_ms: list[float] = field(default_factory=list)
    per_replica_throughput_rps: float = 0.0


@dataclass
class HorizontalPolicy(ScalingPolicy):
    """1-core replicas sized to the arrival rate; scale-up pays ``cold_start_ms``."""

    cold_start_ms: float = 10_000.0
    headroom: float = 1.0
    b_max: int = 16
    initial_replicas: int = 1
    state: HorizontalState = field(default_factory=HorizontalState)

    kind = "horizontal"

    def __post_init__(self):
        if self.cold_start_ms < 0 or self.headroom <= 0 or self.initial_replicas < 1:
            raise ValueError("invalid horizontal policy parameters")
        self.state = HorizontalState(ready_replicas=self.initial_replicas)

    def replica_batch(self, model: LatencyModel, cl_ms: float, slo_ms: float) -> tuple[int, bool]:
        """Throughput-maximising batch that still fits the budget on one core."""
        fitting = [b for b in range(1, self.b_max + 1)
                   if predict_latency(model, b, 1) + cl_ms < slo_ms]
        if not fitting:
            return 1, False
        return max(fitting, key=lambda b: (throughput(model, b, 1), -b)), True

    def _promote(self, now_ms: float) -> None:
        st = self.state
        due = [t for t in st.pending_ready_at_ms if t <= now_ms]
        if due:
            st.pending_ready_at_ms = [t for t in st.pending_ready_at_ms if t > now_ms]
            st.ready_replicas += len(due)

    def ready_replicas(self, now_ms: float) -> int:
        self._promote(now_ms)
        return self.state.ready_replicas

    def pending_replicas(self) -> int:
        return len(self.state.pending_ready_at_ms)

    def decide(self, model, snap, rate, slo_ms, now_ms):
        self._promote(now_ms)
        st = self.state
        batch, fits = self.replica_batch(model, snap.cl_max_ms, slo_ms)
        st.per_replica_throughput_rps = throughput(model, batch, 1)
        target = max(1, math.ceil(self.headroom * rate.lambda_rps / st.per_replica_throughput_rps))

        total = st.ready_replicas + len(st.pending_ready_at_ms)
        new: list[float] = []
        if target > total:
            new = [now_ms + self.cold_start_ms] * (target - total)
            st.pending_ready_at_ms.extend(new)
        elif target < total:
            excess = total - target
            cancel = min(excess, len(st.pending_ready_at_ms))
            if cancel:
                del st.pending_ready_at_ms[-cancel:]
            st.ready_replicas -= excess - cancel
        return Action(Allocation(1, batch), saturated=not fits, wakeups_ms=tuple(sorted(set(new))))


def parse_policy(text: str, params: ScalerParams | None = None) -> ScalingPolicy:
    """Build a policy from ``sponge``, ``static:8``, ``static:8:4`` or ``horizontal[:cold_ms]``."""
    params = params or ScalerParams()
    kind, *args = text.strip().split(":")
    try:
        if kind == "sponge" and not args:
            return SpongePolicy(params=params)
        if kind == "static" and 1 <= len(args) <= 2:
            batch = int(args[1]) if len(args) == 2 else None
            return StaticPolicy(cores=int(args[0]), batch=batch, b_max=params.b_max)
        if kind == "horizontal" and len(args) <= 1:
            kw = {"b_max": params.b_max}
            if args:
                kw["cold_start_ms"] = float(args[0])
            return HorizontalPolicy(**kw)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad policy {text!r}: {exc}") from None
    raise ValueError(f"unknown policy {text!r}; expected sponge, static:<cores>[:<batch>], horizontal[:<cold_ms>]")
