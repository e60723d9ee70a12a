"""Bandwidth traces and the request transfer-time model.

Units are decimal throughout: 1 MB = 1000 KB, bandwidth in MB/s.
"""

from __future__ import annotations

import io
import math
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptyTrace, NonMonotonicTime, NonPositiveBandwidth, ParseError

TRACE_HEADER = ("t_s", "bandwidth_mbps")


@dataclass(frozen=True)
class BandwidthTrace:
    times_s: tuple[float, ...]
    bandwidth_mbps: tuple[float, ...]

    def __post_init__(self):
        if len(self.times_s) != len(self.bandwidth_mbps):
            raise ValueError("times and bandwidths differ in length")
        if not self.times_s:
            raise EmptyTrace("trace has no samples")
        for prev, cur in zip(self.times_s, self.times_s[1:]):
            if cur <= prev:
                raise NonMonotonicTime(f"sample time {cur} s does not follow {prev} s")
        for t, bw in zip(self.times_s, self.bandwidth_mbps):
            if not bw > 0:
                raise NonPositiveBandwidth(f"bandwidth at t={t} s is {bw}")

    @classmethod
    def from_samples(cls, samples: Iterable[tuple[float, float]]) -> BandwidthTrace:
        samples = list(samples)
        return cls(tuple(float(t) for t, _ in samples), tuple(float(bw) for _, bw in samples))

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.times_s, self.bandwidth_mbps))

    def __len__(self) -> int:
        return len(self.times_s)

    def at(self, t_s: float) -> float:
        return bandwidth_at(self, t_s)


def bandwidth_at(trace: BandwidthTrace, t_s: float) -> float:
    """Step-hold lookup: value of the latest sample at or before ``t_s``."""
    idx = bisect_right(trace.times_s, t_s) - 1
    return trace.bandwidth_mbps[max(idx, 0)]


def comm_latency(size_kb: float, bandwidth_mbps: float) -> float:
    """Milliseconds to upload ``size_kb`` kilobytes at ``bandwidth_mbps`` MB/s."""
    return size_kb / (bandwidth_mbps * 1000.0) * 1000.0


def remaining_slo(slo_ms: float, comm_latency_ms: float) -> float:
    """Budget left for queuing and processing; <= 0 means dead on arrival."""
    return slo_ms - comm_latency_ms


# ---------------------------------------------------------------------------
# text format

def parse_trace(text: str | io.TextIOBase) -> BandwidthTrace:
    """Parse ``t_s,bandwidth_mbps`` lines. Header optional, ``#`` starts a comment."""
    if not isinstance(text, str):
        text = text.read()
    samples = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        cells = [c.strip() for c in line.split(",")]
        if not samples and tuple(cells) == TRACE_HEADER:
            continue
        if len(cells) != 2:
            raise ParseError(f"expected 't_s,bandwidth_mbps', got {raw!r}", lineno)
        try:
            t, bw = float(cells[0]), float(cells[1])
        except ValueError:
            raise ParseError(f"non-numeric field in {raw!r}", lineno) from None
        if not (math.isfinite(t) and math.isfinite(bw)) or t < 0:
            raise ParseError(f"invalid sample {raw!r}", lineno)
        if samples and t <= samples[-1][0]:
            raise NonMonotonicTime(f"line {lineno}: time {t} s does not follow {samples[-1][0]} s")
        if bw <= 0:
            raise NonPositiveBandwidth(f"line {lineno}: bandwidth must be > 0, got {bw}")
        samples.append((t, bw))
    if not samples:
        raise EmptyTrace("trace has no samples")
    return BandwidthTrace.from_samples(samples)


def serialize_trace(trace: BandwidthTrace) -> str:
    lines = [",".join(TRACE_HEADER)]
    lines += [f"{t!r},{bw!r}" for t, bw in trace.samples]
    return "\n".join(lines) + "\n"


def load_trace(path: str | Path) -> BandwidthTrace:
    return parse_trace(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# synthetic traces, sampled once per interval

def _sample_times(duration_s: float, interval_s: float) -> list[float]:
    n = max(1, math.ceil(duration_s / interval_s))
    return [i * interval_s for i in range(n)]


def square_wave(
    low: float, high: float, period_s: float, duration_s: float,
    interval_s: float = 1.0, start_high: bool = True,
) -> BandwidthTrace:
    """Alternate ``high`` and ``low`` for half a period each."""
    def value(t: float) -> float:
        first_half = (t % period_s) < period_s / 2
        return high if first_half == start_high else low

    times = _sample_times(duration_s, interval_s)
    return BandwidthTrace(tuple(times), tuple(value(t) for t in times))


def sinusoid(
    low: float, high: float, period_s: float, duration_s: float, interval_s: float = 1.0,
) -> BandwidthTrace:
    mid, amp = (high + low) / 2, (high - low) / 2
    times = _sample_times(duration_s, interval_s)
    return BandwidthTrace(
        tuple(times),
        tuple(mid + amp * math.cos(2 * math.pi * t / period_s) for t in times),
    )


def step_drop(
    high: float, low: float, drop_at_s: float, duration_s: float, interval_s: float = 1.0,
) -> BandwidthTrace:
    """``high`` until ``drop_at_s``, then ``low`` for the rest of the trace."""
    times = _sample_times(duration_s, interval_s)
    return BandwidthTrace(tuple(times), tuple(high if t < drop_at_s else low for t in times))


SHAPES = ("square", "sine", "step")


def parse_synthetic_spec(spec: str) -> dict[str, str]:
    """Split ``shape=step,low=0.5,high=7,period=60`` into a dict."""
    out = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ParseError(f"expected key=value in synthetic trace spec, got {part!r}")
        key, value = part.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def synthetic_trace(options: dict, duration_s: float) -> BandwidthTrace:
    """Build a synthetic trace from a parsed option mapping.

    Recognised keys: ``shape`` (square|sine|step), ``low``, ``high``,
    ``period`` (s), ``drop_at`` (s, step only), ``interval`` (s),
    ``duration`` (s, defaults to the scenario duration).
    """
    opts = dict(options)
    shape = str(opts.pop("shape", "square"))
    try:
        low = float(opts.pop("low", 0.5))
        high = float(opts.pop("high", 7.0))
        period = float(opts.pop("period", 60.0))
        interval = float(opts.pop("interval", 1.0))
        duration = float(opts.pop("duration", duration_s))
        drop_at = float(opts.pop("drop_at", duration / 2))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad synthetic trace option: {exc}") from None
    if opts:
        raise ParseError(f"unknown synthetic trace option(s): {', '.join(sorted(opts))}")
    if low <= 0 or high <= 0:
        raise NonPositiveBandwidth("synthetic bandwidth bounds must be > 0")
    if period <= 0 or interval <= 0 or duration <= 0:
        raise ParseError("period, interval and duration must be > 0")
    if shape == "square":
        return square_wave(low, high, period, duration, interval)
    if shape == "sine":
        return sinusoid(low, high, period, duration, interval)
    if shape == "step":
        return step_drop(high, low, drop_at, duration, interval)
    raise ParseError(f"unknown trace shape {shape!r}; expected one of {', '.join(SHAPES)}")


def comm_latencies(trace: BandwidthTrace, send_times_ms: Sequence[float], size_kb: float) -> list[float]:
    """Transfer time of each request, sampling bandwidth at its send time."""
    return [comm_latency(size_kb, bandwidth_at(trace, t / 1000.0)) for t in send_times_ms]
