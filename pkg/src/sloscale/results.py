"""Summaries and CSV round-tripping of simulation results."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .errors import ParseError
from .scaler import Allocation
from .simulator import RequestOutcome, SimResult, Window

REQUEST_COLUMNS = ("id", "send_ms", "comm_ms", "queue_ms", "proc_ms", "e2e_ms",
                   "violated", "cores", "batch", "replica")
WINDOW_COLUMNS = ("t_ms", "cores", "batch", "violations",
                  "length_ms", "cores_allocated", "saturated", "replicas", "max_queue", "core_ms")


@dataclass(frozen=True)
class Summary:
    requests: int
    violation_count: int
    violation_rate: float
    dead_on_arrival: int
    p50_e2e_ms: float
    p99_e2e_ms: float
    mean_cores: float
    total_core_ms: float
    max_queue_len: int
    saturated_windows: int

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(result: SimResult, slo_ms: float | None = None) -> Summary:
    slo = result.slo_ms if slo_ms is None else slo_ms
    outcomes = result.outcomes
    n = len(outcomes)
    duration = result.duration_ms
    if n:
        e2e = np.array([o.e2e_latency_ms for o in outcomes])
        violations = int((e2e > slo).sum())
        p50, p99 = (float(v) for v in np.percentile(e2e, [50, 99]))
    else:
        violations, p50, p99 = 0, 0.0, 0.0
    return Summary(
        requests=n,
        violation_count=violations,
        violation_rate=violations / n if n else 0.0,
        dead_on_arrival=sum(o.comm_latency_ms >= slo for o in outcomes),
        p50_e2e_ms=p50,
        p99_e2e_ms=p99,
        mean_cores=result.total_core_ms / duration if duration else 0.0,
        total_core_ms=result.total_core_ms,
        max_queue_len=max((w.max_queue for w in result.windows), default=0),
        saturated_windows=sum(w.saturated for w in result.windows),
    )


def _num(x: float) -> str:
    return repr(float(x))


def requests_csv(result: SimResult) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(REQUEST_COLUMNS)
    for o in result.outcomes:
        w.writerow([
            o.id, _num(o.send_time_ms), _num(o.comm_latency_ms), _num(o.queue_latency_ms),
            _num(o.processing_latency_ms), _num(o.e2e_latency_ms), int(o.violated),
            o.allocation_at_service.cores, o.allocation_at_service.batch, o.replica,
        ])
    return out.getvalue()


def windows_csv(result: SimResult) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(WINDOW_COLUMNS)
    for win in result.windows:
        w.writerow([
            _num(win.start_ms), win.allocation.cores, win.allocation.batch, win.violations,
            _num(win.length_ms), _num(win.cores_allocated), int(win.saturated),
            win.replicas, win.max_queue, _num(win.core_ms),
        ])
    return out.getvalue()


def _rows(text: str, columns: tuple[str, ...]):
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header[:len(columns)]) != columns:
        raise ParseError(f"expected header {','.join(columns)}", 1)
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(columns):
            raise ParseError(f"expected {len(columns)} fields, got {len(row)}", lineno)
        yield lineno, dict(zip(columns, row))


def parse_requests_csv(text: str) -> list[RequestOutcome]:
    outcomes = []
    for lineno, r in _rows(text, REQUEST_COLUMNS):
        try:
            outcomes.append(RequestOutcome(
                id=int(r["id"]),
                send_time_ms=float(r["send_ms"]),
                comm_latency_ms=float(r["comm_ms"]),
                queue_latency_ms=float(r["queue_ms"]),
                processing_latency_ms=float(r["proc_ms"]),
                e2e_latency_ms=float(r["e2e_ms"]),
                violated=bool(int(r["violated"])),
                allocation_at_service=Allocation(int(r["cores"]), int(r["batch"])),
                replica=int(r["replica"]),
            ))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    return outcomes


def parse_windows_csv(text: str) -> list[Window]:
    windows = []
    for lineno, r in _rows(text, WINDOW_COLUMNS):
        try:
            windows.append(Window(
                start_ms=float(r["t_ms"]),
                length_ms=float(r["length_ms"]),
                allocation=Allocation(int(r["cores"]), int(r["batch"])),
                violations=int(r["violations"]),
                cores_allocated=float(r["cores_allocated"]),
                saturated=bool(int(r["saturated"])),
                replicas=int(r["replicas"]),
                max_queue=int(r["max_queue"]),
                core_ms=float(r["core_ms"]),
            ))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    return windows


def write_result(result: SimResult, out_dir: str | Path, stem: str) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    req_path = out_dir / f"{stem}_requests.csv"
    win_path = out_dir / f"{stem}_windows.csv"
    req_path.write_text(requests_csv(result), encoding="utf-8")
    win_path.write_text(windows_csv(result), encoding="utf-8")
    return req_path, win_path


def read_result(req_path: str | Path, win_path: str | Path, slo_ms: float = 0.0, policy: str = "") -> SimResult:
    outcomes = parse_requests_csv(Path(req_path).read_text(encoding="utf-8"))
    windows = parse_windows_csv(Path(win_path).read_text(encoding="utf-8"))
    total = sum(w.core_ms for w in windows)
    return SimResult(outcomes, windows, total, slo_ms, policy)
