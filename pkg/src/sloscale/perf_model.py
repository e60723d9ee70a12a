"""Latency model over batch size and CPU cores.

Processing latency of one batch is modelled as

    l(b, c) = gamma * b / c + epsilon / c + delta * b + eta      [ms]

i.e. a linear batch/latency relation whose slope and intercept each split
into a parallel part (shrinks with cores) and a serial part. For a fixed
batch size this reduces to ``alpha / c + beta`` with ``alpha = gamma*b +
epsilon`` and ``beta = delta*b + eta``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InsufficientData, NonPositiveLatency, ParseError

COEFFICIENTS = ("gamma", "epsilon", "delta", "eta")
PROFILE_HEADER = ("cores", "batch", "latency_ms")


@dataclass(frozen=True)
class ProfilePoint:
    cores: int
    batch: int
    latency_ms: float

    def __post_init__(self):
        if self.cores < 1 or self.batch < 1:
            raise ValueError(f"cores and batch must be >= 1, got {self.cores}, {self.batch}")
        if not self.latency_ms > 0:
            raise NonPositiveLatency(f"latency_ms must be > 0, got {self.latency_ms}")


@dataclass(frozen=True)
class LatencyModel:
    """Fitted coefficients; all in milliseconds (gamma/epsilon in ms*cores)."""

    gamma: float
    epsilon: float
    delta: float
    eta: float

    def __post_init__(self):
        values = (self.gamma, self.epsilon, self.delta, self.eta)
        if any(not math.isfinite(v) or v < 0 for v in values):
            raise ValueError(f"coefficients must be finite and >= 0, got {values}")
        if sum(values) <= 0:
            raise ValueError("degenerate model: all coefficients are zero")

    def latency(self, batch: int, cores: int) -> float:
        return predict_latency(self, batch, cores)

    def throughput(self, batch: int, cores: int) -> float:
        return throughput(self, batch, cores)

    def serial_latency(self, batch: int) -> float:
        """Latency floor reached as cores grow without bound."""
        return self.delta * batch + self.eta

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


def predict_latency(model: LatencyModel, batch: int, cores: int) -> float:
    """Predicted processing latency (ms) of one batch of ``batch`` requests."""
    return (
        model.gamma * batch / cores
        + model.epsilon / cores
        + model.delta * batch
        + model.eta
    )


def throughput(model: LatencyModel, batch: int, cores: int) -> float:
    """Requests per second when batches of ``batch`` run back to back."""
    return 1000.0 * batch / predict_latency(model, batch, cores)


def _design_matrix(points: Sequence[ProfilePoint]) -> np.ndarray:
    b = np.array([p.batch for p in points], dtype=float)
    c = np.array([p.cores for p in points], dtype=float)
    return np.column_stack([b / c, 1.0 / c, b, np.ones_like(b)])


def fit(points: Sequence[ProfilePoint]) -> LatencyModel:
    """Least-squares fit with non-negativity enforced by iterative clamping.

    Any coefficient that comes out negative is pinned to zero and the
    remaining ones are re-solved, until the solution is non-negative.
    """
    points = list(points)
    if len(points) < 4:
        raise InsufficientData(f"need at least 4 profile points, got {len(points)}")
    for p in points:
        if not p.latency_ms > 0:
            raise NonPositiveLatency(f"latency_ms must be > 0, got {p.latency_ms}")
    if len({p.cores for p in points}) < 2 or len({p.batch for p in points}) < 2:
        raise InsufficientData("need at least 2 distinct cores and 2 distinct batch values")

    A = _design_matrix(points)
    y = np.array([p.latency_ms for p in points], dtype=float)
    if np.linalg.matrix_rank(A) < A.shape[1]:
        raise InsufficientData("profile points give a rank-deficient design")

    free = list(range(A.shape[1]))
    coef = np.zeros(A.shape[1])
    while free:
        sol, *_ = np.linalg.lstsq(A[:, free], y, rcond=None)
        if (sol >= 0).all():
            coef[free] = sol
            break
        free = [idx for idx, v in zip(free, sol) if v >= 0]

    if not (coef > 0).any():
        raise InsufficientData("fit collapsed to an all-zero model")
    return LatencyModel(*(float(v) for v in coef))


def residuals(model: LatencyModel, points: Iterable[ProfilePoint]) -> list[float]:
    return [predict_latency(model, p.batch, p.cores) - p.latency_ms for p in points]


def percentage_errors(model: LatencyModel, points: Iterable[ProfilePoint]) -> list[float]:
    """Absolute prediction error of each point relative to its observed latency."""
    return [
        abs(predict_latency(model, p.batch, p.cores) - p.latency_ms) / p.latency_ms
        for p in points
    ]


def mape(model: LatencyModel, points: Sequence[ProfilePoint]) -> float:
    errs = percentage_errors(model, points)
    return sum(errs) / len(errs) if errs else 0.0


# ---------------------------------------------------------------------------
# file formats

def parse_profile(text: str) -> list[ProfilePoint]:
    """Parse ``cores,batch,latency_ms`` CSV text (header required)."""
    reader = csv.reader(io.StringIO(text))
    points: list[ProfilePoint] = []
    header_seen = False
    for lineno, row in enumerate(reader, start=1):
        if not row or not "".join(row).strip():
            continue
        cells = [cell.strip() for cell in row]
        if not header_seen:
            if tuple(cells) != PROFILE_HEADER:
                raise ParseError(f"expected header {','.join(PROFILE_HEADER)!r}", lineno)
            header_seen = True
            continue
        if len(cells) != 3:
            raise ParseError(f"expected 3 fields, got {len(cells)}", lineno)
        try:
            cores, batch, latency = int(cells[0]), int(cells[1]), float(cells[2])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        if latency <= 0:
            raise NonPositiveLatency(f"line {lineno}: latency_ms must be > 0")
        if cores < 1 or batch < 1:
            raise ParseError("cores and batch must be >= 1", lineno)
        points.append(ProfilePoint(cores, batch, latency))
    return points


def load_profile(path: str | Path) -> list[ProfilePoint]:
    return parse_profile(Path(path).read_text(encoding="utf-8"))


def dump_profile(points: Iterable[ProfilePoint]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(PROFILE_HEADER)
    for p in points:
        writer.writerow([p.cores, p.batch, repr(float(p.latency_ms))])
    return out.getvalue()


def save_model(model: LatencyModel, path: str | Path, **extra: float) -> None:
    """Write the model as a flat JSON object (coefficients plus optional extras)."""
    doc = {**model.to_dict(), **extra}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def model_from_mapping(doc: dict) -> LatencyModel:
    try:
        return LatencyModel(*(float(doc[k]) for k in COEFFICIENTS))
    except KeyError as exc:
        raise ParseError(f"model document is missing key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad model document: {exc}") from None


def load_model(path: str | Path) -> LatencyModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(doc, dict):
        raise ParseError("model document must be a JSON object")
    return model_from_mapping(doc)


def profiled_box(points: Sequence[ProfilePoint]) -> tuple[int, int, int, int]:
    """``(cores_min, cores_max, batch_min, batch_max)`` covered by a profile."""
    cores = [p.cores for p in points]
    batch = [p.batch for p in points]
    return min(cores), max(cores), min(batch), max(batch)
