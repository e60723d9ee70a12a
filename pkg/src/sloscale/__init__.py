"""SLO-aware in-place vertical scaling and dynamic batching for inference serving."""

from .errors import (
    DuplicateId,
    EmptyTrace,
    Infeasible,
    InsufficientData,
    NonMonotonicTime,
    NonPositiveBandwidth,
    NonPositiveLatency,
    ParseError,
    ScenarioInvalid,
    SloScaleError,
)
from .network import (
    BandwidthTrace,
    bandwidth_at,
    comm_latency,
    load_trace,
    parse_trace,
    remaining_slo,
    sinusoid,
    square_wave,
    step_drop,
)
from .perf_model import (
    LatencyModel,
    ProfilePoint,
    fit,
    load_model,
    load_profile,
    predict_latency,
    save_model,
    throughput,
)
from .policies import HorizontalPolicy, SpongePolicy, StaticPolicy
from .request_queue import EDFQueue, QueueSnapshot, Request
from .results import Summary, summarize
from .scaler import Allocation, RateEstimate, ScalerParams, check_feasible, estimate_rate, solve
from .simulator import Scenario, SimResult, generate_arrivals, run

__version__ = "0.1.0"
