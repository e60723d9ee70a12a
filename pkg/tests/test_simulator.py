import math

import pytest
from hypothesis import given, settings, strategies as st

from sloscale.errors import ScenarioInvalid
from sloscale.network import BandwidthTrace, square_wave
from sloscale.perf_model import LatencyModel, predict_latency
from sloscale.policies import HorizontalPolicy, SpongePolicy, StaticPolicy
from sloscale.scaler import Allocation
from sloscale.simulator import Scenario, generate_arrivals, run


def flat(mbps):
    return BandwidthTrace((0.0,), (mbps,))


def scenario(model, **kw):
    base = dict(duration_s=10, rate_rps=20, slo_ms=1000, trace=flat(2.0), model=model)
    base.update(kw)
    return Scenario(**base)


def test_fixed_arrivals():
    times = generate_arrivals(20, 1.0)
    assert times == [i * 50.0 for i in range(20)]
    assert len(generate_arrivals(20, 600)) == 12000


def test_poisson_arrivals_count_and_seed():
    times = generate_arrivals(20, 600, "poisson", seed=3)
    assert abs(len(times) - 12000) <= 3 * math.sqrt(12000)
    assert times == sorted(times) and times[-1] < 600_000
    assert generate_arrivals(20, 600, "poisson", seed=3) == times
    assert generate_arrivals(20, 600, "poisson", seed=4) != times


def test_single_request_hand_trace(toy_model):
    # 200 KB at 2 MB/s is 100 ms on the wire, then one (1,1) batch of 56 ms
    result = run(scenario(toy_model, duration_s=1, rate_rps=1), SpongePolicy())
    (o,) = result.outcomes
    assert o.comm_latency_ms == 100.0
    assert o.queue_latency_ms == 0.0
    assert o.processing_latency_ms == 56.0
    assert o.e2e_latency_ms == 156.0
    assert not o.violated
    assert o.allocation_at_service == Allocation(1, 1)


def test_too_slow_network_violates(toy_model):
    # 200 KB at 0.1 MB/s is 2 s of transfer against a 1 s SLO
    result = run(scenario(toy_model, duration_s=1, rate_rps=1, trace=flat(0.1)), SpongePolicy())
    (o,) = result.outcomes
    assert o.violated and o.e2e_latency_ms == 2056.0


def test_windows_cover_duration_when_idle(toy_model):
    result = run(scenario(toy_model, duration_s=5, rate_rps=0.1), SpongePolicy())
    assert result.outcomes == []
    assert len(result.windows) == 5
    assert all(w.allocation == Allocation(1, 1) for w in result.windows)
    assert result.total_core_ms == pytest.approx(5000.0)


@pytest.mark.parametrize("field, value", [
    ("duration_s", 0), ("rate_rps", -1), ("slo_ms", 0),
    ("adaptation_period_ms", 0), ("arrival_mode", "burst"), ("request_size_kb", 0),
])
def test_invalid_scenarios(toy_model, field, value):
    with pytest.raises(ScenarioInvalid):
        run(scenario(toy_model, **{field: value}), SpongePolicy())


def check_invariants(result, sc):
    n_sent = len(generate_arrivals(sc.rate_rps, sc.duration_s, sc.arrival_mode, sc.seed))
    assert len(result.outcomes) == n_sent
    assert [o.id for o in result.outcomes] == list(range(n_sent))
    for o in result.outcomes:
        assert o.queue_latency_ms >= -1e-9
        assert o.start_ms >= o.arrival_ms - 1e-9
        total = o.comm_latency_ms + o.queue_latency_ms + o.processing_latency_ms
        assert o.e2e_latency_ms == pytest.approx(total, abs=1e-6)
        assert o.violated == (o.e2e_latency_ms > sc.slo_ms)
    # a server runs one batch at a time
    by_server = {}
    for o in result.outcomes:
        by_server.setdefault(o.replica, set()).add((round(o.start_ms, 6), round(o.completion_ms, 6)))
    for spans in by_server.values():
        spans = sorted(spans)
        for (_, end), (start, _) in zip(spans, spans[1:]):
            assert start >= end - 1e-6
    assert result.total_core_ms == pytest.approx(sum(w.core_ms for w in result.windows))
    assert sum(w.violations for w in result.windows) == sum(o.violated for o in result.outcomes)


policies = st.sampled_from(["sponge", "static", "horizontal"])


def make_policy(kind):
    return {"sponge": SpongePolicy, "static": lambda: StaticPolicy(cores=4),
            "horizontal": lambda: HorizontalPolicy(cold_start_ms=2000.0)}[kind]()


@settings(max_examples=25, deadline=None)
@given(policies, st.floats(1, 80), st.sampled_from(["fixed", "poisson"]),
       st.integers(0, 2**32), st.floats(0.3, 8.0), st.floats(200, 2000))
def test_simulation_invariants(kind, rate, mode, seed, low, slo):
    model = LatencyModel(35.9, 5.5, 0.9, 15.1)
    trace = square_wave(low, 7.0, 4.0, 12.0)
    sc = scenario(model, duration_s=12, rate_rps=rate, arrival_mode=mode, seed=seed,
                  trace=trace, slo_ms=slo)
    check_invariants(run(sc, make_policy(kind)), sc)


def test_reruns_are_bit_identical(toy_model):
    sc = scenario(toy_model, duration_s=30, rate_rps=40, arrival_mode="poisson", seed=9,
                  trace=square_wave(0.5, 7.0, 10.0, 30.0))
    a, b = run(sc, SpongePolicy()), run(sc, SpongePolicy())
    assert a.outcomes == b.outcomes and a.windows == b.windows
    assert a.total_core_ms == b.total_core_ms


def test_static_holds_allocation(toy_model):
    result = run(scenario(toy_model, rate_rps=30), StaticPolicy(cores=8))
    assert {w.allocation for w in result.windows} == {Allocation(8, 16)}
    assert all(o.allocation_at_service.cores == 8 for o in result.outcomes)


def test_processing_time_matches_model(toy_model):
    result = run(scenario(toy_model, rate_rps=50), StaticPolicy(cores=4, batch=4))
    sizes = {}
    for o in result.outcomes:
        sizes.setdefault((round(o.start_ms, 6), o.replica), []).append(o)
    for batch in sizes.values():
        want = predict_latency(toy_model, len(batch), 4)
        assert all(o.processing_latency_ms == pytest.approx(want, abs=1e-3) for o in batch)


def test_resize_delay_postpones_new_allocation(toy_model):
    sc = scenario(toy_model, duration_s=20, rate_rps=60)
    quick = run(sc, SpongePolicy(resize_delay_ms=0.0))
    slow = run(sc, SpongePolicy(resize_delay_ms=500.0))
    decided = min(w.start_ms for w in quick.windows if w.allocation.cores > 1)
    quick_big = min(o.start_ms for o in quick.outcomes if o.allocation_at_service.cores > 1)
    slow_big = min(o.start_ms for o in slow.outcomes if o.allocation_at_service.cores > 1)
    assert quick_big < decided + 500.0
    assert slow_big >= decided + 500.0 - 1e-6
