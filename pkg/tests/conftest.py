from __future__ import annotations

from pathlib import Path

import pytest

from sloscale.perf_model import LatencyModel, ProfilePoint, load_profile

DATA = Path(__file__).parent / "data"

# (cores, batch, latency_ms) rows of the ResNet profiling table
RESNET_PROFILE = [(1, 1, 55.0), (1, 2, 97.0), (2, 4, 94.0), (4, 8, 92.0), (8, 4, 37.0), (8, 8, 62.0)]

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_REPORT: list[str] = []


@pytest.fixture
def profile_points() -> list[ProfilePoint]:
    return load_profile(DATA / "resnet_profile.csv")


@pytest.fixture
def toy_model() -> LatencyModel:
    """Hand model that reproduces the (1,1) and (1,2) rows to within 1 ms."""
    return LatencyModel(gamma=40.0, epsilon=15.0, delta=1.0, eta=0.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_REPORT:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_REPORT:
            terminalreporter.write_line(line)
