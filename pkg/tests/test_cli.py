import json
import re
import subprocess
import sys

import pytest

from sloscale.cli import main

from conftest import DATA

PROFILE_CSV = str(DATA / "resnet_profile.csv")


@pytest.fixture
def model_file(tmp_path):
    out = tmp_path / "model.json"
    assert main(["fit", PROFILE_CSV, "-o", str(out)]) == 0
    return str(out)


def test_fit_prints_mape(capsys, tmp_path):
    out = tmp_path / "m.json"
    assert main(["fit", PROFILE_CSV, "-o", str(out)]) == 0
    text = capsys.readouterr().out
    mape = float(re.search(r"MAPE=([\d.]+)%", text).group(1))
    assert mape <= 15.0
    doc = json.loads(out.read_text())
    assert doc["cores_max"] == 8 and doc["batch_max"] == 8


def test_fit_empty_csv(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("cores,batch,latency_ms\n")
    assert main(["fit", str(empty)]) != 0
    assert "insufficient data" in capsys.readouterr().err


def test_fit_malformed_row(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("cores,batch,latency_ms\n1,1,55\n1,two,97\n")
    assert main(["fit", str(bad)]) == 2
    assert "line 3" in capsys.readouterr().err


def test_fit_missing_file(tmp_path):
    assert main(["fit", str(tmp_path / "nope.csv")]) == 2


def test_solve_idle(model_file, capsys):
    assert main(["solve", "--model", model_file, "--slo-ms", "1000"]) == 0
    assert "cores=1 batch=1" in capsys.readouterr().out


def test_solve_no_budget(model_file, capsys):
    rc = main(["solve", "--model", model_file, "--slo-ms", "500", "--cl-max-ms", "600", "--queue-len", "3"])
    assert rc == 1
    assert "infeasible" in capsys.readouterr().out


def test_solve_motivating_case(model_file, capsys):
    args = ["solve", "--model", model_file, "--slo-ms", "1000", "--cl-max-ms", "600",
            "--queue-len", "4", "--lambda-rps", "100"]
    assert main(args) == 0
    out = capsys.readouterr().out
    cores = int(re.search(r"cores=(\d+)", out).group(1))
    batch = int(re.search(r"batch=(\d+)", out).group(1))
    assert (cores, batch) == (5, 9)  # frozen from the exhaustive oracle on the fitted model


def test_solve_warns_outside_profile(model_file, capsys):
    main(["solve", "--model", model_file, "--slo-ms", "1000", "--cl-max-ms", "600",
          "--queue-len", "4", "--lambda-rps", "100"])
    assert "outside the profiled" in capsys.readouterr().err


def sim_args(out, *extra):
    return ["simulate", "--profile", PROFILE_CSV, "--synthetic-trace",
            "shape=square,low=0.5,high=7,period=60", "--duration", "120",
            "--rate", "20", "--out", str(out), *extra]


def test_simulate_sponge_vs_static16(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(sim_args(out, "--policy", "sponge", "--policy", "static:16")) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary) == {"sponge", "static16"}
    assert summary["sponge"]["mean_cores"] < 16
    assert summary["static16"]["mean_cores"] == pytest.approx(16.0)
    for stem in ("sponge", "static16"):
        assert (out / f"{stem}_requests.csv").read_text().startswith("id,send_ms,")
        assert (out / f"{stem}_windows.csv").read_text().startswith("t_ms,cores,batch,violations")
    assert "mean_cores" in capsys.readouterr().out


def test_simulate_zero_duration(tmp_path):
    assert main(sim_args(tmp_path, "--duration", "0")) == 1


def test_simulate_bad_policy(tmp_path):
    assert main(sim_args(tmp_path, "--policy", "teleport")) == 1


def test_simulate_needs_a_model(tmp_path):
    args = ["simulate", "--synthetic-trace", "shape=square,low=0.5,high=7,period=60",
            "--duration", "10", "--out", str(tmp_path)]
    assert main(args) == 1


def test_simulate_rerun_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    extra = ("--policy", "sponge", "--arrival", "poisson", "--seed", "17")
    assert main(sim_args(a, *extra)) == 0
    assert main(sim_args(b, *extra)) == 0
    for name in ("sponge_requests.csv", "sponge_windows.csv", "summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_simulate_config_file(tmp_path):
    trace = tmp_path / "trace.csv"
    trace.write_text("t_s,bandwidth_mbps\n0,7\n5,0.5\n")
    cfg = tmp_path / "scenario.json"
    cfg.write_text(json.dumps({
        "duration_s": 10, "rate_rps": 10, "trace": "trace.csv",
        "gamma": 40, "epsilon": 15, "delta": 1, "eta": 0, "policies": ["static:8:2"],
    }))
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["static82"]["requests"] == 100
    assert summary["static82"]["static_batch"] == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sloscale", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "simulate" in proc.stdout
