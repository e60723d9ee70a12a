"""Command-line entry point: ``sloscale fit | solve | simulate``.

Exit codes: 0 success, 1 infeasible or invalid input, 2 I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import perf_model
from .errors import Infeasible, ParseError, ValidationError
from .network import load_trace, parse_synthetic_spec, synthetic_trace
from .perf_model import predict_latency, throughput
from .policies import parse_policy
from .request_queue import QueueSnapshot, Request
from .results import summarize, write_result
from .scaler import RateEstimate, ScalerParams, objective, solve
from .simulator import Scenario, run

log = logging.getLogger("sloscale")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2

BOX_KEYS = ("cores_min", "cores_max", "batch_min", "batch_max")


class UsageError(Exception):
    """Bad combination of flags or config keys."""


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _read_box(path: Path) -> tuple[int, int, int, int] | None:
    """Profiled (cores, batch) box stored alongside a fitted model, if any."""
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        return tuple(int(doc[k]) for k in BOX_KEYS)
    except (OSError, ValueError, KeyError, TypeError):
        return None


def _outside(box, cores: int, batch: int) -> bool:
    return box is not None and not (box[0] <= cores <= box[1] and box[2] <= batch <= box[3])


# ---------------------------------------------------------------------------
# fit

def cmd_fit(args: argparse.Namespace) -> int:
    try:
        points = perf_model.load_profile(args.profile)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot read {args.profile}: {exc.strerror}")
    except ParseError as exc:
        return _fail(EXIT_IO, f"{args.profile}: {exc}")
    except ValidationError as exc:
        return _fail(EXIT_INVALID, str(exc))
    try:
        model = perf_model.fit(points)
    except ValidationError as exc:
        return _fail(EXIT_INVALID, f"insufficient data: {exc}")

    print(f"gamma={model.gamma:.6g} epsilon={model.epsilon:.6g} "
          f"delta={model.delta:.6g} eta={model.eta:.6g}")
    print(f"{'cores':>5} {'batch':>5} {'observed':>9} {'predicted':>9} {'residual':>9} {'err%':>6}")
    for p in points:
        pred = predict_latency(model, p.batch, p.cores)
        print(f"{p.cores:>5} {p.batch:>5} {p.latency_ms:>9.2f} {pred:>9.2f} "
              f"{pred - p.latency_ms:>9.2f} {100 * abs(pred - p.latency_ms) / p.latency_ms:>6.2f}")
    print(f"MAPE={100 * perf_model.mape(model, points):.2f}%")

    if args.out:
        box = dict(zip(BOX_KEYS, perf_model.profiled_box(points)))
        try:
            perf_model.save_model(model, args.out, **box)
        except OSError as exc:
            return _fail(EXIT_IO, f"cannot write {args.out}: {exc.strerror}")
        print(f"wrote {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve

def _params_from_args(args) -> ScalerParams:
    return ScalerParams(
        c_max=args.c_max, b_max=args.b_max, delta_penalty=args.delta,
        enforce_rate_constraint=not args.no_rate_constraint,
    )


def cmd_solve(args: argparse.Namespace) -> int:
    try:
        model = perf_model.load_model(args.model)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot read {args.model}: {exc.strerror}")
    except ParseError as exc:
        return _fail(EXIT_IO, f"{args.model}: {exc}")
    try:
        params = _params_from_args(args)
        if args.queue_len < 0 or args.cl_max_ms < 0 or args.lambda_rps < 0:
            raise ValueError("queue length, cl_max and lambda must be >= 0")
    except ValueError as exc:
        return _fail(EXIT_INVALID, str(exc))

    reqs = [Request(i, 0.0, args.cl_max_ms, args.slo_ms) for i in range(args.queue_len)]
    snap = QueueSnapshot.of(reqs)
    if args.slo_ms <= args.cl_max_ms:
        print("infeasible: no processing budget left (slo <= cl_max)")
        return EXIT_INVALID
    try:
        alloc = solve(model, snap, args.slo_ms, RateEstimate(args.lambda_rps), params)
    except Infeasible as exc:
        print(f"infeasible: {exc}")
        return EXIT_INVALID

    lat = predict_latency(model, alloc.batch, alloc.cores)
    print(f"cores={alloc.cores} batch={alloc.batch} "
          f"latency_ms={lat:.3f} throughput_rps={throughput(model, alloc.batch, alloc.cores):.3f} "
          f"objective={objective(alloc, params):.4f}")
    if _outside(_read_box(Path(args.model)), alloc.cores, alloc.batch):
        print("warning: allocation lies outside the profiled cores/batch range", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate

SCENARIO_DEFAULTS = {
    "duration_s": 600.0,
    "rate_rps": 20.0,
    "arrival_mode": "fixed",
    "request_size_kb": 200.0,
    "slo_ms": 1000.0,
    "adaptation_period_ms": 1000.0,
    "seed": 0,
    "c_max": 16,
    "b_max": 16,
    "delta_penalty": 0.01,
    "enforce_rate_constraint": True,
    "resize_delay_ms": 0.0,
    "policies": ["sponge", "static:16"],
}

# CLI flag dest -> config key
FLAG_KEYS = {
    "duration": "duration_s", "rate": "rate_rps", "arrival": "arrival_mode",
    "size_kb": "request_size_kb", "slo_ms": "slo_ms", "adaptation_ms": "adaptation_period_ms",
    "seed": "seed", "c_max": "c_max", "b_max": "b_max", "delta": "delta_penalty",
    "trace": "trace", "synthetic_trace": "synthetic_trace", "model": "model",
    "profile": "profile", "resize_delay_ms": "resize_delay_ms",
}

PATH_KEYS = {"trace", "model", "profile"}
# a flag naming one source overrides any other source of the same thing
SOURCE_GROUPS = (
    {"trace", "synthetic_trace"},
    {"model", "profile", *perf_model.COEFFICIENTS},
)


def _load_config(path: str | None) -> tuple[dict, Path]:
    if path is None:
        return {}, Path.cwd()
    cfg_path = Path(path)
    doc = json.loads(cfg_path.read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ParseError("scenario config must be a JSON object")
    return doc, cfg_path.parent


def _merged_config(args) -> tuple[dict, Path]:
    doc, base = _load_config(args.config)
    cfg = {**SCENARIO_DEFAULTS, **doc}
    for dest, key in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        if key in PATH_KEYS:
            value = str(Path(value).resolve())
        for group in SOURCE_GROUPS:
            if key in group:
                for other in group:
                    cfg.pop(other, None)
        cfg[key] = value
    if args.policy:
        cfg["policies"] = args.policy
    if args.no_rate_constraint:
        cfg["enforce_rate_constraint"] = False
    return cfg, base


def _resolve(base: Path, p: str) -> Path:
    path = Path(p)
    return path if path.is_absolute() else base / path


def _model_from_config(cfg: dict, base: Path):
    """Return (model, profiled box or None)."""
    if "profile" in cfg:
        points = perf_model.load_profile(_resolve(base, cfg["profile"]))
        return perf_model.fit(points), perf_model.profiled_box(points)
    if "model" in cfg:
        path = _resolve(base, cfg["model"])
        return perf_model.load_model(path), _read_box(path)
    if all(k in cfg for k in perf_model.COEFFICIENTS):
        return perf_model.model_from_mapping(cfg), None
    raise UsageError("scenario needs a latency model: --model, --profile or inline coefficients")


def _trace_from_config(cfg: dict, base: Path, duration_s: float):
    if "trace" in cfg:
        return load_trace(_resolve(base, cfg["trace"]))
    if "synthetic_trace" in cfg:
        spec = cfg["synthetic_trace"]
        opts = parse_synthetic_spec(spec) if isinstance(spec, str) else dict(spec)
        return synthetic_trace(opts, duration_s)
    raise UsageError("scenario needs a bandwidth trace: --trace or --synthetic-trace")


def build_experiment(args) -> tuple[Scenario, list, ScalerParams, dict, tuple | None]:
    cfg, base = _merged_config(args)
    try:
        duration = float(cfg["duration_s"])
    except (TypeError, ValueError):
        raise ValidationError("duration_s must be a number") from None
    if duration <= 0:
        raise ValidationError("duration_s must be > 0")
    model, box = _model_from_config(cfg, base)
    trace = _trace_from_config(cfg, base, duration)
    params = ScalerParams(
        c_max=int(cfg["c_max"]), b_max=int(cfg["b_max"]),
        delta_penalty=float(cfg["delta_penalty"]),
        enforce_rate_constraint=bool(cfg["enforce_rate_constraint"]),
    )
    scenario = Scenario(
        duration_s=duration,
        rate_rps=float(cfg["rate_rps"]),
        slo_ms=float(cfg["slo_ms"]),
        trace=trace,
        model=model,
        request_size_kb=float(cfg["request_size_kb"]),
        arrival_mode=str(cfg["arrival_mode"]),
        adaptation_period_ms=float(cfg["adaptation_period_ms"]),
        seed=int(cfg["seed"]),
    )
    scenario.validate()
    specs = cfg["policies"]
    if isinstance(specs, str):
        specs = [specs]
    if not specs:
        raise ValidationError("at least one policy is required")
    return scenario, list(specs), params, cfg, box


def _stem(spec: str) -> str:
    return spec.replace(":", "").replace("/", "_")


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        scenario, specs, params, cfg, box = build_experiment(args)
        policies = []
        for spec in specs:
            policy = parse_policy(spec, params)
            if policy.kind == "sponge":
                policy = replace(policy, resize_delay_ms=float(cfg["resize_delay_ms"]))
            policies.append((spec, policy))
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(EXIT_IO, str(exc))
    except ParseError as exc:
        return _fail(EXIT_IO, str(exc))
    except (ValidationError, UsageError, ValueError) as exc:
        return _fail(EXIT_INVALID, str(exc))

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot create {out}: {exc.strerror}")

    rows = {}
    for spec, policy in policies:
        result = run(scenario, policy)
        summary = summarize(result, scenario.slo_ms)
        stem = _stem(spec)
        write_result(result, out, stem)
        row = {"policy": spec, **summary.to_dict()}
        if policy.kind == "static":
            row["static_batch"] = policy.batch
        outside = sum(_outside(box, w.allocation.cores, w.allocation.batch) for w in result.windows)
        row["extrapolated_windows"] = outside
        if outside:
            log.warning("%s: %d windows use allocations outside the profiled range", spec, outside)
        rows[stem] = row

    (out / "summary.json").write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _print_table(list(rows.values()))
    return EXIT_OK


def _print_table(rows: list[dict]) -> None:
    header = f"{'policy':<14} {'requests':>8} {'violations':>10} {'rate%':>7} {'p99_ms':>8} {'mean_cores':>10} {'core_s':>10} {'max_q':>6}"
    print(header)
    for r in rows:
        print(f"{r['policy']:<14} {r['requests']:>8} {r['violation_count']:>10} "
              f"{100 * r['violation_rate']:>7.3f} {r['p99_e2e_ms']:>8.1f} {r['mean_cores']:>10.3f} "
              f"{r['total_core_ms'] / 1000:>10.1f} {r['max_queue_len']:>6}")


# ---------------------------------------------------------------------------

def _add_scaler_flags(p: argparse.ArgumentParser, defaults: bool) -> None:
    p.add_argument("--c-max", type=int, default=16 if defaults else None)
    p.add_argument("--b-max", type=int, default=16 if defaults else None)
    p.add_argument("--delta", type=float, default=0.01 if defaults else None,
                   help="objective weight on batch size")
    p.add_argument("--no-rate-constraint", action="store_true",
                   help="drop the throughput >= arrival-rate constraint")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sloscale", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the latency model to profiling data")
    p.add_argument("profile", help="CSV with header cores,batch,latency_ms")
    p.add_argument("-o", "--out", help="where to write the fitted model (JSON)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("solve", help="one-shot (cores, batch) decision")
    p.add_argument("--model", required=True)
    p.add_argument("--slo-ms", type=float, required=True)
    p.add_argument("--cl-max-ms", type=float, default=0.0)
    p.add_argument("--queue-len", type=int, default=0)
    p.add_argument("--lambda-rps", type=float, default=0.0)
    _add_scaler_flags(p, defaults=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="run policies over a scenario and write CSVs")
    p.add_argument("--config", help="JSON scenario file; flags override its keys")
    p.add_argument("--trace")
    p.add_argument("--synthetic-trace", help="e.g. shape=step,low=0.5,high=7,drop_at=300")
    p.add_argument("--model", help="fitted model JSON")
    p.add_argument("--profile", help="profiling CSV to fit on the fly")
    p.add_argument("--duration", type=float, help="seconds")
    p.add_argument("--rate", type=float, help="requests per second")
    p.add_argument("--arrival", choices=["fixed", "poisson"])
    p.add_argument("--slo-ms", type=float)
    p.add_argument("--size-kb", type=float)
    p.add_argument("--adaptation-ms", type=float)
    p.add_argument("--resize-delay-ms", type=float)
    p.add_argument("--policy", action="append",
                   help="sponge | static:<cores>[:<batch>] | horizontal[:<cold_ms>]; repeatable")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="results")
    _add_scaler_flags(p, defaults=False)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
