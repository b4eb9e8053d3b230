"""Command-line entry point: ``zoneclust run`` and ``zoneclust synth``.

Flags override values from ``--config``; the merged configuration is what
gets echoed into ``report.json``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .runner import (
    ConfigError,
    RunConfig,
    SweepReport,
    emit_plot_series,
    read_sweep_csv,
    read_ticks_csv,
    run,
    sweep,
    weight_grid,
)
from .state import WeightVector
from .synth import BusRoute, SynthSpec, synth_trace
from .trace import TraceError, serialize_trace

__all__ = [
    "ConfigError",
    "RunConfig",
    "build_parser",
    "config_from_args",
    "emit_plot_series",
    "main",
    "read_sweep_csv",
    "read_ticks_csv",
    "run",
    "sweep",
    "weight_grid",
]


def _rsu(text: str) -> dict[str, float]:
    try:
        parts = [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad RSU {text!r}; expected lat,long[,tr]") from None
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError(f"bad RSU {text!r}; expected lat,long[,tr]")
    return dict(zip(("lat", "long", "tr"), parts))


def _weights(text: str) -> list[float]:
    try:
        return list(WeightVector.parse(text).as_tuple())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zoneclust", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one weight triple or sweep all 66")
    r.add_argument("--config", type=Path, help="JSON run configuration")
    r.add_argument("--trace", help="trace file")
    r.add_argument("--start", type=float, help="window start (s)")
    r.add_argument("--end", type=float, help="window end (s)")
    r.add_argument("--alpha", type=float, help="zone side (km)")
    r.add_argument("--tr", type=float, dest="common_tr_m", help="car transmission range (m)")
    r.add_argument("--dru-tr", type=float, dest="dru_tr_m", help="bus transmission range (m)")
    r.add_argument("--tau", type=int, dest="tau_ms", help="beacon period (ms)")
    r.add_argument("--lambda", type=int, dest="lambda_", help="rounds before cluster formation")
    r.add_argument("--weights", type=_weights, help="w1,w2,w3")
    r.add_argument("--sweep", action="store_true", default=None, help="run every weight triple")
    r.add_argument("--rsu", type=_rsu, action="append", dest="rsus", help="lat,long[,tr]; repeatable")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help="output directory")
    r.add_argument("--jobs", type=int, help="parallel sweep workers")

    s = sub.add_parser("synth", help="write a seeded synthetic trace")
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--cars", type=int, default=50)
    s.add_argument("--buses", type=int, default=5)
    s.add_argument("--duration", type=int, default=59, help="seconds; snapshots include both ends")
    s.add_argument("--headings", default="N,E,S,W", help="allowed car headings")
    s.add_argument("--turn-prob", type=float, default=0.25)
    s.add_argument("--car-tr", type=float, default=100.0)
    s.add_argument("--bus-tr", type=float, default=800.0)
    s.add_argument("--bus-route", action="append", default=None,
                   help="heading,road[,speed]; repeatable; default spreads buses over all roads")
    s.add_argument("--seed", type=int, default=0)
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    base = RunConfig.load(args.config).to_dict() if args.config else RunConfig().to_dict()
    overrides = {
        "trace": args.trace,
        "alpha": args.alpha,
        "common_tr_m": args.common_tr_m,
        "dru_tr_m": args.dru_tr_m,
        "tau_ms": args.tau_ms,
        "lambda": args.lambda_,
        "weights": args.weights,
        "sweep": args.sweep,
        "rsus": args.rsus,
        "seed": args.seed,
        "out": args.out,
        "jobs": args.jobs,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    if args.start is not None or args.end is not None:
        lo, hi = base["window"] or [None, None]
        lo = args.start if args.start is not None else lo
        hi = args.end if args.end is not None else hi
        if lo is None or hi is None:
            raise ConfigError("--start and --end must both be given unless the config has a window")
        base["window"] = [lo, hi]
    return RunConfig.from_dict(base)


def _bus_route(text: str) -> BusRoute:
    parts = text.split(",")
    if len(parts) not in (2, 3):
        raise ValueError(f"bad bus route {text!r}; expected heading,road[,speed]")
    route = BusRoute(parts[0].upper(), int(parts[1]))
    return BusRoute(route.heading, route.road, float(parts[2])) if len(parts) == 3 else route


def _cmd_run(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    result = run(config)
    if isinstance(result, SweepReport):
        q = result.quantiles()
        print(f"sweep: {len(result.points)} runs, best {result.best()}, worst {result.worst()}")
        if q:
            print("VCSM " + ", ".join(f"{k}={v:.4f}" for k, v in q.items()))
    else:
        shown = "undefined" if result.vcsm is None else f"{result.vcsm:.6f}"
        print(f"VCSM {shown} over {result.n_vm} member vehicles, {len(result.ticks)} ticks")
    print(f"reports written to {config.out}")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    routes = tuple(_bus_route(x) for x in args.bus_route) if args.bus_route else None
    spec = SynthSpec(
        n_cars=args.cars,
        n_buses=len(routes) if routes else args.buses,
        car_headings=tuple(h.strip().upper() for h in args.headings.split(",")),
        turn_prob=args.turn_prob,
        duration_s=args.duration,
        car_tr=args.car_tr,
        bus_tr=args.bus_tr,
        bus_routes=routes,
    )
    trace = synth_trace(spec, seed=args.seed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", encoding="utf-8") as fh:
        serialize_trace(trace, fh)
    print(f"wrote {len(trace)} snapshots, up to {trace.max_population()} vehicles, to {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_synth(args)
    except (ConfigError, TraceError, ValueError, OSError) as exc:
        print(f"zoneclust: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
