"""Run configuration, single runs, weight sweeps and report files."""

from __future__ import annotations

import csv
import json
import logging
import statistics
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from .engine import simulate
from .geo import GeoPoint
from .metrics import RunReport, TickCounts, cv_percent, summarize
from .state import EngineConfig, StaticUnit, WeightVector
from .trace import Trace, parse_trace, resample, window
from .zoning import ZoneGrid, build_grid, suggested_alpha

log = logging.getLogger(__name__)

TICK_COLUMNS = ("t", "n_CH", "n_SAV", "n_CM", "components")
SWEEP_COLUMNS = ("w1", "w2", "w3", "VCSM")

# bounding-box margin (m) around trace extents when no box is configured
_TRACE_MARGIN_M = 10.0


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    trace: str | None = None
    window: list[float] | None = None  # [start_s, end_s]
    bbox: list[list[float]] | None = None  # [[lat_min, long_min], [lat_max, long_max]]
    alpha: float = 0.5
    pad_rows: int = 2
    pad_cols: int = 2
    tau_ms: int = 1000
    lambda_: int = 4
    epsilon: float = 1e-6
    common_tr_m: float | None = None
    dru_tr_m: float | None = 800.0
    cap_dru: int = 30
    cap_ch: int = 20
    weights: list[float] = field(default_factory=lambda: [0.6, 0.2, 0.2])
    sweep: bool = False
    rsus: list[dict[str, float]] = field(default_factory=list)
    seed: int = 0
    out: str = "out"
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.window is not None:
            if len(self.window) != 2 or not self.window[0] < self.window[1]:
                raise ConfigError(f"window must be [start_s, end_s] with start < end: {self.window}")
        if self.bbox is not None and (len(self.bbox) != 2 or any(len(p) != 2 for p in self.bbox)):
            raise ConfigError("bbox must be [[lat_min, long_min], [lat_max, long_max]]")
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        for unit in self.rsus:
            if not {"lat", "long"} <= set(unit) or not set(unit) <= {"lat", "long", "tr"}:
                raise ConfigError(f"rsu entries need lat, long and optional tr: {unit}")
        try:
            self.engine_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    # JSON uses "lambda"; the attribute needs a trailing underscore
    @staticmethod
    def _key(name: str) -> str:
        return "lambda" if name == "lambda_" else name

    def to_dict(self) -> dict[str, Any]:
        return {self._key(f.name): getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunConfig:
        known = {cls._key(f.name): f.name for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**{known[k]: v for k, v in data.items()})

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        return cls.from_dict(data)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def engine_config(self, weights: WeightVector | None = None) -> EngineConfig:
        return EngineConfig(
            tau_ms=self.tau_ms,
            lambda_=self.lambda_,
            common_tr_m=self.common_tr_m,
            dru_tr_m=self.dru_tr_m,
            cap_dru=self.cap_dru,
            cap_ch=self.cap_ch,
            weights=weights or WeightVector(*self.weights),
            epsilon=self.epsilon,
            seed=self.seed,
        )

    def static_units(self) -> list[StaticUnit]:
        return [
            StaticUnit(f"rsu{k}", GeoPoint(u["lat"], u["long"]), u.get("tr", 800.0))
            for k, u in enumerate(self.rsus)
        ]


def load_trace(config: RunConfig) -> Trace:
    if config.trace is None:
        raise ConfigError("no trace given")
    try:
        with open(config.trace, encoding="utf-8") as fh:
            trace = parse_trace(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read trace: {exc}") from None
    return prepare_trace(trace, config)


def prepare_trace(trace: Trace, config: RunConfig) -> Trace:
    if config.window is not None:
        trace = window(trace, *config.window)
    if len(trace) > 1 and trace.tick != config.tau_ms:
        trace = resample(trace, config.tau_ms)
    return trace


def grid_for(trace: Trace, config: RunConfig) -> ZoneGrid:
    if config.bbox is not None:
        (lat0, long0), (lat1, long1) = config.bbox
        box = (GeoPoint(lat0, long0), GeoPoint(lat1, long1))
    else:
        pts = [r.loc for s in trace.snapshots for r in s.records]
        pts += [u.loc for u in config.static_units()]
        if not pts:
            raise ConfigError("cannot infer a bounding box from an empty trace; set bbox")
        dlat = _TRACE_MARGIN_M / 111_195.0
        dlong = dlat / max(np.cos(np.radians(pts[0].lat)), 1e-6)
        box = (
            GeoPoint(min(p.lat for p in pts) - dlat, min(p.long for p in pts) - dlong),
            GeoPoint(max(p.lat for p in pts) + dlat, max(p.long for p in pts) + dlong),
        )
    grid = build_grid(box, config.alpha, config.pad_rows, config.pad_cols)
    _warn_alpha(trace, config)
    return grid


def _warn_alpha(trace: Trace, config: RunConfig) -> None:
    tr = config.common_tr_m
    if tr is None:
        ranges = Counter(r.tr for s in trace.snapshots for r in s.records if r.kind == "car")
        if not ranges:
            return
        tr = ranges.most_common(1)[0][0]
    hint = suggested_alpha(tr)
    if hint is not None and hint != config.alpha:
        log.warning("alpha=%s km differs from the suggested %s km for a %s m range", config.alpha, hint, tr)


def execute(trace: Trace, grid: ZoneGrid, config: RunConfig, weights: WeightVector | None = None) -> RunReport:
    result = simulate(trace, grid, config.engine_config(weights), config.static_units())
    echo = config.to_dict()
    if weights is not None:
        echo["weights"] = list(weights.as_tuple())
    return summarize(result.ticks, result.log, echo)


def weight_grid(steps: int = 10) -> list[WeightVector]:
    """All weight triples on a 1/steps lattice summing to one (66 for steps=10)."""
    return [
        WeightVector(a / steps, b / steps, (steps - a - b) / steps)
        for a in range(steps + 1)
        for b in range(steps + 1 - a)
    ]


@dataclass
class SweepReport:
    points: list[tuple[WeightVector, RunReport]]

    def values(self) -> list[float]:
        return [r.vcsm for _, r in self.points if r.vcsm is not None]

    def best(self) -> WeightVector | None:
        scored = [(r.vcsm, k) for k, (_, r) in enumerate(self.points) if r.vcsm is not None]
        return self.points[max(scored, key=lambda x: (x[0], -x[1]))[1]][0] if scored else None

    def worst(self) -> WeightVector | None:
        scored = [(r.vcsm, k) for k, (_, r) in enumerate(self.points) if r.vcsm is not None]
        return self.points[min(scored)[1]][0] if scored else None

    def quantiles(self) -> dict[str, float]:
        vals = self.values()
        if not vals:
            return {}
        q = np.quantile(vals, [0.0, 0.25, 0.5, 0.75, 1.0])
        return dict(zip(("min", "q1", "median", "q3", "max"), (float(x) for x in q)))

    def cv(self) -> float | None:
        vals = self.values()
        if len(vals) < 2 or statistics.fmean(vals) == 0:
            return None
        return cv_percent(vals)

    def to_dict(self) -> dict[str, Any]:
        best, worst = self.best(), self.worst()
        vals = self.values()
        return {
            "n_runs": len(self.points),
            "best": list(best.as_tuple()) if best else None,
            "worst": list(worst.as_tuple()) if worst else None,
            "mean_vcsm": statistics.fmean(vals) if vals else None,
            "cv_percent": self.cv(),
            "quantiles": self.quantiles(),
            "runs": [
                {"weights": list(w.as_tuple()), "vcsm": r.vcsm, "n_vm": r.n_vm, "averages": r.averages()}
                for w, r in self.points
            ],
        }


def _sweep_point(args: tuple[Trace, ZoneGrid, RunConfig, WeightVector]) -> RunReport:
    return execute(*args)


def sweep(trace: Trace, grid: ZoneGrid, config: RunConfig) -> SweepReport:
    ws = weight_grid()
    jobs = [(trace, grid, config, w) for w in ws]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            reports = list(pool.map(_sweep_point, jobs))
    else:
        reports = [_sweep_point(j) for j in jobs]
    return SweepReport(list(zip(ws, reports)))


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def write_ticks_csv(report: RunReport, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TICK_COLUMNS)
        for c in report.ticks:
            w.writerow((c.t, c.n_ch, c.n_sav, c.n_cm, c.components))


def read_ticks_csv(path: Path) -> list[tuple[int, int, int, int, int]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != TICK_COLUMNS:
        raise ValueError(f"{path}: unexpected header {rows[0]}")
    return [tuple(int(x) for x in row) for row in rows[1:]]


def read_sweep_csv(path: Path) -> list[tuple[float, float, float, float | None]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != SWEEP_COLUMNS:
        raise ValueError(f"{path}: unexpected header {rows[0]}")
    return [(float(a), float(b), float(c), float(v) if v else None) for a, b, c, v in rows[1:]]


def _label(w: WeightVector) -> str:
    return "w_" + "_".join(f"{x:.2f}" for x in w.as_tuple())


def emit_plot_series(runs: list[tuple[WeightVector, RunReport]], out_dir: str | Path) -> list[Path]:
    """Write ``sweep.csv`` plus per-tick series for every run.

    A single run goes to ``ticks.csv``; several runs go to
    ``ticks/<weights>.csv`` so each file keeps the plain tick columns.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "sweep.csv"]
    with open(written[0], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for wv, rep in runs:
            w.writerow((*(_fmt(x) for x in wv.as_tuple()), _fmt(rep.vcsm)))
    if len(runs) <= 1:
        path = out / "ticks.csv"
        write_ticks_csv(runs[0][1] if runs else RunReport(), path)
        written.append(path)
    else:
        (out / "ticks").mkdir(exist_ok=True)
        for wv, rep in runs:
            path = out / "ticks" / f"{_label(wv)}.csv"
            write_ticks_csv(rep, path)
            written.append(path)
    return written


def run(config: RunConfig, trace: Trace | None = None) -> RunReport | SweepReport:
    """Execute a configured run or sweep and write its report files to ``config.out``."""
    trace = prepare_trace(trace, config) if trace is not None else load_trace(config)
    grid = grid_for(trace, config)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    if config.sweep:
        result = sweep(trace, grid, config)
        body = {"config": config.to_dict(), "grid": _grid_echo(grid), "sweep": result.to_dict()}
        emit_plot_series(result.points, out)
    else:
        result = execute(trace, grid, config)
        body = {"grid": _grid_echo(grid), **result.to_dict()}
        emit_plot_series([(WeightVector(*config.weights), result)], out)
    (out / "report.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return result


def _grid_echo(grid: ZoneGrid) -> dict[str, Any]:
    return {
        "sw": asdict(grid.sw),
        "ne": asdict(grid.ne),
        "n_r": grid.n_r,
        "n_c": grid.n_c,
        "n_z": grid.n_z,
        "w_z_km": grid.w_z,
        "l_z_km": grid.l_z,
        "alpha": grid.alpha,
    }


def ticks_from_rows(rows: list[tuple[int, int, int, int, int]]) -> list[TickCounts]:
    """Rebuild partial tick counts from ``ticks.csv`` rows (population columns are zero)."""
    return [TickCounts(t, ch, sav, cm, comp, 0, 0) for t, ch, sav, cm, comp in rows]
