"""Mobility traces: record types, the line format, windowing and resampling.

Trace file format (UTF-8, one record per line, space separated)::

    t_ms id kind lat long vel_east vel_north tr_m

``kind`` is ``car`` or ``bus``. Lines starting with ``#`` are comments.
Snapshots are contiguous runs of equal ``t_ms`` in increasing order. The
optional pragma ``#! tick_ms=<int> start_ms=<int> end_ms=<int>`` pins the
tick and span, which keeps empty leading/trailing snapshots across a
serialize/parse round trip.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable
from dataclasses import dataclass
from typing import IO

from .geo import GeoPoint, PlanarVector, from_speed_heading

KINDS = ("car", "bus")


class TraceError(ValueError):
    """Malformed or inconsistent trace input."""


@dataclass(frozen=True)
class VehicleRecord:
    id: str
    kind: str
    loc: GeoPoint
    vel: PlanarVector
    tr: float

    def __post_init__(self) -> None:
        if not self.id or any(c.isspace() for c in self.id):
            raise TraceError(f"invalid vehicle id {self.id!r}")
        if self.kind not in KINDS:
            raise TraceError(f"unknown vehicle kind {self.kind!r}")
        if not self.tr > 0:
            raise TraceError(f"transmission range must be positive for {self.id}")


@dataclass(frozen=True)
class TraceSnapshot:
    t: int
    records: tuple[VehicleRecord, ...] = ()

    def ids(self) -> list[str]:
        return [r.id for r in self.records]


@dataclass(frozen=True)
class Trace:
    snapshots: tuple[TraceSnapshot, ...] = ()
    tick: int = 0

    def __len__(self) -> int:
        return len(self.snapshots)

    @property
    def start(self) -> int:
        return self.snapshots[0].t

    @property
    def end(self) -> int:
        return self.snapshots[-1].t

    def max_population(self) -> int:
        return max((len(s.records) for s in self.snapshots), default=0)


def _parse_pragma(text: str, lineno: int) -> dict[str, int]:
    out = {}
    for token in text.split():
        key, sep, value = token.partition("=")
        if not sep or key not in ("tick_ms", "start_ms", "end_ms"):
            raise TraceError(f"line {lineno}: bad pragma token {token!r}")
        try:
            out[key] = int(value)
        except ValueError:
            raise TraceError(f"line {lineno}: pragma value {value!r} is not an integer") from None
    return out


def _parse_record(parts: list[str], lineno: int) -> tuple[int, VehicleRecord]:
    if len(parts) != 8:
        raise TraceError(f"line {lineno}: expected 8 fields, got {len(parts)}")
    try:
        t = int(parts[0])
        lat, long, ve, vn, tr = (float(x) for x in parts[3:])
        rec = VehicleRecord(parts[1], parts[2], GeoPoint(lat, long), PlanarVector(ve, vn), tr)
    except TraceError as exc:
        raise TraceError(f"line {lineno}: {exc}") from None
    except ValueError as exc:
        raise TraceError(f"line {lineno}: {exc}") from None
    return t, rec


def build_trace(
    groups: Iterable[tuple[int, list[VehicleRecord]]],
    tick: int | None = None,
    start: int | None = None,
    end: int | None = None,
) -> Trace:
    """Assemble a validated trace, filling tick gaps with empty snapshots."""
    groups = list(groups)
    times = [t for t, _ in groups]
    for prev, cur in zip(times, times[1:]):
        if cur <= prev:
            raise TraceError(f"timestamps not increasing: {cur} after {prev}")
    for t, recs in groups:
        seen = set()
        for r in recs:
            if r.id in seen:
                raise TraceError(f"duplicate id {r.id!r} at t={t}")
            seen.add(r.id)
    if tick is None:
        gaps = [b - a for a, b in zip(times, times[1:])]
        tick = min(gaps) if gaps else 0
    if times:
        start = times[0] if start is None else start
        end = times[-1] if end is None else end
    if start is None or end is None:
        return Trace((), tick)
    if tick <= 0:
        if start != end:
            raise TraceError("tick must be positive for a multi-snapshot trace")
        return Trace(tuple(TraceSnapshot(t, tuple(r)) for t, r in groups), tick)
    if (end - start) % tick:
        raise TraceError(f"span {start}..{end} is not a multiple of tick {tick}")
    by_time = dict(groups)
    for t in times:
        if (t - start) % tick or not start <= t <= end:
            raise TraceError(f"timestamp {t} is off the {tick} ms tick grid starting at {start}")
    snaps = tuple(
        TraceSnapshot(t, tuple(by_time.get(t, ()))) for t in range(start, end + 1, tick)
    )
    return Trace(snaps, tick)


def parse_trace(stream: IO[str] | Iterable[str]) -> Trace:
    """Parse the line format into a :class:`Trace`.

    Raises:
        TraceError: malformed line (with its line number), a duplicate id
            inside a snapshot, or timestamps that go backwards.
    """
    groups: list[tuple[int, list[VehicleRecord]]] = []
    pragma: dict[str, int] = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#!"):
            pragma.update(_parse_pragma(line[2:], lineno))
            continue
        if line.startswith("#"):
            continue
        t, rec = _parse_record(line.split(), lineno)
        if groups and groups[-1][0] == t:
            if any(r.id == rec.id for r in groups[-1][1]):
                raise TraceError(f"line {lineno}: duplicate id {rec.id!r} at t={t}")
            groups[-1][1].append(rec)
        elif groups and t < groups[-1][0]:
            raise TraceError(f"line {lineno}: timestamp {t} goes back from {groups[-1][0]}")
        else:
            groups.append((t, [rec]))
    return build_trace(
        groups, pragma.get("tick_ms"), pragma.get("start_ms"), pragma.get("end_ms")
    )


def loads(text: str) -> Trace:
    return parse_trace(io.StringIO(text))


def serialize_trace(trace: Trace, stream: IO[str]) -> None:
    if trace.snapshots:
        stream.write(f"#! tick_ms={trace.tick} start_ms={trace.start} end_ms={trace.end}\n")
    for snap in trace.snapshots:
        for r in snap.records:
            stream.write(
                f"{snap.t} {r.id} {r.kind} {r.loc.lat!r} {r.loc.long!r} "
                f"{r.vel.east!r} {r.vel.north!r} {r.tr!r}\n"
            )


def dumps(trace: Trace) -> str:
    buf = io.StringIO()
    serialize_trace(trace, buf)
    return buf.getvalue()


def window(trace: Trace, start_s: float, end_s: float) -> Trace:
    """Sub-trace over ``[start_s, end_s]`` (inclusive), re-based to t=0."""
    if not start_s < end_s:
        raise TraceError(f"empty window [{start_s}, {end_s}]")
    if not trace.snapshots:
        raise TraceError("cannot window an empty trace")
    lo, hi = round(start_s * 1000), round(end_s * 1000)
    if lo < trace.start or hi > trace.end:
        raise TraceError(
            f"window [{start_s}, {end_s}] s is outside the trace span "
            f"[{trace.start / 1000}, {trace.end / 1000}] s"
        )
    picked = [s for s in trace.snapshots if lo <= s.t <= hi]
    if not picked:
        raise TraceError(f"window [{start_s}, {end_s}] s holds no snapshots")
    base = picked[0].t
    return Trace(tuple(TraceSnapshot(s.t - base, s.records) for s in picked), trace.tick)


def resample(trace: Trace, tick_ms: int) -> Trace:
    """Keep every k-th snapshot so that the tick becomes ``tick_ms``."""
    if trace.tick == tick_ms or len(trace) <= 1:
        return Trace(trace.snapshots, tick_ms) if len(trace) <= 1 else trace
    if tick_ms % trace.tick:
        raise TraceError(f"cannot resample a {trace.tick} ms trace to {tick_ms} ms")
    k = tick_ms // trace.tick
    return Trace(trace.snapshots[::k], tick_ms)


def with_ranges(trace: Trace, car_tr: float | None = None, bus_tr: float | None = None) -> Trace:
    """Override per-record transmission ranges by vehicle kind."""
    if car_tr is None and bus_tr is None:
        return trace

    def fix(r: VehicleRecord) -> VehicleRecord:
        tr = {"car": car_tr, "bus": bus_tr}[r.kind]
        return r if tr is None else VehicleRecord(r.id, r.kind, r.loc, r.vel, tr)

    return Trace(
        tuple(TraceSnapshot(s.t, tuple(fix(r) for r in s.records)) for s in trace.snapshots),
        trace.tick,
    )


def from_fcd_csv(
    stream: IO[str],
    tr_m: float = 100.0,
    bus_tr_m: float = 800.0,
    bus_types: tuple[str, ...] = ("bus",),
) -> Trace:
    """Convert a SUMO floating-car-data CSV export.

    Expects the columns produced by ``sumo --fcd-output.geo`` followed by
    ``xml2csv.py``: ``timestep_time``, ``vehicle_id``, ``vehicle_x``
    (longitude), ``vehicle_y`` (latitude), ``vehicle_speed``,
    ``vehicle_angle`` (degrees clockwise from north) and ``vehicle_type``.
    Rows without a vehicle (empty timesteps) are skipped.
    """
    reader = csv.DictReader(stream, delimiter=";" if _sniff_semicolon(stream) else ",")
    groups: list[tuple[int, list[VehicleRecord]]] = []
    for lineno, row in enumerate(reader, start=2):
        vid = (row.get("vehicle_id") or "").strip()
        if not vid:
            continue
        try:
            t = round(float(row["timestep_time"]) * 1000)
            kind = "bus" if row.get("vehicle_type", "").split("@")[0] in bus_types else "car"
            loc = GeoPoint(float(row["vehicle_y"]), float(row["vehicle_x"]))
            vel = from_speed_heading(float(row["vehicle_speed"]), float(row["vehicle_angle"]))
        except (KeyError, ValueError) as exc:
            raise TraceError(f"line {lineno}: {exc}") from None
        rec = VehicleRecord(vid, kind, loc, vel, bus_tr_m if kind == "bus" else tr_m)
        if groups and groups[-1][0] == t:
            groups[-1][1].append(rec)
        else:
            groups.append((t, [rec]))
    return build_trace(groups)


def _sniff_semicolon(stream: IO[str]) -> bool:
    if not stream.seekable():
        return True  # xml2csv default separator
    pos = stream.tell()
    head = stream.readline()
    stream.seek(pos)
    return head.count(";") >= head.count(",")

