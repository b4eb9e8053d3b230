"""Shared oracles and scenario builders for the test suite."""

from __future__ import annotations

import math

from zoneclust.engine import RunResult, simulate
from zoneclust.geo import GeoPoint, PlanarVector, offset
from zoneclust.state import EngineConfig, StaticUnit
from zoneclust.synth import DEFAULT_NE, DEFAULT_SW, BusRoute, SynthSpec, intersections, synth_trace
from zoneclust.trace import Trace, VehicleRecord, build_trace
from zoneclust.zoning import ZoneGrid, build_grid

R = 6_371_000.0


def haversine(a: GeoPoint, b: GeoPoint) -> float:
    p1, p2 = math.radians(a.lat), math.radians(b.lat)
    dp = p2 - p1
    dl = math.radians(b.long - a.long)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * R * math.asin(math.sqrt(h))


def box_grid() -> ZoneGrid:
    """4x4 grid over the default (already padded) box."""
    return build_grid((DEFAULT_SW, DEFAULT_NE), 0.5, 0, 0)


# scripted scenarios are laid out in metres around a point well inside zone 5
ORIGIN = offset(DEFAULT_SW, 700.0, 650.0)


def at(east: float, north: float = 0.0) -> GeoPoint:
    return offset(ORIGIN, east, north)


def car(vid: str, east: float, north: float = 0.0, ve: float = 0.0, vn: float = 0.0, tr: float = 100.0):
    return VehicleRecord(vid, "car", at(east, north), PlanarVector(ve, vn), tr)


def bus(vid: str, east: float, north: float = 0.0, ve: float = 0.0, vn: float = 0.0, tr: float = 800.0):
    return VehicleRecord(vid, "bus", at(east, north), PlanarVector(ve, vn), tr)


def frames_trace(frames: list[list[VehicleRecord]], tick: int = 1000) -> Trace:
    return build_trace([(k * tick, list(f)) for k, f in enumerate(frames)], tick)


def run_frames(
    frames: list[list[VehicleRecord]],
    config: EngineConfig | None = None,
    static_units: tuple[StaticUnit, ...] = (),
) -> RunResult:
    return simulate(frames_trace(frames), box_grid(), config, static_units, check=True)


def two_flow_spec() -> SynthSpec:
    """Interleaved eastbound and westbound car flows sharing two east-west roads.

    Two north-south cross streets give the flow-crossing points; five buses
    ride the east-west roads, for 55 vehicles in total.
    """
    routes = tuple(
        BusRoute("E" if k % 2 == 0 else "W", (k // 2) % 2, 9.0, (0.15 + 0.37 * k) % 1) for k in range(5)
    )
    return SynthSpec(
        ew_roads=2,
        ns_roads=2,
        n_cars=50,
        n_buses=5,
        car_headings=("E", "W"),
        turn_prob=0.0,
        duration_s=59,
        car_tr=100.0,
        bus_routes=routes,
    )


def two_flow_trace(seed: int = 0) -> Trace:
    return synth_trace(two_flow_spec(), seed=seed)


def crossing_rsus() -> list[dict[str, float]]:
    pts = intersections(two_flow_spec())
    return [{"lat": p.lat, "long": p.long} for p in (pts[0], pts[-1])]


BOX = [[DEFAULT_SW.lat, DEFAULT_SW.long], [DEFAULT_NE.lat, DEFAULT_NE.long]]
