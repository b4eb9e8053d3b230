"""Seeded synthetic traces on a Manhattan road grid.

Roads are straight east-west and north-south lines evenly spaced inside the
bounding box. Buses keep to one road for their whole life; cars may turn at
intersections. A vehicle that drives out of the box is replaced by a fresh
one (new id) entering on the opposite edge with the same heading, so each
flow keeps its population.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .geo import EARTH_RADIUS_M, GeoPoint, PlanarVector, displacement
from .trace import Trace, VehicleRecord, build_trace

# default study area, already padded
DEFAULT_SW = GeoPoint(43.860130, -79.462871)
DEFAULT_NE = GeoPoint(43.8795, -79.432551)

_UNIT = {"E": (1.0, 0.0), "W": (-1.0, 0.0), "N": (0.0, 1.0), "S": (0.0, -1.0)}
_AXIS = {"E": "ew", "W": "ew", "N": "ns", "S": "ns"}


@dataclass(frozen=True)
class BusRoute:
    """A straight bus line: road ``road`` of the ``"ew"`` or ``"ns"`` family."""

    heading: str
    road: int = 0
    speed: float = 10.0
    start: float = 0.0  # fraction of the road already travelled at t=0


@dataclass(frozen=True)
class SynthSpec:
    sw: GeoPoint = DEFAULT_SW
    ne: GeoPoint = DEFAULT_NE
    ew_roads: int = 4
    ns_roads: int = 4
    n_cars: int = 50
    n_buses: int = 5
    car_speed: tuple[float, float] = (8.0, 14.0)
    bus_speed: tuple[float, float] = (7.0, 11.0)
    car_headings: tuple[str, ...] = ("N", "E", "S", "W")
    turn_prob: float = 0.25
    duration_s: int = 60
    tick_ms: int = 1000
    car_tr: float = 100.0
    bus_tr: float = 800.0
    bus_routes: tuple[BusRoute, ...] | None = None
    respawn: bool = True
    lane_offset: float = 0.0  # metres between opposing lanes; 0 puts them on the centreline


@dataclass
class _Mover:
    id: str
    kind: str
    heading: str
    road: int
    pos: float  # metres along the road, measured from its west/south end
    speed: float
    tr: float


@dataclass
class _Layout:
    width: float  # east-west extent, m
    height: float  # north-south extent, m
    ew_y: list[float] = field(default_factory=list)  # northing of each east-west road
    ns_x: list[float] = field(default_factory=list)  # easting of each north-south road

    def length(self, heading: str) -> float:
        return self.width if _AXIS[heading] == "ew" else self.height

    def crossings(self, heading: str) -> list[float]:
        return self.ns_x if _AXIS[heading] == "ew" else self.ew_y


def _layout(spec: SynthSpec) -> _Layout:
    extent = displacement(spec.sw, spec.ne)
    lay = _Layout(extent.east, extent.north)
    lay.ew_y = [lay.height * (k + 1) / (spec.ew_roads + 1) for k in range(spec.ew_roads)]
    lay.ns_x = [lay.width * (k + 1) / (spec.ns_roads + 1) for k in range(spec.ns_roads)]
    return lay


def _to_geo(spec: SynthSpec, x: float, y: float) -> GeoPoint:
    # box mid-latitude scale, so (width, height) lands exactly on the NE corner
    k = math.pi / 180.0 * EARTH_RADIUS_M
    mid = math.radians((spec.sw.lat + spec.ne.lat) / 2.0)
    return GeoPoint(spec.sw.lat + y / k, spec.sw.long + x / (k * math.cos(mid)))


def intersections(spec: SynthSpec) -> list[GeoPoint]:
    """Road crossings, row by row from the south-west."""
    lay = _layout(spec)
    return [_to_geo(spec, x, y) for y in lay.ew_y for x in lay.ns_x]


def _roads(spec: SynthSpec, heading: str) -> int:
    return spec.ew_roads if _AXIS[heading] == "ew" else spec.ns_roads


def _check(spec: SynthSpec) -> None:
    if spec.ew_roads + spec.ns_roads == 0:
        raise ValueError("synthetic layout has no roads")
    if spec.n_cars < 0 or spec.n_buses < 0:
        raise ValueError("vehicle counts must be non-negative")
    for lo, hi in (spec.car_speed, spec.bus_speed):
        if not 0 < lo <= hi:
            raise ValueError("speed ranges must satisfy 0 < lo <= hi")
    if spec.n_cars and not any(_roads(spec, h) for h in spec.car_headings):
        raise ValueError("no road carries the allowed car headings")
    if spec.duration_s < 0 or spec.tick_ms <= 0:
        raise ValueError("duration must be >= 0 and tick positive")
    for route in spec.bus_routes or ():
        if route.heading not in _UNIT or not 0 <= route.road < _roads(spec, route.heading):
            raise ValueError(f"bus route {route} does not match the road layout")


def _xy(m: _Mover, lay: _Layout, lane: float) -> tuple[float, float]:
    # keep-right lane shift: eastbound sits south of the centreline, etc.
    dx, dy = _UNIT[m.heading]
    if _AXIS[m.heading] == "ew":
        x = m.pos
        y = lay.ew_y[m.road] - dx * lane / 2
    else:
        x = lay.ns_x[m.road] + dy * lane / 2
        y = m.pos
    return x, y


def _advance(m: _Mover, dist: float, lay: _Layout, spec: SynthSpec, rng: random.Random) -> bool:
    """Move ``m`` by ``dist`` metres; returns False once it leaves the box."""
    while dist > 0:
        sign = 1.0 if m.heading in ("E", "N") else -1.0
        target = m.pos + sign * dist
        if m.kind == "car" and spec.turn_prob > 0:
            ahead = sorted(
                (c for c in lay.crossings(m.heading) if 0 < (c - m.pos) * sign <= dist),
                key=lambda c: (c - m.pos) * sign,
            )
            turned = False
            for c in ahead:
                options = [h for h in _turns(m.heading) if h in spec.car_headings]
                if options and rng.random() < spec.turn_prob:
                    new = options[rng.randrange(len(options))]
                    travelled = abs(c - m.pos)
                    # the crossed road becomes the current road; the old road's
                    # offset is the position along it
                    cross = lay.crossings(m.heading).index(c)
                    here = (lay.ew_y if _AXIS[m.heading] == "ew" else lay.ns_x)[m.road]
                    m.heading, m.road, m.pos = new, cross, here
                    dist -= travelled
                    turned = True
                    break
            if turned:
                continue
        m.pos = target
        dist = 0.0
    return 0.0 <= m.pos <= lay.length(m.heading)


def _turns(heading: str) -> tuple[str, str]:
    return ("N", "S") if _AXIS[heading] == "ew" else ("E", "W")


def synth_trace(spec: SynthSpec, seed: int = 0) -> Trace:
    """Generate a deterministic trace; the same ``(spec, seed)`` gives the same trace."""
    _check(spec)
    rng = random.Random(seed)
    lay = _layout(spec)
    counter = {"car": 0, "bus": 0}

    def new_id(kind: str) -> str:
        counter[kind] += 1
        return f"{kind}{counter[kind] - 1:04d}"

    def spawn_car(heading: str | None = None, at_edge: bool = False) -> _Mover:
        headings = [h for h in spec.car_headings if _roads(spec, h)]
        h = heading or headings[rng.randrange(len(headings))]
        road = rng.randrange(_roads(spec, h))
        length = lay.length(h)
        if at_edge:
            pos = 0.0 if h in ("E", "N") else length
        else:
            pos = rng.uniform(0.0, length)
        return _Mover(new_id("car"), "car", h, road, pos, rng.uniform(*spec.car_speed), spec.car_tr)

    def spawn_bus(route: BusRoute | None, at_edge: bool = False) -> tuple[_Mover, BusRoute]:
        if route is None:
            axes = [h for h in ("E", "W", "N", "S") if _roads(spec, h)]
            h = axes[rng.randrange(len(axes))]
            route = BusRoute(h, rng.randrange(_roads(spec, h)), rng.uniform(*spec.bus_speed), rng.random())
        length = lay.length(route.heading)
        frac = 0.0 if at_edge else route.start
        pos = frac * length if route.heading in ("E", "N") else (1.0 - frac) * length
        bus = _Mover(new_id("bus"), "bus", route.heading, route.road, pos, route.speed, spec.bus_tr)
        return bus, route

    routes = list(spec.bus_routes) if spec.bus_routes is not None else [None] * spec.n_buses
    buses = [spawn_bus(r) for r in routes]
    cars = [spawn_car() for _ in range(spec.n_cars)]

    dt = spec.tick_ms / 1000.0
    n_ticks = round(spec.duration_s * 1000 / spec.tick_ms) + 1
    groups: list[tuple[int, list[VehicleRecord]]] = []
    for k in range(n_ticks):
        t = k * spec.tick_ms
        if k:
            moved_buses = []
            for bus, route in buses:
                if _advance(bus, bus.speed * dt, lay, spec, rng):
                    moved_buses.append((bus, route))
                elif spec.respawn:
                    moved_buses.append(spawn_bus(route, at_edge=True))
            buses = moved_buses
            moved_cars = []
            for car in cars:
                if _advance(car, car.speed * dt, lay, spec, rng):
                    moved_cars.append(car)
                elif spec.respawn:
                    moved_cars.append(spawn_car(car.heading, at_edge=True))
            cars = moved_cars
        recs = []
        for m in [b for b, _ in buses] + cars:
            x, y = _xy(m, lay, spec.lane_offset)
            dx, dy = _UNIT[m.heading]
            recs.append(
                VehicleRecord(m.id, m.kind, _to_geo(spec, x, y), PlanarVector(dx * m.speed, dy * m.speed), m.tr)
            )
        recs.sort(key=lambda r: r.id)
        groups.append((t, recs))
    return build_trace(groups, spec.tick_ms, 0, (n_ticks - 1) * spec.tick_ms)

