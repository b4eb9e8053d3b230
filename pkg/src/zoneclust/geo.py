"""Geographic primitives: points, local planar vectors and distances.

Distances use an equirectangular projection with the cosine taken at the
midpoint latitude. Over a few kilometres this stays well under 0.1% of the
great-circle distance, and it keeps ``distance`` and ``displacement``
consistent with each other (``magnitude(displacement(a, b)) == distance(a, b)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_M = 6_371_000.0
_M_PER_DEG = math.pi / 180.0 * EARTH_RADIUS_M


@dataclass(frozen=True, slots=True)
class GeoPoint:
    """WGS-84 position in decimal degrees."""

    lat: float
    long: float

    def __post_init__(self) -> None:
        if not (-90.0 <= self.lat <= 90.0) or not (-180.0 <= self.long <= 180.0):
            raise ValueError(f"invalid coordinates: ({self.lat}, {self.long})")


@dataclass(frozen=True, slots=True)
class PlanarVector:
    """East/north components in metres (or m/s for velocities)."""

    east: float
    north: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.east) and math.isfinite(self.north)):
            raise ValueError(f"non-finite vector: ({self.east}, {self.north})")

    def dot(self, other: PlanarVector) -> float:
        return self.east * other.east + self.north * other.north

    def __add__(self, other: PlanarVector) -> PlanarVector:
        return PlanarVector(self.east + other.east, self.north + other.north)

    def __mul__(self, k: float) -> PlanarVector:
        return PlanarVector(self.east * k, self.north * k)

    __rmul__ = __mul__


ZERO = PlanarVector(0.0, 0.0)


def displacement(start: GeoPoint, end: GeoPoint) -> PlanarVector:
    """Planar vector from ``start`` to ``end`` in metres."""
    mean_lat = math.radians((start.lat + end.lat) / 2.0)
    east = (end.long - start.long) * _M_PER_DEG * math.cos(mean_lat)
    north = (end.lat - start.lat) * _M_PER_DEG
    return PlanarVector(east, north)


def magnitude(v: PlanarVector) -> float:
    return math.hypot(v.east, v.north)


def distance(a: GeoPoint, b: GeoPoint) -> float:
    """Equirectangular distance in metres; symmetric and zero iff ``a == b``."""
    return magnitude(displacement(a, b))


def offset(origin: GeoPoint, east: float, north: float) -> GeoPoint:
    """Point reached by moving ``east``/``north`` metres from ``origin``.

    Uses the origin latitude for the longitude scale, so it is only an
    approximate inverse of :func:`displacement` (fine at city scale).
    """
    lat = origin.lat + north / _M_PER_DEG
    long = origin.long + east / (_M_PER_DEG * math.cos(math.radians(origin.lat)))
    return GeoPoint(lat, long)


def from_speed_heading(speed: float, heading_deg: float) -> PlanarVector:
    """Velocity vector from a scalar speed and a compass heading.

    The heading is in degrees clockwise from north, as in SUMO FCD output.
    """
    h = math.radians(heading_deg)
    return PlanarVector(speed * math.sin(h), speed * math.cos(h))
