"""Uniform zone grid over a padded bounding box, plus zone lookup.

Zones are numbered from 0 in the southwest corner, increasing eastward and
then northward. Rows run south to north (``n_r`` of them), columns west to
east (``n_c``). Cells are half-open ``[sw, ne)`` except along the north and
east rim, which are closed so that every in-box point has exactly one zone.
"""

from __future__ import annotations

import math
from collections.abc import Iterator
from dataclasses import dataclass, field

from .geo import EARTH_RADIUS_M, GeoPoint, displacement

_M_PER_DEG = math.pi / 180.0 * EARTH_RADIUS_M

# suggested alpha (km) per common transmission-range band (m)
SUGGESTED_ALPHA = ((100.0, 300.0, 0.5), (400.0, 500.0, 0.8), (600.0, 1000.0, 1.0))


class OutsideGridError(ValueError):
    """Point lies outside the padded bounding box."""


@dataclass(frozen=True)
class ZoneGrid:
    sw: GeoPoint
    ne: GeoPoint
    n_r: int
    n_c: int
    w_z: float  # km, north-south extent of a zone
    l_z: float  # km, east-west extent of a zone
    alpha: float
    pad_rows: int = 0
    pad_cols: int = 0
    lat_edges: tuple[float, ...] = field(init=False, repr=False, compare=False)
    long_edges: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n_r < 1 or self.n_c < 1:
            raise ValueError("grid needs at least one row and one column")
        object.__setattr__(self, "lat_edges", _edges(self.sw.lat, self.ne.lat, self.n_r))
        object.__setattr__(self, "long_edges", _edges(self.sw.long, self.ne.long, self.n_c))

    @property
    def n_z(self) -> int:
        return self.n_r * self.n_c

    def contains(self, p: GeoPoint) -> bool:
        return self.sw.lat <= p.lat <= self.ne.lat and self.sw.long <= p.long <= self.ne.long


def _edges(lo: float, hi: float, n: int) -> tuple[float, ...]:
    step = (hi - lo) / n
    return tuple(lo + i * step for i in range(n)) + (hi,)


def build_grid(
    bbox: tuple[GeoPoint, GeoPoint],
    alpha: float,
    pad_rows: int = 2,
    pad_cols: int = 2,
) -> ZoneGrid:
    """Pad ``bbox`` and split it into ``floor(W_a/alpha) x floor(L_a/alpha)`` zones.

    Padding adds ``pad_rows`` rows of height ``alpha`` on the north and south
    sides and ``pad_cols`` columns of width ``alpha`` on the east and west
    sides. Pass zero padding when ``bbox`` is already padded.

    Args:
        bbox: (southwest, northeast) corners of the unpadded area.
        alpha: zone scaling factor in km.
        pad_rows: padding rows added on each of the north and south sides.
        pad_cols: padding columns added on each of the east and west sides.
    """
    sw0, ne0 = bbox
    if not (ne0.lat > sw0.lat and ne0.long > sw0.long):
        raise ValueError("bounding box is degenerate or inverted")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if pad_rows < 0 or pad_cols < 0:
        raise ValueError("padding must be non-negative")

    mid_lat = math.radians((sw0.lat + ne0.lat) / 2.0)
    dlat = pad_rows * alpha * 1000.0 / _M_PER_DEG
    dlong = pad_cols * alpha * 1000.0 / (_M_PER_DEG * math.cos(mid_lat))
    sw = GeoPoint(sw0.lat - dlat, sw0.long - dlong)
    ne = GeoPoint(ne0.lat + dlat, ne0.long + dlong)

    extent = displacement(sw, ne)
    width_km = extent.north / 1000.0
    length_km = extent.east / 1000.0
    # small slack so that e.g. 2.0 / 0.5 does not floor to 3 after rounding error
    n_r = math.floor(width_km / alpha + 1e-9)
    n_c = math.floor(length_km / alpha + 1e-9)
    if n_r < 1 or n_c < 1:
        raise ValueError(
            f"alpha={alpha} km exceeds the padded extent ({width_km:.3f} x {length_km:.3f} km)"
        )
    return ZoneGrid(sw, ne, n_r, n_c, width_km / n_r, length_km / n_c, alpha, pad_rows, pad_cols)


def suggested_alpha(tr_m: float) -> float | None:
    for lo, hi, alpha in SUGGESTED_ALPHA:
        if lo <= tr_m <= hi:
            return alpha
    return None


def zone_id(grid: ZoneGrid, row: int, col: int) -> int:
    """Row-major zone ID from 1-based row and column."""
    if not (1 <= row <= grid.n_r and 1 <= col <= grid.n_c):
        raise ValueError(f"row/col ({row}, {col}) outside {grid.n_r}x{grid.n_c} grid")
    return grid.n_c * (row - 1) + col - 1


def row_col(grid: ZoneGrid, zone: int) -> tuple[int, int]:
    _check_zone(grid, zone)
    return zone // grid.n_c + 1, zone % grid.n_c + 1


def _check_zone(grid: ZoneGrid, zone: int) -> None:
    if not (0 <= zone < grid.n_z):
        raise ValueError(f"zone {zone} outside [0, {grid.n_z})")


def zone_bounds(grid: ZoneGrid, zone: int) -> tuple[GeoPoint, GeoPoint]:
    row, col = row_col(grid, zone)
    return (
        GeoPoint(grid.lat_edges[row - 1], grid.long_edges[col - 1]),
        GeoPoint(grid.lat_edges[row], grid.long_edges[col]),
    )


def zone_centroid(grid: ZoneGrid, zone: int) -> GeoPoint:
    sw, ne = zone_bounds(grid, zone)
    return GeoPoint((sw.lat + ne.lat) / 2.0, (sw.long + ne.long) / 2.0)


def _side(value: float, edges: tuple[float, ...], idx: int) -> int:
    """-1 if ``value`` lies below cell ``idx`` (1-based), +1 above, 0 inside."""
    if value < edges[idx - 1]:
        return -1
    if value >= edges[idx] and idx < len(edges) - 1:
        return 1
    return 0


def _index_linear(value: float, edges: tuple[float, ...]) -> int:
    n = len(edges) - 1
    i = int((value - edges[0]) / (edges[-1] - edges[0]) * n) + 1
    i = min(max(i, 1), n)
    # floating-point guard: settle on the cell whose edges actually bracket value
    while (s := _side(value, edges, i)) != 0:
        i += s
    return i


def _check_inside(grid: ZoneGrid, p: GeoPoint) -> None:
    if not grid.contains(p):
        raise OutsideGridError(f"({p.lat}, {p.long}) is outside the padded box")


def locate_linear(grid: ZoneGrid, p: GeoPoint) -> int:
    """Zone containing ``p`` by direct index arithmetic."""
    _check_inside(grid, p)
    return zone_id(grid, _index_linear(p.lat, grid.lat_edges), _index_linear(p.long, grid.long_edges))


@dataclass(frozen=True)
class SearchState:
    """Window of the zone search: 1-based row/column boundaries, centre and iteration."""

    nb: int
    sb: int
    wb: int
    eb: int
    c: int = -1
    m: int = 0

    @classmethod
    def full(cls, grid: ZoneGrid) -> SearchState:
        return cls(nb=grid.n_r, sb=1, wb=1, eb=grid.n_c)

    @classmethod
    def at_zone(cls, grid: ZoneGrid, zone: int) -> SearchState:
        row, col = row_col(grid, zone)
        return cls(nb=row, sb=row, wb=col, eb=col, c=zone)


# per-axis window modes
_WARM, _EDGE, _SHRINK = 0, 1, 2


def _narrow(lo: int, hi: int, centre: int, side: int, mode: int, n: int) -> tuple[int, int, int]:
    if side == 0:
        return centre, centre, _SHRINK
    if mode == _WARM:
        return centre + side, centre + side, _EDGE
    if mode == _EDGE:
        return (centre + 1, n, _SHRINK) if side > 0 else (1, centre - 1, _SHRINK)
    return (centre + 1, hi, _SHRINK) if side > 0 else (lo, centre - 1, _SHRINK)


def search_steps(
    grid: ZoneGrid, p: GeoPoint, warm_start: SearchState | None = None
) -> Iterator[SearchState]:
    """Yield every probed window of the divide-and-conquer zone search.

    The centre row is ``ceil((NB+SB)/2)`` and the centre column is
    ``(EB+WB)/2`` rounded half-up. After a miss the violated boundaries are
    pulled in past the centre. A warm start begins with the previous zone as
    a 1x1 window, steps one row/column outward on a miss, and then falls
    back to the remaining strip up to the grid rim.
    """
    _check_inside(grid, p)
    if warm_start is None:
        state = SearchState.full(grid)
        row_mode = col_mode = _SHRINK
    else:
        state = warm_start
        row_mode = col_mode = _WARM
    nb, sb, wb, eb = state.nb, state.sb, state.wb, state.eb
    m = 0
    while True:
        m += 1
        b_ns = (nb + sb + 1) // 2
        b_ew = (eb + wb + 1) // 2
        centre = zone_id(grid, b_ns, b_ew)
        yield SearchState(nb, sb, wb, eb, centre, m)
        dr = _side(p.lat, grid.lat_edges, b_ns)
        dc = _side(p.long, grid.long_edges, b_ew)
        if dr == 0 and dc == 0:
            return
        sb, nb, row_mode = _narrow(sb, nb, b_ns, dr, row_mode, grid.n_r)
        wb, eb, col_mode = _narrow(wb, eb, b_ew, dc, col_mode, grid.n_c)


def locate_search(
    grid: ZoneGrid, p: GeoPoint, warm_start: SearchState | None = None
) -> tuple[int, int]:
    """Return ``(zone, iterations)`` for ``p``; agrees with :func:`locate_linear`."""
    last = None
    for last in search_steps(grid, p, warm_start):
        pass
    assert last is not None
    return last.c, last.m


def iteration_bound(grid: ZoneGrid) -> int:
    return math.ceil(math.log2(max(grid.n_r, grid.n_c))) + 1
