"""Zone-based single-hop clustering for urban vehicular networks."""

from .clustering import chec, form_sav_clusters, maintain, overall_direction, rfv, select_ch, zotsim
from .engine import check_invariants, neighbor_discovery, simulate, step
from .geo import GeoPoint, PlanarVector, displacement, distance, magnitude
from .metrics import MembershipLog, RunReport, connected_components, cv_percent, summarize, vcsm
from .runner import RunConfig, SweepReport, emit_plot_series, run, sweep, weight_grid
from .state import EngineConfig, NodeState, StaticUnit, WeightVector, World, ack_policy
from .synth import BusRoute, SynthSpec, intersections, synth_trace
from .trace import Trace, TraceSnapshot, VehicleRecord, parse_trace, serialize_trace, window
from .zoning import ZoneGrid, build_grid, locate_linear, locate_search, zone_id

__version__ = "0.1.0"

__all__ = [
    "BusRoute", "EngineConfig", "GeoPoint", "MembershipLog", "NodeState", "PlanarVector",
    "RunConfig", "RunReport", "StaticUnit", "SweepReport", "SynthSpec", "Trace",
    "TraceSnapshot", "VehicleRecord", "WeightVector", "World", "ZoneGrid", "ack_policy",
    "build_grid", "chec", "check_invariants", "connected_components", "cv_percent",
    "displacement", "distance", "emit_plot_series", "form_sav_clusters", "intersections",
    "locate_linear", "locate_search", "magnitude", "maintain", "neighbor_discovery",
    "overall_direction", "parse_trace", "rfv", "run", "select_ch", "serialize_trace",
    "simulate", "step", "summarize", "sweep", "synth_trace", "vcsm", "weight_grid",
    "window", "zone_id", "zotsim",
]
