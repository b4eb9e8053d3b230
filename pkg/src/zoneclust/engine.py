"""Discrete-time driver: one synchronous beacon exchange per tick.

Each tick runs, in order: apply the snapshot (enter/retire nodes), update
zones, rebuild the disk-model adjacency, exchange beacons and ACKs, run
maintenance, run head selection for every unclustered SAV, then cluster
formation for the SAVs that have waited lambda rounds. Nodes are always
visited in ascending id order and ties break to the lowest id, so a run is
fully determined by the trace and the configuration.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

from . import clustering as cl
from .geo import ZERO, GeoPoint
from .metrics import MembershipLog, TickCounts, tick_counts
from .state import EngineConfig, NodeState, StaticUnit, World, ack_policy
from .trace import Trace, TraceSnapshot, VehicleRecord
from .zoning import SearchState, ZoneGrid, locate_search

__all__ = [
    "Event",
    "RunResult",
    "StepError",
    "ack_policy",
    "beacon_phase",
    "check_invariants",
    "neighbor_discovery",
    "new_world",
    "simulate",
    "step",
]

log = logging.getLogger(__name__)

_M_PER_DEG = np.pi / 180.0 * 6_371_000.0


class StepError(ValueError):
    """Snapshot does not follow the world clock."""


@dataclass(frozen=True)
class Event:
    t: int
    kind: str  # enter, exit, join, leave, promote, revert
    node: str
    other: str | None = None


def neighbor_discovery(nodes: Iterable[NodeState]) -> dict[str, set[str]]:
    """Symmetric adjacency: ``i ~ j`` iff their distance is at most ``min(tr_i, tr_j)``."""
    nodes = list(nodes)
    adj: dict[str, set[str]] = {n.id: set() for n in nodes}
    if len(nodes) < 2:
        return adj
    lat = np.array([n.loc.lat for n in nodes])
    lon = np.array([n.loc.long for n in nodes])
    tr = np.array([n.tr for n in nodes])
    # same equirectangular formula as geo.distance, vectorised over all pairs
    mean_lat = np.radians((lat[:, None] + lat[None, :]) / 2.0)
    east = (lon[None, :] - lon[:, None]) * _M_PER_DEG * np.cos(mean_lat)
    north = (lat[None, :] - lat[:, None]) * _M_PER_DEG
    dist = np.hypot(east, north)
    linked = dist <= np.minimum(tr[:, None], tr[None, :])
    np.fill_diagonal(linked, False)
    ids = [n.id for n in nodes]
    for a, b in zip(*np.nonzero(np.triu(linked))):
        adj[ids[a]].add(ids[b])
        adj[ids[b]].add(ids[a])
    return adj


def new_world(
    grid: ZoneGrid, config: EngineConfig | None = None, static_units: Iterable[StaticUnit] = ()
) -> World:
    return World(grid=grid, config=config or EngineConfig(), static_units=tuple(static_units))


def _range_for(rec: VehicleRecord, cfg: EngineConfig) -> float:
    if rec.kind == "bus" and cfg.dru_tr_m is not None:
        return cfg.dru_tr_m
    if rec.kind == "car" and cfg.common_tr_m is not None:
        return cfg.common_tr_m
    return rec.tr


def _release(world: World, member: NodeState, t: int, events: list[Event]) -> None:
    head = world.nodes.get(member.cluster_head) if member.cluster_head else None
    if head is not None:
        head.members.discard(member.id)
    events.append(Event(t, "leave", member.id, member.cluster_head))
    world.log.leave(member.id, t)
    member.cm = False
    member.cluster_head = None
    member.pending_disconnect.clear()
    member.sav_timer = 0


def _join(world: World, node: NodeState, head_id: str, t: int, events: list[Event]) -> None:
    head = world.nodes[head_id]
    node.cm = True
    node.cluster_head = head_id
    node.sav_timer = 0
    head.members.add(node.id)
    world.log.join(node.id, head_id, t)
    events.append(Event(t, "join", node.id, head_id))


def _retire(world: World, nid: str, t: int, events: list[Event]) -> None:
    node = world.nodes[nid]
    if node.cm:
        _release(world, node, t, events)
    if node.ch:
        for mid in sorted(node.members):
            _release(world, world.nodes[mid], t, events)
    world.log.exit(nid, t)
    events.append(Event(t, "exit", nid))
    del world.nodes[nid]
    del world.adjacency[nid]
    for other in world.adjacency.values():
        other.discard(nid)


def _apply_snapshot(world: World, snap: TraceSnapshot, events: list[Event]) -> None:
    cfg, t = world.config, snap.t
    present: dict[str, tuple[str, GeoPoint, object, float]] = {}
    for rec in snap.records:
        if not world.grid.contains(rec.loc):
            continue  # outside the zoned area counts as absent
        present[rec.id] = (rec.kind, rec.loc, rec.vel, _range_for(rec, cfg))
    for unit in world.static_units:
        present[unit.id] = ("rsu", unit.loc, ZERO, unit.tr)

    for nid in sorted(set(world.nodes) - set(present)):
        _retire(world, nid, t, events)

    for nid in sorted(present):
        kind, loc, vel, tr = present[nid]
        node = world.nodes.get(nid)
        if node is None:
            if kind == "rsu" and not world.grid.contains(loc):
                raise ValueError(f"static unit {nid} lies outside the zone grid")
            node = NodeState(nid, kind, loc, vel, tr, ch=kind != "car", d=kind == "bus")
            world.nodes[nid] = node
            world.adjacency[nid] = set()
            world.log.enter(nid, t)
            events.append(Event(t, "enter", nid))
        else:
            if node.kind != kind:
                raise ValueError(f"{nid} changed kind from {node.kind} to {kind}")
            node.loc, node.vel, node.tr = loc, vel, tr


def _update_zones(world: World) -> None:
    grid = world.grid
    for node in world.nodes.values():
        warm = SearchState.at_zone(grid, node.z) if node.z >= 0 else None
        zone, _ = locate_search(grid, node.loc, warm)
        node.zone_changed = node.z >= 0 and zone != node.z
        if node.zone_changed:
            node.pz = node.z
        node.z = zone


def beacon_phase(world: World) -> None:
    """Refresh every node's ACK and neighbour sets from the current adjacency."""
    cfg = world.config
    nodes = world.nodes
    acking = {nid for nid, n in nodes.items() if ack_policy(n, cfg)}
    for nid, node in nodes.items():
        near = world.adjacency[nid]
        node.v_dack = {j for j in near if j in acking and nodes[j].d}
        node.v_chack = {j for j in near if j in acking and not nodes[j].d}
        node.v_cmack = {j for j in near if nodes[j].cm}
        node.v_saack = {j for j in near if nodes[j].is_sav}
        node.v_ov = node.v_cmack | node.v_saack


def _maintenance(world: World, events: list[Event]) -> None:
    t = world.t
    for nid in sorted(world.nodes):
        node = world.nodes[nid]
        for tr in cl.maintain(node, world):
            if isinstance(tr, cl.Revert):
                node.ch = False
                node.sav_timer = 0
                node.v_och = set()
                events.append(Event(t, "revert", nid))
            elif isinstance(tr, cl.MarkPending):
                node.pending_disconnect[tr.head] = node.pending_disconnect.get(tr.head, 0) + 1
            elif isinstance(tr, cl.ClearPending):
                node.pending_disconnect.clear()
            elif isinstance(tr, cl.Leave):
                # close the membership at the tick the link first failed
                _release(world, node, tr.at, events)
            elif isinstance(tr, cl.Prune):
                node.members -= tr.members
            elif isinstance(tr, cl.RefreshLinks):
                node.v_och = set(tr.other_heads)


def _select_heads(world: World, events: list[Event]) -> None:
    for nid in sorted(world.nodes):
        node = world.nodes[nid]
        if node.kind != "car" or not node.is_sav:
            continue
        decision = cl.select_ch(node, world)
        if decision is None:
            node.sav_timer += 1
        else:
            _join(world, node, decision.head, world.t, events)
            node.v_och = set(decision.other_heads)


def _promote(world: World, node: NodeState, events: list[Event]) -> None:
    node.ch = True
    node.sav_timer = 0
    events.append(Event(world.t, "promote", node.id))


def _form_clusters(world: World, events: list[Event]) -> None:
    lam = world.config.lambda_
    waiting = sorted(
        nid for nid, n in world.nodes.items()
        if n.kind == "car" and n.is_sav and n.sav_timer >= lam
    )
    alone = [nid for nid in waiting if not world.nodes[nid].v_saack]
    for nid in alone:
        _promote(world, world.nodes[nid], events)
    group = {nid for nid in waiting if world.nodes[nid].v_saack}
    if not group:
        return
    result = cl.form_sav_clusters(group, world)
    for nid, p in result.announced.items():
        world.nodes[nid].pch = p
    for dec in result.decisions:
        node = world.nodes[dec.node]
        if isinstance(dec, cl.Promote):
            _promote(world, node, events)
        elif isinstance(dec, cl.Join):
            _join(world, node, dec.head, world.t, events)


def step(world: World, snapshot: TraceSnapshot) -> list[Event]:
    """Advance ``world`` by one tick using ``snapshot``; returns the tick's events."""
    tau = world.config.tau_ms
    if world.t is not None and snapshot.t != world.t + tau:
        raise StepError(f"snapshot t={snapshot.t} does not follow t={world.t} by {tau} ms")
    events: list[Event] = []
    world.t = snapshot.t
    _apply_snapshot(world, snapshot, events)
    _update_zones(world)
    world.adjacency = neighbor_discovery(world.nodes[nid] for nid in sorted(world.nodes))
    beacon_phase(world)
    _maintenance(world, events)
    _select_heads(world, events)
    _form_clusters(world, events)
    return events


def check_invariants(world: World) -> list[str]:
    """Human-readable list of state-consistency violations (empty when sound)."""
    cfg = world.config
    bad = []
    for nid, n in world.nodes.items():
        if n.ch and n.cm:
            bad.append(f"{nid}: both head and member")
        if n.d and not n.ch:
            bad.append(f"{nid}: DRU without head role")
        if n.kind == "bus" and not (n.d and n.ch):
            bad.append(f"{nid}: bus is not a DRU head")
        if n.cm != (n.cluster_head is not None):
            bad.append(f"{nid}: member flag and head link disagree")
        if n.members and not n.ch:
            bad.append(f"{nid}: has members but is not a head")
        if len(n.members) > n.capacity(cfg):
            bad.append(f"{nid}: {len(n.members)} members over cap {n.capacity(cfg)}")
        if n.cm:
            head = world.nodes.get(n.cluster_head)
            if head is None or nid not in head.members:
                bad.append(f"{nid}: head {n.cluster_head} does not list it")
            elif n.cluster_head not in world.adjacency[nid] and not n.pending_disconnect:
                bad.append(f"{nid}: head {n.cluster_head} out of range without a pending check")
        for m in n.members:
            if m not in world.nodes or world.nodes[m].cluster_head != nid:
                bad.append(f"{nid}: member {m} does not point back")
    return bad


@dataclass
class RunResult:
    ticks: list[TickCounts] = field(default_factory=list)
    events: list[Event] = field(default_factory=list)
    log: MembershipLog = field(default_factory=MembershipLog)
    world: World | None = None


def simulate(
    trace: Trace,
    grid: ZoneGrid,
    config: EngineConfig | None = None,
    static_units: Iterable[StaticUnit] = (),
    check: bool = False,
) -> RunResult:
    """Run the whole trace and close the membership log at the end.

    With ``check=True`` the invariants are verified after every tick and a
    violation raises ``AssertionError``.
    """
    config = config or EngineConfig()
    if len(trace) > 1 and trace.tick != config.tau_ms:
        raise StepError(f"trace tick {trace.tick} ms differs from tau {config.tau_ms} ms")
    world = new_world(grid, config, static_units)
    result = RunResult(log=world.log, world=world)
    for snap in trace.snapshots:
        result.events.extend(step(world, snap))
        if check:
            problems = check_invariants(world)
            assert not problems, f"t={world.t}: {problems}"
        result.ticks.append(tick_counts(world))
    if trace.snapshots:
        world.log.close(trace.end + config.tau_ms)
    return result
