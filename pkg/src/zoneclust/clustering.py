"""Cluster-head selection, SAV cluster formation and cluster maintenance.

Every function here is a decision over the current world: it reads node
state and returns what should happen. :mod:`zoneclust.engine` applies the
decisions one at a time in ascending node-id order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geo import ZERO, PlanarVector, displacement, distance, magnitude
from .state import NodeState, WeightVector, World, ack_policy
from .zoning import ZoneGrid, zone_centroid

# below this speed (m/s) a node without a previous zone has no usable heading
MIN_HEADING_SPEED = 0.1


def overall_direction(node: NodeState, grid: ZoneGrid) -> PlanarVector:
    """Vector from the previous zone's centroid to the node's position.

    Falls back to the velocity when there is no distinct previous zone, and
    to the zero vector (direction undefined) when the node is near-still.
    """
    if node.pz is not None and node.pz != node.z:
        return displacement(zone_centroid(grid, node.pz), node.loc)
    if magnitude(node.vel) > MIN_HEADING_SPEED:
        return node.vel
    return ZERO


def zotsim(o_i: PlanarVector, o_j: PlanarVector) -> float:
    """Angle in [0, pi] between two direction vectors; pi/2 if either is undefined."""
    n_i, n_j = magnitude(o_i), magnitude(o_j)
    if n_i == 0.0 or n_j == 0.0:
        return math.pi / 2
    phi = o_i.dot(o_j) / (n_i * n_j)
    return math.acos(min(1.0, max(-1.0, phi)))


@dataclass(frozen=True)
class RelativeFeatureVector:
    zotsim: float
    dspeed: float
    dist: float
    normalized: tuple[float, float, float]


def rfv(node_i: NodeState, ch_j: NodeState, grid: ZoneGrid, epsilon: float = 1e-6) -> RelativeFeatureVector:
    """Raw and normalised relative features of candidate head ``ch_j`` seen from ``node_i``."""
    dist = distance(node_i.loc, ch_j.loc)
    reach = min(node_i.tr, ch_j.tr)
    if dist > reach:
        raise ValueError(f"{ch_j.id} is {dist:.1f} m from {node_i.id}, beyond {reach} m")
    angle = zotsim(overall_direction(node_i, grid), overall_direction(ch_j, grid))
    s_i, s_j = magnitude(node_i.vel), magnitude(ch_j.vel)
    dspeed = abs(s_i - s_j)
    # the direction term is scaled by 1/(2*pi) even though the angle tops out at pi
    norm = (angle / (2 * math.pi), dspeed / (max(s_i, s_j) + epsilon), dist / reach)
    return RelativeFeatureVector(angle, dspeed, dist, norm)


def chec(w: WeightVector, columns: list[tuple[float, float, float]]) -> list[float]:
    return [w.w1 * a + w.w2 * b + w.w3 * c for a, b, c in columns]


def rank_candidates(
    node: NodeState, candidates: list[str], world: World, w: WeightVector
) -> list[tuple[float, str]]:
    """Candidates sorted by (CHEC, id); unreachable ids are dropped."""
    cols, ids = [], []
    for j in sorted(candidates):
        other = world.nodes.get(j)
        if other is None or j not in world.neighbours(node.id):
            continue
        cols.append(rfv(node, other, world.grid, world.config.epsilon).normalized)
        ids.append(j)
    return sorted(zip(chec(w, cols), ids))


@dataclass(frozen=True)
class Join:
    node: str
    head: str
    other_heads: frozenset[str] = frozenset()


@dataclass(frozen=True)
class Promote:
    node: str


@dataclass(frozen=True)
class Retry:
    node: str


def select_ch(node: NodeState, world: World, w: WeightVector | None = None) -> Join | None:
    """One round of head selection for an unclustered SAV.

    Only DRUs are considered when any DRU acknowledged the beacon; otherwise
    all acknowledging heads are. Candidates are asked in CHEC order (ties to
    the lowest id) and the first one that still has room is joined.
    """
    w = w or world.config.weights
    pool = node.v_dack if node.v_dack else node.v_chack
    for _, j in rank_candidates(node, list(pool), world, w):
        head = world.nodes[j]
        if ack_policy(head, world.config):
            return Join(node.id, j, frozenset((node.v_dack | node.v_chack) - {j}))
    return None


@dataclass(frozen=True)
class Formation:
    decisions: list[Join | Promote | Retry]
    announced: dict[str, str]  # node -> potential cluster head it settled on


def form_sav_clusters(savs: set[str], world: World, w: WeightVector | None = None) -> Formation:
    """Cluster formation among SAVs that found no head within lambda rounds.

    Each SAV announces itself as a potential head along with its SAV
    neighbour count, then collects every in-range announcer whose count is
    at least its own. It proposes to those in CHEC order; a candidate that
    is not already a member becomes a head. A SAV that collects nobody
    becomes a head itself, and two SAVs that only see each other both do.
    """
    w = w or world.config.weights
    eligible = sorted(savs)
    pool = set(eligible)
    nodes = world.nodes
    count = {i: len(nodes[i].v_saack) for i in eligible}

    role: dict[str, str] = {}
    load: dict[str, int] = {}
    decisions: list[Join | Promote | Retry] = []
    announced: dict[str, str] = {}

    for i in eligible:
        sa = nodes[i].v_saack
        if len(sa) == 1:
            (j,) = sa
            if j in pool and nodes[j].v_saack == {i}:
                role[i] = "ch"
                decisions.append(Promote(i))

    pch: dict[str, list[str]] = {}
    for i in eligible:
        announced[i] = i
        found = []
        for k in sorted(nodes[i].v_saack & pool):
            # ids outside the node's range are ignored
            if k in world.neighbours(i) and count[k] >= count[i]:
                announced[i] = k
                found.append(k)
        pch[i] = found

    for i in eligible:
        if i in role:
            continue
        if not pch[i]:
            role[i] = "ch"
            decisions.append(Promote(i))
            continue
        for _, j in rank_candidates(nodes[i], pch[i], world, w):
            if role.get(j) == "cm" or load.get(j, 0) >= world.config.cap_ch:
                continue
            if role.get(j) != "ch":
                role[j] = "ch"
                decisions.append(Promote(j))
            role[i] = "cm"
            load[j] = load.get(j, 0) + 1
            decisions.append(Join(i, j))
            break
        else:
            decisions.append(Retry(i))
    return Formation(decisions, announced)


@dataclass(frozen=True)
class Revert:
    node: str


@dataclass(frozen=True)
class MarkPending:
    node: str
    head: str


@dataclass(frozen=True)
class ClearPending:
    node: str


@dataclass(frozen=True)
class Leave:
    node: str
    head: str
    at: int  # ms, when the link was first seen broken


@dataclass(frozen=True)
class Prune:
    head: str
    members: frozenset[str]


@dataclass(frozen=True)
class RefreshLinks:
    node: str
    other_heads: frozenset[str]


Transition = Revert | MarkPending | ClearPending | Leave | Prune | RefreshLinks


def maintain(node: NodeState, world: World) -> list[Transition]:
    """Maintenance transitions for one node at the current tick.

    - an empty car head that just changed zone drops back to SAV;
    - a member whose head has been out of range on two consecutive ticks
      (one full beacon period) leaves; a single missed tick is forgiven;
    - heads drop members that no longer point at them and refresh their
      list of neighbouring heads.
    """
    out: list[Transition] = []
    near = world.neighbours(node.id)
    if node.ch and node.kind == "car" and not node.members and node.zone_changed:
        out.append(Revert(node.id))
        return out
    if node.cm and node.cluster_head is not None:
        head = node.cluster_head
        if head in near and head in world.nodes:
            if node.pending_disconnect:
                out.append(ClearPending(node.id))
        else:
            missed = node.pending_disconnect.get(head, 0)
            if missed >= 1:
                out.append(Leave(node.id, head, world.t - missed * world.config.tau_ms))
            else:
                out.append(MarkPending(node.id, head))
    if node.ch:
        stale = frozenset(
            m for m in node.members
            if m not in world.nodes or world.nodes[m].cluster_head != node.id
        )
        if stale:
            out.append(Prune(node.id, stale))
        out.append(RefreshLinks(node.id, frozenset(j for j in near if world.nodes[j].ch)))
    return out
