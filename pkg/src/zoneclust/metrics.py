"""Cluster-stability metrics and per-run reporting.

VCSM averages, over every vehicle that was a cluster member at least once,
the fraction of its presence time spent inside clusters divided by the
number of clusters it joined::

    VCSM = 1/n_vm * sum_i (sum_k t_ik) / (gamma_i * T_i)

A vehicle that sits in one cluster for its whole stay scores 1; joining
more clusters or spending time unclustered lowers the score.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, Any

import networkx as nx

if TYPE_CHECKING:
    from .state import World


@dataclass
class Interval:
    head: str
    start: int
    end: int | None = None


@dataclass
class History:
    spans: list[list[int | None]] = field(default_factory=list)  # [t_in, t_out]
    intervals: list[Interval] = field(default_factory=list)

    @property
    def gamma(self) -> int:
        return len(self.intervals)

    def presence(self) -> int:
        return sum(b - a for a, b in self.spans)

    def in_cluster(self) -> int:
        return sum(iv.end - iv.start for iv in self.intervals)


class MembershipLog:
    """Presence spans and cluster-membership intervals per vehicle (ms)."""

    def __init__(self) -> None:
        self.histories: dict[str, History] = {}

    def _open_interval(self, vid: str) -> Interval | None:
        h = self.histories.get(vid)
        if h and h.intervals and h.intervals[-1].end is None:
            return h.intervals[-1]
        return None

    def enter(self, vid: str, t: int) -> None:
        h = self.histories.setdefault(vid, History())
        if h.spans and h.spans[-1][1] is None:
            raise ValueError(f"{vid} entered twice without leaving")
        h.spans.append([t, None])

    def exit(self, vid: str, t: int) -> None:
        if self._open_interval(vid):
            self.leave(vid, t)
        span = self.histories[vid].spans[-1]
        if span[1] is not None:
            raise ValueError(f"{vid} is not present")
        span[1] = t

    def join(self, vid: str, head: str, t: int) -> None:
        if self._open_interval(vid):
            raise ValueError(f"{vid} is already in a cluster")
        self.histories[vid].intervals.append(Interval(head, t))

    def leave(self, vid: str, t: int) -> None:
        iv = self._open_interval(vid)
        if iv is None:
            raise ValueError(f"{vid} is not in a cluster")
        iv.end = max(t, iv.start)

    def close(self, t_end: int) -> None:
        """Close everything still open at ``t_end`` (end of the run)."""
        for vid, h in self.histories.items():
            if self._open_interval(vid):
                self.leave(vid, t_end)
            if h.spans and h.spans[-1][1] is None:
                h.spans[-1][1] = t_end

    def is_closed(self) -> bool:
        return all(
            all(s[1] is not None for s in h.spans) and all(iv.end is not None for iv in h.intervals)
            for h in self.histories.values()
        )

    def add(self, vid: str, spans: list[tuple[int, int]], intervals: list[tuple[str, int, int]]) -> None:
        """Insert a finished history directly (handy for building logs by hand)."""
        self.histories[vid] = History(
            [list(s) for s in spans], [Interval(head, a, b) for head, a, b in intervals]
        )

    def to_dict(self) -> dict[str, Any]:
        return {vid: asdict(h) for vid, h in sorted(self.histories.items())}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> MembershipLog:
        log = cls()
        for vid, h in data.items():
            log.histories[vid] = History(
                [list(s) for s in h["spans"]], [Interval(**iv) for iv in h["intervals"]]
            )
        return log


def vcsm(log: MembershipLog) -> float | None:
    """Cluster stability in (0, 1]; ``None`` when no vehicle was ever a member."""
    if not log.is_closed():
        raise ValueError("membership log has open spans or intervals; call close() first")
    terms = []
    for h in log.histories.values():
        if h.gamma == 0:
            continue
        total = h.presence()
        if total <= 0:
            raise ValueError("a member vehicle has zero presence time")
        terms.append(h.in_cluster() / (h.gamma * total))
    if not terms:
        return None
    return sum(terms) / len(terms)


def cv_percent(values: list[float]) -> float:
    """Coefficient of variation in percent, with the sample (n-1) deviation."""
    if len(values) < 2:
        raise ValueError("CV% needs at least two values")
    mean = statistics.fmean(values)
    if mean == 0:
        raise ValueError("CV% is undefined for a zero mean")
    return statistics.stdev(values) / mean * 100.0


def overlay_graph(world: World) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(world.nodes)
    for nid, node in world.nodes.items():
        if node.cm and node.cluster_head is not None:
            g.add_edge(nid, node.cluster_head)
        elif node.ch:
            g.add_edges_from((nid, j) for j in world.neighbours(nid) if world.nodes[j].ch)
    return g


def connected_components(world: World) -> int:
    """Components of the CM-CH / adjacent CH-CH overlay; unclustered SAVs are singletons."""
    if not world.nodes:
        return 0
    return nx.number_connected_components(overlay_graph(world))


@dataclass
class TickCounts:
    t: int
    n_ch: int
    n_sav: int
    n_cm: int
    components: int
    n_vehicles: int
    n_buses: int
    n_rsus: int = 0

    @property
    def population(self) -> int:
        return self.n_vehicles + self.n_buses + self.n_rsus


def tick_counts(world: World) -> TickCounts:
    nodes = world.nodes.values()
    return TickCounts(
        t=world.t if world.t is not None else 0,
        n_ch=sum(n.ch for n in nodes),
        n_sav=sum(n.is_sav for n in nodes),
        n_cm=sum(n.cm for n in nodes),
        components=connected_components(world),
        n_vehicles=sum(n.kind == "car" for n in nodes),
        n_buses=sum(n.kind == "bus" for n in nodes),
        n_rsus=sum(n.kind == "rsu" for n in nodes),
    )


@dataclass
class RunReport:
    ticks: list[TickCounts] = field(default_factory=list)
    vcsm: float | None = None
    n_vm: int = 0
    config: dict[str, Any] = field(default_factory=dict)

    def averages(self) -> dict[str, float]:
        if not self.ticks:
            return {}
        keys = ("n_ch", "n_sav", "n_cm", "components")
        return {k: statistics.fmean(getattr(c, k) for c in self.ticks) for k in keys}

    def to_dict(self) -> dict[str, Any]:
        return {
            "vcsm": self.vcsm,
            "n_vm": self.n_vm,
            "n_ticks": len(self.ticks),
            "averages": self.averages(),
            "config": self.config,
            "ticks": [asdict(c) for c in self.ticks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunReport:
        return cls(
            ticks=[TickCounts(**c) for c in data["ticks"]],
            vcsm=data["vcsm"],
            n_vm=data["n_vm"],
            config=data["config"],
        )


def summarize(
    ticks: list[TickCounts], log: MembershipLog | None = None, config: dict[str, Any] | None = None
) -> RunReport:
    if log is None or not log.histories:
        return RunReport(list(ticks), None, 0, dict(config or {}))
    n_vm = sum(1 for h in log.histories.values() if h.gamma)
    return RunReport(list(ticks), vcsm(log), n_vm, dict(config or {}))
