"""Per-node clustering state, engine parameters and the world container."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geo import GeoPoint, PlanarVector
from .metrics import MembershipLog
from .zoning import ZoneGrid


@dataclass(frozen=True)
class WeightVector:
    """CHEC weights for (direction, speed difference, distance)."""

    w1: float
    w2: float
    w3: float

    def __post_init__(self) -> None:
        ws = (self.w1, self.w2, self.w3)
        if any(not 0.0 <= w <= 1.0 for w in ws):
            raise ValueError(f"weights must lie in [0, 1]: {ws}")
        if not math.isclose(sum(ws), 1.0, rel_tol=0.0, abs_tol=1e-9):
            raise ValueError(f"weights must sum to 1: {ws}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.w1, self.w2, self.w3)

    @classmethod
    def parse(cls, text: str) -> WeightVector:
        parts = [float(x) for x in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected three comma-separated weights, got {text!r}")
        return cls(*parts)


@dataclass(frozen=True)
class EngineConfig:
    tau_ms: int = 1000
    lambda_: int = 4
    common_tr_m: float | None = None  # overrides every car's range when set
    dru_tr_m: float | None = 800.0  # overrides every bus's range when set
    cap_dru: int = 30
    cap_ch: int = 20
    weights: WeightVector = WeightVector(0.6, 0.2, 0.2)
    epsilon: float = 1e-6
    seed: int = 0

    def __post_init__(self) -> None:
        if self.tau_ms <= 0:
            raise ValueError("tau_ms must be positive")
        if self.lambda_ < 1:
            raise ValueError("lambda must be >= 1")
        if self.cap_dru < 1 or self.cap_ch < 1:
            raise ValueError("capacities must be >= 1")
        for tr in (self.common_tr_m, self.dru_tr_m):
            if tr is not None and tr <= 0:
                raise ValueError("transmission ranges must be positive")


@dataclass(frozen=True)
class StaticUnit:
    """A roadside unit: a stationary, permanent cluster head that is not a DRU."""

    id: str
    loc: GeoPoint
    tr: float = 800.0


@dataclass
class NodeState:
    id: str
    kind: str  # "car", "bus" or "rsu"
    loc: GeoPoint
    vel: PlanarVector
    tr: float
    z: int = -1
    pz: int | None = None
    zone_changed: bool = False
    ch: bool = False
    cm: bool = False
    d: bool = False
    cluster_head: str | None = None
    members: set[str] = field(default_factory=set)
    v_dack: set[str] = field(default_factory=set)
    v_chack: set[str] = field(default_factory=set)
    v_cmack: set[str] = field(default_factory=set)
    v_saack: set[str] = field(default_factory=set)
    v_och: set[str] = field(default_factory=set)
    v_ov: set[str] = field(default_factory=set)
    pch: str | None = None
    sav_timer: int = 0
    pending_disconnect: dict[str, int] = field(default_factory=dict)

    @property
    def is_sav(self) -> bool:
        return not self.ch and not self.cm

    def capacity(self, config: EngineConfig) -> int:
        return config.cap_dru if self.d else config.cap_ch


def ack_policy(node: NodeState, config: EngineConfig) -> bool:
    """Whether a cluster head answers beacons with an ACK (it has room for a new member)."""
    return node.ch and len(node.members) < node.capacity(config)


@dataclass
class World:
    grid: ZoneGrid
    config: EngineConfig = field(default_factory=EngineConfig)
    nodes: dict[str, NodeState] = field(default_factory=dict)
    t: int | None = None
    adjacency: dict[str, set[str]] = field(default_factory=dict)
    log: MembershipLog = field(default_factory=MembershipLog)
    static_units: tuple[StaticUnit, ...] = ()

    def neighbours(self, nid: str) -> set[str]:
        return self.adjacency.get(nid, set())
