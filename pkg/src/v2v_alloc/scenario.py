"""Vehicles, clusters, QoS demands and the sidelink channelization grid.

Vehicle ids are 1-based dense integers. Subchannels carry a global 1-based
index ``k`` in ``1..K*L``; subchannel ``k`` lives in subframe ``ceil(k/K)``.
Arrays elsewhere in the package are 0-based views of the same indices.
"""

from __future__ import annotations

import itertools
import math
import numbers
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import (
    DuplicateVehicle,
    EmptyCluster,
    GridError,
    NegativeEpsilon,
    NonPositiveQos,
    ScenarioError,
    UnclusteredVehicle,
    UnknownVehicleId,
)

DEFAULT_BANDWIDTH_HZ = 1.26e6
SIDELINK_CHANNEL_HZ = 10e6
SUBFRAME_SECONDS = 1e-3


@dataclass(frozen=True)
class ChannelGrid:
    """L subframes of K subchannels, each subchannel B Hz wide and 1 ms long."""

    L: int
    K: int
    B: float = DEFAULT_BANDWIDTH_HZ
    subframe_duration: float = SUBFRAME_SECONDS

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise GridError(f"L must be a positive integer, got {self.L!r}")
        if int(self.K) != self.K or self.K < 1:
            raise GridError(f"K must be a positive integer, got {self.K!r}")
        if not math.isfinite(self.B) or self.B <= 0:
            raise GridError(f"B must be positive and finite, got {self.B!r}")
        # small slack so 7 * 1.26e6 style products never trip on rounding
        if self.K * self.B > SIDELINK_CHANNEL_HZ * (1 + 1e-12):
            raise GridError(
                f"K*B = {self.K * self.B:.6g} Hz exceeds the {SIDELINK_CHANNEL_HZ:.0f} Hz sidelink channel"
            )
        if self.subframe_duration != SUBFRAME_SECONDS:
            raise GridError("subframe duration is fixed at 1 ms")

    @property
    def n_subchannels(self) -> int:
        return self.K * self.L

    def subframe_of(self, k: int) -> int:
        """1-based subframe holding 1-based subchannel ``k``."""
        if not 1 <= k <= self.n_subchannels:
            raise GridError(f"subchannel {k} outside 1..{self.n_subchannels}")
        return -(-k // self.K)

    def subchannels_in(self, l: int) -> range:
        """1-based subchannel ids of 1-based subframe ``l``."""
        if not 1 <= l <= self.L:
            raise GridError(f"subframe {l} outside 1..{self.L}")
        return range((l - 1) * self.K + 1, l * self.K + 1)


@dataclass(frozen=True)
class Scenario:
    N: int
    clusters: tuple[tuple[int, ...], ...]
    qos: tuple[float, ...]
    epsilon: float

    @property
    def J(self) -> int:
        return len(self.clusters)

    def q(self, vehicle: int) -> float:
        return self.qos[vehicle - 1]

    def vehicles(self) -> range:
        return range(1, self.N + 1)

    def clusters_of(self, vehicle: int) -> list[int]:
        """1-based indices of the clusters containing ``vehicle``."""
        return [j + 1 for j, members in enumerate(self.clusters) if vehicle in members]


class PairKind(str, Enum):
    INTRA_CLUSTER = "intra_cluster"
    ONE_HOP = "one_hop"


@dataclass(frozen=True, order=True)
class VehiclePair:
    first: int
    second: int
    kind: PairKind

    def __post_init__(self):
        if not self.first < self.second:
            raise ValueError(f"pair must be canonical (first < second), got ({self.first}, {self.second})")

    def as_tuple(self) -> tuple[int, int]:
        return (self.first, self.second)


def _as_int(value, what: str) -> int:
    if isinstance(value, numbers.Integral) and not isinstance(value, bool):
        return int(value)
    if isinstance(value, float) and value.is_integer():
        return int(value)
    raise ScenarioError(f"{what} must be an integer, got {value!r}")


def validate_scenario(raw: Mapping) -> Scenario:
    """Build a Scenario from a plain mapping.

    Expected keys: ``N`` (vehicle count), ``clusters`` (list of id lists),
    ``qos`` (per-vehicle demand in bit/s, either a length-N sequence or an
    id -> demand mapping) and ``epsilon`` (bit/s).
    """
    try:
        n_raw, clusters_raw, qos_raw, eps_raw = raw["N"], raw["clusters"], raw["qos"], raw["epsilon"]
    except KeyError as exc:
        raise ScenarioError(f"missing scenario field {exc.args[0]!r}") from None

    N = _as_int(n_raw, "N")
    if N < 1:
        raise ScenarioError(f"N must be >= 1, got {N}")
    if not clusters_raw:
        raise ScenarioError("at least one cluster is required")

    clusters = []
    for j, members in enumerate(clusters_raw, start=1):
        members = list(members)
        if not members:
            raise EmptyCluster(f"cluster {j} is empty")
        ids = [_as_int(v, f"member of cluster {j}") for v in members]
        for v in ids:
            if not 1 <= v <= N:
                raise UnknownVehicleId(f"cluster {j} references vehicle {v}, but vehicles are 1..{N}")
        seen = set()
        for v in ids:
            if v in seen:
                raise DuplicateVehicle(f"cluster {j} lists vehicle {v} more than once")
            seen.add(v)
        clusters.append(tuple(sorted(ids)))

    covered = set(itertools.chain.from_iterable(clusters))
    missing = [v for v in range(1, N + 1) if v not in covered]
    if missing:
        raise UnclusteredVehicle(f"vehicle {missing[0]} belongs to no cluster")

    if isinstance(qos_raw, Mapping):
        qos_map = {_as_int(k, "qos key"): v for k, v in qos_raw.items()}
        for v in qos_map:
            if not 1 <= v <= N:
                raise UnknownVehicleId(f"qos given for vehicle {v}, but vehicles are 1..{N}")
        absent = [v for v in range(1, N + 1) if v not in qos_map]
        if absent:
            raise ScenarioError(f"no qos given for vehicle {absent[0]}")
        qos_seq = [qos_map[v] for v in range(1, N + 1)]
    else:
        qos_seq = list(qos_raw)
        if len(qos_seq) != N:
            raise ScenarioError(f"qos has {len(qos_seq)} entries, expected {N}")
    qos = []
    for v, q in enumerate(qos_seq, start=1):
        q = float(q)
        if not math.isfinite(q) or q <= 0:
            raise NonPositiveQos(f"vehicle {v} has non-positive qos {q!r}")
        qos.append(q)

    epsilon = float(eps_raw)
    if not math.isfinite(epsilon) or epsilon < 0:
        raise NegativeEpsilon(f"epsilon must be finite and >= 0, got {eps_raw!r}")

    return Scenario(N=N, clusters=tuple(clusters), qos=tuple(qos), epsilon=epsilon)


def _canonical(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def intra_cluster_pairs(s: Scenario) -> list[VehiclePair]:
    """Unordered pairs that share at least one cluster, in lexicographic order."""
    found = set()
    for members in s.clusters:
        found.update(itertools.combinations(members, 2))
    return [VehiclePair(a, b, PairKind.INTRA_CLUSTER) for a, b in sorted(found)]


def one_hop_pairs(s: Scenario) -> list[VehiclePair]:
    """Pairs from different intersecting clusters, intersection members excluded.

    For clusters j, j' that intersect, every i in V(j)\\V(j') is paired with
    every i' in V(j')\\V(j). Pairs that also share some cluster are dropped:
    the subframe-level intra-cluster rule already covers them.
    """
    intra = {p.as_tuple() for p in intra_cluster_pairs(s)}
    sets = [set(m) for m in s.clusters]
    found = set()
    for a, b in itertools.combinations(range(len(sets)), 2):
        if not sets[a] & sets[b]:
            continue
        for i in sets[a] - sets[b]:
            for i2 in sets[b] - sets[a]:
                pair = _canonical(i, i2)
                if pair not in intra:
                    found.add(pair)
    return [VehiclePair(a, b, PairKind.ONE_HOP) for a, b in sorted(found)]


def pair_tuples(pairs: Iterable[VehiclePair]) -> list[tuple[int, int]]:
    return [p.as_tuple() for p in pairs]


def scenario_from_lists(clusters: Sequence[Sequence[int]], qos: Sequence[float], epsilon: float,
                        N: int | None = None) -> Scenario:
    """Shorthand used by tests and the CLI: N defaults to the largest id."""
    if N is None:
        N = max(max(c) for c in clusters if c) if any(clusters) else 0
    return validate_scenario({"N": N, "clusters": clusters, "qos": qos, "epsilon": epsilon})
