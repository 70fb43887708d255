"""Synthetic achievable-rate model: c_ik = B * log2(1 + SINR_ik)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridError, NonFiniteInput
from .scenario import ChannelGrid, Scenario

CHANNEL_STREAM = 0


def capacity_of(sinr_linear: float, B: float) -> float:
    """Shannon rate in bit/s for a linear SINR over bandwidth ``B`` Hz."""
    if not (math.isfinite(sinr_linear) and math.isfinite(B)):
        raise NonFiniteInput(f"non-finite input: sinr={sinr_linear!r}, B={B!r}")
    if sinr_linear < 0:
        raise NonFiniteInput(f"SINR must be >= 0, got {sinr_linear!r}")
    if B <= 0:
        raise NonFiniteInput(f"bandwidth must be > 0, got {B!r}")
    return B * math.log2(1.0 + sinr_linear)


def db_to_linear(db):
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)


@dataclass(frozen=True)
class ChannelModelParams:
    sinr_min_db: float = 0.0
    sinr_max_db: float = 20.0
    distribution: str = "uniform_db"
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.sinr_min_db) and math.isfinite(self.sinr_max_db)):
            raise NonFiniteInput("SINR bounds must be finite")
        if self.sinr_min_db > self.sinr_max_db:
            raise ValueError(f"sinr_min_db {self.sinr_min_db} exceeds sinr_max_db {self.sinr_max_db}")
        if self.distribution != "uniform_db":
            raise ValueError(f"unsupported SINR distribution {self.distribution!r}")

    def rate_bounds(self, B: float) -> tuple[float, float]:
        """Analytic (min, max) rate in bit/s implied by the dB range."""
        lo, hi = db_to_linear([self.sinr_min_db, self.sinr_max_db])
        return capacity_of(float(lo), B), capacity_of(float(hi), B)


@dataclass(frozen=True, eq=False)
class CapacityMap:
    """Read-only N x (K*L) matrix of achievable rates in bit/s."""

    rates: np.ndarray
    grid: ChannelGrid
    sinr_db: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        rates = np.array(self.rates, dtype=float)
        if rates.ndim != 2 or rates.shape[1] != self.grid.n_subchannels:
            raise GridError(f"rates shape {rates.shape} does not match {self.grid.n_subchannels} subchannels")
        if not np.all(np.isfinite(rates)):
            raise NonFiniteInput("capacity map contains non-finite entries")
        if np.any(rates < 0):
            raise NonFiniteInput("capacity map contains negative entries")
        rates.setflags(write=False)
        object.__setattr__(self, "rates", rates)

    @property
    def N(self) -> int:
        return self.rates.shape[0]

    def __eq__(self, other):
        if not isinstance(other, CapacityMap):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.rates, other.rates)

    __hash__ = None


def channel_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), CHANNEL_STREAM])


def generate_capacities(s: Scenario, g: ChannelGrid, p: ChannelModelParams) -> CapacityMap:
    """Draw one i.i.d. uniform-dB SINR per (vehicle, subchannel) and map it to a rate."""
    rng = channel_rng(p.seed)
    db = rng.uniform(p.sinr_min_db, p.sinr_max_db, size=(s.N, g.n_subchannels))
    if p.sinr_min_db == p.sinr_max_db:
        db = np.full_like(db, p.sinr_min_db)
    rates = g.B * np.log2(1.0 + db_to_linear(db))
    return CapacityMap(rates=rates, grid=g, sinr_db=db)
