"""Constraint matrices for the four requirement types and an assignment verifier.

The verifier evaluates Types II-IV twice: once through the Kronecker/Hadamard
matrix products and once by direct set reasoning over the assignment. The two
must agree on every violation; a mismatch is a bug and raises
``InternalCheckerDisagreement``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import InconsistentInputs, InternalCheckerDisagreement, ShapeMismatch
from .scenario import (
    ChannelGrid,
    Scenario,
    VehiclePair,
    intra_cluster_pairs,
    one_hop_pairs,
)

QOS_REL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Assignment:
    """Boolean vehicle x subchannel incidence; row i-1 is vehicle i."""

    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x)
        if x.ndim != 2:
            raise ShapeMismatch(f"assignment must be 2-D, got shape {x.shape}")
        if x.dtype != bool:
            if not np.all((x == 0) | (x == 1)):
                raise ShapeMismatch("assignment entries must be 0 or 1")
            x = x.astype(bool)
        x = x.copy()
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @classmethod
    def empty(cls, N: int, g: ChannelGrid) -> "Assignment":
        return cls(np.zeros((N, g.n_subchannels), dtype=bool))

    @property
    def N(self) -> int:
        return self.x.shape[0]

    def subchannels_of(self, vehicle: int) -> list[int]:
        """1-based subchannel ids used by ``vehicle``."""
        return [int(k) + 1 for k in np.flatnonzero(self.x[vehicle - 1])]

    def __eq__(self, other):
        if not isinstance(other, Assignment):
            return NotImplemented
        return np.array_equal(self.x, other.x)

    __hash__ = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerows(self.x.astype(int).tolist())
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Assignment":
        rows = []
        for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
            cells = [c.strip() for c in row if c.strip() != ""]
            if not cells:
                continue
            try:
                values = [int(c) for c in cells]
            except ValueError:
                raise ShapeMismatch(f"line {lineno}: non-integer entry in assignment") from None
            if any(v not in (0, 1) for v in values):
                raise ShapeMismatch(f"line {lineno}: assignment entries must be 0 or 1")
            rows.append(values)
        if not rows:
            raise ShapeMismatch("assignment file is empty")
        width = {len(r) for r in rows}
        if len(width) != 1:
            raise ShapeMismatch(f"ragged assignment rows, widths {sorted(width)}")
        return cls(np.array(rows, dtype=bool))

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def load(cls, path) -> "Assignment":
        return cls.from_csv(Path(path).read_text())


def _check_shape(x: np.ndarray, N: int, g: ChannelGrid) -> None:
    if x.shape != (N, g.n_subchannels):
        raise ShapeMismatch(f"assignment shape {x.shape}, expected ({N}, {g.n_subchannels})")


def fold_to_subframes(a: Assignment, g: ChannelGrid) -> np.ndarray:
    """Per-vehicle count of used subchannels in each subframe (N x L)."""
    x = a.x
    if x.ndim != 2 or x.shape[1] != g.n_subchannels:
        raise ShapeMismatch(f"assignment has {x.shape[1]} columns, grid has {g.n_subchannels} subchannels")
    return x.reshape(x.shape[0], g.L, g.K).sum(axis=2, dtype=np.int64)


def vehicle_rates(x: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Achieved rate per vehicle (exactly rounded sums of the used capacities)."""
    return np.array([math.fsum(rates[i, x[i]]) for i in range(x.shape[0])], dtype=float)


def qos_window(q: float, epsilon: float) -> tuple[float, float]:
    return (q - epsilon, q + epsilon)


def in_window(rate: float, q: float, epsilon: float) -> bool:
    """Closed-interval QoS test with a 1e-9*q boundary tolerance."""
    tol = QOS_REL_TOL * q
    lo, hi = qos_window(q, epsilon)
    return lo - tol <= rate <= hi + tol


def _one_hot_pairs(pairs, N: int) -> tuple[np.ndarray, np.ndarray]:
    plus = np.zeros((len(pairs), N), dtype=np.int8)
    minus = np.zeros((len(pairs), N), dtype=np.int8)
    for row, pair in enumerate(pairs):
        first, second = pair.as_tuple() if isinstance(pair, VehiclePair) else pair
        minus[row, first - 1] = 1
        plus[row, second - 1] = 1
    return plus, minus


def build_G(pairs, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Intra-cluster pair selectors (G_plus marks the second member, G_minus the first)."""
    return _one_hot_pairs(pairs, N)


def build_Q(L: int) -> tuple[np.ndarray, np.ndarray]:
    """Subframe-pair selectors: Q_minus is the identity, Q_plus the strict lower triangle."""
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    q_minus = np.eye(L, dtype=np.int8)
    q_plus = np.tril(np.ones((L, L), dtype=np.int8), k=-1)
    return q_plus, q_minus


def build_H(hop_pairs, N: int) -> tuple[np.ndarray, np.ndarray]:
    """One-hop pair selectors in U x N orientation."""
    return _one_hot_pairs(hop_pairs, N)


@dataclass(frozen=True, eq=False)
class ConstraintSystem:
    N: int
    L: int
    K: int
    intra_pairs: tuple[VehiclePair, ...]
    hop_pairs: tuple[VehiclePair, ...]
    G_plus: np.ndarray
    G_minus: np.ndarray
    Q_plus: np.ndarray
    Q_minus: np.ndarray
    H_plus: np.ndarray
    H_minus: np.ndarray

    @property
    def P(self) -> int:
        return len(self.intra_pairs)

    @property
    def U(self) -> int:
        return len(self.hop_pairs)


def build_constraint_system(s: Scenario, g: ChannelGrid) -> ConstraintSystem:
    intra = tuple(intra_cluster_pairs(s))
    hop = tuple(one_hop_pairs(s))
    g_plus, g_minus = build_G(intra, s.N)
    q_plus, q_minus = build_Q(g.L)
    h_plus, h_minus = build_H(hop, s.N)
    for m in (g_plus, g_minus, q_plus, q_minus, h_plus, h_minus):
        m.setflags(write=False)
    return ConstraintSystem(
        N=s.N, L=g.L, K=g.K, intra_pairs=intra, hop_pairs=hop,
        G_plus=g_plus, G_minus=g_minus, Q_plus=q_plus, Q_minus=q_minus,
        H_plus=h_plus, H_minus=h_minus,
    )


@dataclass
class ConflictReport:
    """Violations per requirement type; all ids and indices are 1-based."""

    qos_violations: list[tuple[int, float, tuple[float, float]]] = field(default_factory=list)
    type2: list[tuple[tuple[int, int], int]] = field(default_factory=list)
    type3: list[tuple[int, tuple[int, ...]]] = field(default_factory=list)
    type4: list[tuple[tuple[int, int], int]] = field(default_factory=list)

    @property
    def is_empty(self) -> bool:
        return not (self.qos_violations or self.type2 or self.type3 or self.type4)

    @property
    def conflict_free(self) -> bool:
        """True when Types II-IV are all satisfied (QoS ignored)."""
        return not (self.type2 or self.type3 or self.type4)

    def counts(self) -> dict[str, int]:
        return {
            "qos": len(self.qos_violations),
            "type2": len(self.type2),
            "type3": len(self.type3),
            "type4": len(self.type4),
        }


def _matrix_form(x: np.ndarray, g: ChannelGrid, cs: ConstraintSystem):
    """Evaluate the Hadamard products; returns (type2 set, type3 set, type4 set)."""
    N, KL, L = x.shape[0], g.n_subchannels, g.L
    xv = sp.csr_matrix(x.reshape(-1, 1).astype(np.int64))
    fold = sp.kron(sp.identity(N * L, dtype=np.int64, format="csr"),
                   sp.csr_matrix(np.ones((1, g.K), dtype=np.int64)), format="csr")
    xs = fold @ xv

    def hadamard(A_plus, A_minus, block, vec):
        eye = sp.identity(block, dtype=np.int64, format="csr")
        left = sp.kron(sp.csr_matrix(A_plus.astype(np.int64)), eye, format="csr") @ vec
        right = sp.kron(sp.csr_matrix(A_minus.astype(np.int64)), eye, format="csr") @ vec
        return np.asarray(left.multiply(right).todense()).ravel()

    t2 = set()
    if cs.P:
        prod = hadamard(cs.G_plus, cs.G_minus, L, xs)
        for idx in np.flatnonzero(prod):
            p, l = divmod(int(idx), L)
            t2.add((cs.intra_pairs[p].as_tuple(), l + 1))

    eye_n = sp.identity(N, dtype=np.int64, format="csr")
    left = sp.kron(eye_n, sp.csr_matrix(cs.Q_plus.astype(np.int64)), format="csr") @ xs
    right = sp.kron(eye_n, sp.csr_matrix(cs.Q_minus.astype(np.int64)), format="csr") @ xs
    prod3 = np.asarray(left.multiply(right).todense()).ravel()
    t3 = {int(idx) // L + 1 for idx in np.flatnonzero(prod3)}

    t4 = set()
    if cs.U:
        prod = hadamard(cs.H_plus, cs.H_minus, KL, xv)
        for idx in np.flatnonzero(prod):
            u, k = divmod(int(idx), KL)
            t4.add((cs.hop_pairs[u].as_tuple(), k + 1))
    return t2, t3, t4


def _direct_form(x: np.ndarray, fold: np.ndarray, cs: ConstraintSystem):
    used = fold > 0
    t2 = set()
    for pair in cs.intra_pairs:
        a, b = pair.as_tuple()
        for l in np.flatnonzero(used[a - 1] & used[b - 1]):
            t2.add(((a, b), int(l) + 1))
    t3 = {i + 1 for i in range(x.shape[0]) if np.count_nonzero(used[i]) > 1}
    t4 = set()
    for pair in cs.hop_pairs:
        a, b = pair.as_tuple()
        for k in np.flatnonzero(x[a - 1] & x[b - 1]):
            t4.add(((a, b), int(k) + 1))
    return t2, t3, t4


def check_consistent(s: Scenario, g: ChannelGrid, c, cs: ConstraintSystem) -> None:
    """Raise InconsistentInputs when scenario, grid, capacities and matrices disagree."""
    if c.grid.L != g.L or c.grid.K != g.K:
        raise InconsistentInputs("capacity map was built for a different grid")
    if c.rates.shape != (s.N, g.n_subchannels):
        raise InconsistentInputs(f"capacity map shape {c.rates.shape}, expected ({s.N}, {g.n_subchannels})")
    if (cs.N, cs.L, cs.K) != (s.N, g.L, g.K):
        raise InconsistentInputs("constraint system dimensions do not match scenario/grid")


def verify(a: Assignment, s: Scenario, g: ChannelGrid, c, cs: ConstraintSystem) -> ConflictReport:
    """List every violation of the QoS window and of Types II-IV."""
    x = a.x
    _check_shape(x, s.N, g)
    if c.rates.shape != x.shape:
        raise ShapeMismatch(f"capacity shape {c.rates.shape} differs from assignment shape {x.shape}")
    if (cs.N, cs.L, cs.K) != (s.N, g.L, g.K):
        raise ShapeMismatch("constraint system dimensions do not match scenario/grid")

    fold = fold_to_subframes(a, g)
    m2, m3, m4 = _matrix_form(x, g, cs)
    d2, d3, d4 = _direct_form(x, fold, cs)
    for name, m, d in (("type II", m2, d2), ("type III", m3, d3), ("type IV", m4, d4)):
        if m != d:
            raise InternalCheckerDisagreement(
                f"{name}: matrix form found {sorted(m - d)} extra, direct form found {sorted(d - m)} extra"
            )

    report = ConflictReport()
    rates = vehicle_rates(x, c.rates)
    for v in s.vehicles():
        q = s.q(v)
        if not in_window(rates[v - 1], q, s.epsilon):
            report.qos_violations.append((v, float(rates[v - 1]), qos_window(q, s.epsilon)))
    report.type2 = sorted(d2)
    report.type3 = [(v, tuple(int(l) + 1 for l in np.flatnonzero(fold[v - 1]))) for v in sorted(d3)]
    report.type4 = sorted(d4)
    return report
