"""Three-stage heuristic: cluster ordering, random subframe matching, per-vehicle subset-sum.

Clusters are processed largest first. Each cluster's vehicles get distinct
random subframes (vehicles already placed by an earlier overlapping cluster
keep theirs), then each newly placed vehicle picks the subset of its
subframe's subchannels with the largest total rate not exceeding its demand.
Subchannels already taken by one-hop partners are excluded from that choice.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .constraints import ConstraintSystem, check_consistent
from .errors import InstanceTooLarge, InsufficientSubframes
from .result import SolveResult, Status, result_from_assignment
from .scenario import ChannelGrid, Scenario

DEFAULT_RESOLUTION = 10e3
BRUTE_ITEM_LIMIT = 20
MIKP_STREAM = 1


def sort_clusters(s: Scenario) -> list[int]:
    """1-based cluster indices by descending size, ties by ascending index."""
    return sorted(range(1, s.J + 1), key=lambda j: (-len(s.clusters[j - 1]), j))


@dataclass(frozen=True)
class SubframeMatching:
    """Vehicle -> 1-based subframe, plus the subframes each processed cluster occupies."""

    assigned: dict[int, int] = field(default_factory=dict)
    cluster_subframes: dict[int, frozenset] = field(default_factory=dict)

    def subframe(self, vehicle: int) -> int | None:
        return self.assigned.get(vehicle)


def match_subframes(cluster, already_fixed: SubframeMatching, L: int, rng: np.random.Generator,
                    cluster_index: int | None = None) -> SubframeMatching:
    """Place the cluster's unmatched vehicles on distinct unused subframes uniformly at random."""
    members = sorted(cluster)
    assigned = dict(already_fixed.assigned)
    kept = {assigned[v] for v in members if v in assigned}
    pending = [v for v in members if v not in assigned]
    free = [l for l in range(1, L + 1) if l not in kept]
    if len(pending) > len(free):
        raise InsufficientSubframes(
            f"cluster {cluster_index if cluster_index is not None else members} needs {len(pending)} "
            f"subframes but only {len(free)} of {L} are free"
        )
    if pending:
        picks = rng.choice(len(free), size=len(pending), replace=False)
        for v, idx in zip(pending, picks):
            assigned[v] = free[int(idx)]
    used = dict(already_fixed.cluster_subframes)
    key = cluster_index if cluster_index is not None else len(used) + 1
    used[key] = frozenset(assigned[v] for v in members)
    return SubframeMatching(assigned, used)


@dataclass(frozen=True)
class KnapsackInstance:
    """Subset-sum over (subchannel id, rate) items; forbidden ids are skipped."""

    item_rates: tuple[tuple[int, float], ...]
    budget: float
    forbidden: frozenset = frozenset()

    def __post_init__(self):
        if not self.budget > 0:
            raise ValueError(f"knapsack budget must be > 0, got {self.budget!r}")
        object.__setattr__(self, "item_rates", tuple((int(k), float(r)) for k, r in self.item_rates))
        object.__setattr__(self, "forbidden", frozenset(self.forbidden))

    def allowed(self) -> list[tuple[int, float]]:
        return sorted((k, r) for k, r in self.item_rates if k not in self.forbidden)


def _better(subset_a, sum_a, subset_b, sum_b) -> bool:
    """Larger sum wins; then fewer items; then lexicographically smaller ids."""
    if sum_a != sum_b:
        return sum_a > sum_b
    if len(subset_a) != len(subset_b):
        return len(subset_a) < len(subset_b)
    return subset_a < subset_b


def knapsack_brute(inst: KnapsackInstance) -> tuple[tuple[int, ...], float]:
    """Exact subset-sum optimum by trying every subset."""
    items = inst.allowed()
    if len(items) > BRUTE_ITEM_LIMIT:
        raise InstanceTooLarge(f"{len(items)} items exceed the brute-force limit {BRUTE_ITEM_LIMIT}")
    best, best_sum = (), 0.0
    for size in range(1, len(items) + 1):
        for combo in itertools.combinations(items, size):
            total = math.fsum(r for _, r in combo)
            ids = tuple(k for k, _ in combo)
            if total <= inst.budget and _better(ids, total, best, best_sum):
                best, best_sum = ids, total
    return best, best_sum


def knapsack_select(inst: KnapsackInstance, resolution: float = DEFAULT_RESOLUTION) -> tuple[tuple[int, ...], float]:
    """Subset-sum by dynamic programming over rates floored to ``resolution``.

    Each table cell keeps, among subsets with that quantized weight, the one
    with the smallest true sum. The answer is the largest true sum within the
    budget, so the budget is never exceeded and the loss against the exact
    optimum is below ``resolution`` times the item count.
    """
    if not resolution > 0:
        raise ValueError(f"resolution must be > 0, got {resolution!r}")
    items = [(k, r) for k, r in inst.allowed() if r <= inst.budget]
    if not items:
        return (), 0.0
    cap = int(math.floor(inst.budget / resolution))
    weights = [min(int(math.floor(r / resolution)), cap) for _, r in items]

    # per cell: true sum (inf when unreachable) and the item mask achieving it
    sums = np.full(cap + 1, np.inf)
    masks = np.zeros(cap + 1, dtype=object)
    sums[0] = 0.0
    masks[0] = 0
    for idx, ((_, rate), w) in enumerate(zip(items, weights)):
        src = slice(0, cap + 1 - w)
        dst = slice(w, cap + 1)
        cand = sums[src] + rate
        cur = sums[dst]
        take = cand < cur
        ties = np.flatnonzero((cand == cur) & np.isfinite(cand))
        new_masks = masks[src] | (1 << idx)
        if ties.size:
            ids_of = lambda m: tuple(items[i][0] for i in range(len(items)) if m >> i & 1)
            for t in ties:
                a, b = new_masks[t], masks[w + t]
                if _better(ids_of(a), 0.0, ids_of(b), 0.0):
                    take[t] = True
        # cand and new_masks are fresh arrays, so overlapping src/dst is safe
        cand_sel, mask_sel = cand[take], new_masks[take]
        sums[dst][take] = cand_sel
        masks[dst][take] = mask_sel

    best_ids, best_sum = (), 0.0
    for cell in np.flatnonzero(np.isfinite(sums)):
        m = masks[cell]
        ids = tuple(items[i][0] for i in range(len(items)) if m >> i & 1)
        total = math.fsum(items[i][1] for i in range(len(items)) if m >> i & 1)
        if total <= inst.budget and _better(ids, total, best_ids, best_sum):
            best_ids, best_sum = ids, total
    return best_ids, best_sum


def mikp_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), MIKP_STREAM])


def run_mikp(s: Scenario, g: ChannelGrid, c, cs: ConstraintSystem, seed: int,
             resolution: float = DEFAULT_RESOLUTION) -> SolveResult:
    """Run the three stages; status is ``heuristic`` on success, ``infeasible`` if matching fails."""
    check_consistent(s, g, c, cs)
    start = time.perf_counter()
    rng = mikp_rng(seed)
    K = g.K
    x = np.zeros((s.N, g.n_subchannels), dtype=bool)
    partners: dict[int, list[int]] = {}
    for pair in cs.hop_pairs:
        partners.setdefault(pair.first, []).append(pair.second)
        partners.setdefault(pair.second, []).append(pair.first)

    matching = SubframeMatching()
    allocated: set[int] = set()
    order = sort_clusters(s)
    for j in order:
        members = s.clusters[j - 1]
        try:
            matching = match_subframes(members, matching, g.L, rng, cluster_index=j)
        except InsufficientSubframes as exc:
            res = result_from_assignment(
                Status.INFEASIBLE, None, c.rates, s.N,
                diagnostics={"error": "InsufficientSubframes", "message": str(exc), "cluster": j},
            )
            res.elapsed = time.perf_counter() - start
            return res
        for v in members:
            if v in allocated:
                continue
            allocated.add(v)
            l = matching.assigned[v]
            ids = range((l - 1) * K + 1, l * K + 1)
            forbidden = {k for p in partners.get(v, ()) for k in ids if x[p - 1, k - 1]}
            inst = KnapsackInstance(tuple((k, float(c.rates[v - 1, k - 1])) for k in ids), s.q(v), frozenset(forbidden))
            chosen, _ = knapsack_select(inst, resolution)
            for k in chosen:
                x[v - 1, k - 1] = True

    subframes = {v: matching.assigned[v] for v in sorted(matching.assigned)}
    res = result_from_assignment(
        Status.HEURISTIC, x, c.rates, s.N,
        diagnostics={"cluster_order": order, "subframes": subframes},
    )
    res.elapsed = time.perf_counter() - start
    return res
