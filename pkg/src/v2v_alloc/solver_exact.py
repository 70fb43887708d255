"""Exact maximization of total rate under the QoS window and Types II-IV.

Every vehicle transmits in a single subframe, so a vehicle's decision reduces
to one (subframe, subchannel subset) option whose rate lies in its QoS window,
or to staying silent when the window contains zero. Vehicles only interact
through intra-cluster and one-hop pairs, so the conflict graph splits into
independent components that are solved separately.

Within a component the default strategy enumerates *patterns*: compatible
sets of options that share one subframe. A solution is then a choice of at
most one pattern per subframe covering each vehicle exactly once, found by
depth-first branch-and-bound. Upper bounds come from relaxing the coverage
constraints with multipliers tuned by minimizing a log-sum-exp smoothing of
the relaxed dual. Every cluster is a clique of the Type II graph, so its
mandatory members need distinct subframes; at each node a bipartite matching
filter drops patterns that put a member in a subframe no complete matching
uses, and patterns that occupy a subframe every matching needs for that
cluster without including one of its members. Branching picks the vehicle
with the fewest open subframes. If the pattern count exceeds
``max_patterns`` the component falls back to a plain vehicle-by-vehicle
search with a simple additive bound.

Ties between equal objectives go to the lexicographically smallest ``x``.
Because components are independent this equals the global lexicographic
minimum among optimal assignments.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.sparse.csgraph import breadth_first_order, connected_components, maximum_bipartite_matching

from .constraints import Assignment, ConstraintSystem, check_consistent, in_window, verify
from .errors import InstanceTooLarge, InternalCheckerDisagreement
from .result import SolveResult, Status, result_from_assignment
from .scenario import ChannelGrid, Scenario

BRUTE_FORCE_LIMIT = 48
BRUTE_FORCE_ROW_LIMIT = 12
DEFAULT_MAX_PATTERNS = 250_000
# Patterns below this count are searched with the cheap initial multipliers.
DUAL_MIN_PATTERNS = 64
_NEG = -1e300

_MBPS = 1e-6


@dataclass(frozen=True)
class SolverOptions:
    """Search limits (0 means unlimited) and strategy knobs.

    ``prune=False`` disables every bound-based cut; it exists so tests can
    confirm that pruning never changes the optimum.
    """

    time_limit: float = 0.0
    node_limit: int = 0
    strategy: str = "auto"
    prune: bool = True
    max_patterns: int = DEFAULT_MAX_PATTERNS

    def __post_init__(self):
        if self.time_limit < 0 or self.node_limit < 0:
            raise ValueError("time_limit and node_limit must be nonnegative")
        if self.strategy not in ("auto", "patterns", "items"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.max_patterns < 1:
            raise ValueError("max_patterns must be positive")


class _Budget:
    def __init__(self, opt: SolverOptions, start: float):
        self.deadline = start + opt.time_limit if opt.time_limit > 0 else math.inf
        self.node_limit = opt.node_limit or math.inf
        self.nodes = 0
        self.stopped = False

    def tick(self) -> bool:
        """Count a node; True once a limit has been hit."""
        if self.stopped:
            return True
        self.nodes += 1
        if self.nodes > self.node_limit:
            self.stopped = True
        elif (self.nodes & 127) == 0 and time.perf_counter() > self.deadline:
            self.stopped = True
        return self.stopped


class _TooManyPatterns(Exception):
    pass


def _subset_table(K: int) -> np.ndarray:
    masks = np.arange(1, 1 << K)
    return ((masks[:, None] >> np.arange(K)) & 1).astype(bool)


def vehicle_options(rates_row: np.ndarray, g: ChannelGrid, q: float, epsilon: float) -> list[tuple[int, int, float]]:
    """All (subframe, subset mask, rate) choices whose rate sits in the QoS window.

    Subframes are 0-based; bit j of the mask selects subchannel j of the subframe.
    """
    K = g.K
    table = _subset_table(K)
    lo, hi = q - epsilon, q + epsilon
    slack = 1e-6 * q + 1e-9
    out = []
    for l in range(g.L):
        seg = rates_row[l * K:(l + 1) * K]
        approx = table.astype(float) @ seg
        near = np.flatnonzero((approx >= lo - slack) & (approx <= hi + slack))
        for idx in near:
            mask = int(idx) + 1
            rate = math.fsum(seg[j] for j in range(K) if mask >> j & 1)
            if in_window(rate, q, epsilon):
                out.append((l, mask, rate))
    return out


def _components(N: int, cs: ConstraintSystem) -> list[list[int]]:
    parent = list(range(N + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for pair in itertools.chain(cs.intra_pairs, cs.hop_pairs):
        ra, rb = find(pair.first), find(pair.second)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for v in range(1, N + 1):
        groups.setdefault(find(v), []).append(v)
    return sorted(groups.values())


class _Component:
    """Shared data for searching one connected component."""

    def __init__(self, vehicles, options, optional, intra, hop, g: ChannelGrid, clusters=()):
        self.vehicles = vehicles
        self.n = len(vehicles)
        self.local = {v: i for i, v in enumerate(vehicles)}
        self.options = [options[v] for v in vehicles]
        self.optional = np.array([optional[v] for v in vehicles], dtype=bool)
        self.g = g
        self.intra = [set() for _ in vehicles]
        self.hop = [set() for _ in vehicles]
        for a, b in intra:
            if a in self.local:
                self.intra[self.local[a]].add(self.local[b])
                self.intra[self.local[b]].add(self.local[a])
        for a, b in hop:
            if a in self.local:
                self.hop[self.local[a]].add(self.local[b])
                self.hop[self.local[b]].add(self.local[a])
        # clusters are cliques of the Type II graph: members need distinct subframes
        self.cliques = [np.array([self.local[v] for v in members if v in self.local and not optional[v]])
                        for members in clusters]
        self.cliques = [m for m in self.cliques if len(m) > 1]
        scale = sum(max((o[2] for o in opts), default=0.0) for opts in self.options) * _MBPS
        self.tol = 1e-9 * max(1.0, scale)
        self.best = _NEG
        self.best_key: bytes | None = None
        self.best_choice: list | None = None

    def x_bytes(self, choice) -> bytes:
        K, KL = self.g.K, self.g.n_subchannels
        x = np.zeros((self.n, KL), dtype=bool)
        for i, opt in enumerate(choice):
            if opt is not None:
                l, mask, _ = opt
                for j in range(K):
                    if mask >> j & 1:
                        x[i, l * K + j] = True
        return x.tobytes()

    def offer(self, value: float, choice_fn) -> None:
        """Consider a complete solution; ``choice_fn`` builds it lazily."""
        if value > self.best + self.tol:
            choice = choice_fn()
            self.best, self.best_choice, self.best_key = value, choice, self.x_bytes(choice)
        elif value >= self.best - self.tol:
            choice = choice_fn()
            key = self.x_bytes(choice)
            if key < self.best_key:
                self.best, self.best_choice, self.best_key = max(value, self.best), choice, key

    def floor(self) -> float:
        return self.best - self.tol


def _enumerate_patterns(comp: _Component, cap: int):
    """Compatible option sets per subframe, grouped by subframe in order."""
    subs, vals, members = [], [], []
    for l in range(comp.g.L):
        items = [(i, mask, rate * _MBPS, (l, mask, rate))
                 for i in range(comp.n) for (ll, mask, rate) in comp.options[i] if ll == l]
        chosen: list[tuple[int, int]] = []

        def dfs(start, used, value):
            for j in range(start, len(items)):
                i, mask, val, opt = items[j]
                if used >> i & 1:
                    continue
                if any(i2 in comp.intra[i] or (i2 in comp.hop[i] and mask & m2) for i2, m2, _ in chosen):
                    continue
                chosen.append((i, mask, opt))
                subs.append(l)
                vals.append(value + val)
                members.append(tuple((a, o) for a, _, o in chosen))
                if len(subs) > cap:
                    raise _TooManyPatterns
                dfs(j + 1, used | (1 << i), value + val)
                chosen.pop()

        dfs(0, 0, 0.0)
    return np.array(subs, dtype=np.int64), np.array(vals, dtype=float), members


def _smoothed_dual(val, inc, incT, starts, seg_id, nonempty, lam0, optional, L):
    """Minimize a log-sum-exp smoothing of the relaxed dual; returns multipliers."""
    n = inc.shape[1]
    P = len(val)
    scale = max(float(val.max()), 1e-12) if P else 1.0
    bound = float(np.abs(val).sum()) + scale
    bounds = [(0.0 if optional[i] else -bound, bound) for i in range(n)]
    ne_starts = starts[nonempty]
    lam = np.clip(lam0, [b[0] for b in bounds], [b[1] for b in bounds])

    for rel in (0.08, 0.025, 0.008, 0.0025, 8e-4, 2.5e-4):
        tau = rel * scale

        def f(lam, tau=tau):
            z = (val - inc @ lam) / tau
            m = np.maximum(np.maximum.reduceat(z, ne_starts), 0.0)
            e = np.exp(z - m[seg_id])
            S = np.exp(-m) + np.add.reduceat(e, ne_starts)
            total = lam.sum() + tau * float((m + np.log(S)).sum())
            w = e / S[seg_id]
            return total, 1.0 - incT @ w

        res = minimize(f, lam, jac=True, method="L-BFGS-B", bounds=bounds, options={"maxiter": 500})
        lam = res.x
    return lam


def _alldiff_support(sub: np.ndarray):
    """Edges of a row-to-column bipartite graph that lie in some row-perfect matching.

    Returns None when no matching covers every row. Uses the alternating-path
    characterization: a non-matching edge (v, l) is usable iff l is free, l
    reaches a free column, or v and l share a strongly connected component of
    the graph with non-matching edges row->column and matching edges
    column->row.
    """
    nr, nc = sub.shape
    if nr > int(sub.any(axis=0).sum()):
        return None, None
    match = maximum_bipartite_matching(sp.csr_matrix(sub), perm_type="column")
    if (match < 0).any():
        return None, None
    rr, cc = np.nonzero(sub)
    matched = match[rr] == cc
    # nodes 0..nr-1 are rows, nr..nr+nc-1 are columns
    src = np.r_[rr[~matched], nr + match]
    dst = np.r_[nr + cc[~matched], np.arange(nr)]
    D = sp.csr_matrix((np.ones(len(src)), (src, dst)), shape=(nr + nc, nr + nc))
    _, comp = connected_components(D, directed=True, connection="strong")
    free = np.ones(nc, dtype=bool)
    free[match] = False
    reach_free = np.zeros(nr + nc + 1, dtype=bool)
    if free.any():
        # walk backwards from a super-source attached to the free columns
        fc = nr + np.flatnonzero(free)
        src_r = np.r_[dst, np.full(len(fc), nr + nc)]
        dst_r = np.r_[src, fc]
        R = sp.csr_matrix((np.ones(len(src_r)), (src_r, dst_r)), shape=(nr + nc + 1, nr + nc + 1))
        reach_free[breadth_first_order(R, nr + nc, return_predecessors=False)] = True
    ok = matched | reach_free[nr + cc] | (comp[rr] == comp[nr + cc])
    support = np.zeros_like(sub)
    support[rr[ok], cc[ok]] = True
    # a column covered by every maximum matching cannot reach a free column
    essential = ~free & ~reach_free[nr:nr + nc]
    return support, essential


def _relaxed_bound(red, starts_ne, lam_sum) -> float:
    mx = np.maximum(np.maximum.reduceat(red, starts_ne), 0.0)
    return lam_sum + float(mx.sum())


def _search_patterns(comp: _Component, cap: int, budget: _Budget, prune: bool) -> dict:
    subs, vals, members = _enumerate_patterns(comp, cap)
    n, L, P = comp.n, comp.g.L, len(subs)
    info = {"strategy": "patterns", "patterns": P}
    if P == 0:
        if comp.optional.all():
            comp.offer(0.0, lambda: [None] * n)
        return info

    rows, cols = [], []
    for r, mem in enumerate(members):
        for i, _ in mem:
            rows.append(r)
            cols.append(i)
    inc = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(P, n))
    incT = inc.T.tocsr()
    starts = np.searchsorted(subs, np.arange(L))
    ends = np.r_[starts[1:], P]
    nonempty = ends > starts
    starts_ne = starts[nonempty]
    seg_id = np.repeat(np.arange(L), ends - starts)

    lam = np.zeros(n)
    single = np.diff(inc.indptr) == 1
    for r in np.flatnonzero(single):
        i = inc.indices[inc.indptr[r]]
        lam[i] = max(lam[i], vals[r])
    if P >= DUAL_MIN_PATTERNS:
        lam = _smoothed_dual(vals, inc, incT, starts, seg_id, nonempty, lam, comp.optional, L)
    red = vals - inc @ lam
    lamv = inc @ lam
    root = _relaxed_bound(red, starts_ne, float(lam.sum()))
    info["root_bound_mbps"] = root
    if prune and root < -comp.tol:
        return info

    rows_of = [incT.indices[incT.indptr[i]:incT.indptr[i + 1]] for i in range(n)]
    coo = inc.tocoo()
    ent_row, ent_veh, ent_sub = coo.row, coo.col, subs[coo.row]
    optional_int = comp.optional.astype(np.int64)
    ent_key = ent_veh * L + ent_sub
    clique_ind = np.zeros((n, max(1, len(comp.cliques))))
    for j, clique in enumerate(comp.cliques):
        clique_ind[clique, j] = 1.0
    in_clique = (inc @ clique_ind) > 0

    def _propagate(valid, decided):
        """Filter patterns by all-different support of every cluster, to a fixpoint."""
        while True:
            hit = valid[ent_row]
            avail = np.zeros((n, L), dtype=bool)
            avail[ent_veh[hit], ent_sub[hit]] = True
            banned = np.zeros((n, L), dtype=bool)
            drop = np.zeros(P, dtype=bool)
            for j, clique in enumerate(comp.cliques):
                rows = clique[~decided[clique]]
                if len(rows) < 2:
                    continue
                support, essential = _alldiff_support(avail[rows])
                if support is None:
                    return None, None
                banned[rows] |= avail[rows] & ~support
                drop |= essential[subs] & ~in_clique[:, j]
            drop[ent_row[banned.ravel()[ent_key] & hit]] = True
            drop &= valid
            if not drop.any():
                return valid, avail
            valid = valid & ~drop
    big = 1 << 40

    def rec(valid, decided, cur, lam_sum, chosen):
        if budget.tick():
            return
        if decided.all():
            def build():
                choice = [None] * n
                for r in chosen:
                    for i, opt in members[r]:
                        choice[i] = opt
                return choice
            comp.offer(cur, build)
            return
        rv = np.where(valid, red, _NEG)
        mx = np.full(L, _NEG)
        mx[nonempty] = np.maximum.reduceat(rv, starts_ne)
        mx = np.maximum(mx, 0.0)
        ub = cur + lam_sum + float(mx.sum())
        if prune and ub < max(comp.floor(), cur - comp.tol):
            return
        slack = mx[subs] - red
        if prune and comp.best_key is not None:
            valid = valid & (ub - slack >= comp.floor())
        if comp.cliques:
            valid, avail = _propagate(valid, decided)
            if valid is None:
                return
        counts = (incT @ valid.astype(np.int64)) + optional_int
        if comp.cliques:
            # fail first on open subframes, then on remaining patterns
            counts = counts + (avail.sum(axis=1) + optional_int) * (1 << 20)
        counts[decided] = big
        i = int(np.argmin(counts))
        if counts[i] == 0:
            return
        cand = rows_of[i][valid[rows_of[i]]]
        children = [(float(slack[r]), 0, int(r)) for r in cand]
        if comp.optional[i]:
            children.append((float(lam[i]), 1, -1))
        children.sort(key=lambda ch: (ch[0], ch[1], ch[2]))
        for child_slack, is_skip, r in children:
            if prune and ub - child_slack < comp.floor():
                break
            nv = valid.copy()
            nd = decided.copy()
            if is_skip:
                nv[rows_of[i]] = False
                nd[i] = True
                rec(nv, nd, cur, lam_sum - lam[i], chosen)
            else:
                l = subs[r]
                nv[starts[l]:ends[l]] = False
                for a, _ in members[r]:
                    nv[rows_of[a]] = False
                    nd[a] = True
                chosen.append(r)
                rec(nv, nd, cur + vals[r], lam_sum - lamv[r], chosen)
                chosen.pop()
            if budget.stopped:
                return

    rec(np.ones(P, dtype=bool), np.zeros(n, dtype=bool), 0.0, float(lam.sum()), [])
    return info


def _search_items(comp: _Component, qos: list[float], budget: _Budget, prune: bool) -> dict:
    """Vehicle-by-vehicle search: descending demand, options by descending rate."""
    n = comp.n
    order = sorted(range(n), key=lambda i: (-qos[i], i))
    opts = [sorted(comp.options[i], key=lambda o: -o[2]) for i in range(n)]
    best_val = [max((o[2] for o in opts[i]), default=0.0) * _MBPS for i in range(n)]
    suffix = np.zeros(n + 1)
    for idx in range(n - 1, -1, -1):
        suffix[idx] = suffix[idx + 1] + best_val[order[idx]]
    choice: list = [None] * n

    def rec(idx, cur):
        if budget.tick():
            return
        if idx == n:
            comp.offer(cur, lambda: list(choice))
            return
        if prune and cur + suffix[idx] < comp.floor():
            return
        i = order[idx]
        for opt in opts[i]:
            l, mask, rate = opt
            val = rate * _MBPS
            if prune and cur + val + suffix[idx + 1] < comp.floor():
                break
            clash = False
            for j in comp.intra[i]:
                if choice[j] is not None and choice[j][0] == l:
                    clash = True
                    break
            if not clash:
                for j in comp.hop[i]:
                    cj = choice[j]
                    if cj is not None and cj[0] == l and cj[1] & mask:
                        clash = True
                        break
            if clash:
                continue
            choice[i] = opt
            rec(idx + 1, cur + val)
            choice[i] = None
            if budget.stopped:
                return
        if comp.optional[i]:
            rec(idx + 1, cur)

    rec(0, 0.0)
    return {"strategy": "items"}


def _choice_to_x(N: int, g: ChannelGrid, comp_choices) -> np.ndarray:
    x = np.zeros((N, g.n_subchannels), dtype=bool)
    for vehicles, choice in comp_choices:
        for v, opt in zip(vehicles, choice):
            if opt is None:
                continue
            l, mask, _ = opt
            for j in range(g.K):
                if mask >> j & 1:
                    x[v - 1, l * g.K + j] = True
    return x


def solve_exact(s: Scenario, g: ChannelGrid, c, cs: ConstraintSystem,
                opt: SolverOptions | None = None) -> SolveResult:
    """Maximize total rate subject to the QoS window and Types II-IV."""
    opt = opt or SolverOptions()
    check_consistent(s, g, c, cs)
    start = time.perf_counter()
    budget = _Budget(opt, start)

    options = {}
    optional = {}
    for v in s.vehicles():
        q = s.q(v)
        options[v] = vehicle_options(c.rates[v - 1], g, q, s.epsilon)
        optional[v] = in_window(0.0, q, s.epsilon)

    def finish(status, x, diag):
        res = result_from_assignment(status, x, c.rates, s.N, nodes_explored=budget.nodes, diagnostics=diag)
        res.elapsed = time.perf_counter() - start
        return res

    stuck = [v for v in s.vehicles() if not options[v] and not optional[v]]
    if stuck:
        return finish(Status.INFEASIBLE, None, {"reason": f"vehicle {stuck[0]} has no option inside its QoS window"})

    intra = [p.as_tuple() for p in cs.intra_pairs]
    hop = [p.as_tuple() for p in cs.hop_pairs]
    comps = _components(s.N, cs)
    diag = {"components": len(comps), "searches": []}
    solved = []
    timed_out = False
    for vehicles in comps:
        comp = _Component(vehicles, options, optional, intra, hop, g, s.clusters)
        strategy = opt.strategy
        info = None
        if strategy in ("auto", "patterns"):
            try:
                info = _search_patterns(comp, opt.max_patterns, budget, opt.prune)
            except _TooManyPatterns:
                if strategy == "patterns":
                    raise
                info = None
        if info is None:
            info = _search_items(comp, [s.q(v) for v in vehicles], budget, opt.prune)
        info["vehicles"] = len(vehicles)
        diag["searches"].append(info)
        if budget.stopped:
            timed_out = True
            solved.append((vehicles, comp.best_choice))
            continue
        if comp.best_choice is None:
            diag["reason"] = f"no conflict-free assignment for vehicles {vehicles[0]}..{vehicles[-1]}"
            return finish(Status.INFEASIBLE, None, diag)
        solved.append((vehicles, comp.best_choice))

    if timed_out:
        if any(ch is None for _, ch in solved) or len(solved) < len(comps):
            return finish(Status.TIMEOUT, None, diag)
        return finish(Status.TIMEOUT, _choice_to_x(s.N, g, solved), diag)
    return finish(Status.OPTIMAL, _choice_to_x(s.N, g, solved), diag)


def brute_force_solve(s: Scenario, g: ChannelGrid, c, cs: ConstraintSystem,
                      opt: SolverOptions | None = None) -> SolveResult:
    """Exhaustive optimum over raw boolean x for tiny instances.

    Every 0/1 row of every vehicle is enumerated and filtered by the QoS
    window and the single-subframe rule, which only involve that row. The
    survivors are combined with pairwise Type II and Type IV checks. Rows are
    bitmasks with subchannel 1 as the most significant bit, so comparing the
    tuples of masks is the lexicographic order on x. The winner is re-checked
    with ``verify``.
    """
    check_consistent(s, g, c, cs)
    N, K, KL = s.N, g.K, g.n_subchannels
    if KL > BRUTE_FORCE_ROW_LIMIT or N * KL > BRUTE_FORCE_LIMIT:
        raise InstanceTooLarge(f"K*L = {KL}, N*K*L = {N * KL} exceed the brute-force limits "
                               f"{BRUTE_FORCE_ROW_LIMIT} and {BRUTE_FORCE_LIMIT}")
    start = time.perf_counter()
    frame_masks = [sum(1 << (KL - 1 - k) for k in range(l * K, (l + 1) * K)) for l in range(g.L)]

    rows_per_vehicle = []
    for v in s.vehicles():
        keep = []
        rates = c.rates[v - 1]
        for bits in range(1 << KL):
            frames = [l for l, fm in enumerate(frame_masks) if bits & fm]
            if len(frames) > 1:
                continue
            rate = math.fsum(rates[k] for k in range(KL) if bits >> (KL - 1 - k) & 1)
            if in_window(rate, s.q(v), s.epsilon):
                keep.append((bits, frames[0] if frames else -1, rate))
        rows_per_vehicle.append(keep)

    intra = {p.as_tuple() for p in cs.intra_pairs}
    hop = {p.as_tuple() for p in cs.hop_pairs}
    checks = [[(j, (j + 1, i + 1) in intra, (j + 1, i + 1) in hop) for j in range(i)] for i in range(N)]
    best = {"value": -math.inf, "x": None}
    chosen: list = []
    nodes = 0
    scale = float(c.rates.sum()) + 1.0
    tol = 1e-9 * scale

    def rec(i):
        nonlocal nodes
        nodes += 1
        if i == N:
            value = math.fsum(r for _, _, r in chosen)
            x = tuple(bits for bits, _, _ in chosen)
            if value > best["value"] + tol:
                best["value"], best["x"] = value, x
            elif value >= best["value"] - tol and x < best["x"]:
                best["value"], best["x"] = max(value, best["value"]), x
            return
        for row in rows_per_vehicle[i]:
            bits, frame, _ = row
            for j, is_intra, is_hop in checks[i]:
                bits2, frame2, _ = chosen[j]
                if is_intra and frame >= 0 and frame == frame2:
                    break
                if is_hop and bits & bits2:
                    break
            else:
                chosen.append(row)
                rec(i + 1)
                chosen.pop()

    rec(0)
    if best["x"] is None:
        res = result_from_assignment(Status.INFEASIBLE, None, c.rates, N, nodes_explored=nodes)
    else:
        x = np.array([[bits >> (KL - 1 - k) & 1 for k in range(KL)] for bits in best["x"]], dtype=bool)
        if not verify(Assignment(x), s, g, c, cs).is_empty:
            raise InternalCheckerDisagreement("brute-force winner fails verification")
        res = result_from_assignment(Status.OPTIMAL, x, c.rates, N, nodes_explored=nodes)
    res.elapsed = time.perf_counter() - start
    return res
