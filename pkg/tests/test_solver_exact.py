import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import micro_instance
from oracles import matchings_by_enumeration
from v2v_alloc.channel import CapacityMap, ChannelModelParams, generate_capacities
from v2v_alloc.constraints import Assignment, build_constraint_system, verify
from v2v_alloc.errors import InconsistentInputs, InstanceTooLarge
from v2v_alloc.result import Status
from v2v_alloc.scenario import ChannelGrid, scenario_from_lists
from v2v_alloc.solver_exact import (
    SolverOptions, _alldiff_support, brute_force_solve, solve_exact, vehicle_options,
)
from v2v_alloc.solver_mikp import run_mikp

MBPS = 1e6


def _instance(clusters, qos, eps, rates, L, K):
    s = scenario_from_lists(clusters, qos, eps)
    g = ChannelGrid(L=L, K=K)
    c = CapacityMap(np.array(rates, dtype=float), g)
    return s, g, c, build_constraint_system(s, g)


class TestSmallExamples:
    def test_single_vehicle_picks_in_window_subset(self):
        inst = _instance([[1]], [8 * MBPS], 0.5 * MBPS, [[3 * MBPS, 4 * MBPS, 5 * MBPS]], L=1, K=3)
        for solve in (solve_exact, brute_force_solve):
            res = solve(*inst)
            assert res.status is Status.OPTIMAL
            assert res.objective == pytest.approx(8 * MBPS)
            assert res.assignment.x.tolist() == [[True, False, True]]

    def test_unreachable_demand_is_infeasible(self):
        inst = _instance([[1]], [20 * MBPS], 0.5 * MBPS, [[3 * MBPS, 4 * MBPS, 5 * MBPS]], L=1, K=3)
        for solve in (solve_exact, brute_force_solve):
            res = solve(*inst)
            assert res.status is Status.INFEASIBLE and res.assignment is None

    def test_two_vehicles_take_their_best_subframes(self):
        inst = _instance([[1, 2]], [5 * MBPS, 5 * MBPS], 0.0, [[5 * MBPS, 4 * MBPS], [4 * MBPS, 5 * MBPS]], L=2, K=1)
        for solve in (solve_exact, brute_force_solve):
            res = solve(*inst)
            assert res.status is Status.OPTIMAL
            assert res.objective == pytest.approx(10 * MBPS)
            assert res.assignment.x.tolist() == [[True, False], [False, True]]

    def test_all_zero_capacities_infeasible(self):
        inst = _instance([[1, 2]], [2 * MBPS, 3 * MBPS], 1 * MBPS, np.zeros((2, 4)), L=2, K=2)
        assert brute_force_solve(*inst).status is Status.INFEASIBLE
        assert solve_exact(*inst).status is Status.INFEASIBLE

    def test_inactive_window_maximizes_total_rate(self):
        # window contains 0 and every achievable total, so only Types II-IV bind
        rates = [[1 * MBPS, 2 * MBPS, 3 * MBPS, 4 * MBPS], [4 * MBPS, 3 * MBPS, 2 * MBPS, 1 * MBPS]]
        inst = _instance([[1, 2]], [1 * MBPS, 1 * MBPS], 100 * MBPS, rates, L=2, K=2)
        res = brute_force_solve(*inst)
        assert res.status is Status.OPTIMAL
        # best: one vehicle takes subframe 2 (7 Mbps), the other subframe 1 (7 Mbps)
        assert res.objective == pytest.approx(14 * MBPS)
        assert solve_exact(*inst).objective == pytest.approx(res.objective)

    def test_optional_vehicle_may_stay_silent(self):
        # vehicle 2 cannot fit anywhere once vehicle 1 takes the only subframe
        inst = _instance([[1, 2]], [5 * MBPS, 1 * MBPS], 1 * MBPS, [[5 * MBPS], [9 * MBPS]], L=1, K=1)
        res = solve_exact(*inst)
        assert res.status is Status.OPTIMAL
        assert res.assignment.x.tolist() == [[True], [False]]


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 5), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_alldiff_support_matches_matching_enumeration(nr, nc, seed):
    rng = np.random.default_rng(seed)
    adj = rng.random((nr, nc)) < rng.uniform(0.2, 0.9)
    support, essential = _alldiff_support(adj)
    edges, always = matchings_by_enumeration(adj.tolist())
    if edges is None:
        assert support is None
        return
    assert {(int(r), int(c)) for r, c in zip(*np.nonzero(support))} == edges
    assert set(np.flatnonzero(essential).tolist()) == always


def test_vehicle_options_respect_window_and_subframes():
    g = ChannelGrid(L=2, K=2)
    row = np.array([1.0, 2.0, 3.0, 4.0]) * MBPS
    opts = vehicle_options(row, g, 3 * MBPS, 0.0)
    assert sorted((l, m) for l, m, _ in opts) == [(0, 3), (1, 1)]


def test_brute_force_guard():
    inst = _instance([[1, 2]], [MBPS, MBPS], 0.0, np.zeros((2, 15)), L=5, K=3)
    with pytest.raises(InstanceTooLarge):
        brute_force_solve(*inst)
    inst = _instance([[1, 2, 3, 4, 5]], [MBPS] * 5, 0.0, np.zeros((5, 10)), L=5, K=2)
    with pytest.raises(InstanceTooLarge):
        brute_force_solve(*inst)


def test_inconsistent_inputs():
    s, g, c, cs = _instance([[1]], [MBPS], 0.0, [[MBPS, MBPS]], L=1, K=2)
    other = ChannelGrid(L=2, K=1)
    with pytest.raises(InconsistentInputs):
        solve_exact(s, g, CapacityMap(np.ones((1, 2)), other), cs)


@pytest.mark.parametrize("eps_mode", [0, 1, 2])
def test_agrees_with_brute_force(eps_mode):
    rng = np.random.default_rng(1000 + eps_mode)
    for _ in range(70):
        inst = micro_instance(rng, eps_mode)
        expected = brute_force_solve(*inst)
        got = solve_exact(*inst)
        assert got.status is expected.status
        assert got.objective == pytest.approx(expected.objective, rel=1e-6, abs=1e-6)
        if expected.assignment is not None:
            assert got.assignment == expected.assignment


@pytest.mark.parametrize("strategy", ["patterns", "items"])
def test_pruning_never_changes_the_optimum(strategy):
    rng = np.random.default_rng(77)
    for i in range(60):
        inst = micro_instance(rng, i % 3)
        pruned = solve_exact(*inst, SolverOptions(strategy=strategy))
        full = solve_exact(*inst, SolverOptions(strategy=strategy, prune=False))
        assert pruned.status is full.status
        assert pruned.objective == pytest.approx(full.objective, rel=1e-9)
        assert pruned.assignment == full.assignment


def test_strategies_agree_beyond_brute_force_size():
    rng = np.random.default_rng(5)
    for _ in range(15):
        N, L, K = 6, 5, 2
        clusters = [[1, 2, 3, 4], [3, 4, 5, 6]]
        q = rng.choice([2.0, 4.0, 6.0], size=N) * MBPS
        s = scenario_from_lists(clusters, list(q), 1.5 * MBPS)
        g = ChannelGrid(L=L, K=K)
        c = CapacityMap(rng.uniform(0, 5, size=(N, K * L)) * MBPS, g)
        cs = build_constraint_system(s, g)
        a = solve_exact(s, g, c, cs, SolverOptions(strategy="patterns"))
        b = solve_exact(s, g, c, cs, SolverOptions(strategy="items"))
        assert a.status is b.status
        assert a.objective == pytest.approx(b.objective, rel=1e-9)
        assert a.assignment == b.assignment


def test_reference_scale_optimum_is_sound(reference_config):
    s, g = reference_config.scenario, reference_config.grid
    cs = build_constraint_system(s, g)
    c = generate_capacities(s, g, ChannelModelParams(seed=0))
    res = solve_exact(s, g, c, cs, SolverOptions(time_limit=60))
    assert res.status in (Status.OPTIMAL, Status.INFEASIBLE)
    if res.status is Status.OPTIMAL:
        assert verify(res.assignment, s, g, c, cs).is_empty
        assert res.objective == pytest.approx(res.per_vehicle_rate.sum(), rel=1e-12)
        assert res.objective == pytest.approx(float((c.rates * res.assignment.x).sum()), rel=1e-12)


def test_node_limit_yields_timeout_with_sound_incumbent(reference_config):
    s, g = reference_config.scenario, reference_config.grid
    cs = build_constraint_system(s, g)
    for seed in range(5):
        c = generate_capacities(s, g, ChannelModelParams(seed=seed))
        res = solve_exact(s, g, c, cs, SolverOptions(node_limit=3))
        assert res.status in (Status.TIMEOUT, Status.INFEASIBLE)
        if res.assignment is not None:
            assert verify(res.assignment, s, g, c, cs).conflict_free


def test_dominates_heuristic_when_heuristic_meets_windows():
    rng = np.random.default_rng(11)
    compared = 0
    for i in range(200):
        s, g, c, cs = micro_instance(rng, 2)
        exact = solve_exact(s, g, c, cs)
        heur = run_mikp(s, g, c, cs, seed=i)
        if heur.assignment is None:
            continue
        report = verify(heur.assignment, s, g, c, cs)
        assert report.conflict_free
        if report.is_empty:
            compared += 1
            assert exact.status is Status.OPTIMAL
            assert exact.objective >= heur.objective - 1e-6
    assert compared > 20


def test_lexicographic_tie_break():
    # identical subchannels: the smallest x puts the 1s as late as possible
    inst = _instance([[1]], [MBPS], 0.0, [[MBPS, MBPS, MBPS, MBPS]], L=2, K=2)
    res = solve_exact(*inst)
    assert res.assignment == Assignment([[0, 0, 0, 1]])
    assert brute_force_solve(*inst).assignment == res.assignment
