import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from golden import PRINTED_G_MINUS, PRINTED_G_PLUS, PRINTED_H_MINUS_COLUMN, PRINTED_H_PLUS_COLUMN, PRINTED_Q
from oracles import conflicts_by_loops, fold_by_loops, random_clusters
from v2v_alloc.channel import CapacityMap
from v2v_alloc.constraints import (
    Assignment,
    build_constraint_system,
    build_G,
    build_H,
    build_Q,
    fold_to_subframes,
    in_window,
    verify,
)
from v2v_alloc.errors import ShapeMismatch
from v2v_alloc.scenario import ChannelGrid, scenario_from_lists

MBPS = 1e6


class TestFold:
    def test_zero(self):
        g = ChannelGrid(L=2, K=3)
        assert not fold_to_subframes(Assignment.empty(3, g), g).any()

    def test_direct_count(self):
        g = ChannelGrid(L=2, K=3)
        assert fold_to_subframes(Assignment([[1, 1, 0, 0, 0, 1]]), g).tolist() == [[2, 1]]

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            fold_to_subframes(Assignment([[1, 0, 1]]), ChannelGrid(L=2, K=3))

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 5), st.integers(1, 4), st.integers(1, 5), st.randoms(use_true_random=False))
    def test_matches_summation_oracle(self, N, K, L, rnd):
        x = [[rnd.random() < 0.4 for _ in range(K * L)] for _ in range(N)]
        g = ChannelGrid(L=L, K=K)
        assert fold_to_subframes(Assignment(x), g).tolist() == fold_by_loops(x, K, L)


class TestBuilders:
    def test_G_matches_printed_example(self, worked_example):
        _, _, cs = worked_example
        assert cs.G_minus.tolist() == PRINTED_G_MINUS
        assert cs.G_plus.tolist() == PRINTED_G_PLUS
        assert cs.G_minus[0, 0] == 1 and cs.G_plus[0, 1] == 1

    def test_G_empty(self):
        plus, minus = build_G([], 4)
        assert plus.shape == (0, 4) and minus.shape == (0, 4)

    def test_G_one_hot_rows(self):
        plus, minus = build_G([(1, 2), (3, 4)], 4)
        assert minus.tolist() == [[1, 0, 0, 0], [0, 0, 1, 0]]
        assert plus.tolist() == [[0, 1, 0, 0], [0, 0, 0, 1]]

    def test_Q_product_matches_printed(self):
        q_plus, q_minus = build_Q(3)
        assert (q_minus.T @ q_plus).tolist() == PRINTED_Q

    def test_Q_single_subframe(self):
        q_plus, q_minus = build_Q(1)
        assert (q_minus.T @ q_plus).tolist() == [[0]]

    def test_Q_marks_each_subframe_pair_once(self):
        q_plus, q_minus = build_Q(4)
        product = q_minus.T @ q_plus
        ones = {(int(a), int(b)) for a, b in zip(*np.nonzero(product))}
        assert ones == {(l, lp) for l in range(4) for lp in range(4) if l > lp}

    def test_H_matches_printed_example_transposed(self, worked_example):
        _, _, cs = worked_example
        assert cs.H_minus.shape == (1, 4)
        assert cs.H_minus[0].tolist() == PRINTED_H_MINUS_COLUMN
        assert cs.H_plus[0].tolist() == PRINTED_H_PLUS_COLUMN

    def test_H_empty_and_two_pairs(self):
        plus, minus = build_H([], 4)
        assert plus.shape == (0, 4)
        plus, minus = build_H([(1, 3), (2, 4)], 4)
        assert minus.tolist() == [[1, 0, 0, 0], [0, 1, 0, 0]]
        assert plus.tolist() == [[0, 0, 1, 0], [0, 0, 0, 1]]

    def test_rows_are_one_hot(self, reference_config):
        cs = build_constraint_system(reference_config.scenario, reference_config.grid)
        for m in (cs.G_plus, cs.G_minus, cs.H_plus, cs.H_minus):
            assert np.all(m.sum(axis=1) == 1)


def _fig1():
    """Topology with clusters {1..6}, {5..9}, {10, 11}."""
    s = scenario_from_lists([[1, 2, 3, 4, 5, 6], [5, 6, 7, 8, 9], [10, 11]], [MBPS] * 11, 0.0)
    g = ChannelGrid(L=4, K=3)
    c = CapacityMap(np.full((11, 12), MBPS), g)
    return s, g, c, build_constraint_system(s, g)


def _one_subchannel_each(N, g):
    """Every vehicle on its own subchannel in its own subframe would need N subframes; build empty."""
    return np.zeros((N, g.n_subchannels), dtype=bool)


class TestVerify:
    def test_type2_same_subframe_pair(self):
        s, g, c, cs = _fig1()
        x = _one_subchannel_each(11, g)
        x[9, 0] = True  # v10, subframe 1
        x[10, 1] = True  # v11, subframe 1
        report = verify(Assignment(x), s, g, c, cs)
        assert report.type2 == [((10, 11), 1)]
        assert not report.type3 and not report.type4

    def test_type3_spanning_subframes(self):
        s, g, c, cs = _fig1()
        x = _one_subchannel_each(11, g)
        x[2, 0] = x[2, 3] = True
        report = verify(Assignment(x), s, g, c, cs)
        assert report.type3 == [(3, (1, 2))]
        assert not report.type2 and not report.type4

    def test_type4_hop_pair_same_subchannel(self):
        s, g, c, cs = _fig1()
        x = _one_subchannel_each(11, g)
        x[0, 4] = x[8, 4] = True
        report = verify(Assignment(x), s, g, c, cs)
        assert report.type4 == [((1, 9), 5)]
        assert not report.type2 and not report.type3

    def test_empty_assignment_violates_every_qos(self):
        s, g, c, cs = _fig1()
        report = verify(Assignment.empty(11, g), s, g, c, cs)
        assert len(report.qos_violations) == 11
        assert report.conflict_free and not report.is_empty

    def test_qos_window_boundaries_are_closed(self):
        s = scenario_from_lists([[1]], [5 * MBPS], 1 * MBPS)
        g = ChannelGrid(L=1, K=2)
        cs = build_constraint_system(s, g)
        for rates, ok in (([4 * MBPS, 9 * MBPS], True), ([6 * MBPS, 9 * MBPS], True), ([3.9 * MBPS, 9 * MBPS], False)):
            c = CapacityMap(np.array([rates]), g)
            report = verify(Assignment([[1, 0]]), s, g, c, cs)
            assert report.is_empty is ok

    def test_in_window_tolerance(self):
        q = 3e6
        assert in_window(q * (1 + 0.5e-9), q, 0.0)
        assert not in_window(q * (1 + 2e-9), q, 0.0)

    def test_shape_mismatch(self, worked_example):
        s, g, cs = worked_example
        c = CapacityMap(np.zeros((4, 9)), g)
        with pytest.raises(ShapeMismatch):
            verify(Assignment(np.zeros((3, 9))), s, g, c, cs)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matrix_and_direct_checks_agree_with_loop_oracle(seed):
    rng = np.random.default_rng(seed)
    N, L, K = int(rng.integers(1, 7)), int(rng.integers(1, 6)), int(rng.integers(1, 4))
    clusters = random_clusters(rng, N, int(rng.integers(1, 4)))
    s = scenario_from_lists(clusters, [MBPS] * N, 0.0, N=N)
    g = ChannelGrid(L=L, K=K)
    cs = build_constraint_system(s, g)
    c = CapacityMap(np.full((N, K * L), MBPS), g)
    x = rng.random((N, K * L)) < rng.uniform(0.05, 0.6)
    report = verify(Assignment(x), s, g, c, cs)
    t2, t3, t4 = conflicts_by_loops(x.tolist(), K, L, [p.as_tuple() for p in cs.intra_pairs],
                                    [p.as_tuple() for p in cs.hop_pairs])
    assert set(report.type2) == t2
    assert {v for v, _ in report.type3} == t3
    assert set(report.type4) == t4


class TestAssignmentIO:
    def test_csv_round_trip(self):
        a = Assignment(np.random.default_rng(0).random((4, 6)) < 0.5)
        assert Assignment.from_csv(a.to_csv()) == a

    def test_rejects_non_binary(self):
        with pytest.raises(ShapeMismatch):
            Assignment.from_csv("0,1,2\n")

    def test_rejects_ragged(self):
        with pytest.raises(ShapeMismatch):
            Assignment.from_csv("0,1\n1\n")

    def test_file_round_trip(self, tmp_path):
        a = Assignment([[0, 1], [1, 0]])
        a.save(tmp_path / "x.csv")
        assert Assignment.load(tmp_path / "x.csv") == a
