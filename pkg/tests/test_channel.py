import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from v2v_alloc.channel import CapacityMap, ChannelModelParams, capacity_of, generate_capacities
from v2v_alloc.errors import GridError, NonFiniteInput
from v2v_alloc.scenario import ChannelGrid, scenario_from_lists

B = 1.26e6


@pytest.mark.parametrize("sinr,expected", [(0.0, 0.0), (1.0, 1.26e6), (3.0, 2.52e6)])
def test_capacity_of_known_points(sinr, expected):
    assert capacity_of(sinr, B) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("sinr,bw", [(float("nan"), B), (1.0, float("inf")), (-1.0, B), (1.0, 0.0)])
def test_capacity_of_rejects_bad_input(sinr, bw):
    with pytest.raises(NonFiniteInput):
        capacity_of(sinr, bw)


@given(st.floats(0, 1e6), st.floats(1e-6, 1e3))
def test_capacity_strictly_increasing(a, delta):
    assert capacity_of(a + delta, B) > capacity_of(a, B)


def _tiny(N=2, K=3, L=2):
    return scenario_from_lists([list(range(1, N + 1))], [1.0] * N, 0.0), ChannelGrid(L=L, K=K)


def test_seeded_generation_is_bitwise_reproducible():
    s, g = _tiny()
    a = generate_capacities(s, g, ChannelModelParams(seed=7))
    b = generate_capacities(s, g, ChannelModelParams(seed=7))
    assert a.rates.tobytes() == b.rates.tobytes()
    assert a == b


def test_different_seeds_differ():
    s, g = _tiny()
    a = generate_capacities(s, g, ChannelModelParams(seed=1))
    b = generate_capacities(s, g, ChannelModelParams(seed=2))
    assert a != b


def test_degenerate_range_gives_exact_rate():
    s, g = _tiny()
    c = generate_capacities(s, g, ChannelModelParams(sinr_min_db=0, sinr_max_db=0))
    assert np.all(c.rates == 1.26e6)


@settings(max_examples=50, deadline=None)
@given(st.floats(-10, 30), st.floats(0, 20), st.integers(0, 2**63 - 1))
def test_rates_within_analytic_bounds(lo, width, seed):
    s, g = _tiny()
    p = ChannelModelParams(sinr_min_db=lo, sinr_max_db=lo + width, seed=seed)
    c = generate_capacities(s, g, p)
    rmin, rmax = p.rate_bounds(g.B)
    assert c.rates.shape == (2, 6)
    assert np.all(c.rates >= rmin * (1 - 1e-12)) and np.all(c.rates <= rmax * (1 + 1e-12))


def test_rates_match_formula_for_drawn_sinr():
    s, g = _tiny()
    c = generate_capacities(s, g, ChannelModelParams(seed=3))
    expected = [[capacity_of(10 ** (db / 10), g.B) for db in row] for row in c.sinr_db]
    assert np.allclose(c.rates, expected, rtol=1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        ChannelModelParams(sinr_min_db=5, sinr_max_db=1)
    with pytest.raises(ValueError):
        ChannelModelParams(distribution="rayleigh")


def test_capacity_map_rejects_bad_matrices():
    g = ChannelGrid(L=1, K=2)
    with pytest.raises(GridError):
        CapacityMap(np.zeros((1, 3)), g)
    with pytest.raises(NonFiniteInput):
        CapacityMap(np.array([[1.0, math.nan]]), g)
    with pytest.raises(NonFiniteInput):
        CapacityMap(np.array([[1.0, -2.0]]), g)


def test_capacity_map_is_read_only():
    c = CapacityMap(np.ones((1, 2)), ChannelGrid(L=1, K=2))
    with pytest.raises(ValueError):
        c.rates[0, 0] = 5.0


def test_default_range_reaches_about_8_4_mbps():
    lo, hi = ChannelModelParams().rate_bounds(B)
    assert lo == pytest.approx(B)  # 0 dB is SINR 1
    assert hi == pytest.approx(B * math.log2(101), rel=1e-12)
    assert 8.3e6 < hi < 8.5e6
