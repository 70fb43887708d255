import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import random_clusters  # noqa: E402
from v2v_alloc.channel import CapacityMap  # noqa: E402
from v2v_alloc.config import default_config  # noqa: E402
from v2v_alloc.constraints import build_constraint_system  # noqa: E402
from v2v_alloc.scenario import ChannelGrid, scenario_from_lists  # noqa: E402

MBPS = 1e6


@pytest.fixture(scope="session")
def reference_config():
    return default_config()


@pytest.fixture
def worked_example():
    s = scenario_from_lists([[1, 2, 3], [1, 2, 4]], [MBPS] * 4, 0.0)
    g = ChannelGrid(L=3, K=3)
    return s, g, build_constraint_system(s, g)


def micro_instance(rng: np.random.Generator, eps_mode: int, max_nkl: int = 48):
    """Random instance with N<=4, K<=3, L<=4 and N*K*L<=max_nkl.

    eps_mode 0 uses epsilon=0 with demands set to reachable subset sums,
    1 uses 0.5 Mbps and 2 a window wide enough to be inactive.
    """
    while True:
        N, K, L = int(rng.integers(1, 5)), int(rng.integers(1, 4)), int(rng.integers(1, 5))
        if N * K * L <= max_nkl:
            break
    J = int(rng.integers(1, 4))
    clusters = random_clusters(rng, N, J)
    g = ChannelGrid(L=L, K=K)
    rates = rng.uniform(0, 8 * MBPS, size=(N, K * L))
    if eps_mode == 0:
        eps = 0.0
        qos = []
        for i in range(N):
            l, mask = int(rng.integers(L)), int(rng.integers(1, 1 << K))
            qos.append(float(sum(rates[i, l * K + j] for j in range(K) if mask >> j & 1)) or MBPS)
    elif eps_mode == 1:
        eps = 0.5 * MBPS
        qos = rng.uniform(1, 12, size=N) * MBPS
    else:
        eps = 1e3 * MBPS
        qos = rng.uniform(1, 12, size=N) * MBPS
    s = scenario_from_lists(clusters, list(qos), eps, N=N)
    c = CapacityMap(rates, g)
    return s, g, c, build_constraint_system(s, g)


# Filled by test_acceptance.py; printed once at the end of the session.
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
