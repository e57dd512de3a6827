import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from multilayer_bp.graph import build_network

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def set_partitions(n):
    """Every partition of ``range(n)`` as a restricted-growth label list."""
    def grow(prefix, top):
        if len(prefix) == n:
            yield list(prefix)
            return
        for v in range(top + 2):
            yield from grow(prefix + [v], max(top, v))
    if n == 0:
        yield []
        return
    yield from grow([0], 0)


def brute_force_modularity(net, gamma, omega, score):
    """``(best value, best labels)`` over all set partitions of the node-layers."""
    best, arg = -np.inf, None
    for labels in set_partitions(net.n):
        value = score(net, labels, gamma, omega)
        if value > best + 1e-12:
            best, arg = value, labels
    return best, arg


@pytest.fixture
def triangle():
    return build_network([(0, 0, 1, 1.0), (0, 1, 2, 1.0), (0, 0, 2, 1.0)], "none", 3, 1)


@pytest.fixture
def two_triangles():
    rows = [(0, 0, 1), (0, 1, 2), (0, 0, 2), (0, 3, 4), (0, 4, 5), (0, 3, 5), (0, 2, 3)]
    return build_network(rows, "none", 6, 1)


def clique_rows(members, layer=0):
    return [(layer, u, v, 1.0) for u, v in itertools.combinations(members, 2)]


ACCEPTANCE = {}


@pytest.fixture
def report():
    """Record a criterion outcome for the end-of-run summary; returns ``passed``."""
    def record(criterion, passed, detail):
        ACCEPTANCE[criterion] = (bool(passed), detail)
        print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} ({detail})")
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if passed else 'FAIL'} ({detail})")
