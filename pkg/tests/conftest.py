import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_graph(rng, N, p=0.4, weighted=True):
    from ctst.graph import Graph

    edges = []
    for u in range(N):
        for v in range(u + 1, N):
            if rng.random() < p:
                edges.append((u, v, float(rng.uniform(0.2, 2.0)) if weighted else 1.0))
    return Graph(N, edges)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = sorted(getattr(mod, "RESULTS", []))
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
