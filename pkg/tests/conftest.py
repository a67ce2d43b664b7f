import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from curvegnn.datasets import random_graph
from curvegnn.graph import WeightedGraph

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@st.composite
def graphs(draw, min_n=2, max_n=9, connected=False):
    """Random weighted graphs; with ``connected`` a spanning path is always present."""
    n = draw(st.integers(min_n, max_n))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    if connected:
        chosen = sorted(set(chosen) | {(i, i + 1) for i in range(n - 1)})
    weights = draw(
        st.lists(
            st.floats(0.25, 4.0, allow_nan=False),
            min_size=len(chosen),
            max_size=len(chosen),
        )
    )
    return WeightedGraph(n, [(u, v, w) for (u, v), w in zip(chosen, weights)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_graphs():
    return [random_graph(np.random.default_rng(s), 8, p=0.4) for s in range(5)]


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
