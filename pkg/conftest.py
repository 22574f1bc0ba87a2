"""
Shared graph fixtures and hypothesis strategies
"""
import numpy as np
import pytest
from hypothesis import strategies as st

from src.services.graph_core import build_cycle, build_graph, build_random_connected


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running reproduction of a reference experiment")


@pytest.fixture
def k2():
    """Two vertices, one unit edge, unit measure"""
    return build_graph(2, [(0, 1, 1.0)], [1.0, 1.0])


@pytest.fixture
def c6():
    """C_6 with μ(x) = deg(x) = 2"""
    return build_cycle(6, 1.0, 'normalized')


@pytest.fixture
def ramp6():
    return np.arange(1.0, 7.0)


@st.composite
def connected_graphs(draw, max_vertices=40):
    n = draw(st.integers(min_value=2, max_value=max_vertices))
    seed = draw(st.integers(min_value=0, max_value=2 ** 32 - 1))
    edge_prob = draw(st.floats(min_value=0.0, max_value=0.4))
    return build_random_connected(n, edge_prob=edge_prob, seed=seed)


@st.composite
def graphs_with_fields(draw, max_vertices=20, count=1, low=-5.0, high=5.0):
    g = draw(connected_graphs(max_vertices=max_vertices))
    seed = draw(st.integers(min_value=0, max_value=2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    fields = [rng.uniform(low, high, g.vertex_count) for _ in range(count)]
    return (g, *fields)
