import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_graph
from ctst.errors import (
    DuplicateEdgeError,
    LengthMismatchError,
    NegativeWeightError,
    NodeOutOfRangeError,
    SelfLoopError,
)
from ctst.graph import Graph, build_graph, smoothness


def test_degrees_are_weighted_row_sums():
    g = build_graph(3, [(0, 1, 1.0), (1, 2, 2.0)])
    np.testing.assert_array_equal(g.degrees, [1.0, 3.0, 2.0])


def test_empty_edge_set():
    g = build_graph(4, [])
    np.testing.assert_array_equal(g.degrees, [0, 0, 0, 0])
    assert g.average_degree == 0.0


@pytest.mark.parametrize(
    "edges, err",
    [
        ([(0, 0, 1.0)], SelfLoopError),
        ([(0, 1, -1.0)], NegativeWeightError),
        ([(0, 1, 0.0)], NegativeWeightError),
        ([(0, 2, 1.0)], NodeOutOfRangeError),
        ([(0, 1, 1.0), (1, 0, 2.0)], DuplicateEdgeError),
    ],
)
def test_invalid_edges(edges, err):
    with pytest.raises(err):
        build_graph(2, edges)


def test_weight_lookup_symmetric():
    g = Graph(3, [(2, 0, 1.5)])
    assert g.weight(0, 2) == g.weight(2, 0) == 1.5
    assert g.weight(0, 1) == 0.0
    assert g.edges == ((0, 2, 1.5),)


def test_default_unit_weights():
    g = Graph(3, [(0, 1), (1, 2)])
    assert all(w == 1.0 for _, _, w in g.edges)


def test_degree_accessor():
    star = Graph(4, [(0, 1), (0, 2), (0, 3)])
    assert star.degree(0) == 3.0
    assert Graph(2).degree(1) == 0.0
    assert Graph(3, [(0, 1, 0.5), (0, 2, 1.5)]).degree(0) == 2.0
    with pytest.raises(NodeOutOfRangeError):
        star.degree(4)


def test_smoothness_examples():
    path = Graph(3, [(0, 1), (1, 2)])
    assert smoothness(path, [3.0, 3.0, 3.0]) == 0.0
    assert smoothness(path, [0.0, 1.0, 0.0]) == 2.0
    assert smoothness(Graph(2, [(0, 1, 2.0)]), [0.0, 3.0]) == 18.0
    with pytest.raises(LengthMismatchError):
        smoothness(path, [1.0, 2.0])


def test_smoothness_zero_iff_constant_per_component():
    g = Graph(4, [(0, 1), (2, 3)])
    assert smoothness(g, [1, 1, 5, 5]) == 0.0
    assert smoothness(g, [1, 2, 5, 5]) > 0


@given(st.integers(2, 12), st.integers(0, 2**31 - 1), st.floats(-5, 5), st.floats(-3, 3))
def test_smoothness_properties(N, seed, shift, scale):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, N)
    s = rng.normal(size=N)
    base = smoothness(g, s)
    assert base >= 0
    assert smoothness(g, s + shift) == pytest.approx(base, rel=1e-9, abs=1e-9)
    assert smoothness(g, scale * s) == pytest.approx(scale**2 * base, rel=1e-9, abs=1e-12)
    W = g.adjacency()
    brute = 0.5 * sum(W[u, v] * (s[u] - s[v]) ** 2 for u in range(N) for v in range(N))
    assert base == pytest.approx(brute, rel=1e-12, abs=1e-12)


def test_laplacian_and_components():
    g = Graph(5, [(0, 1), (1, 2), (3, 4, 2.0)])
    L = g.laplacian()
    np.testing.assert_allclose(L.sum(axis=1), 0.0)
    assert g.connected_components() == [[0, 1, 2], [3, 4]]
    assert g.connected_components([0, 2, 3, 4]) == [[0], [2], [3, 4]]
    assert g.hop_distances(0) == {0: 0, 1: 1, 2: 2}


def test_round_trip_dict():
    g = Graph(4, [(0, 1, 0.5), (2, 3)])
    assert Graph.from_dict(g.to_dict()) == g
    assert Graph.from_dict({"num_nodes": 3, "edges": [[0, 1]]}).weight(0, 1) == 1.0
