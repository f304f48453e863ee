import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tbrw.generators import make_complete, make_cycle, make_grid, make_path, make_random_connected
from tbrw.graph import (Graph, GraphFormatError, WeightedGraph, ball, ball_sizes, bfs_distances,
                        distance_matrix, edge_distance, graph_power, induced_radius,
                        weight_field)


def test_canonical_edges_and_csr():
    g = Graph(4, [(2, 1), (0, 1), (3, 2)])
    assert g.edges == ((0, 1), (1, 2), (2, 3))
    assert g.neighbors(1).tolist() == [0, 2]
    assert g.degree().tolist() == [1, 2, 2, 1]
    assert g.has_edge(2, 1) and not g.has_edge(0, 3)


@pytest.mark.parametrize("edges", [[(0, 0)], [(0, 5)], [(-1, 2)]])
def test_invalid_edges_rejected(edges):
    with pytest.raises(ValueError):
        Graph(3, edges)


def test_constructor_collapses_repeated_pairs():
    assert Graph(3, [(0, 1), (1, 0)]).m == 1


def test_text_round_trip_is_byte_stable():
    g = make_random_connected(30, 0.1, seed=3)
    text = g.dumps()
    h = Graph.loads(text)
    assert h == g
    assert h.dumps() == text


@pytest.mark.parametrize("text,line", [
    ("3 2\n0 1\n", 3),
    ("3 1\n0 x\n", 2),
    ("3 2\n0 1\n1 0\n", 3),
    ("3 1\n1 1\n", 2),
    ("3 1\n0 9\n", 2),
    ("a b\n", 1),
])
def test_malformed_text_reports_line(text, line):
    with pytest.raises(GraphFormatError) as exc:
        Graph.loads(text)
    assert exc.value.lineno == line


def test_bfs_distances_path():
    g = make_path(5)
    assert bfs_distances(g, [0]).tolist() == [0, 1, 2, 3, 4]
    assert bfs_distances(g, [0, 4]).tolist() == [0, 1, 2, 1, 0]
    assert bfs_distances(g, [0], limit=2).tolist() == [0, 1, 2, -1, -1]
    with pytest.raises(ValueError):
        bfs_distances(g, [])


def test_ball_examples():
    g = make_grid(3, 3)
    assert ball(g, 4, 1) == frozenset({1, 3, 4, 5, 7})
    assert ball(g, 0, 0) == frozenset({0})
    assert ball_sizes(g, 1).tolist() == [3, 4, 3, 4, 5, 4, 3, 4, 3]


def test_graph_power_examples():
    g = make_path(5)
    assert graph_power(g, 1) == g
    assert graph_power(g, 2).m == 4 + 3
    assert graph_power(g, 4) == make_complete(5)


def test_induced_radius_examples():
    g = make_path(5)
    assert induced_radius(g, [2])[0] == 0
    assert induced_radius(g, [1, 2, 3]) == (1, 2)
    assert math.isinf(induced_radius(g, [0, 2])[0])
    with pytest.raises(ValueError):
        induced_radius(g, [])


def test_edge_distance_examples():
    g = make_path(4)
    assert edge_distance(g, (0, 1), [0]) == 0
    assert edge_distance(g, (2, 3), [0]) == 2
    assert all(edge_distance(g, e, range(4)) == 0 for e in g.edges)


def test_weight_field_examples():
    g = make_path(4)
    assert np.allclose(weight_field(g, [0], 0.5).weights, [1.0, 0.5, 0.25])
    assert np.all(weight_field(g, [0], 0.0).weights == 1.0)
    assert np.all(weight_field(g, range(4), 0.7).weights == 1.0)
    with pytest.raises(ValueError):
        weight_field(g, [0], 1.5)


def test_weighted_graph_validation():
    g = make_path(3)
    with pytest.raises(ValueError):
        WeightedGraph(g, np.array([1.0]))
    with pytest.raises(ValueError):
        WeightedGraph(g, np.array([1.0, -1.0]))
    wg = WeightedGraph(g, np.array([1.0, 3.0]))
    assert wg.weight(2, 1) == 3.0
    nb, p = wg.transition_row(1)
    assert nb.tolist() == [0, 2] and np.allclose(p, [0.25, 0.75])


def test_weights_text_round_trip():
    g = make_cycle(5)
    wg = WeightedGraph(g, np.linspace(0.1, 1.0, 5))
    back = WeightedGraph.loads_weights(g, wg.dumps())
    assert np.array_equal(back.weights, wg.weights)


def test_distance_matrix_matches_bfs():
    g = make_random_connected(25, 0.08, seed=1)
    D = distance_matrix(g)
    for v in range(g.n):
        assert np.array_equal(D[v], bfs_distances(g, [v]))


@st.composite
def graphs(draw, max_n=30):
    n = draw(st.integers(2, max_n))
    p = draw(st.floats(0.0, 0.4))
    seed = draw(st.integers(0, 2**31))
    return make_random_connected(n, p, seed=seed)


@settings(max_examples=40, deadline=None)
@given(graphs(), st.integers(1, 4))
def test_power_monotone_and_ball_nesting(g, k):
    small = set(graph_power(g, k).edges)
    big = set(graph_power(g, k + 1).edges)
    assert small <= big
    for v in range(0, g.n, 3):
        assert ball(g, v, k) <= ball(g, v, k + 1)
        assert len(ball(g, v, 0)) == 1
    diam = int(distance_matrix(g).max())
    assert graph_power(g, max(diam, 1)) == make_complete(g.n)


@settings(max_examples=40, deadline=None)
@given(graphs(), st.data())
def test_radius_zero_iff_singleton(g, data):
    U = data.draw(st.sets(st.integers(0, g.n - 1), min_size=1, max_size=g.n))
    r, c = induced_radius(g, U)
    assert (r == 0) == (len(U) == 1)
    assert c in U


@settings(max_examples=30, deadline=None)
@given(graphs(max_n=30), st.data(), st.floats(0.05, 0.95))
def test_layer_edges_have_layer_weight(g, data, eps):
    # every edge at a vertex u with dist(u, U) = i - 1 that stays in G_i has weight (1-eps)^(i-1)
    U = data.draw(st.sets(st.integers(0, g.n - 1), min_size=1, max_size=4))
    d = bfs_distances(g, U)
    wg = weight_field(g, U, eps)
    for (a, b), w in zip(g.edges, wg.weights):
        for u, x in ((a, b), (b, a)):
            i = d[u] + 1
            if d[x] > i - 1:
                assert w == pytest.approx((1 - eps) ** (i - 1), rel=1e-12)
