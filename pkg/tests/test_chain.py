import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tbrw.chain import (DisconnectedError, ResistanceSolver, SolutionCache, check_commute_identity,
                        effective_resistance, effective_resistance_dense, harmonic, hitting_matrix,
                        hitting_times, layer_bounds, layered_alpha, layered_alpha_from_probabilities,
                        layered_expected_visits, matthews_bound, return_time, stationary,
                        transition_matrix)
from tbrw.generators import make_complete, make_cycle, make_path, make_random_connected, make_random_regular
from tbrw.graph import Graph, WeightedGraph, weight_field


def uw(g):
    return WeightedGraph.unweighted(g)


def random_weighted(n, seed):
    rng = np.random.default_rng(seed)
    g = make_random_connected(n, 0.15, seed=rng)
    return WeightedGraph(g, rng.uniform(0.05, 3.0, g.m))


def test_stationary_examples():
    assert np.allclose(stationary(uw(make_random_regular(10, 3, seed=0))), 0.1)
    assert np.allclose(stationary(uw(make_path(3))), [0.25, 0.5, 0.25])
    wg = WeightedGraph(make_path(3), np.array([1.0, 0.5]))
    assert np.allclose(stationary(wg), [1 / 3, 1 / 2, 1 / 6])
    with pytest.raises(DisconnectedError):
        stationary(uw(Graph(3, [(0, 1)])))


def test_hitting_time_examples():
    assert hitting_times(uw(make_path(3)), [0])[2] == pytest.approx(4.0)
    assert hitting_times(uw(make_complete(3)), [1])[0] == pytest.approx(2.0)
    assert hitting_times(uw(make_path(5)), [2])[2] == 0.0
    with pytest.raises(ValueError):
        hitting_times(uw(make_path(3)), [])


def test_hitting_matrix_agrees_with_column_solves():
    wg = random_weighted(20, 4)
    H = hitting_matrix(wg)
    for v in range(0, 20, 3):
        assert np.allclose(H[:, v], hitting_times(wg, [v]), rtol=1e-9, atol=1e-9)


def test_resistance_examples():
    assert effective_resistance(uw(make_path(2)), 0, 1) == pytest.approx(1.0)
    assert effective_resistance(uw(make_complete(3)), 0, 1) == pytest.approx(2 / 3)
    assert effective_resistance(uw(make_path(7)), 0, 6) == pytest.approx(6.0)
    assert effective_resistance(uw(make_path(3)), 1, 1) == 0.0


def test_resistance_matches_pseudoinverse():
    wg = random_weighted(25, 9)
    solver = ResistanceSolver(wg)
    for u, v in [(0, 5), (3, 24), (10, 11)]:
        assert solver(u, v) == pytest.approx(effective_resistance_dense(wg, u, v), rel=1e-9)


def test_commute_identity_examples():
    assert check_commute_identity(uw(make_complete(3)), 0, 1) < 1e-12
    assert check_commute_identity(uw(make_path(2)), 0, 1) < 1e-12
    wg = random_weighted(20, 1)
    scale = wg.total_weight() * 10
    for u, v in [(0, 19), (4, 7)]:
        assert check_commute_identity(wg, u, v) <= 1e-8 * scale


def test_matthews_examples():
    assert matthews_bound(uw(make_path(4)), [2]) == 0.0
    n = 6
    assert matthews_bound(uw(make_complete(n)), range(n)) == pytest.approx((n - 1) * harmonic(n))
    assert matthews_bound(uw(make_path(3)), range(3)) == pytest.approx(4 * (1 + 1 / 2 + 1 / 3))


def test_layered_alpha_examples():
    assert layered_alpha(0.0) == 4.0
    assert layered_alpha(1 / 50) == pytest.approx(4 - 0.4 / 1.08, rel=1e-14)
    for eps in np.linspace(0, 0.99, 50):
        assert layered_alpha(eps) >= 4 * (1 - 5 * eps)
        assert layered_alpha(eps) == pytest.approx(layered_alpha_from_probabilities(eps), rel=1e-12)


def test_layered_expected_visits_examples():
    assert layered_expected_visits(0.0, 4) == pytest.approx(4.0, rel=1e-12)
    assert layered_expected_visits(0.0, 5) == pytest.approx(16.0, rel=1e-12)
    for eps in (0.03, 0.2):
        a = layered_alpha(eps)
        assert layered_expected_visits(eps, 7) == pytest.approx(a ** 4, rel=1e-9)


def test_return_time_is_inverse_stationary():
    wg = random_weighted(15, 5)
    pi = stationary(wg)
    for u in range(0, 15, 4):
        assert return_time(wg, u) == pytest.approx(1 / pi[u], rel=1e-9)


def test_rayleigh_monotonicity():
    g = make_random_connected(18, 0.25, seed=2)
    base = effective_resistance(uw(g), 0, 17)
    for e in g.edges[:10]:
        h = Graph(g.n, [x for x in g.edges if x != e])
        if h.is_connected():
            assert effective_resistance(uw(h), 0, 17) >= base - 1e-12


def test_layer_bounds_path():
    # on a path with U = {0} each layer is one vertex; T_i = exact hitting time
    g = make_path(6)
    rows = layer_bounds(g, [0], 0.3)
    assert [r.layer for r in rows] == [1, 2, 3, 4, 5]
    for r in rows:
        assert r.T <= r.rhs


def test_solution_cache_concurrent():
    wg = random_weighted(20, 3)
    cache = SolutionCache()
    with ThreadPoolExecutor(4) as ex:
        out = list(ex.map(lambda t: cache.hitting_times(wg, [t % 3]), range(24)))
    assert len(cache) == 3
    for t, h in enumerate(out):
        assert np.array_equal(h, hitting_times(wg, [t % 3]))


def test_large_sparse_path():
    g = make_cycle(2500)
    h = hitting_times(uw(g), [0])
    assert h[1250] == pytest.approx(1250 * 1250, rel=1e-9)


@st.composite
def weighted_graphs(draw):
    n = draw(st.integers(2, 40))
    seed = draw(st.integers(0, 2**31))
    return random_weighted(n, seed)


@settings(max_examples=40, deadline=None)
@given(weighted_graphs())
def test_stationary_detailed_balance(wg):
    pi = stationary(wg)
    P = transition_matrix(wg).toarray()
    assert math.isclose(pi.sum(), 1.0, rel_tol=1e-12)
    F = pi[:, None] * P
    assert np.abs(F - F.T).max() <= 1e-12


@settings(max_examples=30, deadline=None)
@given(weighted_graphs(), st.data())
def test_hitting_one_step_equations(wg, data):
    v = data.draw(st.integers(0, wg.n - 1))
    h = hitting_times(wg, [v])
    P = transition_matrix(wg).toarray()
    res = 1 + P @ h - h
    res[v] = 0
    assert np.abs(res).max() <= 1e-8 * max(1.0, h.max())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.05, 0.95))
def test_weighted_layer_bounds_property(seed, eps):
    rng = np.random.default_rng(seed)
    g = make_random_connected(int(rng.integers(3, 22)), 0.2, seed=rng)
    U = rng.choice(g.n, size=int(rng.integers(1, 4)), replace=False).tolist()
    for r in layer_bounds(g, U, eps):
        assert r.T <= r.rhs * (1 + 1e-12)
    assert hitting_times(weight_field(g, U, eps), U).max() <= 2 * g.m / eps
