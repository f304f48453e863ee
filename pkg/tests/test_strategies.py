import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tbrw import kernels
from tbrw.chain import harmonic, hitting_times
from tbrw.generators import make_complete, make_cycle, make_grid, make_path, make_random_connected
from tbrw.graph import WeightedGraph
from tbrw.strategies import (CONTROLLER, RANDOM, ClosestUncovered, EstimationError, EstimatorReport,
                             UniformBias, naive_toward, phi_U, run_trials, simulate_walk,
                             spanning_tree_walk, spanning_walk_strategy, step_law, tbrw_step,
                             trial_rng, weighted_step_law, estimate_cover_time,
                             estimate_hitting_time)


def test_mixture_step_law():
    g = make_path(3)
    law = step_law(g, 0.5, naive_toward(g, [0]), [1])
    assert np.allclose(law, [0.75, 0.0, 0.25])
    assert np.allclose(step_law(g, 0.0, naive_toward(g, [0]), [1]), [0.5, 0, 0.5])
    assert np.allclose(step_law(g, 1.0, naive_toward(g, [0]), [1]), [1, 0, 0])


def test_phi_u_path_example():
    g = make_path(3)
    assert kernels.get("phi_u_p")(1, 1, 0.5) == pytest.approx(1 / 6)
    phi = phi_U(g, [0], 0.5)
    assert np.allclose(step_law(g, 0.5, phi, [1]), [2 / 3, 0, 1 / 3])
    assert np.allclose(weighted_step_law(phi.weighted_graph(), 1), [2 / 3, 0, 1 / 3])


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 30), st.integers(0, 30), st.floats(0.0, 1.0))
def test_phi_u_probability_in_unit_interval(n1, n2, eps):
    p = kernels.get("phi_u_p")(max(n1, 1), n2, eps)
    assert 0.0 <= p <= 1.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.0, 0.99))
def test_phi_u_emulates_weighted_walk(seed, eps):
    # at eps = 1 every weight off U vanishes and the weighted walk is undefined
    rng = np.random.default_rng(seed)
    g = make_random_connected(int(rng.integers(2, 25)), 0.2, seed=rng)
    U = rng.choice(g.n, size=int(rng.integers(1, min(3, g.n) + 1)), replace=False).tolist()
    phi = phi_U(g, U, eps)
    wg = phi.weighted_graph()
    for v in range(g.n):
        assert np.abs(step_law(g, eps, phi, [v]) - weighted_step_law(wg, v)).max() <= 1e-12


def test_naive_tie_break_uniform():
    g = make_grid(3, 3)
    nb, probs = naive_toward(g, [0]).distribution([4])
    assert dict(zip(nb.tolist(), probs.tolist())) == {1: 0.5, 3: 0.5, 5: 0.0, 7: 0.0}


def test_step_sources():
    g = make_path(3)
    rng = np.random.default_rng(0)
    srcs = {tbrw_step(g, 0.5, [1], UniformBias(g), rng)[1] for _ in range(50)}
    assert srcs == {RANDOM, CONTROLLER}


def test_spanning_tree_walk_shape():
    g = make_grid(4, 4)
    w = spanning_tree_walk(g, 5)
    assert len(w) == 2 * g.n - 1 and w[0] == w[-1] == 5
    assert set(w) == set(range(g.n))
    assert all(g.has_edge(a, b) for a, b in zip(w, w[1:]))


def test_k2_cover_time_is_one(backend):
    g = make_complete(2)
    for eps in (0.0, 0.5, 1.0):
        tr = simulate_walk(g, eps, UniformBias(g), 0, np.random.default_rng(1))
        assert tr.cover_time == 1 and tr.steps == 1


def test_complete_graph_cover_is_coupon_collector():
    n = 6
    g = make_complete(n)
    rep = estimate_cover_time(g, 0.0, UniformBias(g), 0, trials=4000, seed=3)
    assert rep.within((n - 1) * harmonic(n - 1), 4.0)


@pytest.mark.parametrize("n,start,expected", [(3, 0, 4.0), (4, 0, 9.0), (3, 1, 5.0)])
def test_path_cover_time_matches_exact(n, start, expected):
    g = make_path(n)
    rep = estimate_cover_time(g, 0.0, UniformBias(g), start, trials=4000, seed=n)
    assert rep.within(expected, 4.0)


def test_phi_u_hitting_matches_weighted_chain():
    g = make_cycle(12)
    eps = 0.4
    phi = phi_U(g, [0], eps)
    exact = hitting_times(phi.weighted_graph(), [0])[6]
    rep = estimate_hitting_time(g, eps, phi, 6, [0], trials=3000, seed=11)
    assert rep.within(exact, 4.0)
    assert hitting_times(WeightedGraph.unweighted(g), [0])[6] > exact


def test_reproducible_and_thread_independent(monkeypatch):
    g = make_grid(5, 5)
    phi = phi_U(g, [0], 0.3)
    monkeypatch.setenv("TBRW_THREADS", "1")
    a = estimate_cover_time(g, 0.3, phi, 12, trials=20, seed=5).values
    monkeypatch.setenv("TBRW_THREADS", "4")
    b = estimate_cover_time(g, 0.3, phi, 12, trials=20, seed=5).values
    assert np.array_equal(a, b)
    assert run_trials(lambda r, j: (j, r.random()), 3, 9, threads=3) == \
        [(j, trial_rng(9, j).random()) for j in range(3)]


@pytest.mark.parametrize("make", [
    lambda g: phi_U(g, [0, 7], 0.35),
    lambda g: naive_toward(g, [3]),
    lambda g: spanning_walk_strategy(g, 0.35, 4),
    lambda g: UniformBias(g),
])
def test_kernel_and_python_engines_agree(make, backend):
    g = make_random_connected(20, 0.12, seed=8)
    phi = make(g)
    a = simulate_walk(g, 0.35, phi, 4, trial_rng(2, 0), engine="kernel")
    b = simulate_walk(g, 0.35, phi, 4, trial_rng(2, 0), engine="python")
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.sources, b.sources)
    assert np.array_equal(a.first_visit, b.first_visit)
    assert a.steps == b.steps


def test_closest_uncovered_covers():
    g = make_grid(4, 4)
    tr = simulate_walk(g, 0.9, ClosestUncovered(g), 0, np.random.default_rng(0))
    assert tr.finished and tr.cover_time is not None
    with pytest.raises(ValueError):
        simulate_walk(g, 0.9, ClosestUncovered(g), 0, np.random.default_rng(0), engine="kernel")


def test_cap_handling(backend):
    g = make_path(40)
    tr = simulate_walk(g, 0.0, UniformBias(g), 0, np.random.default_rng(0), cap=10)
    assert not tr.finished and tr.steps == 10 and tr.cover_time is None
    with pytest.raises(EstimationError):
        estimate_cover_time(g, 0.0, UniformBias(g), 0, trials=3, seed=0, cap=5)
    rep = EstimatorReport.from_values("x", [1.0, 3.0, 99.0], [False, False, True], 0)
    assert rep.trials == 2 and rep.cap_hits == 1 and rep.mean == 2.0


def test_record_limit_truncates_trace():
    g = make_cycle(30)
    tr = simulate_walk(g, 0.0, UniformBias(g), 0, np.random.default_rng(4), record_limit=50)
    assert len(tr.vertices) <= 51 and tr.finished
    assert tr.first_visit.max() == tr.steps


def test_visits_before():
    g = make_path(4)
    tr = simulate_walk(g, 0.0, UniformBias(g), 1, np.random.default_rng(3), target=[3])
    assert tr.vertices[-1] == 3
    assert tr.visits_before([1], [3]) == int((tr.vertices[:-1] == 1).sum())


def test_invalid_arguments():
    g = make_path(3)
    with pytest.raises(ValueError):
        simulate_walk(g, 1.5, UniformBias(g), 0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        phi_U(g, [], 0.5)
    with pytest.raises(ValueError):
        simulate_walk(g, 0.5, UniformBias(g), 0, np.random.default_rng(0), target=[])
