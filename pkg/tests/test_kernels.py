import numpy as np
import pytest

from tbrw import _pykernels, kernels
from tbrw.cover import singleton_cover
from tbrw.explorer import build_plan, choose_k
from tbrw.generators import make_cycle, make_grid, make_random_connected
from tbrw.graph import bfs_distances

ck = pytest.importorskip("tbrw._ckernels")


@pytest.fixture
def g():
    return make_random_connected(60, 0.05, seed=12)


def test_backend_selected_at_import():
    assert kernels.BACKEND in ("cython", "python")
    assert kernels.compiled_available()
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


def test_bfs_and_balls_agree(g):
    mask = np.zeros(g.n, dtype=np.uint8)
    mask[[0, 17]] = 1
    for limit in (-1, 0, 2):
        assert np.array_equal(ck.bfs(g.indptr, g.indices, mask, limit),
                              _pykernels.bfs(g.indptr, g.indices, mask, limit))
    assert np.array_equal(ck.all_pairs(g.indptr, g.indices), _pykernels.all_pairs(g.indptr, g.indices))
    for r in (0, 1, 3):
        assert np.array_equal(ck.ball_sizes(g.indptr, g.indices, r),
                              _pykernels.ball_sizes(g.indptr, g.indices, r))


def test_phi_u_p_agrees():
    for n1 in range(1, 6):
        for n2 in range(0, 6):
            for eps in (0.0, 0.3, 0.99):
                assert ck.phi_u_p(n1, n2, eps) == _pykernels.phi_u_p(n1, n2, eps)


@pytest.mark.parametrize("mode", [kernels.MODE_PHI_U, kernels.MODE_NAIVE, kernels.MODE_SIMPLE])
@pytest.mark.parametrize("stop", [kernels.STOP_COVER, kernels.STOP_HIT])
def test_walk_schedule_agrees(g, mode, stop):
    fields = np.stack([bfs_distances(g, [3]), bfs_distances(g, [40])]).astype(np.int32)
    leg_field = np.array([0, 1], dtype=np.int32)
    leg_target = np.array([3, 40], dtype=np.int32)
    smask = np.zeros(g.n, dtype=np.uint8)
    smask[55] = 1
    out = []
    for mod in (ck, _pykernels):
        rv = np.full(5001, -1, dtype=np.int32)
        rf = np.zeros(5001, dtype=np.uint8)
        rng = np.random.Generator(np.random.PCG64(99))
        t, first, done = mod.walk_schedule(g.indptr, g.indices, 0.4, mode, fields, leg_field,
                                           leg_target, 10, stop, smask, 100000, rng, rv, rf)
        # the generator state afterwards may differ: the Python side draws in chunks
        out.append((t, first, done, rv, rf))
    a, b = out
    assert a[0] == b[0] and a[2] == b[2]
    for x, y in zip(a[1:], b[1:]):
        assert np.array_equal(x, y)


def test_explore_walk_agrees():
    g = make_cycle(30)
    eps = 0.5
    c = singleton_cover(g)
    c.power = choose_k(eps, g.n)
    plan = build_plan(g, eps, 4, c)
    args = plan.kernel_args()
    out = []
    for mod in (ck, _pykernels):
        rv = np.full(200001, -1, dtype=np.int32)
        ro = np.full(200001, -1, dtype=np.int32)
        rng = np.random.Generator(np.random.PCG64(5))
        t, ct, L, done = mod.explore_walk(g.indptr, g.indices, eps, *args, plan.root, plan.start,
                                          200000, rng, rv, ro)
        out.append((t, ct, L, done, rv, ro))
    a, b = out
    assert a[0] == b[0] and a[1] == b[1] and a[3] == b[3]
    for x, y in zip((a[2], a[4], a[5]), (b[2], b[4], b[5])):
        assert np.array_equal(x, y)


def test_cap_respected_by_both():
    g = make_grid(10, 10)
    fields = np.zeros((1, g.n), dtype=np.int32)
    for mod in (ck, _pykernels):
        t, first, done = mod.walk_schedule(g.indptr, g.indices, 0.0, kernels.MODE_SIMPLE, fields,
                                           np.zeros(1, np.int32), np.full(1, -1, np.int32), 0,
                                           kernels.STOP_COVER, None, 25,
                                           np.random.Generator(np.random.PCG64(0)))
        assert t == 25 and not done
