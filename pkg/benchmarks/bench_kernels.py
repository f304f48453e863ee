"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Each row runs the same call with the same seed on both back ends, checks
that the outputs agree and reports the best wall time of ``--repeat`` runs.
"""
import argparse
import time

import numpy as np

from tbrw import _pykernels, kernels
from tbrw.cover import singleton_cover
from tbrw.explorer import build_plan, choose_k
from tbrw.generators import make_cycle, make_grid, make_random_regular
from tbrw.graph import bfs_distances


def _walk_case(g, mode):
    fields = bfs_distances(g, [g.n - 1])[None, :].astype(np.int32)
    leg_field = np.zeros(1, dtype=np.int32)
    leg_target = np.full(1, -1, dtype=np.int32)

    def run(mod):
        rng = np.random.Generator(np.random.PCG64(1))
        return mod.walk_schedule(g.indptr, g.indices, 0.3, mode, fields, leg_field, leg_target,
                                 0, kernels.STOP_COVER, None, 50_000_000, rng)[:1]
    return run


def _explore_case(g, eps):
    c = singleton_cover(g)
    c.power = choose_k(eps, g.n)
    plan = build_plan(g, eps, 0, c)
    args = plan.kernel_args()

    def run(mod):
        rng = np.random.Generator(np.random.PCG64(2))
        return mod.explore_walk(g.indptr, g.indices, eps, *args, plan.root, plan.start,
                                50_000_000, rng, None, None)[:2]
    return run


def _bfs_case(g):
    mask = np.zeros(g.n, dtype=np.uint8)
    mask[0] = 1

    def run(mod):
        return mod.bfs(g.indptr, g.indices, mask, -1)
    return run


def _balls_case(g, radius):
    def run(mod):
        return mod.ball_sizes(g.indptr, g.indices, radius)
    return run


def _best(fn, mod, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(mod)
        best = min(best, time.perf_counter() - t0)
    return best, out


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not kernels.compiled_available():
        raise SystemExit("compiled kernels are not built; run `python3 setup.py build_ext --inplace`")
    from tbrw import _ckernels

    grid = make_grid(64, 64)
    reg = make_random_regular(2048, 3, seed=0)
    cases = [
        ("walk_schedule phi_u grid12", _walk_case(make_grid(12, 12), kernels.MODE_PHI_U)),
        ("walk_schedule simple grid64", _walk_case(grid, kernels.MODE_SIMPLE)),
        ("explore_walk cycle128", _explore_case(make_cycle(128), 0.5)),
        ("bfs reg3_2048", _bfs_case(reg)),
        ("ball_sizes r=3 reg3_2048", _balls_case(reg, 3)),
    ]
    print(f"{'case':<30}{'cython s':>12}{'python s':>12}{'speedup':>10}  agree")
    for name, fn in cases:
        tc, oc = _best(fn, _ckernels, args.repeat)
        tp, op = _best(fn, _pykernels, args.repeat)
        print(f"{name:<30}{tc:>12.4f}{tp:>12.4f}{tp / tc:>10.1f}  {_same(oc, op)}")


if __name__ == "__main__":
    main()
