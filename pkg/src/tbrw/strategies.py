"""The eps-TBRW walk engine, bias functions and Monte Carlo estimators.

A bias function maps the walk history to a distribution on the neighbors of
the current vertex. At every step the walk moves to a uniform neighbor with
probability ``1 - eps`` and otherwise follows the bias function.

Markovian strategies that are driven by BFS distance fields (the emulating
strategy ``PhiU``, ``NaiveToward`` and the leg-by-leg ``SpanningWalk``) expose a
:class:`KernelSpec` and run on the compiled kernel; any other
:class:`BiasFunction` runs on the Python step engine. Both consume the random
stream the same way, so a strategy gives the same trace on either path.
"""
from __future__ import annotations

import copy
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .graph import Graph, WeightedGraph, bfs_distances, distance_matrix, weight_field_from_distances

RANDOM = 0
CONTROLLER = 1

DEFAULT_CAP_MULTIPLIER = 10
RECORD_LIMIT = 10_000_000


class EstimationError(RuntimeError):
    pass


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for trial ``trial``; reproducible without the others."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(trial,))
    return np.random.Generator(np.random.PCG64(ss))


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("TBRW_THREADS", "1")))
    except ValueError:
        return 1


def step_cap(n: int, multiplier: float = DEFAULT_CAP_MULTIPLIER) -> int:
    return int(max(1000, multiplier * n ** 3))


@dataclass(frozen=True)
class KernelSpec:
    mode: int
    fields: np.ndarray  # (F, n) int32 distance fields
    leg_field: np.ndarray  # int32
    leg_target: np.ndarray  # int32, -1 = never advance


class BiasFunction:
    """Controller contract.

    ``distribution(history)`` returns ``(neighbors, probs)`` for the last vertex
    of ``history``; ``probs is None`` means uniform over ``neighbors``.
    ``observe(v)`` is called once per step after the walk moves to ``v``.
    """

    name = "bias"

    def __init__(self, g: Graph):
        self.g = g

    def reset(self, start: int) -> None:
        pass

    def observe(self, v: int) -> None:
        pass

    def distribution(self, history: Sequence[int]) -> tuple[np.ndarray, np.ndarray | None]:
        raise NotImplementedError

    def kernel_spec(self) -> KernelSpec | None:
        return None

    def clone(self) -> "BiasFunction":
        return copy.copy(self)


def _field_distribution(g: Graph, dist: np.ndarray, v: int, eps: float, naive: bool):
    nb = g.neighbors(v)
    dv = int(dist[v])
    if dv <= 0:
        return nb, None
    down = dist[nb] == dv - 1
    n1 = int(down.sum())
    if n1 == 0:
        return nb, None
    if naive:
        q1, q2 = 1.0 / n1, 0.0
    else:
        n2 = len(nb) - n1
        p = kernels.get("phi_u_p")(n1, n2, eps)
        q1 = (1.0 - p) / n1
        q2 = p / n2 if n2 else 0.0
    return nb, np.where(down, q1, q2)


class UniformBias(BiasFunction):
    """Controller that picks a uniform neighbor (the walk is then simple)."""

    name = "uniform"

    def distribution(self, history):
        return self.g.neighbors(history[-1]), None

    def kernel_spec(self):
        return KernelSpec(kernels.MODE_SIMPLE, np.zeros((1, self.g.n), dtype=np.int32),
                          np.zeros(1, dtype=np.int32), np.full(1, -1, dtype=np.int32))


class PhiU(BiasFunction):
    """Markovian controller whose eps-TBRW has the law of the walk on ``(G, w_U)``.

    At distance ``l >= 1`` from ``U`` it picks uniformly among the non-descending
    neighbors with probability ``p`` and among the descending ones otherwise.
    Inside ``U`` all incident weights are 1, so it picks uniformly.
    """

    name = "phi_u"

    def __init__(self, g: Graph, U: Iterable[int], eps: float, dist: np.ndarray | None = None):
        super().__init__(g)
        if not 0.0 <= eps <= 1.0:
            raise ValueError("eps must lie in [0, 1]")
        self.U = frozenset(int(u) for u in U)
        if not self.U:
            raise ValueError("U must be non-empty")
        self.eps = eps
        self.dist = (bfs_distances(g, self.U) if dist is None else dist).astype(np.int32)
        if (self.dist < 0).any():
            raise ValueError("graph must be connected")

    def distribution(self, history):
        return _field_distribution(self.g, self.dist, history[-1], self.eps, naive=False)

    def weighted_graph(self) -> WeightedGraph:
        return weight_field_from_distances(self.g, self.dist, self.eps)

    def kernel_spec(self):
        return KernelSpec(kernels.MODE_PHI_U, self.dist.reshape(1, -1),
                          np.zeros(1, dtype=np.int32), np.full(1, -1, dtype=np.int32))


def phi_U(g: Graph, U: Iterable[int], eps: float) -> PhiU:
    return PhiU(g, U, eps)


class NaiveToward(BiasFunction):
    """Always steer to a uniformly chosen strictly closer neighbor of the target."""

    name = "naive"

    def __init__(self, g: Graph, target: Iterable[int]):
        super().__init__(g)
        self.target = frozenset(int(t) for t in target)
        if not self.target:
            raise ValueError("target must be non-empty")
        self.dist = bfs_distances(g, self.target).astype(np.int32)

    def distribution(self, history):
        return _field_distribution(self.g, self.dist, history[-1], 0.0, naive=True)

    def kernel_spec(self):
        return KernelSpec(kernels.MODE_NAIVE, self.dist.reshape(1, -1),
                          np.zeros(1, dtype=np.int32), np.full(1, -1, dtype=np.int32))


def naive_toward(g: Graph, target: Iterable[int]) -> NaiveToward:
    return NaiveToward(g, target)


def spanning_tree_walk(g: Graph, root: int) -> list[int]:
    """Closed walk traversing a BFS spanning tree depth-first (length ``2n - 2``)."""
    n = g.n
    parent = np.full(n, -1)
    parent[root] = root
    order = [root]
    for v in order:
        for u in g.neighbors(v).tolist():
            if parent[u] < 0:
                parent[u] = v
                order.append(u)
    if len(order) != n:
        raise ValueError("graph must be connected")
    children: list[list[int]] = [[] for _ in range(n)]
    for v in order[1:]:
        children[parent[v]].append(v)
    walk = [root]
    stack = [(root, iter(children[root]))]
    while stack:
        v, it = stack[-1]
        nxt = next(it, None)
        if nxt is None:
            stack.pop()
            if stack:
                walk.append(stack[-1][0])
        else:
            walk.append(nxt)
            stack.append((nxt, iter(children[nxt])))
    return walk


class SpanningWalk(BiasFunction):
    """Follow a spanning-tree walk ``x_0..x_m`` one leg at a time.

    Leg ``i`` uses the emulating controller toward ``{x_{i+1}}``; the leg index
    advances when ``x_{i+1}`` is reached.
    """

    name = "spanning"

    def __init__(self, g: Graph, eps: float, start: int = 0, dist: np.ndarray | None = None):
        super().__init__(g)
        self.eps = eps
        self.start = start
        self.waypoints = spanning_tree_walk(g, start)
        self.dist = distance_matrix(g) if dist is None else dist
        self.leg = 0

    @property
    def legs(self) -> list[int]:
        return self.waypoints[1:] or [self.start]

    def reset(self, start):
        if start != self.start:
            raise ValueError("SpanningWalk is built for a fixed start vertex")
        self.leg = 0
        self._advance(start)

    def _advance(self, v):
        legs = self.legs
        while self.leg < len(legs) - 1 and legs[self.leg] == v:
            self.leg += 1

    def observe(self, v):
        self._advance(v)

    def distribution(self, history):
        t = self.legs[self.leg]
        return _field_distribution(self.g, self.dist[t], history[-1], self.eps, naive=False)

    def kernel_spec(self):
        legs = np.asarray(self.legs, dtype=np.int32)
        return KernelSpec(kernels.MODE_PHI_U, np.ascontiguousarray(self.dist, dtype=np.int32),
                          legs, legs)


def spanning_walk_strategy(g: Graph, eps: float, start: int = 0) -> SpanningWalk:
    return SpanningWalk(g, eps, start)


class ClosestUncovered(BiasFunction):
    """Steer toward the nearest unvisited vertex (ties broken uniformly).

    History dependent; no bound is claimed for it.
    """

    name = "closest_uncovered"

    def __init__(self, g: Graph):
        super().__init__(g)
        self.visited = np.zeros(g.n, dtype=np.uint8)

    def reset(self, start):
        self.visited = np.zeros(self.g.n, dtype=np.uint8)
        self.visited[start] = 1

    def observe(self, v):
        self.visited[v] = 1

    def clone(self):
        c = copy.copy(self)
        c.visited = self.visited.copy()
        return c

    def distribution(self, history):
        v = history[-1]
        nb = self.g.neighbors(v)
        if self.visited.all():
            return nb, None
        d = kernels.bfs(self.g.indptr, self.g.indices, (self.visited == 0).astype(np.uint8), -1)
        down = d[nb] == d[v] - 1
        if d[v] <= 0 or not down.any():
            return nb, None
        return nb, down / down.sum()


# -- engine ---------------------------------------------------------------------


def _sample(nb: np.ndarray, probs, u: float) -> int:
    if probs is None:
        deg = len(nb)
        j = int(u * deg)
        return int(nb[j if j < deg else deg - 1])
    cum = 0.0
    last = -1
    for w, q in zip(nb.tolist(), probs.tolist()):
        if q > 0.0:
            last = w
            cum += q
            if u < cum:
                return w
    return last


def tbrw_step(g: Graph, eps: float, history: Sequence[int], phi: BiasFunction,
              rng: np.random.Generator) -> tuple[int, int]:
    """One step: uniform neighbor w.p. ``1 - eps``, else a draw from ``phi``.

    Returns ``(next_vertex, source)`` with source ``RANDOM`` or ``CONTROLLER``.
    """
    v = history[-1]
    if g.degree(v) == 0:
        raise ValueError(f"vertex {v} is isolated")
    u1 = rng.random()
    u2 = rng.random()
    if u1 < eps:
        nb, probs = phi.distribution(history)
        return _sample(nb, probs, u2), CONTROLLER
    return _sample(g.neighbors(v), None, u2), RANDOM


def step_law(g: Graph, eps: float, phi: BiasFunction, history: Sequence[int]) -> np.ndarray:
    """Exact one-step law of the eps-TBRW as a length-``n`` vector."""
    v = history[-1]
    law = np.zeros(g.n)
    nb = g.neighbors(v)
    law[nb] += (1.0 - eps) / len(nb)
    cnb, probs = phi.distribution(history)
    if probs is None:
        probs = np.full(len(cnb), 1.0 / len(cnb))
    np.add.at(law, cnb, eps * probs)
    return law


def weighted_step_law(wg: WeightedGraph, v: int) -> np.ndarray:
    law = np.zeros(wg.n)
    nb, p = wg.transition_row(v)
    law[nb] = p
    return law


@dataclass
class WalkTrace:
    start: int
    eps: float
    vertices: np.ndarray  # X_0..X_T (may be truncated to the recording limit)
    sources: np.ndarray  # sources[t] is how X_t was chosen; sources[0] = RANDOM
    first_visit: np.ndarray  # -1 if never visited
    steps: int
    finished: bool
    seed: int | None = None
    trial: int | None = None

    @property
    def cover_time(self) -> int | None:
        if (self.first_visit < 0).any():
            return None
        return int(self.first_visit.max())

    def visits_before(self, vertex_set: Iterable[int], stop: Iterable[int]) -> int:
        """Visits to ``vertex_set`` strictly before first entering ``stop``."""
        a = np.zeros(len(self.first_visit), dtype=bool)
        a[list(vertex_set)] = True
        b = np.zeros(len(self.first_visit), dtype=bool)
        b[list(stop)] = True
        xs = self.vertices
        hit = np.flatnonzero(b[xs])
        end = int(hit[0]) if hit.size else len(xs)
        return int(a[xs[:end]].sum())


def _python_walk(g, eps, phi, start, rng, stop_mask, cap, record):
    phi.reset(start)
    first = np.full(g.n, -1, dtype=np.int64)
    first[start] = 0
    seen = 1
    history = [start]
    sources = [RANDOM]
    t = 0
    done = (seen == g.n) if stop_mask is None else bool(stop_mask[start])
    while not done and t < cap:
        v, src = tbrw_step(g, eps, history, phi, rng)
        t += 1
        history.append(v)
        sources.append(src)
        phi.observe(v)
        if first[v] < 0:
            first[v] = t
            seen += 1
        done = (seen == g.n) if stop_mask is None else bool(stop_mask[v])
    return (t, first, done, np.asarray(history, dtype=np.int32),
            np.asarray(sources, dtype=np.uint8))


def simulate_walk(g: Graph, eps: float, phi: BiasFunction, start: int, rng: np.random.Generator,
                  target: Iterable[int] | None = None, cap: int | None = None,
                  record: bool = True, engine: str = "auto",
                  record_limit: int = RECORD_LIMIT) -> WalkTrace:
    """Run one walk until cover (``target is None``) or until it enters ``target``.

    ``engine`` is ``"auto"`` (kernel when the strategy has one), ``"kernel"`` or
    ``"python"`` (the generic step engine). Recorded traces keep at most
    ``record_limit`` steps; ``steps`` and ``first_visit`` are always complete.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    if g.degree(start) == 0 and g.n > 1:
        raise ValueError("start vertex is isolated")
    cap = step_cap(g.n) if cap is None else int(cap)
    stop_mask = None
    if target is not None:
        stop_mask = np.zeros(g.n, dtype=np.uint8)
        stop_mask[list(target)] = 1
        if not stop_mask.any():
            raise ValueError("target must be non-empty")
    spec = phi.kernel_spec() if engine != "python" else None
    if engine == "kernel" and spec is None:
        raise ValueError(f"strategy {phi.name!r} has no kernel")
    if spec is None:
        phi = phi.clone()
        t, first, done, xs, src = _python_walk(g, eps, phi, start, rng, stop_mask, cap, record)
        if not record:
            xs, src = xs[:1], src[:1]
        return WalkTrace(start, eps, xs, src, first, t, done)
    if record:
        size = min(cap, record_limit) + 1
        rec_v = np.full(size, -1, dtype=np.int32)
        rec_f = np.zeros(size, dtype=np.uint8)
    else:
        rec_v = rec_f = None
    stop = kernels.STOP_COVER if stop_mask is None else kernels.STOP_HIT
    t, first, done = kernels.walk_schedule(
        g.indptr, g.indices, float(eps), spec.mode, spec.fields, spec.leg_field, spec.leg_target,
        int(start), stop, stop_mask, cap, rng, rec_v, rec_f)
    if record:
        xs, src = rec_v[: t + 1], rec_f[: t + 1]
    else:
        xs = np.array([start], dtype=np.int32)
        src = np.zeros(1, dtype=np.uint8)
    return WalkTrace(start, eps, xs, src, first, int(t), bool(done))


# -- estimators -------------------------------------------------------------------


@dataclass
class EstimatorReport:
    quantity: str
    trials: int
    mean: float
    std_err: float
    ci95: tuple[float, float]
    values: np.ndarray = field(repr=False)
    cap_hits: int = 0
    seed: int | None = None
    ci_method: str = "normal approximation, mean +/- 1.96 SE"

    @classmethod
    def from_values(cls, quantity: str, values: Sequence[float], capped: Sequence[bool],
                    seed: int | None) -> "EstimatorReport":
        values = np.asarray(values, dtype=float)
        capped = np.asarray(capped, dtype=bool)
        ok = values[~capped]
        if ok.size == 0:
            raise EstimationError(f"all {len(values)} trials hit the step cap")
        mean = float(ok.mean())
        se = float(ok.std(ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else 0.0
        return cls(quantity, int(ok.size), mean, se, (mean - 1.96 * se, mean + 1.96 * se),
                   values, int(capped.sum()), seed)

    def within(self, value: float, n_se: float = 3.0) -> bool:
        return abs(self.mean - value) <= n_se * self.std_err + 1e-12

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "trials": self.trials,
            "mean": self.mean,
            "std_err": self.std_err,
            "ci95": list(self.ci95),
            "ci_method": self.ci_method,
            "cap_hits": self.cap_hits,
            "seed": self.seed,
        }


def run_trials(fn, trials: int, seed: int, threads: int | None = None) -> list:
    """Call ``fn(rng, j)`` for each trial on its own stream; results in trial order."""
    threads = thread_count() if threads is None else threads
    jobs = [(trial_rng(seed, j), j) for j in range(trials)]
    if threads <= 1 or trials <= 1:
        return [fn(r, j) for r, j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda a: fn(*a), jobs))


def estimate_cover_time(g: Graph, eps: float, phi: BiasFunction, start: int, trials: int,
                        seed: int, cap: int | None = None, engine: str = "auto") -> EstimatorReport:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not g.is_connected():
        raise ValueError("graph must be connected")

    def one(rng, j):
        tr = simulate_walk(g, eps, phi, start, rng, cap=cap, record=False, engine=engine)
        return tr.steps, not tr.finished

    out = run_trials(one, trials, seed)
    return EstimatorReport.from_values("cover_time", [o[0] for o in out], [o[1] for o in out], seed)


def estimate_hitting_time(g: Graph, eps: float, phi: BiasFunction, start: int,
                          target: Iterable[int], trials: int, seed: int, cap: int | None = None,
                          engine: str = "auto") -> EstimatorReport:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    target = list(target)

    def one(rng, j):
        tr = simulate_walk(g, eps, phi, start, rng, target=target, cap=cap, record=False,
                           engine=engine)
        return tr.steps, not tr.finished

    out = run_trials(one, trials, seed)
    return EstimatorReport.from_values("hitting_time", [o[0] for o in out], [o[1] for o in out],
                                       seed)


def estimate_weighted_hitting_time(wg: WeightedGraph, start: int, target: Iterable[int],
                                   trials: int, seed: int,
                                   cap: int | None = None) -> EstimatorReport:
    """Monte Carlo hitting time of ``target`` for the reversible walk on ``(G, w)``.

    All trials advance together one vectorized step at a time, drawing from a
    single stream seeded by ``seed``; used to cross-check the exact solvers.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    g = wg.base
    tmask = np.zeros(g.n, dtype=bool)
    tmask[list(target)] = True
    if not tmask.any():
        raise ValueError("target must be non-empty")
    cap = step_cap(g.n) if cap is None else int(cap)
    ip = g.indptr
    # row v of the keys holds v + cumulative transition probabilities
    key = np.empty(len(g.indices))
    for v in range(g.n):
        a, b = ip[v], ip[v + 1]
        if b > a:
            key[a:b] = v + np.cumsum(wg.transition_row(v)[1])
    rng = np.random.default_rng(seed)
    pos = np.full(trials, int(start), dtype=np.int64)
    steps = np.zeros(trials, dtype=np.int64)
    active = ~tmask[pos]
    t = 0
    while active.any() and t < cap:
        idx = np.flatnonzero(active)
        v = pos[idx]
        j = np.searchsorted(key, v + rng.random(idx.size), side="right")
        j = np.clip(j, ip[v], ip[v + 1] - 1)
        pos[idx] = g.indices[j]
        steps[idx] += 1
        active[idx] = ~tmask[pos[idx]]
        t += 1
    return EstimatorReport.from_values("weighted_hitting_time", steps, active, seed)
