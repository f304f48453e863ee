"""The global depth-first exploration strategy over a cover of a graph power.

Given a cover ``V_1..V_m`` of ``G^k`` the plan fattens each set to
``W_i = {w : dist(w, V_i) <= k/2}``, joins ``i ~ j`` when the fattened sets
meet, and explores a BFS tree of that auxiliary graph depth first. While
exploration ``i`` is active the walk emulates the weighted walk on
``(G, w_{W_i})``. A child starts on the first visit to its portal (a vertex
of ``W_i & W_j``) and the parent resumes when the child returns there.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy import stats

from . import kernels
from .chain import ResistanceSolver, hitting_matrix
from .cover import Cover, CoverError, build_random_cover, validate_cover, whole_cover
from .graph import Graph, distance_matrix, weight_field_from_distances
from .strategies import (RECORD_LIMIT, BiasFunction, EstimatorReport, _field_distribution,
                         run_trials, step_cap, tbrw_step)


class PlanError(ValueError):
    pass


class InvariantError(AssertionError):
    pass


def choose_k(eps: float, n: int) -> int:
    """Smallest even ``k >= -4 log_{1-eps} n`` (at least 2), so ``(1-eps)^(k/2) <= n^-2``."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if n < 2:
        raise ValueError("n must be >= 2")
    x = -4.0 * math.log(n) / math.log1p(-eps)
    half = math.ceil(x / 2.0 - 1e-9)
    return max(2, 2 * half)


@dataclass
class ExplorationPlan:
    g: Graph
    eps: float
    k: int
    cover: Cover
    start: int
    dist: np.ndarray = field(repr=False)  # all-pairs G distances
    dist_v: np.ndarray = field(repr=False)  # (m, n) distance to V_i
    fields: np.ndarray = field(repr=False)  # (m, n) int32 distance to W_i
    in_w: np.ndarray = field(repr=False)  # (m, n) uint8
    h_edges: list[tuple[int, int]]
    root: int
    parent: np.ndarray
    children: list[list[int]]
    portals: dict[tuple[int, int], int]
    entry: np.ndarray
    nbhd_sizes: np.ndarray  # |N+_{G^k}(V_i)|

    @property
    def m(self) -> int:
        return len(self.cover.sets)

    @property
    def n(self) -> int:
        return self.g.n

    @property
    def r(self) -> float:
        return self.cover.r

    @property
    def K(self) -> float:
        return float(self.nbhd_sizes.sum()) / self.n

    @property
    def max_degree(self) -> int:
        return self.g.max_degree

    def w_sets(self) -> list[np.ndarray]:
        return [np.flatnonzero(row) for row in self.in_w]

    def weighted(self, i: int):
        return weight_field_from_distances(self.g, self.fields[i], self.eps)

    def theorem_bound(self) -> float:
        """``32 eps^-1 Delta (r + 1) K n log^2 n`` (log base 2)."""
        L = math.log2(self.n)
        return 32.0 / self.eps * self.max_degree * (self.r + 1) * self.K * self.n * L * L

    def kernel_args(self):
        ptr = np.zeros(self.m + 1, dtype=np.int32)
        idx = []
        for i, ch in enumerate(self.children):
            ptr[i + 1] = ptr[i] + len(ch)
            idx.extend(ch)
        return (np.ascontiguousarray(self.fields), np.ascontiguousarray(self.in_w),
                self.in_w.sum(axis=1).astype(np.int64), self.parent.astype(np.int32), ptr,
                np.asarray(idx, dtype=np.int32), self.entry.astype(np.int32))

    def validate(self) -> None:
        """Check the structural invariants; raises :class:`PlanError`."""
        in_w = self.in_w.astype(bool)
        for i, s in enumerate(self.cover.sets):
            if not in_w[i, s.vertices].all():
                raise PlanError(f"V_{i} not inside W_{i}")
        seen = {self.root}
        q = deque([self.root])
        while q:
            i = q.popleft()
            for j in self.children[i]:
                v = self.portals[(i, j)]
                if not (in_w[i, v] and in_w[j, v]):
                    raise PlanError(f"portal {v} of tree edge {i}-{j} not in both sets")
                if self.entry[j] != v:
                    raise PlanError(f"entry of {j} is not its portal")
                seen.add(j)
                q.append(j)
        if len(seen) != self.m:
            raise PlanError("spanning tree does not reach every set")
        if self.start not in self.cover.sets[self.root].as_set():
            raise PlanError("root set does not contain the start")


def build_plan(g: Graph, eps: float, start: int, cover_of_power: Cover,
               dist: np.ndarray | None = None, check_cover: bool = True) -> ExplorationPlan:
    """Fattened sets, auxiliary graph, BFS tree, lowest-id portals and entry points."""
    if not g.is_connected():
        raise PlanError("graph must be connected")
    n = g.n
    k = choose_k(eps, n)
    c = cover_of_power
    if c.n != n:
        raise PlanError("cover size does not match the graph")
    if c.power != k:
        raise PlanError(f"cover is for G^{c.power}, plan needs G^{k}")
    D = distance_matrix(g) if dist is None else dist
    if check_cover:
        rep = validate_cover(g, c, dist=D)
        if not rep.valid:
            raise PlanError(f"cover invalid for G^{k}: {rep.to_dict()}")
    m = c.m
    dist_v = np.empty((m, n), dtype=np.int32)
    for i, s in enumerate(c.sets):
        dist_v[i] = D[s.vertices].min(axis=0)
    half = k // 2
    fields = np.maximum(dist_v - half, 0).astype(np.int32)
    in_w = (fields == 0).astype(np.uint8)
    nbhd = (dist_v <= k).sum(axis=1).astype(np.int64)

    M = sp.csr_matrix(in_w.astype(np.int32))
    overlap = (M @ M.T).tocoo()
    adj: list[list[int]] = [[] for _ in range(m)]
    h_edges = []
    for a, b in zip(overlap.row.tolist(), overlap.col.tolist()):
        if a < b:
            h_edges.append((a, b))
            adj[a].append(b)
            adj[b].append(a)
    for a in adj:
        a.sort()

    root = next((i for i, s in enumerate(c.sets) if start in s.as_set()), None)
    if root is None:
        raise PlanError(f"no cover set contains the start {start}")
    parent = np.full(m, -1, dtype=np.int64)
    parent[root] = root
    children: list[list[int]] = [[] for _ in range(m)]
    q = deque([root])
    while q:
        i = q.popleft()
        for j in adj[i]:
            if parent[j] < 0:
                parent[j] = i
                children[i].append(j)
                q.append(j)
    if (parent < 0).any():
        raise PlanError("auxiliary graph is disconnected")
    entry = np.empty(m, dtype=np.int64)
    entry[root] = start
    portals = {}
    for i in range(m):
        for j in children[i]:
            v = int(np.flatnonzero(in_w[i] & in_w[j])[0])
            portals[(i, j)] = v
            entry[j] = v
    parent[root] = -1
    plan = ExplorationPlan(g, eps, k, c, start, D, dist_v, fields, in_w, h_edges, root, parent,
                           children, portals, entry, nbhd)
    plan.validate()
    return plan


def candidate_covers(g: Graph, eps: float, seed: int = 0,
                     dist: np.ndarray | None = None) -> list[Cover]:
    """The whole vertex set and random covers of ``G^k`` for ``k_c = 1..ceil(log n)``."""
    k = choose_k(eps, g.n)
    D = distance_matrix(g) if dist is None else dist
    out = [whole_cover(g, power=k, dist=D)]
    for kc in range(1, max(1, math.ceil(math.log2(g.n))) + 1):
        try:
            out.append(build_random_cover(g, kc, seed=[seed, kc], power=k, dist=D))
        except CoverError:
            continue
    return out


def auto_cover(g: Graph, eps: float, seed: int = 0, dist: np.ndarray | None = None) -> Cover:
    """The candidate cover of ``G^k`` minimising ``(r + 1) K``."""
    k = choose_k(eps, g.n)
    D = distance_matrix(g) if dist is None else dist
    best, best_val = None, math.inf
    for c in candidate_covers(g, eps, seed, D):
        rep = validate_cover(g, c, power=k, dist=D)
        if not rep.valid:
            continue
        val = (c.r + 1) * rep.K_actual
        if val < best_val:
            best, best_val = c, val
    return best


# -- Python state machine -----------------------------------------------------------


class ExplorationBias(BiasFunction):
    """Stateful bias function running the exploration state machine.

    ``owner`` after each step lists which exploration chose each transition.
    """

    name = "explorer"

    def __init__(self, plan: ExplorationPlan):
        super().__init__(plan.g)
        self.plan = plan
        self.reset(plan.start)

    def clone(self):
        c = ExplorationBias.__new__(ExplorationBias)
        c.g = self.g
        c.plan = self.plan
        c.reset(self.plan.start)
        return c

    def reset(self, start):
        p = self.plan
        if start != p.start:
            raise ValueError("plan was built for a different start")
        m = p.m
        self.status = ["unstarted"] * m
        self.visited = [set() for _ in range(m)]
        self.w_size = p.in_w.sum(axis=1).tolist()
        self.pending = [len(ch) for ch in p.children]
        self.L = np.zeros(m, dtype=np.int64)
        self.stack = [p.root]
        self.status[p.root] = "active"
        self.finished = False
        self.owner: list[int] = []
        self.events: list[tuple[int, str, int, int]] = []  # (time, kind, exploration, vertex)
        self.t = 0
        self._settle(start)

    @property
    def active(self) -> int:
        return self.stack[-1]

    def _settle(self, v):
        p = self.plan
        while True:
            i = self.stack[-1]
            if p.in_w[i, v]:
                self.visited[i].add(v)
            j = next((c for c in p.children[i]
                      if self.status[c] == "unstarted" and p.entry[c] == v), None)
            if j is not None:
                self.status[i] = "suspended"
                self.status[j] = "active"
                self.pending[i] -= 1
                self.stack.append(j)
                self.events.append((self.t, "launch", j, v))
                continue
            if (self.pending[i] == 0 and len(self.visited[i]) == self.w_size[i]
                    and v == p.entry[i]):
                self.status[i] = "finished"
                self.events.append((self.t, "finish", i, v))
                if len(self.stack) == 1:
                    self.finished = True
                    return
                self.stack.pop()
                self.status[self.stack[-1]] = "active"
                continue
            return

    def distribution(self, history):
        i = self.plan.root if self.finished else self.stack[-1]
        return _field_distribution(self.g, self.plan.fields[i], history[-1], self.plan.eps,
                                   naive=False)

    def observe(self, v):
        i = self.plan.root if self.finished else self.stack[-1]
        self.owner.append(i)
        self.L[i] += 1
        self.t += 1
        if not self.finished:
            self._settle(v)


def exploration_bias(plan: ExplorationPlan) -> ExplorationBias:
    return ExplorationBias(plan)


# -- simulation -----------------------------------------------------------------------


@dataclass
class ExploreTrace:
    steps: int
    cover_time: int
    L: np.ndarray
    finished: bool
    vertices: np.ndarray | None = None
    owner: np.ndarray | None = None


def simulate_exploration(plan: ExplorationPlan, rng: np.random.Generator, cap: int | None = None,
                         record: bool = False, engine: str = "kernel") -> ExploreTrace:
    """One run until the root exploration terminates (or ``cap`` steps)."""
    g = plan.g
    cap = step_cap(g.n) if cap is None else int(cap)
    if engine == "python":
        bias = ExplorationBias(plan)
        hist = [plan.start]
        first = np.full(g.n, -1, dtype=np.int64)
        first[plan.start] = 0
        while not bias.finished and len(hist) - 1 < cap:
            v, _ = tbrw_step(g, plan.eps, hist, bias, rng)
            hist.append(v)
            bias.observe(v)
            if first[v] < 0:
                first[v] = len(hist) - 1
        ct = int(first.max()) if (first >= 0).all() else -1
        return ExploreTrace(len(hist) - 1, ct, bias.L.copy(), bias.finished,
                            np.asarray(hist, dtype=np.int32),
                            np.asarray(bias.owner, dtype=np.int32))
    fields, in_w, w_size, parent, ptr, idx, entry = plan.kernel_args()
    rec_v = rec_o = None
    if record:
        size = min(cap, RECORD_LIMIT) + 1
        rec_v = np.full(size, -1, dtype=np.int32)
        rec_o = np.full(size, -1, dtype=np.int32)
    t, ct, L, done = kernels.explore_walk(g.indptr, g.indices, float(plan.eps), fields, in_w,
                                          w_size, parent, ptr, idx, entry, int(plan.root),
                                          int(plan.start), cap, rng, rec_v, rec_o)
    if record:
        rec_v, rec_o = rec_v[: t + 1], rec_o[:t]
    return ExploreTrace(int(t), int(ct), L, bool(done), rec_v, rec_o)


@dataclass
class GlobalRunReport:
    tau: EstimatorReport
    taus: np.ndarray
    sum_L: np.ndarray
    L: np.ndarray  # (trials, m)
    bound: float
    r: float
    K: float
    m: int
    k: int

    @property
    def decomposition_ok(self) -> bool:
        return bool(np.all(self.taus <= self.sum_L))

    @property
    def bound_ok(self) -> bool:
        return self.tau.mean <= self.bound

    def to_dict(self) -> dict:
        return {
            "tau": self.tau.to_dict(),
            "sum_L_mean": float(self.sum_L.mean()),
            "L_mean": self.L.mean(axis=0).tolist() if self.m <= 64 else None,
            "decomposition_ok": self.decomposition_ok,
            "bound": self.bound,
            "bound_ok": self.bound_ok,
            "r": None if math.isinf(self.r) else self.r,
            "K": self.K,
            "m": self.m,
            "k": self.k,
        }


def run_global(g: Graph, eps: float, start: int, cover_of_power: Cover | None, trials: int,
               seed: int, cap: int | None = None, plan: ExplorationPlan | None = None,
               engine: str = "kernel") -> GlobalRunReport:
    """Simulate ``trials`` explorations; asserts ``tau <= sum_i L_i`` on every run."""
    if plan is None:
        if cover_of_power is None:
            cover_of_power = auto_cover(g, eps, seed)
        plan = build_plan(g, eps, start, cover_of_power)

    def one(rng, j):
        return simulate_exploration(plan, rng, cap, engine=engine)

    runs = run_trials(one, trials, seed)
    taus = np.array([r.cover_time for r in runs], dtype=np.int64)
    sums = np.array([int(r.L.sum()) for r in runs], dtype=np.int64)
    capped = [not r.finished for r in runs]
    for j, r in enumerate(runs):
        if r.finished and (r.cover_time < 0 or r.cover_time > sums[j]):
            raise InvariantError(f"trial {j}: cover time {r.cover_time} exceeds sum L = {sums[j]}")
    rep = EstimatorReport.from_values("global_cover_time", taus, capped, seed)
    return GlobalRunReport(rep, taus, sums, np.stack([r.L for r in runs]), plan.theorem_bound(),
                           plan.r, plan.K, plan.m, plan.k)


# -- local lemma checks ---------------------------------------------------------------


@dataclass
class LocalBoundRow:
    name: str
    lhs: float
    rhs: float
    ok: bool
    exact: bool = True


def check_local_lemma_bound(plan: ExplorationPlan, i: int, x: int | None = None,
                            pairs: int = 20, trials: int = 200, seed: int = 0,
                            tol: float = 1e-8, dense_limit: int = 2000) -> list[LocalBoundRow]:
    """Evaluate the per-set inequalities for set ``i`` of ``plan``.

    Rows: ``wtsum`` (``2 sum w_i <= 1 + Delta |N+| <= 2 Delta |N+|``), ``Reff``
    (max over sampled pairs in ``W_i`` against ``k (2r + 1)``), ``kap`` (max
    hitting time within ``W_i``, skipped above ``dense_limit`` vertices) and ``taui``
    (Monte Carlo cover-and-return time from ``x``, skipped when ``trials`` is 0).
    """
    g = plan.g
    n = g.n
    eps = plan.eps
    delta = g.max_degree
    nb = int(plan.nbhd_sizes[i])
    r = plan.r
    logn = math.log2(n)
    wg = plan.weighted(i)
    W = np.flatnonzero(plan.in_w[i])
    x = int(plan.entry[i]) if x is None else x
    rows = []
    two_w = 2.0 * wg.total_weight()
    rows.append(LocalBoundRow("wtsum_mid", two_w, 1.0 + delta * nb,
                              two_w <= (1.0 + delta * nb) * (1 + tol)))
    rows.append(LocalBoundRow("wtsum", two_w, 2.0 * delta * nb, two_w <= 2.0 * delta * nb * (1 + tol)))

    rng = np.random.default_rng([seed, i])
    solver = ResistanceSolver(wg)
    reff = 0.0
    if W.size > 1:
        for _ in range(pairs):
            u, v = rng.choice(W, size=2, replace=False)
            reff = max(reff, solver(int(u), int(v)))
    rhs = plan.k * (2 * r + 1)
    rows.append(LocalBoundRow("Reff", reff, rhs, reff <= rhs + tol * max(1.0, rhs)))

    if n <= dense_limit:
        H = hitting_matrix(wg)
        kap = float(H[np.ix_(W, W)].max())
        rhs = 16.0 / eps * delta * nb * (r + 1) * logn
        rows.append(LocalBoundRow("kap", kap, rhs, kap < rhs))

    if trials < 1:
        return rows
    sub = _single_set_plan(plan, i, x)
    runs = run_trials(lambda rg, j: simulate_exploration(sub, rg), trials, seed)
    rep = EstimatorReport.from_values("tau_i", [t.L.sum() for t in runs],
                                      [not t.finished for t in runs], seed)
    rhs = 32.0 * (r + 1) * delta / eps * nb * logn * logn
    rows.append(LocalBoundRow("taui", rep.mean, rhs, rep.mean < rhs, exact=False))
    return rows


def _single_set_plan(plan: ExplorationPlan, i: int, x: int) -> ExplorationPlan:
    """The walk on ``(G, w_i)`` from ``x`` until ``W_i`` is covered and ``x`` revisited."""
    if not plan.in_w[i, x]:
        raise ValueError("x must lie in W_i")
    return ExplorationPlan(
        plan.g, plan.eps, plan.k, Cover(plan.n, [plan.cover.sets[i]], plan.r, power=plan.k), x,
        plan.dist, plan.dist_v[i:i + 1], plan.fields[i:i + 1], plan.in_w[i:i + 1], [], 0,
        np.array([-1]), [[]], {}, np.array([x]), plan.nbhd_sizes[i:i + 1])


# -- excision and law checks ----------------------------------------------------------------


def excise(vertices: np.ndarray, owner: np.ndarray, i: int) -> list[tuple[int, int]]:
    """Transitions chosen while exploration ``i`` was active, in time order."""
    ts = np.flatnonzero(owner == i)
    return list(zip(vertices[ts].tolist(), vertices[ts + 1].tolist()))


def excision_contiguous(plan: ExplorationPlan, vertices: np.ndarray, owner: np.ndarray) -> bool:
    """Each excised sequence starts at ``a_i`` and is a walk of adjacent steps."""
    g = plan.g
    for i in range(plan.m):
        steps = excise(vertices, owner, i)
        if not steps:
            continue
        if steps[0][0] != plan.entry[i]:
            return False
        for (a, b), (c, _) in zip(steps, steps[1:]):
            if b != c or not g.has_edge(a, b):
                return False
        if not g.has_edge(*steps[-1]):
            return False
    return True


@dataclass
class ChiSquareResult:
    statistic: float
    dof: int
    p_value: float
    pooled_steps: int
    groups: int


def excision_chi_square(plan: ExplorationPlan, traces: Sequence[ExploreTrace],
                        min_expected: float = 5.0) -> ChiSquareResult:
    """Pooled goodness of fit of excised transitions against the ``(G, w_i)`` law.

    Transitions are grouped by ``(exploration, from-vertex)``; a group enters
    the statistic when all of its expected neighbor counts reach ``min_expected``.
    """
    counts: dict[tuple[int, int], dict[int, int]] = {}
    for tr in traces:
        xs, ow = tr.vertices, tr.owner
        ts = np.arange(len(ow))
        for i in np.unique(ow).tolist():
            sel = ts[ow == i]
            for a, b in zip(xs[sel].tolist(), xs[sel + 1].tolist()):
                d = counts.setdefault((i, a), {})
                d[b] = d.get(b, 0) + 1
    stat = 0.0
    dof = 0
    pooled = 0
    groups = 0
    wgs = {}
    for (i, a), d in sorted(counts.items()):
        if i not in wgs:
            wgs[i] = plan.weighted(i)
        nb, p = wgs[i].transition_row(a)
        tot = sum(d.values())
        exp = tot * p
        if len(nb) < 2 or exp.min() < min_expected:
            continue
        obs = np.array([d.get(int(u), 0) for u in nb], dtype=float)
        if obs.sum() != tot:
            raise InvariantError(f"transition out of {a} to a non-neighbor")
        stat += float(((obs - exp) ** 2 / exp).sum())
        dof += len(nb) - 1
        pooled += tot
        groups += 1
    p_value = float(stats.chi2.sf(stat, dof)) if dof else 1.0
    return ChiSquareResult(stat, dof, p_value, pooled, groups)
