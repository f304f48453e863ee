"""(r, K)-covers: representation, validation, the randomized ball construction,
and the per-set overlap inequalities on the affine Cayley graphs.

A cover is a family of vertex sets ``V_1..V_m`` whose union is ``V(G)``, each
inducing a subgraph of radius at most ``r`` around a designated center. Its
overlap is ``K = sum_i |N+(V_i)| / n``.

Every routine accepts ``power``: with ``power = s > 1`` the cover lives in
``G^s`` (vertices joined when their ``G``-distance is between 1 and ``s``).
That graph is never built; balls and neighborhoods in ``G^s`` are ``G``-balls
with radii scaled by ``s``, read off an all-pairs distance matrix.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .generators import CayleyLabels
from .graph import Graph, INFINITE_RADIUS, bfs_distances, distance_matrix, eccentricity_within, induced_radius

COVER_SCHEMA = "tbrw.cover"
COVER_VERSION = 1
DEFAULT_MAX_RETRIES = 100


class CoverError(RuntimeError):
    def __init__(self, message: str, best: "Cover | None" = None, report: "CoverReport | None" = None):
        super().__init__(message)
        self.best = best
        self.report = report


class ClaimViolation(AssertionError):
    pass


@dataclass(frozen=True)
class CoverSet:
    vertices: np.ndarray  # sorted int32
    center: int
    level: int = 0

    def __post_init__(self):
        v = np.unique(np.asarray(self.vertices, dtype=np.int32))
        v.flags.writeable = False
        object.__setattr__(self, "vertices", v)

    def __len__(self) -> int:
        return len(self.vertices)

    def as_set(self) -> frozenset[int]:
        return frozenset(self.vertices.tolist())


@dataclass
class Cover:
    n: int
    sets: list[CoverSet]
    r: float
    k: int | None = None
    power: int = 1
    attempts: int = 1

    @property
    def m(self) -> int:
        return len(self.sets)

    def membership(self) -> list[list[int]]:
        """For each vertex, the indices of the sets containing it."""
        out: list[list[int]] = [[] for _ in range(self.n)]
        for i, s in enumerate(self.sets):
            for v in s.vertices.tolist():
                out[v].append(i)
        return out

    def to_json(self, K_actual: float | None = None) -> str:
        doc = {
            "schema": COVER_SCHEMA,
            "version": COVER_VERSION,
            "n": self.n,
            "r": None if math.isinf(self.r) else self.r,
            "k": self.k,
            "power": self.power,
            "attempts": self.attempts,
            "K_actual": K_actual,
            "sets": [{"center": s.center, "level": s.level, "vertices": s.vertices.tolist()}
                     for s in self.sets],
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Cover":
        doc = json.loads(text)
        if doc.get("schema") != COVER_SCHEMA:
            raise ValueError(f"not a cover document: schema {doc.get('schema')!r}")
        if doc.get("version") != COVER_VERSION:
            raise ValueError(f"unsupported cover version {doc.get('version')!r}")
        sets = [CoverSet(np.asarray(s["vertices"], dtype=np.int32), int(s["center"]),
                         int(s.get("level", 0))) for s in doc["sets"]]
        r = doc["r"]
        return cls(int(doc["n"]), sets, INFINITE_RADIUS if r is None else r, doc.get("k"),
                   int(doc.get("power", 1)), int(doc.get("attempts", 1)))


def singleton_cover(g: Graph) -> Cover:
    return Cover(g.n, [CoverSet(np.array([v]), v) for v in range(g.n)], 0)


def whole_cover(g: Graph, power: int = 1, dist: np.ndarray | None = None) -> Cover:
    """The single set ``V(G)`` centered at a vertex of minimum eccentricity."""
    if power == 1:
        r, c = induced_radius(g, range(g.n))
    else:
        D = _dist(g, dist)
        ecc = np.ceil(D.max(axis=1) / power).astype(int)
        c = int(np.argmin(ecc))
        r = int(ecc[c])
    return Cover(g.n, [CoverSet(np.arange(g.n), c)], r, power=power)


# -- metric helpers --------------------------------------------------------------


def _dist(g: Graph, dist: np.ndarray | None) -> np.ndarray:
    if dist is None:
        dist = distance_matrix(g)
    if (dist < 0).any():
        raise ValueError("graph must be connected")
    return dist


def _power_ball(g: Graph, v: int, radius: int, power: int, dist) -> np.ndarray:
    R = radius * power
    if dist is not None:
        return np.flatnonzero(dist[v] <= R).astype(np.int32)
    return np.flatnonzero(bfs_distances(g, [v], R) >= 0).astype(np.int32)


def _power_ball_sizes(g: Graph, radius: int, power: int, dist) -> np.ndarray:
    R = radius * power
    if dist is not None:
        return (dist <= R).sum(axis=1)
    return kernels.ball_sizes(g.indptr, g.indices, R)


def closed_neighborhood_size(g: Graph, S: Sequence[int], power: int = 1,
                             dist: np.ndarray | None = None) -> int:
    """``|N+(S)|`` in ``G^power``."""
    S = np.asarray(S, dtype=np.int64)
    if dist is not None:
        return int((dist[S] <= power).any(axis=0).sum())
    return int((bfs_distances(g, S.tolist(), power) >= 0).sum())


def power_eccentricity(g: Graph, S: Sequence[int], center: int, power: int,
                       dist: np.ndarray) -> float:
    """Eccentricity of ``center`` inside ``G^power[S]``."""
    S = np.asarray(sorted(set(int(s) for s in S)), dtype=np.int64)
    pos = np.searchsorted(S, center)
    if pos >= len(S) or S[pos] != center:
        return INFINITE_RADIUS
    adj = dist[np.ix_(S, S)] <= power
    seen = np.zeros(len(S), dtype=bool)
    seen[pos] = True
    frontier = seen.copy()
    depth = 0
    while True:
        nxt = adj[frontier].any(axis=0) & ~seen
        if not nxt.any():
            break
        depth += 1
        seen |= nxt
        frontier = nxt
    return depth if seen.all() else INFINITE_RADIUS


# -- validation --------------------------------------------------------------------


@dataclass
class CoverReport:
    coverage_ok: bool
    uncovered: list[int]
    radius_ok: bool
    radius_violations: list[tuple[int, float]]  # (set index, measured radius)
    max_radius: float
    K_actual: float
    nbhd_sizes: np.ndarray = field(repr=False)

    @property
    def valid(self) -> bool:
        return self.coverage_ok and self.radius_ok

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "coverage_ok": self.coverage_ok,
            "uncovered": self.uncovered[:20],
            "radius_ok": self.radius_ok,
            "radius_violations": [[i, None if math.isinf(r) else r]
                                  for i, r in self.radius_violations[:20]],
            "max_radius": None if math.isinf(self.max_radius) else self.max_radius,
            "K_actual": self.K_actual,
        }


FULL_RADIUS_LIMIT = 200


def validate_cover(g: Graph, c: Cover, power: int | None = None,
                   dist: np.ndarray | None = None, full_radius: bool | None = None) -> CoverReport:
    """Check coverage and radii; compute ``K_actual`` exactly.

    Radii are measured from each set's certificate center. On small graphs
    (``full_radius``) the true induced radius is also computed, and a set
    passes when either measure is within ``c.r``.
    """
    power = c.power if power is None else power
    if c.n != g.n:
        raise ValueError("cover and graph disagree on n")
    if power > 1:
        dist = _dist(g, dist)
    if full_radius is None:
        full_radius = g.n <= FULL_RADIUS_LIMIT and power == 1
    covered = np.zeros(g.n, dtype=bool)
    sizes = np.zeros(c.m, dtype=np.int64)
    violations = []
    max_r = 0.0
    for i, s in enumerate(c.sets):
        verts = s.vertices
        if verts.size == 0:
            violations.append((i, INFINITE_RADIUS))
            max_r = INFINITE_RADIUS
            continue
        covered[verts] = True
        sizes[i] = closed_neighborhood_size(g, verts, power, dist)
        if power == 1:
            rad = eccentricity_within(g, verts.tolist(), s.center)
            if rad > c.r and full_radius:
                rad = induced_radius(g, verts.tolist())[0]
        else:
            rad = power_eccentricity(g, verts, s.center, power, dist)
        max_r = max(max_r, rad)
        if rad > c.r:
            violations.append((i, rad))
    uncovered = np.flatnonzero(~covered).tolist()
    return CoverReport(not uncovered, uncovered, not violations, violations, max_r,
                       float(sizes.sum()) / g.n, sizes)


# -- randomized construction -------------------------------------------------------


@dataclass(frozen=True)
class CoverSchedule:
    """``t_i = (n log n)^(i/k)``, ``p_i = min(1, 2 log n / t_i)``; logs base 2."""

    n: int
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    @property
    def log_n(self) -> float:
        return math.log2(self.n) if self.n > 1 else 0.0

    @property
    def t(self) -> np.ndarray:
        base = self.n * self.log_n
        return np.array([base ** (i / self.k) for i in range(self.k + 1)])

    @property
    def p(self) -> np.ndarray:
        return np.minimum(1.0, 2.0 * self.log_n / self.t)

    def overlap_threshold(self) -> float:
        """``4 k n^(1/k) log^(1+1/k) n``: the acceptance bound on ``K``."""
        n, k, L = self.n, self.k, self.log_n
        return 4.0 * k * n ** (1.0 / k) * L ** (1.0 + 1.0 / k)

    def expected_overlap_bound(self) -> float:
        """``k n^(1+1/k) 2 log^(1+1/k) n``, bounding ``E[K n]``."""
        n, k, L = self.n, self.k, self.log_n
        return k * n ** (1.0 + 1.0 / k) * 2.0 * L ** (1.0 + 1.0 / k)

    def radius(self) -> int:
        return 2 ** (self.k - 1) - 1


def level_sets(g: Graph, schedule: CoverSchedule, power: int = 1,
               dist: np.ndarray | None = None) -> list[np.ndarray]:
    """Masks of ``S_i = {v : |B(v, 2^i)| <= t_{i+1}}`` for ``i < k``."""
    t = schedule.t
    return [_power_ball_sizes(g, 2 ** i, power, dist) <= t[i + 1] for i in range(schedule.k)]


def claim_levels(g: Graph, schedule: CoverSchedule, power: int = 1,
                 dist: np.ndarray | None = None) -> np.ndarray:
    """For every vertex the least ``i`` with ``|B(v, 2^i - 1) & S_i| >= t_i``; -1 if none."""
    S = level_sets(g, schedule, power, dist)
    t = schedule.t
    out = np.full(g.n, -1, dtype=np.int64)
    for i in range(schedule.k):
        todo = np.flatnonzero(out < 0)
        if todo.size == 0:
            break
        R = (2 ** i - 1) * power
        for v in todo.tolist():
            if dist is not None:
                cnt = int(S[i][dist[v] <= R].sum())
            else:
                cnt = int(S[i][bfs_distances(g, [v], R) >= 0].sum())
            if cnt >= t[i]:
                out[v] = i
    return out


def greedy_ball_claim_check(g: Graph, v: int, schedule: CoverSchedule, power: int = 1,
                            dist: np.ndarray | None = None) -> int:
    """Least level ``i`` whose ball ``B(v, 2^i - 1)`` meets ``S_i`` in ``>= t_i`` vertices."""
    S = level_sets(g, schedule, power, dist)
    t = schedule.t
    for i in range(schedule.k):
        ball_v = _power_ball(g, v, 2 ** i - 1, power, dist)
        if S[i][ball_v].sum() >= t[i]:
            return i
    raise ClaimViolation(f"no level satisfies the ball claim at vertex {v}")


def _sample_cover(g, schedule, S, rng, power, dist) -> Cover:
    sets = []
    p = schedule.p
    for i in range(schedule.k):
        pick = np.flatnonzero(S[i] & (rng.random(g.n) < p[i]))
        for v in pick.tolist():
            sets.append(CoverSet(_power_ball(g, v, 2 ** i - 1, power, dist), v, i))
    return Cover(g.n, sets, schedule.radius(), schedule.k, power)


def _overlap(g, c, power, dist) -> tuple[np.ndarray, float]:
    covered = np.zeros(g.n, dtype=bool)
    total = 0
    for s in c.sets:
        covered[s.vertices] = True
        # a level-i set is the ball B(f, 2^i - 1); its closed neighborhood is B(f, 2^i)
        total += _power_ball(g, s.center, 2 ** s.level, power, dist).size
    return covered, total / g.n


def build_random_cover(g: Graph, k: int, seed=None, max_retries: int = DEFAULT_MAX_RETRIES,
                       power: int = 1, dist: np.ndarray | None = None) -> Cover:
    """Random multi-scale ball cover with radius ``2^(k-1) - 1``.

    Level ``i`` keeps each vertex of ``S_i`` with probability ``p_i`` and adds
    its ball of radius ``2^i - 1``. Attempts are repeated with fresh randomness
    until the family covers ``V(G)`` with ``K <= 4 k n^(1/k) log^(1+1/k) n``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if max_retries < 1:
        raise ValueError("max_retries must be >= 1")
    if g.n == 1:
        return Cover(1, [CoverSet(np.array([0]), 0)], 0, k, power)
    if power > 1:
        dist = _dist(g, dist)
    elif not g.is_connected():
        raise ValueError("graph must be connected")
    rng = np.random.default_rng(seed)
    schedule = CoverSchedule(g.n, k)
    S = level_sets(g, schedule, power, dist)
    limit = schedule.overlap_threshold()
    best, best_key = None, None
    for attempt in range(1, max_retries + 1):
        c = _sample_cover(g, schedule, S, rng, power, dist)
        c.attempts = attempt
        covered, K = _overlap(g, c, power, dist)
        if covered.all() and K <= limit:
            return c
        key = (int((~covered).sum()), K)
        if best_key is None or key < best_key:
            best, best_key = c, key
    raise CoverError(f"no acceptable cover in {max_retries} attempts "
                     f"(best: {best_key[0]} uncovered, K={best_key[1]:.3f}, limit {limit:.3f})",
                     best=best)


def sqrtlog_k(n: int) -> int:
    if n < 2:
        return 1
    L = math.log2(n)
    return int(min(max(1, round(2.0 * math.sqrt(L))), max(1, math.ceil(L))))


def build_sqrtlog_cover(g: Graph, seed=None, max_retries: int = DEFAULT_MAX_RETRIES) -> Cover:
    """:func:`build_random_cover` with ``k = round(2 sqrt(log n))`` clamped to ``[1, ceil(log n)]``."""
    if g.n < 2:
        raise ValueError("need n >= 2")
    return build_random_cover(g, sqrtlog_k(g.n), seed, max_retries)


def sqrtlog_certificate(n: int) -> dict:
    """Whether ``4 k n^(1/k) log^(1+1/k) n < 4^(sqrt log n)`` holds at this ``n``."""
    k = sqrtlog_k(n)
    sched = CoverSchedule(n, k)
    cap = 4.0 ** math.sqrt(math.log2(n))
    return {"k": k, "radius": sched.radius(), "K_bound": sched.overlap_threshold(),
            "target": cap, "certified": sched.overlap_threshold() < cap and sched.radius() <= cap}


# -- Cayley-graph inequalities -------------------------------------------------------


@dataclass(frozen=True)
class InequalityCheck:
    lhs: int
    rhs: float
    ok: bool


def _cayley_check(g: Graph, labels: CayleyLabels, V: Iterable[int], center: int,
                  radius: int, factor: float) -> InequalityCheck:
    V = sorted(set(int(v) for v in V))
    if center not in V:
        raise ValueError("center must belong to the set")
    rad = eccentricity_within(g, V, center)
    if rad > radius:
        raise ValueError(f"set has radius {rad} > {radius} around its center")
    ys = labels.y_vertices()
    in_y = sum(1 for v in V if v in ys)
    lhs = closed_neighborhood_size(g, V)
    rhs = factor * in_y
    return InequalityCheck(lhs, rhs, lhs >= rhs)


def radius2_lower_inequality(g: Graph, labels: CayleyLabels, V: Iterable[int], center: int) -> bool:
    """``|N+(V)| >= (p - 1)/4 |V & Y|`` for a radius-2 set on the radius-2 Cayley graph."""
    if labels.spec.radius != 2:
        raise ValueError("needs the radius-2 Cayley graph")
    return _cayley_check(g, labels, V, center, 2, (labels.spec.p - 1) / 4.0).ok


def radius3_lower_inequality(g: Graph, labels: CayleyLabels, V: Iterable[int], center: int) -> bool:
    """``|N+(V)| >= 3^-3 (p - 1) |V & Y'|`` for a radius-3 set on the radius-3 Cayley graph."""
    if labels.spec.radius != 3:
        raise ValueError("needs the radius-3 Cayley graph")
    return _cayley_check(g, labels, V, center, 3, (labels.spec.p - 1) / 27.0).ok


def cayley_inequality(g: Graph, labels: CayleyLabels, V: Iterable[int], center: int) -> InequalityCheck:
    r = labels.spec.radius
    factor = (labels.spec.p - 1) / (4.0 if r == 2 else 27.0)
    return _cayley_check(g, labels, V, center, r, factor)


def sample_radius_set(g: Graph, center: int, radius: int, rng: np.random.Generator) -> list[int]:
    """Random set of eccentricity ``<= radius`` around ``center``.

    Keeps each vertex of ``B(center, radius)`` with a random rate, then retains
    the part reachable from the center within the kept set in ``radius`` steps.
    """
    d = bfs_distances(g, [center], radius)
    ball = np.flatnonzero(d >= 0)
    q = rng.choice([1.0, rng.random()], p=[0.1, 0.9])
    keep = np.zeros(g.n, dtype=bool)
    keep[ball[rng.random(ball.size) < q]] = True
    keep[center] = True
    dist = np.full(g.n, -1)
    dist[center] = 0
    frontier = [center]
    for depth in range(1, radius + 1):
        nxt = []
        for v in frontier:
            for u in g.neighbors(v).tolist():
                if keep[u] and dist[u] < 0:
                    dist[u] = depth
                    nxt.append(u)
        frontier = nxt
    return np.flatnonzero(dist >= 0).tolist()


# -- radius-0 covers ----------------------------------------------------------------------


def cov0_exact(g: Graph) -> float:
    """Least ``K`` over all ``(0, K)``-covers, by exhaustive search (``n <= 12``).

    Enumerates every vertex subset, keeps those inducing radius 0, and solves
    the minimum-weight set cover exactly by dynamic programming over bitmasks.
    """
    n = g.n
    if n > 12:
        raise ValueError("exhaustive search limited to n <= 12")
    cands = []
    for size in range(1, n + 1):
        for sub in combinations(range(n), size):
            if induced_radius(g, sub)[0] == 0:
                mask = 0
                for v in sub:
                    mask |= 1 << v
                cands.append((mask, closed_neighborhood_size(g, sub)))
    full = (1 << n) - 1
    best = np.full(1 << n, np.inf)
    best[0] = 0.0
    for state in range(1 << n):
        if not np.isfinite(best[state]):
            continue
        for mask, w in cands:
            nxt = state | mask
            if nxt != state and best[state] + w < best[nxt]:
                best[nxt] = best[state] + w
    return float(best[full]) / n
