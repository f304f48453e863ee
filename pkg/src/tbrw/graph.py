"""Undirected simple graphs, BFS distances, balls, powers and U-distance weights.

Vertices are dense integers ``0..n-1``. Adjacency is stored in CSR form
(``indptr``/``indices`` int32 arrays, neighbor lists sorted) so the compiled
walk kernels can consume it without conversion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels

UNREACHABLE = -1
INFINITE_RADIUS = math.inf

Edge = tuple[int, int]


class GraphFormatError(ValueError):
    """Malformed graph text; ``lineno`` is 1-based."""

    def __init__(self, message: str, lineno: int):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def _canonical_edges(n: int, edges: Iterable[Sequence[int]]) -> np.ndarray:
    """Deduplicated ``(min, max)`` pairs sorted lexicographically, shape ``(m, 2)``."""
    if isinstance(edges, np.ndarray):
        e = edges.astype(np.int64, copy=False)
    else:
        e = np.array([(int(x[0]), int(x[1])) for x in edges], dtype=np.int64)
    e = e.reshape(-1, 2)
    if not e.size:
        return e
    bad = (e < 0) | (e >= n)
    if bad.any():
        u, v = e[np.flatnonzero(bad.any(axis=1))[0]]
        raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
    loops = e[:, 0] == e[:, 1]
    if loops.any():
        raise ValueError(f"self-loop at {e[np.flatnonzero(loops)[0], 0]}")
    e = np.sort(e, axis=1)
    return np.unique(e, axis=0)


class Graph:
    """Immutable simple undirected graph on vertices ``0..n-1``."""

    __slots__ = ("n", "edges", "indptr", "indices", "_degree", "_hash")

    def __init__(self, n: int, edges: Iterable[Sequence[int]] = ()):
        if n < 0:
            raise ValueError("n must be non-negative")
        self.n = int(n)
        e = _canonical_edges(self.n, edges)
        self.edges: tuple[Edge, ...] = tuple(map(tuple, e.tolist()))
        heads = np.concatenate([e[:, 0], e[:, 1]])
        tails = np.concatenate([e[:, 1], e[:, 0]])
        order = np.lexsort((tails, heads))
        indptr = np.zeros(self.n + 1, dtype=np.int32)
        np.cumsum(np.bincount(heads, minlength=self.n), out=indptr[1:])
        indices = tails[order].astype(np.int32)
        indptr.flags.writeable = False
        indices.flags.writeable = False
        self.indptr = indptr
        self.indices = indices
        self._degree = np.diff(indptr).astype(np.int64)
        self._degree.flags.writeable = False
        self._hash: int | None = None

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def degree(self, v: int | None = None):
        if v is None:
            return self._degree
        return int(self._degree[v])

    @property
    def max_degree(self) -> int:
        return int(self._degree.max()) if self.n else 0

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return bool(i < len(nb) and nb[i] == v)

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        return bool((bfs_distances(self, [0]) >= 0).all())

    def induced_edge_count(self, vertices: Iterable[int]) -> int:
        s = set(vertices)
        return sum(1 for u, v in self.edges if u in s and v in s)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Graph) and self.n == other.n and self.edges == other.edges

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.n, self.edges))
        return self._hash

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"

    # -- text format ---------------------------------------------------

    def dumps(self) -> str:
        lines = [f"{self.n} {self.m}"]
        lines.extend(f"{u} {v}" for u, v in self.edges)
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Graph":
        lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
        lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("#")]
        if not lines:
            raise GraphFormatError("empty graph file", 1)
        lineno, header = lines[0]
        parts = header.split()
        if len(parts) != 2:
            raise GraphFormatError("header must be 'n m'", lineno)
        try:
            n, m = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError("header must be two integers", lineno) from None
        if n < 0 or m < 0:
            raise GraphFormatError("negative n or m", lineno)
        body = lines[1:]
        if len(body) != m:
            at = body[m][0] if len(body) > m else (body[-1][0] + 1 if body else lineno + 1)
            raise GraphFormatError(f"expected {m} edge lines, found {len(body)}", at)
        edges: set[Edge] = set()
        for lineno, ln in body:
            parts = ln.split()
            if len(parts) != 2:
                raise GraphFormatError("edge line must be 'u v'", lineno)
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphFormatError("edge endpoints must be integers", lineno) from None
            if not (0 <= u < n and 0 <= v < n):
                raise GraphFormatError(f"vertex out of range 0..{n - 1}", lineno)
            if u == v:
                raise GraphFormatError("self-loop", lineno)
            e = (min(u, v), max(u, v))
            if e in edges:
                raise GraphFormatError(f"duplicate edge {e}", lineno)
            edges.add(e)
        return cls(n, edges)

    @classmethod
    def load(cls, path) -> "Graph":
        with open(path, encoding="ascii") as fh:
            return cls.loads(fh.read())


@dataclass(frozen=True)
class WeightedGraph:
    """A graph with a positive weight per edge, aligned with ``base.edges``."""

    base: Graph
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (self.base.m,):
            raise ValueError(f"need {self.base.m} weights, got shape {w.shape}")
        if not np.all(w > 0):
            raise ValueError("edge weights must be positive")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @classmethod
    def unweighted(cls, g: Graph) -> "WeightedGraph":
        return cls(g, np.ones(g.m))

    @property
    def n(self) -> int:
        return self.base.n

    def weight(self, u: int, v: int) -> float:
        e = (u, v) if u < v else (v, u)
        i = _edge_index(self.base)[e]
        return float(self.weights[i])

    def total_weight(self) -> float:
        return float(self.weights.sum())

    def vertex_strength(self) -> np.ndarray:
        """Total incident weight per vertex."""
        s = np.zeros(self.n)
        if self.base.m:
            e = np.asarray(self.base.edges)
            np.add.at(s, e[:, 0], self.weights)
            np.add.at(s, e[:, 1], self.weights)
        return s

    def transition_row(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        """Neighbors of ``v`` (sorted) and their transition probabilities."""
        nb = self.base.neighbors(v)
        idx = _edge_index(self.base)
        w = np.array([self.weights[idx[(v, u) if v < u else (u, v)]] for u in nb])
        return nb, w / w.sum()

    def dumps(self) -> str:
        return "".join(f"{u} {v} {w!r}\n" for (u, v), w in zip(self.base.edges, self.weights.tolist()))

    @classmethod
    def loads_weights(cls, g: Graph, text: str) -> "WeightedGraph":
        """Parse ``u v w`` lines, one per edge of ``g``."""
        idx = _edge_index(g)
        w = np.full(g.m, np.nan)
        for lineno, ln in enumerate(text.splitlines(), 1):
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            parts = ln.split()
            if len(parts) != 3:
                raise GraphFormatError("weight line must be 'u v w'", lineno)
            try:
                u, v, x = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise GraphFormatError("bad number", lineno) from None
            e = (min(u, v), max(u, v))
            if e not in idx:
                raise GraphFormatError(f"{e} is not an edge of the graph", lineno)
            w[idx[e]] = x
        if np.isnan(w).any():
            raise GraphFormatError("some edges have no weight", 1)
        return cls(g, w)


_EDGE_INDEX_CACHE: dict[int, tuple[Graph, dict[Edge, int]]] = {}


def _edge_index(g: Graph) -> dict[Edge, int]:
    hit = _EDGE_INDEX_CACHE.get(id(g))
    if hit is not None and hit[0] is g:
        return hit[1]
    idx = {e: i for i, e in enumerate(g.edges)}
    if len(_EDGE_INDEX_CACHE) > 64:
        _EDGE_INDEX_CACHE.clear()
    _EDGE_INDEX_CACHE[id(g)] = (g, idx)
    return idx


def _as_mask(n: int, vertices: Iterable[int]) -> np.ndarray:
    mask = np.zeros(n, dtype=np.uint8)
    vs = np.fromiter((int(v) for v in vertices), dtype=np.int64)
    if vs.size and (vs.min() < 0 or vs.max() >= n):
        raise ValueError("vertex id out of range")
    mask[vs] = 1
    return mask


def bfs_distances(g: Graph, sources: Iterable[int], limit: int = -1) -> np.ndarray:
    """Multi-source BFS distances; ``UNREACHABLE`` (-1) marks unreached vertices.

    With ``limit >= 0`` the search stops at that depth.
    """
    mask = _as_mask(g.n, sources)
    if not mask.any():
        raise ValueError("bfs_distances needs a non-empty source set")
    return kernels.bfs(g.indptr, g.indices, mask, limit)


def distance_matrix(g: Graph) -> np.ndarray:
    """All-pairs hop distances (int32, -1 where unreachable)."""
    return kernels.all_pairs(g.indptr, g.indices)


def ball(g: Graph, v: int, r: int) -> frozenset[int]:
    if r < 0:
        raise ValueError("radius must be non-negative")
    if not 0 <= v < g.n:
        raise ValueError("vertex out of range")
    d = bfs_distances(g, [v], limit=r)
    return frozenset(np.flatnonzero(d >= 0).tolist())


def ball_sizes(g: Graph, r: int) -> np.ndarray:
    """``|B(v, r)|`` for every vertex."""
    if r < 0:
        raise ValueError("radius must be non-negative")
    return kernels.ball_sizes(g.indptr, g.indices, r)


def closed_neighborhood(g: Graph, U: Iterable[int]) -> frozenset[int]:
    out = set(int(u) for u in U)
    for u in list(out):
        out.update(g.neighbors(u).tolist())
    return frozenset(out)


def graph_power(g: Graph, k: int) -> Graph:
    """``G^k``: join every pair at distance between 1 and ``k``."""
    if k < 1:
        raise ValueError("graph power needs k >= 1")
    edges = []
    for v in range(g.n):
        d = bfs_distances(g, [v], limit=k)
        for u in np.flatnonzero(d > 0).tolist():
            if u > v:
                edges.append((v, u))
    return Graph(g.n, edges)


def induced_radius(g: Graph, U: Iterable[int]) -> tuple[float, int]:
    """Radius of ``G[U]`` and a center attaining it.

    Returns ``(math.inf, center)`` when ``G[U]`` is disconnected, where the
    center is the lowest-id member of ``U``.
    """
    members = sorted(set(int(u) for u in U))
    if not members:
        raise ValueError("induced_radius of an empty set")
    sub, relabel = induced_subgraph(g, members)
    if len(members) == 1:
        return 0, members[0]
    dm = distance_matrix(sub)
    if (dm < 0).any():
        return INFINITE_RADIUS, members[0]
    ecc = dm.max(axis=1)
    c = int(np.argmin(ecc))
    return int(ecc[c]), members[c]


def _masked_csr(g: Graph, inside: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """CSR of ``G[inside]`` kept in the original vertex numbering."""
    rows = np.repeat(np.arange(g.n), g.degree())
    keep = inside[rows] & inside[g.indices]
    indptr = np.zeros(g.n + 1, dtype=np.int32)
    np.cumsum(np.bincount(rows[keep], minlength=g.n), out=indptr[1:])
    return indptr, np.ascontiguousarray(g.indices[keep])


def eccentricity_within(g: Graph, U: Iterable[int], center: int) -> float:
    """Max distance from ``center`` to members of ``U`` inside ``G[U]``."""
    inside = np.zeros(g.n, dtype=bool)
    inside[np.fromiter((int(u) for u in U), dtype=np.int64)] = True
    if not inside[center]:
        return INFINITE_RADIUS
    indptr, indices = _masked_csr(g, inside)
    mask = np.zeros(g.n, dtype=np.uint8)
    mask[center] = 1
    d = kernels.bfs(indptr, indices, mask, -1)[inside]
    if (d < 0).any():
        return INFINITE_RADIUS
    return int(d.max())


def induced_subgraph(g: Graph, vertices: Sequence[int]) -> tuple[Graph, dict[int, int]]:
    vertices = [int(v) for v in vertices]
    relabel = {v: i for i, v in enumerate(vertices)}
    new = np.full(g.n, -1, dtype=np.int64)
    new[vertices] = np.arange(len(vertices))
    if g.m:
        e = new[np.asarray(g.edges)]
        e = e[(e >= 0).all(axis=1)]
    else:
        e = np.zeros((0, 2), dtype=np.int64)
    return Graph(len(vertices), e), relabel


def edge_distance(g: Graph, e: Sequence[int], U: Iterable[int]) -> int:
    """Distance from edge ``uv`` to ``U``: the smaller endpoint distance."""
    u, v = int(e[0]), int(e[1])
    if not g.has_edge(u, v):
        raise ValueError(f"({u}, {v}) is not an edge")
    d = bfs_distances(g, U)
    return int(min(d[u], d[v]))


def edge_distances(g: Graph, dist_to_U: np.ndarray) -> np.ndarray:
    """Per-edge distance to ``U`` given a vertex distance field."""
    if not g.m:
        return np.zeros(0, dtype=np.int64)
    e = np.asarray(g.edges)
    return np.minimum(dist_to_U[e[:, 0]], dist_to_U[e[:, 1]]).astype(np.int64)


def weight_field(g: Graph, U: Iterable[int], eps: float) -> WeightedGraph:
    """Weights ``(1 - eps) ** dist(e, U)``; edges touching ``U`` get weight 1."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    d = bfs_distances(g, U)
    if (d < 0).any():
        raise ValueError("weight_field requires a connected graph")
    return weight_field_from_distances(g, d, eps)


def weight_field_from_distances(g: Graph, dist_to_U: np.ndarray, eps: float) -> WeightedGraph:
    ed = edge_distances(g, dist_to_U)
    w = np.power(1.0 - eps, ed.astype(float))
    # far edges underflow (and eps == 1 zeroes them); keep weights positive
    np.maximum(w, np.finfo(float).tiny, out=w)
    return WeightedGraph(g, w)
