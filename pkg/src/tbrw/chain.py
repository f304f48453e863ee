"""Exact computations for reversible random walks on weighted graphs.

These are the ground-truth oracles: stationary measures, hitting times to
sets, effective resistances, the commute identity and the Matthews bound, plus
the closed forms for the layered lower-bound graph.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .graph import Graph, WeightedGraph

DENSE_LIMIT = 2000
RESIDUAL_TOL = 1e-9


class SolverError(RuntimeError):
    pass


class DisconnectedError(ValueError):
    pass


def _check_connected(wg: WeightedGraph) -> None:
    if not wg.base.is_connected():
        raise DisconnectedError("chain requires a connected graph")


def transition_matrix(wg: WeightedGraph) -> sp.csr_matrix:
    g = wg.base
    n = g.n
    if g.m == 0:
        return sp.csr_matrix((n, n))
    e = np.asarray(g.edges)
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    vals = np.concatenate([wg.weights, wg.weights])
    s = wg.vertex_strength()
    inv = np.divide(1.0, s, out=np.zeros(n), where=s > 0)
    return sp.csr_matrix((vals * inv[rows], (rows, cols)), shape=(n, n))


def stationary(wg: WeightedGraph) -> np.ndarray:
    """``pi(v)`` proportional to the total weight at ``v``."""
    _check_connected(wg)
    s = wg.vertex_strength()
    if s.sum() == 0:
        return np.ones(wg.n)
    return s / s.sum()


def _solve(A, b: np.ndarray) -> np.ndarray:
    if sp.issparse(A):
        if A.shape[0] <= DENSE_LIMIT:
            x = np.linalg.solve(A.toarray(), b)
        else:
            x = spla.spsolve(A.tocsc(), b)
    else:
        x = np.linalg.solve(A, b)
    res = A @ x - b
    scale = max(1.0, float(np.abs(x).max(initial=0.0)))
    if not np.all(np.isfinite(x)) or np.abs(res).max(initial=0.0) > RESIDUAL_TOL * scale:
        raise SolverError(f"linear solve residual {np.abs(res).max():.3e} too large")
    return x


def hitting_times(wg: WeightedGraph, target: Iterable[int]) -> np.ndarray:
    """Expected steps to reach ``target`` from each vertex (0 on the target)."""
    tgt = np.zeros(wg.n, dtype=bool)
    tgt[list(target)] = True
    if not tgt.any():
        raise ValueError("hitting_times needs a non-empty target")
    _check_connected(wg)
    P = transition_matrix(wg)
    free = np.flatnonzero(~tgt)
    h = np.zeros(wg.n)
    if free.size:
        Q = P[free][:, free]
        A = sp.identity(free.size, format="csr") - Q
        h[free] = _solve(A, np.ones(free.size))
    return h


def hitting_times_in(wg: WeightedGraph, target: Iterable[int], vertices: Iterable[int]) -> np.ndarray:
    """Hitting times to ``target`` for the walk restricted to ``vertices``.

    The chain lives on the subgraph induced by ``vertices`` with the same
    weights; used for the layer chains where the graph is not connected as a
    whole. Entries outside ``vertices`` are ``nan``.
    """
    keep = np.zeros(wg.n, dtype=bool)
    keep[list(vertices)] = True
    tgt = np.zeros(wg.n, dtype=bool)
    tgt[list(target)] = True
    P = _restricted_transitions(wg, keep)
    free = np.flatnonzero(keep & ~tgt)
    h = np.full(wg.n, np.nan)
    h[keep & tgt] = 0.0
    if free.size:
        Q = P[free][:, free]
        A = sp.identity(free.size, format="csr") - Q
        h[free] = _solve(A, np.ones(free.size))
    return h


def _restricted_transitions(wg: WeightedGraph, keep: np.ndarray, drop_edges=None) -> sp.csr_matrix:
    g = wg.base
    n = g.n
    e = np.asarray(g.edges).reshape(-1, 2)
    ok = keep[e[:, 0]] & keep[e[:, 1]]
    if drop_edges is not None:
        ok &= ~drop_edges
    e = e[ok]
    w = wg.weights[ok]
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    vals = np.concatenate([w, w])
    s = np.zeros(n)
    np.add.at(s, rows, vals)
    inv = np.divide(1.0, s, out=np.zeros(n), where=s > 0)
    return sp.csr_matrix((vals * inv[rows], (rows, cols)), shape=(n, n))


def hitting_matrix(wg: WeightedGraph) -> np.ndarray:
    """All-pairs ``H[u, v]`` through the fundamental matrix.

    ``H(u, v) = (Z[v, v] - Z[u, v]) / pi(v)`` with ``Z = (I - P + 1 pi^T)^{-1}``.
    Dense; meant for n up to a few thousand.
    """
    pi = stationary(wg)
    n = wg.n
    P = transition_matrix(wg).toarray()
    Z = np.linalg.inv(np.eye(n) - P + np.outer(np.ones(n), pi))
    H = (np.diag(Z)[None, :] - Z) / pi[None, :]
    np.fill_diagonal(H, 0.0)
    return H


def return_time(wg: WeightedGraph, u: int) -> float:
    """Expected first return time to ``u``, by one-step expansion."""
    h = hitting_times(wg, [u])
    nb, p = wg.transition_row(u)
    return 1.0 + float(p @ h[nb])


class ResistanceSolver:
    """Effective resistances with conductances equal to the edge weights.

    Grounds the last vertex and factorizes the reduced Laplacian once.
    """

    def __init__(self, wg: WeightedGraph):
        _check_connected(wg)
        self.wg = wg
        n = wg.n
        g = wg.base
        e = np.asarray(g.edges).reshape(-1, 2)
        w = wg.weights
        rows = np.concatenate([e[:, 0], e[:, 1], np.arange(n)])
        cols = np.concatenate([e[:, 1], e[:, 0], np.arange(n)])
        vals = np.concatenate([-w, -w, wg.vertex_strength()])
        Lap = sp.csc_matrix((vals, (rows, cols)), shape=(n, n))
        self.ground = n - 1
        self._L = Lap
        self._red = Lap[: n - 1, : n - 1].tocsc()
        self._lu = spla.splu(self._red) if n > 1 else None

    def potentials(self, u: int, v: int) -> np.ndarray:
        """Node potentials for unit current injected at ``u``, extracted at ``v``."""
        n = self.wg.n
        b = np.zeros(n)
        b[u] += 1.0
        b[v] -= 1.0
        x = np.zeros(n)
        x[: n - 1] = self._lu.solve(b[: n - 1])
        res = self._L @ x - b
        if np.abs(res).max() > RESIDUAL_TOL * max(1.0, np.abs(x).max()):
            raise SolverError(f"Laplacian residual {np.abs(res).max():.3e} too large")
        return x

    def __call__(self, u: int, v: int) -> float:
        if u == v:
            return 0.0
        x = self.potentials(u, v)
        return float(x[u] - x[v])


def effective_resistance(wg: WeightedGraph, u: int, v: int) -> float:
    if u == v:
        return 0.0
    return ResistanceSolver(wg)(u, v)


def effective_resistance_dense(wg: WeightedGraph, u: int, v: int) -> float:
    """Pseudo-inverse route; independent of :class:`ResistanceSolver`."""
    n = wg.n
    Lap = np.diag(wg.vertex_strength())
    for (a, b), w in zip(wg.base.edges, wg.weights):
        Lap[a, b] -= w
        Lap[b, a] -= w
    Lp = np.linalg.pinv(Lap)
    chi = np.zeros(n)
    chi[u] += 1
    chi[v] -= 1
    return float(chi @ Lp @ chi)


def check_commute_identity(wg: WeightedGraph, u: int, v: int) -> float:
    """``|H(u,v) + H(v,u) - R_eff(u,v) * 2 * total weight|``."""
    if u == v:
        raise ValueError("commute identity needs distinct vertices")
    huv = hitting_times(wg, [v])[u]
    hvu = hitting_times(wg, [u])[v]
    r = effective_resistance(wg, u, v)
    return abs(huv + hvu - r * 2.0 * wg.total_weight())


def harmonic(m: int) -> float:
    return math.fsum(1.0 / j for j in range(1, m + 1))


def matthews_bound(wg: WeightedGraph, W: Iterable[int], H: np.ndarray | None = None) -> float:
    """``max_{u,v in W} H(u,v) * (1 + 1/2 + ... + 1/|W|)``."""
    W = sorted(set(int(w) for w in W))
    if not W:
        raise ValueError("matthews_bound needs a non-empty set")
    if len(W) == 1:
        return 0.0
    if H is None:
        H = hitting_matrix(wg)
    sub = H[np.ix_(W, W)]
    return float(sub.max()) * harmonic(len(W))


# -- layered lower-bound graph --------------------------------------------


def layered_alpha(eps: float) -> float:
    """Ratio of up- to down-steps for the walk steered toward the bottom layer."""
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    return 4.0 - 20.0 * eps / (4.0 * eps + 1.0)


def layered_alpha_from_probabilities(eps: float) -> float:
    """Same quantity from the step probabilities ``(1-eps)4/5`` and ``eps + (1-eps)/5``."""
    return (1.0 - eps) * 0.8 / (eps + (1.0 - eps) / 5.0)


def layered_expected_visits(eps: float, k: int) -> float:
    """``pi_{k-1} / pi_1`` on the layer path with edge weights ``alpha^(i-1)``."""
    if k < 4:
        raise ValueError("k must be at least 4")
    a = layered_alpha(eps)
    path = Graph(k - 1, [(i, i + 1) for i in range(k - 2)])
    wg = WeightedGraph(path, np.array([a ** i for i in range(k - 2)]))
    pi = stationary(wg)
    return float(pi[-1] / pi[0])


# -- solution cache -----------------------------------------------------------


@dataclass
class ChainSolution:
    wg: WeightedGraph
    pi: np.ndarray
    hitting: np.ndarray = field(repr=False)

    def hit(self, u: int, v: int) -> float:
        return float(self.hitting[u, v])


def solve_chain(wg: WeightedGraph) -> ChainSolution:
    return ChainSolution(wg, stationary(wg), hitting_matrix(wg))


class SolutionCache:
    """Thread-safe cache keyed by ``(graph hash, weight hash, target)``."""

    def __init__(self):
        self._lock = threading.Lock()
        self._data: dict = {}

    @staticmethod
    def _key(wg: WeightedGraph, target) -> tuple:
        return (hash(wg.base), hash(wg.weights.tobytes()), tuple(sorted(set(target))))

    def hitting_times(self, wg: WeightedGraph, target: Iterable[int]) -> np.ndarray:
        target = list(target)
        key = self._key(wg, target)
        hit = self._data.get(key)
        if hit is not None:
            return hit
        h = hitting_times(wg, target)
        h.flags.writeable = False
        with self._lock:
            self._data.setdefault(key, h)
        return self._data[key]

    def __len__(self) -> int:
        return len(self._data)


# -- layer-by-layer hitting bound ----------------------------------------------


@dataclass(frozen=True)
class LayerBound:
    layer: int
    T: float  # max over U_i of the hitting time of U_{i-1} in G_i
    rhs: float  # 2 sum_{e in G_i} (1 - eps)^dist(e, U_{i-1})


def layer_bounds(g: Graph, U: Iterable[int], eps: float) -> list[LayerBound]:
    """Per-layer hitting times of ``U_{i-1}`` from ``U_i`` against their edge sums.

    ``U_i`` is the set at distance ``i`` from ``U`` and ``G_i`` the graph on
    ``U_{i-1} | U_i | ...`` with the edges inside ``U_{i-1}`` removed, carrying
    the ``w_U`` weights.
    """
    from .graph import bfs_distances, weight_field_from_distances

    U = list(U)
    d = bfs_distances(g, U)
    if (d < 0).any():
        raise DisconnectedError("graph must be connected")
    wg = weight_field_from_distances(g, d, eps)
    e = np.asarray(g.edges).reshape(-1, 2)
    out = []
    for i in range(1, int(d.max()) + 1):
        keep = d >= i - 1
        lower = np.flatnonzero(d == i - 1)
        h = hitting_times_in(wg, lower, np.flatnonzero(keep))
        T = float(np.nanmax(h[d == i]))
        de = bfs_distances(g, lower.tolist())
        in_gi = keep[e[:, 0]] & keep[e[:, 1]] & ~((d[e[:, 0]] == i - 1) & (d[e[:, 1]] == i - 1))
        ed = np.minimum(de[e[:, 0]], de[e[:, 1]])[in_gi]
        rhs = 2.0 * math.fsum(((1.0 - eps) ** ed).tolist())
        out.append(LayerBound(i, T, rhs))
    return out
