"""Graph families: standard test graphs and the two lower-bound constructions."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .graph import Graph


def make_path(n: int) -> Graph:
    if n < 1:
        raise ValueError("path needs n >= 1")
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


def make_cycle(n: int) -> Graph:
    if n < 3:
        raise ValueError("cycle needs n >= 3")
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def make_grid(rows: int, cols: int) -> Graph:
    """``rows x cols`` grid; vertex ``(r, c)`` has id ``r * cols + c``."""
    if rows < 1 or cols < 1:
        raise ValueError("grid sides must be positive")
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return Graph(rows * cols, edges)


def make_complete(n: int) -> Graph:
    if n < 1:
        raise ValueError("complete graph needs n >= 1")
    return Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def make_star(n: int) -> Graph:
    if n < 2:
        raise ValueError("star needs n >= 2")
    return Graph(n, [(0, i) for i in range(1, n)])


def make_binary_tree(n: int) -> Graph:
    """Complete binary tree on ``n`` vertices in heap order."""
    if n < 1:
        raise ValueError("tree needs n >= 1")
    return Graph(n, [((i - 1) // 2, i) for i in range(1, n)])


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def make_random_regular(n: int, d: int, seed=None, connected: bool = True,
                        max_tries: int = 10_000) -> Graph:
    """Random simple ``d``-regular graph by the pairing model with rejection."""
    if n * d % 2:
        raise ValueError("n * d must be even")
    if not 0 <= d < n:
        raise ValueError("need 0 <= d < n")
    rng = _rng(seed)
    points = np.repeat(np.arange(n), d)
    for _ in range(max_tries):
        perm = rng.permutation(points).reshape(-1, 2)
        if np.any(perm[:, 0] == perm[:, 1]):
            continue
        lo = perm.min(axis=1)
        hi = perm.max(axis=1)
        keys = lo.astype(np.int64) * n + hi
        if np.unique(keys).size != keys.size:
            continue
        g = Graph(n, zip(lo.tolist(), hi.tolist()))
        if connected and not g.is_connected():
            continue
        return g
    raise RuntimeError(f"no simple {d}-regular graph on {n} vertices after {max_tries} tries")


def make_random_connected(n: int, p: float, seed=None) -> Graph:
    """Random spanning tree plus independent extra edges with probability ``p``."""
    rng = _rng(seed)
    order = rng.permutation(n)
    edges = set()
    for i in range(1, n):
        j = int(rng.integers(i))
        a, b = int(order[i]), int(order[j])
        edges.add((min(a, b), max(a, b)))
    if p > 0:
        iu, ju = np.triu_indices(n, 1)
        pick = rng.random(iu.size) < p
        edges.update(zip(iu[pick].tolist(), ju[pick].tolist()))
    return Graph(n, edges)


# -- layered lower-bound graph ----------------------------------------------


def layered_k(n: int) -> int:
    """The ``k`` with ``2^k - 2 <= n < 2^(k+1) - 2``."""
    if n < 6:
        raise ValueError("layered graph needs n >= 6")
    k = 1
    while 2 ** (k + 1) - 2 <= n:
        k += 1
    return k


def layered_sizes(n: int) -> list[int]:
    k = layered_k(n)
    sizes = [2 ** i for i in range(1, k)]
    sizes[-1] += n - (2 ** k - 2)
    return sizes


def make_layered(n: int) -> tuple[Graph, list[int]]:
    """Consecutive layers of sizes 2, 4, 8, ... joined completely.

    Returns the graph and the 1-based layer of each vertex. Only the last
    layer is enlarged to reach ``n``.
    """
    sizes = layered_sizes(n)
    layer = []
    starts = []
    for i, s in enumerate(sizes, 1):
        starts.append(len(layer))
        layer.extend([i] * s)
    edges = []
    for i in range(len(sizes) - 1):
        a = range(starts[i], starts[i] + sizes[i])
        b = range(starts[i + 1], starts[i + 1] + sizes[i + 1])
        edges.extend(product(a, b))
    return Graph(n, edges), layer


# -- affine Cayley graphs -----------------------------------------------------


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    i = 2
    while i * i <= p:
        if p % i == 0:
            return False
        i += 1
    return True


@dataclass(frozen=True)
class AffineCayleySpec:
    """``radius=2``: maps x -> lam*x + u; ``radius=3``: pairs with a common slope."""

    p: int
    radius: int = 2

    def __post_init__(self):
        if self.radius not in (2, 3):
            raise ValueError("radius must be 2 or 3")
        if self.p < 3 or not is_prime(self.p):
            raise ValueError(f"p={self.p} must be an odd prime")

    @property
    def group_order(self) -> int:
        p = self.p
        return p * (p - 1) if self.radius == 2 else p * p * (p - 1)

    @property
    def n(self) -> int:
        return 2 * self.group_order


class AffineGroup:
    """Elements ``(lam, u_1, ..., u_d)`` acting as ``x -> lam*x + u_j`` coordinatewise."""

    def __init__(self, p: int, dim: int):
        self.p = p
        self.dim = dim
        self.elements = [(lam,) + us for lam in range(1, p)
                         for us in product(range(p), repeat=dim)]
        self.index = {g: i for i, g in enumerate(self.elements)}

    def compose(self, f, g):
        """``f o g``."""
        p = self.p
        a = f[0]
        return ((a * g[0]) % p,) + tuple((a * d + b) % p for d, b in zip(g[1:], f[1:]))

    def inverse(self, f):
        p = self.p
        ai = pow(f[0], p - 2, p)
        return (ai,) + tuple((-ai * b) % p for b in f[1:])

    def identity(self):
        return (1,) + (0,) * self.dim

    def slope(self, lam):
        return (lam,) + (0,) * self.dim

    def shift(self, vec):
        return (1,) + tuple(vec)


def affine_generators(spec: AffineCayleySpec) -> tuple[AffineGroup, list, list]:
    """The group, the coset representatives ``S`` and the subgroup ``H``."""
    p = spec.p
    if spec.radius == 2:
        grp = AffineGroup(p, 1)
        S = [grp.shift((0,)), grp.shift((1,))]
    else:
        grp = AffineGroup(p, 2)
        S = [grp.shift(v) for v in ((0, 0), (0, 1), (1, 0))]
    H = [grp.slope(lam) for lam in range(1, p)]
    return grp, S, H


@dataclass
class CayleyLabels:
    part: list[str]
    element: list[tuple]
    spec: AffineCayleySpec

    def y_vertices(self) -> range:
        N = self.spec.group_order
        return range(N, 2 * N)


def make_affine_cayley(spec: AffineCayleySpec) -> tuple[Graph, CayleyLabels]:
    """Bipartite Cayley graph: ``f`` in X joined to ``(s h) f`` in Y.

    X holds vertex ids ``0..|G|-1`` and Y ``|G|..2|G|-1``, both in the group's
    element order.
    """
    grp, S, H = affine_generators(spec)
    SH = {grp.compose(s, h) for s in S for h in H}
    if len(SH) != len(S) * len(H):
        raise AssertionError("cosets sH are not disjoint")
    N = len(grp.elements)
    edges = []
    for i, f in enumerate(grp.elements):
        for x in SH:
            edges.append((i, N + grp.index[grp.compose(x, f)]))
    g = Graph(2 * N, edges)
    labels = CayleyLabels(["X"] * N + ["Y"] * N, grp.elements + grp.elements, spec)
    return g, labels
