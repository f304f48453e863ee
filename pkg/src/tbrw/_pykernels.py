"""Pure-Python implementations of the hot loops.

Each function mirrors its counterpart in ``_ckernels.pyx`` and consumes the
random stream identically (doubles drawn from ``Generator.random``), so both
back ends produce the same walks for the same seed.
"""
from collections import deque

import numpy as np

MODE_PHI_U = 0
MODE_NAIVE = 1
MODE_SIMPLE = 2

STOP_COVER = 0
STOP_HIT = 1

_CHUNK = 4096


class _Uniforms:
    __slots__ = ("rng", "buf", "pos")

    def __init__(self, rng):
        self.rng = rng
        self.buf = []
        self.pos = 0

    def next(self):
        if self.pos >= len(self.buf):
            self.buf = self.rng.random(_CHUNK).tolist()
            self.pos = 0
        x = self.buf[self.pos]
        self.pos += 1
        return x


def bfs(indptr, indices, source_mask, limit):
    n = len(indptr) - 1
    dist = np.full(n, -1, dtype=np.int32)
    q = deque()
    for v in np.flatnonzero(source_mask).tolist():
        dist[v] = 0
        q.append(v)
    ip = indptr.tolist()
    ix = indices.tolist()
    d = dist.tolist()
    while q:
        v = q.popleft()
        dv = d[v]
        if limit >= 0 and dv >= limit:
            continue
        for j in range(ip[v], ip[v + 1]):
            u = ix[j]
            if d[u] < 0:
                d[u] = dv + 1
                q.append(u)
    return np.asarray(d, dtype=np.int32)


def all_pairs(indptr, indices):
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import shortest_path

    n = len(indptr) - 1
    if n == 0:
        return np.zeros((0, 0), dtype=np.int32)
    a = csr_matrix((np.ones(len(indices)), indices, indptr), shape=(n, n))
    d = shortest_path(a, method="D", directed=False, unweighted=True)
    out = np.where(np.isinf(d), -1, d).astype(np.int32)
    return out


def ball_sizes(indptr, indices, radius):
    n = len(indptr) - 1
    out = np.empty(n, dtype=np.int64)
    mask = np.zeros(n, dtype=np.uint8)
    for v in range(n):
        mask[v] = 1
        out[v] = int((bfs(indptr, indices, mask, radius) >= 0).sum())
        mask[v] = 0
    return out


def controller_pick(ip, ix, dist, v, mode, eps, u):
    """Sample the controller's neighbor of ``v`` from the uniform ``u``."""
    a, b = ip[v], ip[v + 1]
    dv = dist[v]
    deg = b - a
    if mode == MODE_SIMPLE or dv <= 0:
        j = int(u * deg)
        return ix[a + (j if j < deg else deg - 1)]
    n1 = 0
    for j in range(a, b):
        if dist[ix[j]] == dv - 1:
            n1 += 1
    if n1 == 0:
        # only reachable with a stale field; fall back to uniform
        j = int(u * deg)
        return ix[a + (j if j < deg else deg - 1)]
    if mode == MODE_NAIVE:
        q1 = 1.0 / n1
        q2 = 0.0
    else:
        n2 = deg - n1
        p = phi_u_p(n1, n2, eps)
        q1 = (1.0 - p) / n1
        q2 = p / n2 if n2 else 0.0
    cum = 0.0
    last = -1
    for j in range(a, b):
        w = ix[j]
        q = q1 if dist[w] == dv - 1 else q2
        if q > 0.0:
            last = w
            cum += q
            if u < cum:
                return w
    return last


def phi_u_p(n1, n2, eps):
    """Probability the emulating controller picks a non-descending neighbor."""
    if n2 == 0:
        return 0.0
    om = 1.0 - eps
    return (om * n2 * n2) / ((n1 + n2) * (n1 + om * n2))


def walk_schedule(indptr, indices, eps, mode, fields, leg_field, leg_target,
                  start, stop, stop_mask, cap, rng, record_vertices=None,
                  record_flags=None):
    """Run one eps-TBRW with distance-field controllers.

    The controller at each step uses ``fields[leg_field[leg]]``; the leg index
    advances whenever the walk stands on ``leg_target[leg]``.  Stops on cover
    (``STOP_COVER``) or on entering ``stop_mask`` (``STOP_HIT``).

    Returns ``(steps, first_visit, finished)``.
    """
    n = len(indptr) - 1
    ip = indptr.tolist()
    ix = indices.tolist()
    rows = [f.tolist() for f in fields]
    lf = leg_field.tolist()
    lt = leg_target.tolist()
    nlegs = len(lf)
    smask = stop_mask.tolist() if stop_mask is not None else None
    first = [-1] * n
    unif = _Uniforms(rng)
    rec_v = record_vertices
    rec_f = record_flags
    nrec = len(rec_v) if rec_v is not None else 0

    v = start
    t = 0
    first[v] = 0
    seen = 1
    leg = 0
    while leg < nlegs - 1 and lt[leg] == v:
        leg += 1
    if nrec:
        rec_v[0] = v
        rec_f[0] = 0
    if stop == STOP_COVER and seen == n:
        return 0, np.asarray(first, dtype=np.int64), True
    if stop == STOP_HIT and smask[v]:
        return 0, np.asarray(first, dtype=np.int64), True
    dist = rows[lf[leg]]
    while t < cap:
        u1 = unif.next()
        u2 = unif.next()
        a = ip[v]
        deg = ip[v + 1] - a
        if u1 < eps:
            v = controller_pick(ip, ix, dist, v, mode, eps, u2)
            flag = 1
        else:
            j = int(u2 * deg)
            v = ix[a + (j if j < deg else deg - 1)]
            flag = 0
        t += 1
        if t < nrec:
            rec_v[t] = v
            rec_f[t] = flag
        if first[v] < 0:
            first[v] = t
            seen += 1
        moved = False
        while leg < nlegs - 1 and lt[leg] == v:
            leg += 1
            moved = True
        if moved:
            dist = rows[lf[leg]]
        if stop == STOP_COVER:
            if seen == n:
                return t, np.asarray(first, dtype=np.int64), True
        elif smask[v]:
            return t, np.asarray(first, dtype=np.int64), True
    return t, np.asarray(first, dtype=np.int64), False


def explore_walk(indptr, indices, eps, fields, in_w, w_size, parent, child_ptr,
                 child_idx, entry, root, start, cap, rng, record_vertices=None,
                 record_owner=None):
    """Simulate the depth-first exploration strategy until the root finishes.

    ``fields[i]`` is the distance field to ``W_i`` and ``in_w[i]`` its
    membership mask; children of ``i`` are ``child_idx[child_ptr[i]:child_ptr[i+1]]``
    and ``entry[j]`` is the portal where exploration ``j`` starts.

    Returns ``(steps, cover_time, L, finished)`` where ``L[i]`` counts the
    transitions chosen while exploration ``i`` was active.
    """
    n = len(indptr) - 1
    m = len(w_size)
    ip = indptr.tolist()
    ix = indices.tolist()
    rows = [f.tolist() for f in fields]
    member = [w.tolist() for w in in_w]
    wsz = w_size.tolist()
    cp = child_ptr.tolist()
    ci = child_idx.tolist()
    ent = entry.tolist()
    unif = _Uniforms(rng)
    rec_v = record_vertices
    rec_o = record_owner
    nrec = len(rec_v) if rec_v is not None else 0

    visited = [bytearray(n) for _ in range(m)]
    covered = [0] * m
    launched = [False] * m
    pending = [0] * m  # unexplored children count
    for i in range(m):
        pending[i] = cp[i + 1] - cp[i]
    L = [0] * m
    port = {}
    stack = [root]
    launched[root] = True

    def rebuild(i):
        port.clear()
        for k in range(cp[i + 1] - 1, cp[i] - 1, -1):
            j = ci[k]
            if not launched[j]:
                port[ent[j]] = j

    seen_global = bytearray(n)
    seen_global[start] = 1
    nseen = 1
    cover_time = 0 if n == 1 else -1

    def settle(v):
        # process arrival at v; returns False once the root has finished
        while True:
            i = stack[-1]
            if member[i][v] and not visited[i][v]:
                visited[i][v] = 1
                covered[i] += 1
            j = port.get(v, -1)
            if j >= 0:
                launched[j] = True
                pending[i] -= 1
                stack.append(j)
                rebuild(j)
                continue
            if pending[i] == 0 and covered[i] == wsz[i] and v == ent[i]:
                stack.pop()
                if not stack:
                    return False
                rebuild(stack[-1])
                continue
            return True

    v = start
    rebuild(root)
    alive = settle(v)
    t = 0
    if nrec:
        rec_v[0] = v
    while alive and t < cap:
        i = stack[-1]
        if t < nrec:
            rec_o[t] = i
        dist = rows[i]
        u1 = unif.next()
        u2 = unif.next()
        a = ip[v]
        deg = ip[v + 1] - a
        if u1 < eps:
            v = controller_pick(ip, ix, dist, v, MODE_PHI_U, eps, u2)
        else:
            j = int(u2 * deg)
            v = ix[a + (j if j < deg else deg - 1)]
        t += 1
        L[i] += 1
        if t < nrec:
            rec_v[t] = v
        if not seen_global[v]:
            seen_global[v] = 1
            nseen += 1
            if nseen == n:
                cover_time = t
        alive = settle(v)
    return t, cover_time, np.asarray(L, dtype=np.int64), not alive
