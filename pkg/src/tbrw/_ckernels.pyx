# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: BFS, ball sizes, scheduled eps-TBRW walks, DFS exploration.

Mirrors ``_pykernels`` step for step; both draw doubles through the numpy
bit generator so a given seed yields the same walk on either back end.
"""
import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from numpy.random cimport bitgen_t

cnp.import_array()

cdef enum:
    MODE_PHI_U = 0
    MODE_NAIVE = 1
    MODE_SIMPLE = 2
    STOP_COVER = 0
    STOP_HIT = 1


cdef bitgen_t* _bitgen(rng) except NULL:
    capsule = rng.bit_generator.capsule
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline double _next(bitgen_t* g) noexcept nogil:
    return g.next_double(g.state)


def bfs(const int[::1] indptr, const int[::1] indices, const unsigned char[::1] source_mask,
        long limit):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    dist_arr = np.full(n, -1, dtype=np.int32)
    queue_arr = np.empty(max(n, 1), dtype=np.int32)
    cdef int[::1] dist = dist_arr
    cdef int[::1] queue = queue_arr
    cdef Py_ssize_t head = 0, tail = 0, v, j
    cdef int u, dv
    with nogil:
        for v in range(n):
            if source_mask[v]:
                dist[v] = 0
                queue[tail] = <int>v
                tail += 1
        while head < tail:
            v = queue[head]
            head += 1
            dv = dist[v]
            if limit >= 0 and dv >= limit:
                continue
            for j in range(indptr[v], indptr[v + 1]):
                u = indices[j]
                if dist[u] < 0:
                    dist[u] = dv + 1
                    queue[tail] = u
                    tail += 1
    return dist_arr


def all_pairs(const int[::1] indptr, const int[::1] indices):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    out_arr = np.full((n, n), -1, dtype=np.int32)
    queue_arr = np.empty(max(n, 1), dtype=np.int32)
    cdef int[:, ::1] out = out_arr
    cdef int[::1] queue = queue_arr
    cdef Py_ssize_t s, head, tail, v, j
    cdef int u, dv
    with nogil:
        for s in range(n):
            out[s, s] = 0
            queue[0] = <int>s
            head = 0
            tail = 1
            while head < tail:
                v = queue[head]
                head += 1
                dv = out[s, v]
                for j in range(indptr[v], indptr[v + 1]):
                    u = indices[j]
                    if out[s, u] < 0:
                        out[s, u] = dv + 1
                        queue[tail] = u
                        tail += 1
    return out_arr


def ball_sizes(const int[::1] indptr, const int[::1] indices, long radius):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    out_arr = np.empty(n, dtype=np.int64)
    dist_arr = np.full(max(n, 1), -1, dtype=np.int32)
    queue_arr = np.empty(max(n, 1), dtype=np.int32)
    cdef long long[::1] out = out_arr
    cdef int[::1] dist = dist_arr
    cdef int[::1] queue = queue_arr
    cdef Py_ssize_t s, head, tail, v, j, k
    cdef int u, dv
    with nogil:
        for s in range(n):
            dist[s] = 0
            queue[0] = <int>s
            head = 0
            tail = 1
            while head < tail:
                v = queue[head]
                head += 1
                dv = dist[v]
                if dv >= radius:
                    continue
                for j in range(indptr[v], indptr[v + 1]):
                    u = indices[j]
                    if dist[u] < 0:
                        dist[u] = dv + 1
                        queue[tail] = u
                        tail += 1
            out[s] = tail
            for k in range(tail):
                dist[queue[k]] = -1
    return out_arr


def phi_u_p(long n1, long n2, double eps):
    return _phi_u_p(n1, n2, eps)


cdef inline double _phi_u_p(long n1, long n2, double eps) noexcept nogil:
    cdef double om
    if n2 == 0:
        return 0.0
    om = 1.0 - eps
    return (om * <double>n2 * <double>n2) / (<double>(n1 + n2) * (<double>n1 + om * <double>n2))


cdef inline int _uniform_pick(const int[::1] indptr, const int[::1] indices, int v,
                              double u) noexcept nogil:
    cdef int a = indptr[v]
    cdef int deg = indptr[v + 1] - a
    cdef int j = <int>(u * deg)
    if j >= deg:
        j = deg - 1
    return indices[a + j]


cdef inline int _controller_pick(const int[::1] indptr, const int[::1] indices,
                                 const int* dist, int v, int mode, double eps,
                                 double u) noexcept nogil:
    cdef int a = indptr[v]
    cdef int b = indptr[v + 1]
    cdef int dv = dist[v]
    cdef int deg = b - a
    cdef int n1 = 0, n2, j, w, last = -1
    cdef double p, q1, q2, q, cum = 0.0
    if mode == MODE_SIMPLE or dv <= 0:
        return _uniform_pick(indptr, indices, v, u)
    for j in range(a, b):
        if dist[indices[j]] == dv - 1:
            n1 += 1
    if n1 == 0:
        return _uniform_pick(indptr, indices, v, u)
    if mode == MODE_NAIVE:
        q1 = 1.0 / n1
        q2 = 0.0
    else:
        n2 = deg - n1
        p = _phi_u_p(n1, n2, eps)
        q1 = (1.0 - p) / n1
        q2 = p / n2 if n2 else 0.0
    for j in range(a, b):
        w = indices[j]
        q = q1 if dist[w] == dv - 1 else q2
        if q > 0.0:
            last = w
            cum += q
            if u < cum:
                return w
    return last


def controller_pick(const int[::1] indptr, const int[::1] indices, const int[::1] dist,
                    int v, int mode, double eps, double u):
    return _controller_pick(indptr, indices, &dist[0], v, mode, eps, u)


def walk_schedule(const int[::1] indptr, const int[::1] indices, double eps, int mode,
                  const int[:, ::1] fields, const int[::1] leg_field,
                  const int[::1] leg_target, int start, int stop, stop_mask,
                  long long cap, rng, record_vertices=None, record_flags=None):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t nlegs = leg_field.shape[0]
    first_arr = np.full(n, -1, dtype=np.int64)
    cdef long long[::1] first = first_arr
    cdef const unsigned char[::1] smask
    if stop_mask is None:
        smask = np.zeros(n, dtype=np.uint8)
    else:
        smask = stop_mask
    cdef int[::1] rec_v
    cdef unsigned char[::1] rec_f
    cdef long long nrec = 0
    if record_vertices is not None:
        rec_v = record_vertices
        rec_f = record_flags
        nrec = rec_v.shape[0]
    cdef bitgen_t* g = _bitgen(rng)
    cdef int v = start
    cdef long long t = 0
    cdef Py_ssize_t seen = 1, leg = 0
    cdef double u1, u2
    cdef unsigned char flag
    cdef bint moved, done = False

    first[v] = 0
    while leg < nlegs - 1 and leg_target[leg] == v:
        leg += 1
    if nrec:
        rec_v[0] = v
        rec_f[0] = 0
    if stop == STOP_COVER and seen == n:
        return 0, first_arr, True
    if stop == STOP_HIT and smask[v]:
        return 0, first_arr, True
    with rng.bit_generator.lock:
        with nogil:
            while t < cap:
                u1 = _next(g)
                u2 = _next(g)
                if u1 < eps:
                    v = _controller_pick(indptr, indices, &fields[leg_field[leg], 0], v, mode, eps,
                                         u2)
                    flag = 1
                else:
                    v = _uniform_pick(indptr, indices, v, u2)
                    flag = 0
                t += 1
                if t < nrec:
                    rec_v[t] = v
                    rec_f[t] = flag
                if first[v] < 0:
                    first[v] = t
                    seen += 1
                while leg < nlegs - 1 and leg_target[leg] == v:
                    leg += 1
                if stop == STOP_COVER:
                    if seen == n:
                        done = True
                        break
                elif smask[v]:
                    done = True
                    break
    return t, first_arr, done


cdef inline void _rebuild(int[::1] port, const int[::1] child_ptr, const int[::1] child_idx,
                          const int[::1] entry, const unsigned char[::1] launched,
                          int prev, int cur) noexcept nogil:
    cdef int k, j
    if prev >= 0:
        for k in range(child_ptr[prev], child_ptr[prev + 1]):
            port[entry[child_idx[k]]] = -1
    for k in range(child_ptr[cur + 1] - 1, child_ptr[cur] - 1, -1):
        j = child_idx[k]
        if not launched[j]:
            port[entry[j]] = j


def explore_walk(const int[::1] indptr, const int[::1] indices, double eps,
                 const int[:, ::1] fields, const unsigned char[:, ::1] in_w,
                 const long long[::1] w_size, parent, const int[::1] child_ptr,
                 const int[::1] child_idx, const int[::1] entry, int root, int start,
                 long long cap, rng, record_vertices=None, record_owner=None):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t m = w_size.shape[0]
    visited_arr = np.zeros((m, n), dtype=np.uint8)
    covered_arr = np.zeros(m, dtype=np.int64)
    launched_arr = np.zeros(m, dtype=np.uint8)
    pending_arr = np.diff(np.asarray(child_ptr)).astype(np.int64)
    L_arr = np.zeros(m, dtype=np.int64)
    port_arr = np.full(n, -1, dtype=np.int32)
    stack_arr = np.empty(m, dtype=np.int32)
    seen_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[:, ::1] visited = visited_arr
    cdef long long[::1] covered = covered_arr
    cdef unsigned char[::1] launched = launched_arr
    cdef long long[::1] pending = pending_arr
    cdef long long[::1] L = L_arr
    cdef int[::1] port = port_arr
    cdef int[::1] stack = stack_arr
    cdef unsigned char[::1] seen = seen_arr
    cdef int[::1] rec_v
    cdef int[::1] rec_o
    cdef long long nrec = 0
    if record_vertices is not None:
        rec_v = record_vertices
        rec_o = record_owner
        nrec = rec_v.shape[0]
    cdef bitgen_t* g = _bitgen(rng)
    cdef Py_ssize_t top = 0, nseen = 1
    cdef int v = start, i, j
    cdef long long t = 0, cover_time = 0 if n == 1 else -1
    cdef double u1, u2
    cdef bint alive = True

    stack[0] = root
    launched[root] = 1
    seen[start] = 1
    _rebuild(port, child_ptr, child_idx, entry, launched, -1, root)
    with rng.bit_generator.lock:
        with nogil:
            alive = _settle(v, stack, &top, in_w, visited, covered, port, launched, pending,
                            w_size, entry, child_ptr, child_idx)
            if nrec:
                rec_v[0] = v
            while alive and t < cap:
                i = stack[top]
                if t < nrec:
                    rec_o[t] = i
                u1 = _next(g)
                u2 = _next(g)
                if u1 < eps:
                    v = _controller_pick(indptr, indices, &fields[i, 0], v, MODE_PHI_U, eps, u2)
                else:
                    v = _uniform_pick(indptr, indices, v, u2)
                t += 1
                L[i] += 1
                if t < nrec:
                    rec_v[t] = v
                if not seen[v]:
                    seen[v] = 1
                    nseen += 1
                    if nseen == n:
                        cover_time = t
                alive = _settle(v, stack, &top, in_w, visited, covered, port, launched, pending,
                                w_size, entry, child_ptr, child_idx)
    return t, cover_time, L_arr, not alive


cdef bint _settle(int v, int[::1] stack, Py_ssize_t* top, const unsigned char[:, ::1] in_w,
                  unsigned char[:, ::1] visited, long long[::1] covered, int[::1] port,
                  unsigned char[::1] launched, long long[::1] pending,
                  const long long[::1] w_size, const int[::1] entry,
                  const int[::1] child_ptr, const int[::1] child_idx) noexcept nogil:
    cdef int i, j
    while True:
        i = stack[top[0]]
        if in_w[i, v] and not visited[i, v]:
            visited[i, v] = 1
            covered[i] += 1
        j = port[v]
        if j >= 0:
            launched[j] = 1
            pending[i] -= 1
            top[0] += 1
            stack[top[0]] = j
            _rebuild(port, child_ptr, child_idx, entry, launched, i, j)
            continue
        if pending[i] == 0 and covered[i] == w_size[i] and v == entry[i]:
            if top[0] == 0:
                return False
            top[0] -= 1
            _rebuild(port, child_ptr, child_idx, entry, launched, i, stack[top[0]])
            continue
        return True
