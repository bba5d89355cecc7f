"""numba kernels for the hot loops.

Everything here is nopython + nogil so replica loops can run under a thread
pool. Vertex ids are int64 throughout. Forest arrays use the convention

    parent[v] == -2   vertex not (yet) in any tree
    parent[v] == -1   v is a root
    parent[v] >= 0    tree edge v -> parent[v], with parent_edge[v] its edge id

Callers preset the root entries to -1 and everything else to -2; the kernels
only ever flip -2 entries, so a root set of any size works unchanged.

The lattice kernels never materialize the box graph: neighbors and canonical
edge ids are computed arithmetically. The formulas must match lattice.py
exactly; tests compare the two routes on small boxes.
"""
from __future__ import annotations

import numpy as np
from numba import int64, njit

STATUS_OK = 0
STATUS_STEP_BUDGET = 1
STATUS_STUCK = 2


# ---------------------------------------------------------------------------
# Wilson on an explicit CSR multigraph

@njit(cache=True, nogil=True)
def wilson_csr(adj_start, adj_vertex, adj_edge, parent, parent_edge,
               order, step_cap, gen):
    """Loop-erased branches from each vertex in `order` into the current forest.

    Returns (steps_used, status). Last-exit bookkeeping: while walking, nxt[u]
    is overwritten on every revisit, so retracing nxt from the branch start
    yields the loop erasure for free.
    """
    n = len(adj_start) - 1
    nxt = np.full(n, -1, np.int64)
    nxte = np.full(n, -1, np.int64)
    steps = 0
    for idx in range(len(order)):
        v0 = order[idx]
        if parent[v0] != -2:
            continue
        u = v0
        while parent[u] == -2:
            a, b = adj_start[u], adj_start[u + 1]
            deg = b - a
            if deg == 0:
                return steps, STATUS_STUCK
            k = a + gen.integers(0, deg)
            nxt[u] = adj_vertex[k]
            nxte[u] = adj_edge[k]
            steps += 1
            if steps > step_cap:
                return steps, STATUS_STEP_BUDGET
            u = nxt[u]
        u = v0
        while parent[u] == -2:
            parent[u] = nxt[u]
            parent_edge[u] = nxte[u]
            u = nxt[u]
    return steps, STATUS_OK


# ---------------------------------------------------------------------------
# implicit wired lattice box

@njit(cache=True, nogil=True)
def _eid_interior(L, d, v, axis):
    """Canonical id of the interior edge (v, v + stride_axis)."""
    per_axis = (L - 1) * L ** (d - 1)
    rank = int64(0)
    radix_prod = int64(1)
    w = v
    for i in range(d):
        c = w % L
        w //= L
        rank += c * radix_prod
        radix_prod *= (L - 1) if i == axis else L
    return axis * per_axis + rank


@njit(cache=True, nogil=True)
def _eid_boundary(L, d, v, axis, high):
    """Canonical id of the wired edge leaving v through face (axis, high)."""
    face = L ** (d - 1)
    interior_total = d * (L - 1) * L ** (d - 1)
    rank = int64(0)
    radix_prod = int64(1)
    w = v
    for i in range(d):
        c = w % L
        w //= L
        if i != axis:
            rank += c * radix_prod
            radix_prod *= L
    side = 1 if high else 0
    return interior_total + (2 * axis + side) * face + rank


@njit(cache=True, nogil=True)
def wilson_lattice_wired(d, r, parent, parent_edge, order, gen):
    """Wilson branches on the wired box [-r, r]^d with implicit adjacency.

    Vertex n = L**d is the wired vertex; callers preset parent (roots -1,
    others -2, parent[n] normally -1). Edge ids follow the canonical scheme.
    Returns total walk steps.
    """
    L = 2 * r + 1
    n = L ** d
    strides = np.empty(d, np.int64)
    s = int64(1)
    for i in range(d):
        strides[i] = s
        s *= L
    nxt = np.empty(n, np.int64)
    nxtd = np.empty(n, np.int8)
    coord = np.empty(d, np.int64)
    steps = 0
    for idx in range(len(order)):
        v0 = order[idx]
        if parent[v0] != -2:
            continue
        u = v0
        x = u
        for i in range(d):
            coord[i] = x % L
            x //= L
        while parent[u] == -2:
            k = gen.integers(0, 2 * d)
            ax = k >> 1
            stp = 1 if (k & 1) else -1
            c = coord[ax] + stp
            nxtd[u] = np.int8(k)
            steps += 1
            if c < 0 or c >= L:
                nxt[u] = n
                break
            w = u + stp * strides[ax]
            nxt[u] = w
            coord[ax] = c
            u = w
        # retrace, resolving edge ids from (vertex, direction)
        u = v0
        while parent[u] == -2:
            k = nxtd[u]
            ax = k >> 1
            w = nxt[u]
            x = u
            for i in range(ax):
                x //= L
            c = x % L
            if k & 1:
                if c == L - 1:
                    parent_edge[u] = _eid_boundary(L, d, u, ax, True)
                else:
                    parent_edge[u] = _eid_interior(L, d, u, ax)
            else:
                if c == 0:
                    parent_edge[u] = _eid_boundary(L, d, u, ax, False)
                else:
                    parent_edge[u] = _eid_interior(L, d, u - strides[ax], ax)
            parent[u] = w
            u = w
    return steps


# ---------------------------------------------------------------------------
# random walk with a recorded path (explicit graph)

@njit(cache=True, nogil=True)
def walk_csr_record(adj_start, adj_vertex, start, stop_mask, max_steps, fixed_steps, gen):
    """Walk from start, recording the path.

    fixed_steps >= 0: walk exactly that many steps (stop_mask ignored).
    fixed_steps < 0: walk until a vertex with stop_mask set (checked from the
    first vertex on), max_steps as budget. Returns (path, status).
    """
    cap = fixed_steps + 1 if fixed_steps >= 0 else 1024
    buf = np.empty(cap, np.int64)
    buf[0] = start
    length = 1
    u = start
    if fixed_steps < 0 and stop_mask[u]:
        return buf[:1].copy(), STATUS_OK
    total = fixed_steps if fixed_steps >= 0 else max_steps
    for _ in range(total):
        a, b = adj_start[u], adj_start[u + 1]
        deg = b - a
        if deg == 0:
            return buf[:length].copy(), STATUS_STUCK
        u = adj_vertex[a + gen.integers(0, deg)]
        if length == len(buf):
            nbuf = np.empty(2 * len(buf), np.int64)
            nbuf[:length] = buf
            buf = nbuf
        buf[length] = u
        length += 1
        if fixed_steps < 0 and stop_mask[u]:
            return buf[:length].copy(), STATUS_OK
    status = STATUS_OK if fixed_steps >= 0 else STATUS_STEP_BUDGET
    return buf[:length].copy(), status


# ---------------------------------------------------------------------------
# loop erasure over compact integer ids

@njit(cache=True, nogil=True)
def loop_erase_ids(ids, pos):
    """Chronological loop erasure of a path given as compact ids.

    pos must be an int64 array covering the id range, filled with -1; it is
    restored before returning. Revisiting an id pops the stack back to its
    standing position, which is exactly the closing of a loop.
    """
    m = len(ids)
    stack = np.empty(m, np.int64)
    top = 0
    for i in range(m):
        v = ids[i]
        p = pos[v]
        if p >= 0:
            for j in range(p + 1, top):
                pos[stack[j]] = -1
            top = p + 1
        else:
            stack[top] = v
            pos[v] = top
            top += 1
    out = stack[:top].copy()
    for j in range(top):
        pos[stack[j]] = -1
    return out


@njit(cache=True, nogil=True)
def lerw_length_profile(ids, pos):
    """Length of the loop erasure of every prefix: profile[k] = |LE(ids[:k+1])|."""
    m = len(ids)
    profile = np.empty(m, np.int64)
    stack = np.empty(m, np.int64)
    top = 0
    for i in range(m):
        v = ids[i]
        p = pos[v]
        if p >= 0:
            for j in range(p + 1, top):
                pos[stack[j]] = -1
            top = p + 1
        else:
            stack[top] = v
            pos[v] = top
            top += 1
        profile[i] = top
    for j in range(top):
        pos[stack[j]] = -1
    return profile


@njit(cache=True, nogil=True)
def le_invariants_batch(flat, offsets, n_ids):
    """Check loop-erasure laws over a batch of paths packed in flat/offsets.

    Returns violation counts for (idempotence, simplicity, subsequence,
    endpoint preservation), in that order.
    """
    pos = np.full(n_ids, -1, np.int64)
    seen = np.full(n_ids, -1, np.int64)
    out = np.zeros(4, np.int64)
    for p in range(len(offsets) - 1):
        path = flat[offsets[p]:offsets[p + 1]]
        le = loop_erase_ids(path, pos)
        le2 = loop_erase_ids(le, pos)
        if len(le2) != len(le):
            out[0] += 1
        else:
            for i in range(len(le)):
                if le[i] != le2[i]:
                    out[0] += 1
                    break
        simple = True
        for i in range(len(le)):
            if seen[le[i]] == p:
                simple = False
            seen[le[i]] = p
        if not simple:
            out[1] += 1
        # subsequence via greedy two-pointer
        j = 0
        for i in range(len(path)):
            if j < len(le) and path[i] == le[j]:
                j += 1
        if j != len(le):
            out[2] += 1
        if le[0] != path[0] or le[len(le) - 1] != path[len(path) - 1]:
            out[3] += 1
    return out


# ---------------------------------------------------------------------------
# forest analysis helpers

@njit(cache=True, nogil=True)
def forest_roots(parent, chain):
    """Root id of every vertex of a forest given by parent pointers.

    chain is an int64 scratch array with len >= n. Wired-in parents pointing
    past the array (a stripped wired vertex) are treated as roots of record.
    """
    n = len(parent)
    root = np.full(n, -1, np.int64)
    for v in range(n):
        if root[v] >= 0:
            continue
        u = v
        ln = 0
        while True:
            if root[u] >= 0:
                r = root[u]
                break
            p = parent[u]
            if p < 0 or p >= n:
                r = u
                break
            chain[ln] = u
            ln += 1
            u = p
        root[u] = r
        for i in range(ln):
            root[chain[i]] = r
    return root


@njit(cache=True, nogil=True)
def bush_indices(parent, ray, n_vertices, chain):
    """Bush index of every vertex: the first ray vertex met walking rootward.

    Returns int64 array with -1 for vertices outside the ray's tree. Vertices
    of the ray itself get their ray position. Memoized along the chase chains.
    """
    bush = np.full(n_vertices, -2, np.int64)
    for i in range(len(ray)):
        bush[ray[i]] = i
    for v in range(n_vertices):
        if bush[v] != -2:
            continue
        u = v
        ln = 0
        while True:
            if bush[u] != -2:
                val = bush[u]
                break
            p = parent[u]
            if p < 0 or p >= n_vertices:
                val = -1
                bush[u] = -1
                break
            chain[ln] = u
            ln += 1
            u = p
        for i in range(ln):
            bush[chain[i]] = val
    return bush


@njit(cache=True, nogil=True)
def bush_pair_counts_lattice(d, r, bush):
    """Count box edges joining Bush_a to Bush_b over the implicit lattice.

    Returns a (K+1, K+1) upper-triangular matrix, K the max bush index; entry
    (a, b) with a <= b counts edges with endpoint bushes {a, b}. Edges with an
    endpoint outside the tree (bush -1) are skipped.
    """
    L = 2 * r + 1
    n = L ** d
    K = int64(0)
    for v in range(n):
        if bush[v] > K:
            K = bush[v]
    counts = np.zeros((K + 1, K + 1), np.int64)
    stride = int64(1)
    for ax in range(d):
        for v in range(n):
            c = (v // stride) % L
            if c < L - 1:
                a = bush[v]
                b = bush[v + stride]
                if a >= 0 and b >= 0:
                    if a <= b:
                        counts[a, b] += 1
                    else:
                        counts[b, a] += 1
        stride *= L
    return counts


@njit(cache=True, nogil=True)
def bush_pair_counts_csr(edge_u, edge_v, bush, K):
    """Same pair counts over an explicit edge list (dual route to the lattice one)."""
    counts = np.zeros((K + 1, K + 1), np.int64)
    for e in range(len(edge_u)):
        a = bush[edge_u[e]]
        b = bush[edge_v[e]]
        if a >= 0 and b >= 0:
            if a <= b:
                counts[a, b] += 1
            else:
                counts[b, a] += 1
    return counts

