"""Spanning tree and forest samplers plus the exact tree-count oracles.

The sampler grows loop-erased branches into the current forest, one start
vertex at a time, using last-exit successor tables (cycle popping). The law
of the output does not depend on the processing order; callers may therefore
pass any order, including a strict subset when only the restriction of a
wired-box forest to those vertices is wanted (a later branch can neither
merge two existing trees nor add an edge between two already-inserted
vertices, so the restriction is exact).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels, lattice
from .errors import BudgetError, ContractError, DomainError, StatisticalError
from .graphs import Graph, ComponentMap, build_lattice_box, check_vertex_budget
from .lattice import LatticeBoxSpec
from .rng import RngStream
from .unionfind import UnionFind
from .walks import two_sided_lerw, LatticePath

DEFAULT_WILSON_STEP_BUDGET = 1 << 34
ENUMERATION_EDGE_CAP = 26
MATRIX_TREE_VERTEX_CAP = 256


@dataclass(frozen=True)
class SpanningForest:
    """Rooted forest given by parent pointers into a host graph.

    parent[v] is the parent vertex, or -1 when v is a root; parent_edge[v]
    is the host edge id carrying that step, -1 at roots. Every vertex is
    covered. Acyclicity is the construction's job; validate() checks it.
    """

    parent: np.ndarray
    parent_edge: np.ndarray

    def __post_init__(self):
        if self.parent.shape != self.parent_edge.shape:
            raise ContractError("parent and parent_edge length mismatch")
        if self.parent.size and self.parent.min() < -1:
            raise ContractError("forest has uncovered vertices")

    @property
    def n(self) -> int:
        return len(self.parent)

    @property
    def roots(self) -> np.ndarray:
        return np.flatnonzero(self.parent == -1).astype(np.int64)

    def edge_ids(self) -> np.ndarray:
        """Sorted host edge ids present in the forest."""
        return np.sort(self.parent_edge[self.parent >= 0])

    def edge_mask(self, m: int) -> np.ndarray:
        mask = np.zeros(m, dtype=bool)
        mask[self.edge_ids()] = True
        return mask

    def components(self) -> ComponentMap:
        chain = np.empty(self.n, dtype=np.int64)
        root_of = _kernels.forest_roots(self.parent, chain)
        mins = np.full(self.n, self.n, dtype=np.int64)
        np.minimum.at(mins, root_of, np.arange(self.n, dtype=np.int64))
        return ComponentMap(mins[root_of], len(np.unique(root_of)))

    def path_to_root(self, v: int) -> np.ndarray:
        """Vertices from v up to and including its root."""
        out = [int(v)]
        u = int(v)
        while self.parent[u] >= 0:
            u = int(self.parent[u])
            out.append(u)
            if len(out) > self.n:
                raise ContractError("parent pointers contain a cycle")
        return np.asarray(out, dtype=np.int64)

    def validate(self, G: Graph) -> None:
        """Structural check against the host graph; raises ContractError."""
        state = np.zeros(self.n, dtype=np.int8)  # 0 new, 1 active, 2 done
        for v in range(self.n):
            u, trail = v, []
            while state[u] == 0:
                state[u] = 1
                trail.append(u)
                p = int(self.parent[u])
                if p == -1:
                    break
                e = int(self.parent_edge[u])
                if not 0 <= e < G.m or {u, p} != set(G.endpoints(e)):
                    raise ContractError(f"vertex {u}: edge {e} does not join it to {p}")
                u = p
            if state[u] == 1 and self.parent[u] >= 0:
                raise ContractError("parent pointers contain a cycle")
            for t in trail:
                state[t] = 2


def _as_root_array(root, n: int) -> np.ndarray:
    roots = np.unique(np.atleast_1d(np.asarray(root, dtype=np.int64)))
    if roots.size == 0:
        raise DomainError("empty root set")
    if roots.min() < 0 or roots.max() >= n:
        raise DomainError(f"root {roots.min() if roots.min() < 0 else roots.max()} outside vertex range")
    return roots


def _check_roots_reach_all(G: Graph, roots: np.ndarray) -> None:
    uf = UnionFind(G.n)
    for u, v in zip(G.edge_u.tolist(), G.edge_v.tolist()):
        uf.union(u, v)
    labels = uf.labels()
    ok = np.isin(labels, np.unique(labels[roots]))
    if not ok.all():
        v = int(np.flatnonzero(~ok)[0])
        raise DomainError(f"vertex {v} cannot reach any root; graph is disconnected from the root set")


def wilson_ust(G: Graph, root, rng: RngStream, order=None,
               step_budget: int | None = None,
               check_connectivity: bool = True) -> SpanningForest:
    """Uniform spanning tree of G rooted at `root` (vertex or root set).

    With a root set, each root anchors its own tree and the output is the
    uniform forest conditioned on those anchors (the wired construction uses
    this). The processing order never changes the law; pass one to make runs
    comparable or to restrict work.
    """
    roots = _as_root_array(root, G.n)
    if check_connectivity:
        _check_roots_reach_all(G, roots)
    if order is None:
        order = np.arange(G.n, dtype=np.int64)
    else:
        order = np.asarray(order, dtype=np.int64)
        if not np.array_equal(np.sort(order), np.arange(G.n, dtype=np.int64)):
            raise DomainError("order must enumerate every vertex exactly once")
    cap = DEFAULT_WILSON_STEP_BUDGET if step_budget is None else int(step_budget)
    parent = np.full(G.n, -2, dtype=np.int64)
    parent_edge = np.full(G.n, -1, dtype=np.int64)
    parent[roots] = -1
    steps, status = _kernels.wilson_csr(G.adj_start, G.adj_vertex, G.adj_edge,
                                        parent, parent_edge, order, cap,
                                        rng.generator())
    if status == _kernels.STATUS_STEP_BUDGET:
        raise BudgetError("wilson step", steps, cap)
    if status == _kernels.STATUS_STUCK:
        raise DomainError("walk reached a vertex with no incident edges")
    return SpanningForest(parent, parent_edge)


def wsf_wired_box(spec: LatticeBoxSpec, rng: RngStream,
                  budget_vertices: int | None = None) -> SpanningForest:
    """Wired-box spanning forest: UST of the wired graph minus the wired vertex.

    Roots are the former children of the wired vertex; each tree keeps its
    path toward the boundary as the path to its root. Edges to the wired
    vertex are dropped.
    """
    if spec.boundary != "wired":
        raise DomainError("wsf_wired_box needs a wired box spec")
    check_vertex_budget(spec.vertex_count, budget_vertices)
    n = spec.box_vertex_count
    parent = np.full(n + 1, -2, dtype=np.int64)
    parent_edge = np.full(n + 1, -1, dtype=np.int64)
    parent[n] = -1
    _kernels.wilson_lattice_wired(spec.d, spec.radius, parent, parent_edge,
                                  np.arange(n, dtype=np.int64), rng.generator())
    parent, parent_edge = parent[:n], parent_edge[:n]
    at_wired = parent == n
    parent[at_wired] = -1
    parent_edge[at_wired] = -1
    return SpanningForest(parent, parent_edge)


def wsf_wired_box_restricted(spec: LatticeBoxSpec, targets, rng: RngStream,
                             budget_vertices: int | None = None):
    """Forest restriction to `targets` without filling the rest of the box.

    Runs the wired sampler but only grows branches from the target vertices.
    Branches grown later can neither join two existing trees nor add an edge
    inside the already-built part, so the returned arrays agree in law with
    the restriction of a full wsf_wired_box sample. Entries stay -2 off the
    sampled branches; the wired vertex keeps id n. Returns
    (parent, parent_edge, steps) over n + 1 entries.
    """
    if spec.boundary != "wired":
        raise DomainError("wsf_wired_box_restricted needs a wired box spec")
    check_vertex_budget(spec.vertex_count, budget_vertices)
    n = spec.box_vertex_count
    targets = np.asarray(targets, dtype=np.int64)
    if targets.size and (targets.min() < 0 or targets.max() >= n):
        raise DomainError("target vertex outside the box")
    parent = np.full(n + 1, -2, dtype=np.int64)
    parent_edge = np.full(n + 1, -1, dtype=np.int64)
    parent[n] = -1
    steps = _kernels.wilson_lattice_wired(spec.d, spec.radius, parent,
                                          parent_edge, targets, rng.generator())
    return parent, parent_edge, steps


# ---------------------------------------------------------------------------
# two-sided sampler

@dataclass(frozen=True)
class TwoSidedWsfSample:
    """Wired-box forest grown around a two-sided loop-erased trunk.

    trunk is the lattice path through the origin (coords, origin at
    origin_offset); trunk_ids are the matching box vertex ids. origin_edge is
    the (origin, first backward vertex) pair when the backward side survived
    clipping. clipped flags a trunk that left the box and was truncated.
    """

    forest: SpanningForest
    trunk: LatticePath
    trunk_ids: np.ndarray
    clipped: bool
    attempts: int
    origin_edge: tuple[int, int] | None
    mode: str


def _trunk_edge_ids(spec: LatticeBoxSpec, ids: np.ndarray) -> np.ndarray:
    """Interior edge ids along a lattice path given as box vertex ids."""
    out = np.empty(len(ids) - 1, dtype=np.int64)
    stride = lattice.strides(spec)
    for i in range(len(ids) - 1):
        a, b = int(ids[i]), int(ids[i + 1])
        diff = b - a
        axis = int(np.flatnonzero(stride == abs(diff))[0])
        out[i] = lattice.interior_edge_id(spec, min(a, b), axis)
    return out


def _finish_trunk_forest(spec: LatticeBoxSpec, parent, parent_edge, ids) -> SpanningForest:
    """Chain parents along the trunk and strip the wired vertex."""
    n = spec.box_vertex_count
    eids = _trunk_edge_ids(spec, ids)
    parent[ids[:-1]] = ids[1:]
    parent_edge[ids[:-1]] = eids
    parent, parent_edge = parent[:n].copy(), parent_edge[:n].copy()
    at_wired = parent == n
    parent[at_wired] = -1
    parent_edge[at_wired] = -1
    return SpanningForest(parent, parent_edge)


def _two_sided_wsf_lattice(d, horizon, spec, rng, max_attempts):
    lerw = two_sided_lerw(d, horizon, rng.substream(1), max_attempts=max_attempts)
    coords = lerw.trunk.coords
    off = lerw.trunk.origin_offset
    inbox = np.abs(coords).max(axis=1) <= spec.radius
    lo = off
    while lo > 0 and inbox[lo - 1]:
        lo -= 1
    hi = off
    while hi + 1 < len(coords) and inbox[hi + 1]:
        hi += 1
    clipped = lo > 0 or hi + 1 < len(coords)
    kept = coords[lo:hi + 1]
    ids = ((kept + spec.radius) * lattice.strides(spec)).sum(axis=1)
    trunk = LatticePath(kept, off - lo)
    return trunk, ids, clipped, lerw.attempts


def _two_sided_wsf_box(spec, rng, max_attempts, step_budget):
    """Trunk from the in-box coupling: first branch from the origin, one
    uniform neighbor step (accepted when it leaves the branch), then a second
    branch that must escape to the wired vertex."""
    G = _cached_box_graph(spec.d, spec.radius)
    n = spec.box_vertex_count
    w = n
    o = lattice.origin_id(spec)
    pos = np.full(n + 1, -1, dtype=np.int64)
    stop_wired = np.zeros(n + 1, dtype=np.bool_)
    stop_wired[w] = True
    cap = DEFAULT_WILSON_STEP_BUDGET if step_budget is None else int(step_budget)
    nbrs, _ = G.neighbors(o)
    for attempt in range(1, max_attempts + 1):
        gen = rng.substream(1).substream(attempt).generator()
        s1, status = _kernels.walk_csr_record(G.adj_start, G.adj_vertex, o,
                                              stop_wired, cap, -1, gen)
        if status != _kernels.STATUS_OK:
            raise BudgetError("two-sided walk step", cap, cap)
        branch1 = _kernels.loop_erase_ids(s1, pos)
        v = int(nbrs[gen.integers(0, len(nbrs))])
        on_branch = np.zeros(n + 1, dtype=np.bool_)
        on_branch[branch1] = True
        if on_branch[v]:
            continue
        s2, status = _kernels.walk_csr_record(G.adj_start, G.adj_vertex, v,
                                              on_branch, cap, -1, gen)
        if status != _kernels.STATUS_OK:
            raise BudgetError("two-sided walk step", cap, cap)
        if int(s2[-1]) != w:
            continue
        branch2 = _kernels.loop_erase_ids(s2, pos)
        ids = np.concatenate([branch2[:-1][::-1], branch1[:-1]])
        coords = np.stack([lattice.vertex_coords(spec, int(u)) for u in ids])
        trunk = LatticePath(coords, len(branch2) - 1)
        return trunk, ids, False, attempt, (o, v)
    raise StatisticalError(f"no accepted trunk coupling in {max_attempts} attempts")


@lru_cache(maxsize=4)
def _cached_box_graph(d: int, radius: int) -> Graph:
    return build_lattice_box(LatticeBoxSpec(d, radius, "wired"))


def two_sided_wsf(d: int, horizon: int, spec: LatticeBoxSpec, rng: RngStream,
                  trunk_mode: str = "lattice", max_attempts: int = 10000,
                  step_budget: int | None = None,
                  budget_vertices: int | None = None) -> TwoSidedWsfSample:
    """Forest sampled with a two-sided loop-erased trunk as the first branch.

    The trunk's vertices are treated as one contracted root (virtually: every
    trunk vertex enters the root set) together with the wired vertex; the
    remaining branches are grown as usual. trunk_mode "lattice" samples the
    trunk on the infinite lattice with the given horizon and clips it to the
    box; "box" grows it inside the wired box itself by the two-branch
    rejection coupling, running walks to absorption (horizon unused there).
    """
    if d != spec.d:
        raise DomainError(f"dimension mismatch: d={d} but spec has d={spec.d}")
    if d < 5:
        raise DomainError(f"two-sided trunk needs d >= 5, got d={d}")
    if spec.boundary != "wired":
        raise DomainError("two_sided_wsf needs a wired box spec")
    check_vertex_budget(spec.vertex_count, budget_vertices)
    n = spec.box_vertex_count
    origin_edge: tuple[int, int] | None
    if trunk_mode == "lattice":
        trunk, ids, clipped, attempts = _two_sided_wsf_lattice(
            d, horizon, spec, rng, max_attempts)
        off = trunk.origin_offset
        origin_edge = (int(ids[off]), int(ids[off - 1])) if off >= 1 else None
    elif trunk_mode == "box":
        trunk, ids, clipped, attempts, origin_edge = _two_sided_wsf_box(
            spec, rng, max_attempts, step_budget)
    else:
        raise DomainError(f"unknown trunk_mode {trunk_mode!r}")
    parent = np.full(n + 1, -2, dtype=np.int64)
    parent_edge = np.full(n + 1, -1, dtype=np.int64)
    parent[n] = -1
    parent[ids] = -1
    _kernels.wilson_lattice_wired(spec.d, spec.radius, parent, parent_edge,
                                  np.arange(n, dtype=np.int64),
                                  rng.substream(2).generator())
    forest = _finish_trunk_forest(spec, parent, parent_edge, ids)
    return TwoSidedWsfSample(forest, trunk, ids, clipped, attempts,
                             origin_edge, trunk_mode)


# ---------------------------------------------------------------------------
# exact oracles

def spanning_tree_count(G: Graph, max_vertices: int = MATRIX_TREE_VERTEX_CAP) -> int:
    """Number of spanning trees via the matrix-tree determinant, exactly.

    Integer fraction-free elimination, so multigraphs and counts far beyond
    float precision are fine. Self-loops never enter a tree and are skipped.
    """
    if G.n > max_vertices:
        raise BudgetError("matrix-tree vertex", G.n, max_vertices)
    if G.n == 1:
        return 1
    k = G.n - 1  # ground vertex 0 removed
    M = [[0] * k for _ in range(k)]
    for u, v in zip(G.edge_u.tolist(), G.edge_v.tolist()):
        if u == v:
            continue
        if u > 0:
            M[u - 1][u - 1] += 1
        if v > 0:
            M[v - 1][v - 1] += 1
        if u > 0 and v > 0:
            M[u - 1][v - 1] -= 1
            M[v - 1][u - 1] -= 1
    sign = 1
    prev = 1
    for col in range(k - 1):
        if M[col][col] == 0:
            for r in range(col + 1, k):
                if M[r][col] != 0:
                    M[col], M[r] = M[r], M[col]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(col + 1, k):
            for j in range(col + 1, k):
                M[i][j] = (M[i][j] * M[col][col] - M[i][col] * M[col][j]) // prev
            M[i][col] = 0
        prev = M[col][col]
    return sign * M[k - 1][k - 1]


class _RollbackUnionFind:
    """Union by size without path compression, so unions undo in O(1)."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.trail: list[tuple[int, int]] = []

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.trail.append((ra, rb))
        return True

    def undo(self) -> None:
        ra, rb = self.trail.pop()
        self.parent[rb] = rb
        self.size[ra] -= self.size[rb]


def enumerate_spanning_trees(G: Graph, max_edges: int = ENUMERATION_EDGE_CAP):
    """All spanning trees as sorted edge-id tuples, lexicographically ordered.

    Parallel edges are distinct trees; self-loops are ignored. Backtracking
    over edge ids with undoable union-find and a remaining-edge prune.
    """
    if G.m > max_edges:
        raise BudgetError("enumeration edge", G.m, max_edges)
    n, m = G.n, G.m
    need = n - 1
    us, vs = G.edge_u.tolist(), G.edge_v.tolist()
    uf = _RollbackUnionFind(n)
    chosen: list[int] = []
    trees: list[tuple[int, ...]] = []

    def rec(i: int) -> None:
        if len(chosen) == need:
            trees.append(tuple(chosen))
            return
        if i == m or m - i < need - len(chosen):
            return
        if us[i] != vs[i] and uf.union(us[i], vs[i]):
            chosen.append(i)
            rec(i + 1)
            chosen.pop()
            uf.undo()
        rec(i + 1)

    rec(0)
    return sorted(trees)


# ---------------------------------------------------------------------------
# serialization

def write_forest(forest: SpanningForest, path) -> None:
    """Text dump, one line "v parent_v edge_id" per vertex, roots first."""
    roots = forest.roots
    is_root = np.zeros(forest.n, dtype=bool)
    is_root[roots] = True
    with open(path, "w") as fh:
        for v in roots.tolist():
            fh.write(f"{v} -1 -1\n")
        for v in np.flatnonzero(~is_root).tolist():
            fh.write(f"{v} {int(forest.parent[v])} {int(forest.parent_edge[v])}\n")


def read_forest(path) -> SpanningForest:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(tuple(int(t) for t in line.split()))
    n = len(rows)
    parent = np.full(n, -2, dtype=np.int64)
    parent_edge = np.full(n, -1, dtype=np.int64)
    for v, p, e in rows:
        if not 0 <= v < n or parent[v] != -2:
            raise DomainError(f"forest file has a bad or repeated vertex line for {v}")
        parent[v] = p
        parent_edge[v] = e
    return SpanningForest(parent, parent_edge)
