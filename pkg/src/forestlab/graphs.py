"""Finite undirected multigraphs and the lattice box constructors.

The Graph class is immutable once built and stores a CSR-style adjacency so
the jit kernels can walk it without touching Python objects. Parallel edges
are real: each edge id is its own object, and every adjacency entry carries
the edge id it came from.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lattice
from .errors import BudgetError, DomainError
from .lattice import LatticeBoxSpec
from .unionfind import UnionFind

DEFAULT_VERTEX_BUDGET = 1 << 27


class Graph:
    """Immutable undirected multigraph on vertices 0..n-1."""

    __slots__ = ("n", "edge_u", "edge_v", "wired_vertex", "adj_start", "adj_vertex", "adj_edge")

    def __init__(self, n: int, edges, wired_vertex: int | None = None):
        if n < 1:
            raise DomainError(f"graph needs at least one vertex, got n={n}")
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise DomainError("edge endpoint outside vertex range")
        if wired_vertex is not None and not 0 <= wired_vertex < n:
            raise DomainError(f"wired vertex {wired_vertex} outside vertex range")
        self.n = int(n)
        self.edge_u = np.ascontiguousarray(edges[:, 0])
        self.edge_v = np.ascontiguousarray(edges[:, 1])
        self.wired_vertex = wired_vertex
        m = len(self.edge_u)
        # CSR over both endpoint directions; self-loops contribute two slots
        ends = np.concatenate([self.edge_u, self.edge_v])
        other = np.concatenate([self.edge_v, self.edge_u])
        eids = np.concatenate([np.arange(m, dtype=np.int64)] * 2)
        order = np.argsort(ends, kind="stable")
        deg = np.bincount(ends, minlength=n)
        self.adj_start = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(deg, out=self.adj_start[1:])
        self.adj_vertex = np.ascontiguousarray(other[order])
        self.adj_edge = np.ascontiguousarray(eids[order])

    @property
    def m(self) -> int:
        return len(self.edge_u)

    def degree(self, v: int) -> int:
        return int(self.adj_start[v + 1] - self.adj_start[v])

    def degrees(self) -> np.ndarray:
        return np.diff(self.adj_start)

    def neighbors(self, v: int):
        """(neighbor ids, edge ids) views for vertex v."""
        a, b = self.adj_start[v], self.adj_start[v + 1]
        return self.adj_vertex[a:b], self.adj_edge[a:b]

    def endpoints(self, e: int):
        return int(self.edge_u[e]), int(self.edge_v[e])

    def edges(self) -> np.ndarray:
        return np.stack([self.edge_u, self.edge_v], axis=1)

    def __repr__(self):
        wired = f", wired={self.wired_vertex}" if self.wired_vertex is not None else ""
        return f"Graph(n={self.n}, m={self.m}{wired})"


@dataclass(frozen=True)
class ComponentMap:
    """Vertex -> component label; labels are the smallest vertex id in the class."""

    labels: np.ndarray
    count: int

    def same(self, u: int, v: int) -> bool:
        return self.labels[u] == self.labels[v]

    def members(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)

    def sizes(self) -> dict[int, int]:
        labels, counts = np.unique(self.labels, return_counts=True)
        return dict(zip(labels.tolist(), counts.tolist()))


@dataclass(frozen=True)
class InducedComponentGraph:
    """Result of closing a subgraph H under its own component structure.

    edge_mask marks the edges of the host graph whose endpoints lie in one
    component of H; components is the component map of H itself.
    """

    host: Graph
    edge_mask: np.ndarray
    components: ComponentMap


def check_vertex_budget(requested: int, budget: int | None = None) -> None:
    allowed = DEFAULT_VERTEX_BUDGET if budget is None else budget
    if requested > allowed:
        raise BudgetError("vertex", requested, allowed)


def build_lattice_box(spec: LatticeBoxSpec, budget_vertices: int | None = None) -> Graph:
    """Materialize the box graph; edge ids follow the canonical lattice scheme."""
    check_vertex_budget(spec.vertex_count, budget_vertices)
    L, d, n = spec.side, spec.d, spec.box_vertex_count
    coords = lattice.all_coords(spec)
    stride = lattice.strides(spec)
    edges = []
    for a in range(d):
        mask = coords[:, a] < L - 1
        v = np.flatnonzero(mask).astype(np.int64)
        # enumeration order of v is ascending vertex id, which matches the
        # axis-a mixed-radix rank order, so edge ids line up with the scheme
        edges.append(np.stack([v, v + stride[a]], axis=1))
    if spec.boundary == "wired":
        w = spec.wired_vertex
        for a in range(d):
            for high in (False, True):
                face_val = L - 1 if high else 0
                v = np.flatnonzero(coords[:, a] == face_val).astype(np.int64)
                edges.append(np.stack([v, np.full(len(v), w, dtype=np.int64)], axis=1))
        return Graph(n + 1, np.concatenate(edges), wired_vertex=w)
    return Graph(n, np.concatenate(edges))


def components(G: Graph, edge_mask: np.ndarray | None = None) -> ComponentMap:
    """Connected components of G, or of the subgraph picked out by edge_mask."""
    uf = UnionFind(G.n)
    if edge_mask is None:
        us, vs = G.edge_u, G.edge_v
    else:
        edge_mask = np.asarray(edge_mask, dtype=bool)
        if edge_mask.shape != (G.m,):
            raise DomainError("edge mask length does not match edge count")
        us, vs = G.edge_u[edge_mask], G.edge_v[edge_mask]
    for u, v in zip(us.tolist(), vs.tolist()):
        uf.union(u, v)
    return ComponentMap(uf.labels(), uf.count)


def induced_component_graph(G: Graph, edge_mask: np.ndarray) -> InducedComponentGraph:
    """Close the subgraph H = (V(G), masked edges) under its components.

    An edge of G enters the result exactly when both endpoints lie in the same
    component of H. H's own edges always qualify, so the operation is
    monotone and idempotent at fixed component structure.
    """
    comp = components(G, edge_mask)
    mask = comp.labels[G.edge_u] == comp.labels[G.edge_v]
    return InducedComponentGraph(G, mask, comp)


def subgraph(G: Graph, vertices: np.ndarray):
    """Induced subgraph on the given vertices.

    Returns (graph, vmap, edge_ids) where vmap[new] = old vertex id and
    edge_ids[new_edge] = old edge id.
    """
    vertices = np.unique(np.asarray(vertices, dtype=np.int64))
    if vertices.size == 0:
        raise DomainError("subgraph needs at least one vertex")
    inv = np.full(G.n, -1, dtype=np.int64)
    inv[vertices] = np.arange(len(vertices), dtype=np.int64)
    keep = (inv[G.edge_u] >= 0) & (inv[G.edge_v] >= 0)
    eids = np.flatnonzero(keep).astype(np.int64)
    edges = np.stack([inv[G.edge_u[eids]], inv[G.edge_v[eids]]], axis=1)
    wired = None
    if G.wired_vertex is not None and inv[G.wired_vertex] >= 0:
        wired = int(inv[G.wired_vertex])
    return Graph(len(vertices), edges, wired_vertex=wired), vertices, eids


@dataclass(frozen=True)
class CounterexamplePair:
    """Two wired d=5 boxes joined by one bridge edge between their origins.

    Each copy keeps its own wired vertex: this is the finite stage of the
    forest coupling in which the bridge is always present. merge_wired=True
    instead identifies the two wired vertices, the right finitization of the
    connected two-copy graph for wired-resistance purposes.
    """

    graph: Graph
    spec: LatticeBoxSpec
    origin_a: int
    origin_b: int
    wired_a: int
    wired_b: int
    bridge_edge: int


def counterexample_graph(radius: int, merge_wired: bool = False,
                         budget_vertices: int | None = None) -> CounterexamplePair:
    spec = LatticeBoxSpec(d=5, radius=radius, boundary="wired")
    check_vertex_budget(2 * spec.vertex_count, budget_vertices)
    box = build_lattice_box(spec, budget_vertices)
    nbox = spec.vertex_count  # box vertices plus its wired vertex
    base = box.edges()
    shift = np.array([nbox, nbox], dtype=np.int64)
    edges_b = base + shift
    wired_a = spec.wired_vertex
    wired_b = wired_a + nbox
    if merge_wired:
        edges_b = edges_b.copy()
        edges_b[edges_b == wired_b] = wired_a
    o_a = lattice.origin_id(spec)
    o_b = o_a + nbox
    bridge = np.array([[o_a, o_b]], dtype=np.int64)
    all_edges = np.concatenate([base, edges_b, bridge])
    n = 2 * nbox
    G = Graph(n, all_edges, wired_vertex=wired_a)
    return CounterexamplePair(
        graph=G, spec=spec, origin_a=o_a, origin_b=o_b,
        wired_a=wired_a, wired_b=(wired_a if merge_wired else wired_b),
        bridge_edge=G.m - 1,
    )


# ---------------------------------------------------------------------------
# edge-list text format: "n m" or "n m wired_id" header, then one "u v" per line

def write_edgelist(G: Graph, path: str) -> None:
    with open(path, "w") as fh:
        if G.wired_vertex is not None:
            fh.write(f"{G.n} {G.m} {G.wired_vertex}\n")
        else:
            fh.write(f"{G.n} {G.m}\n")
        for u, v in zip(G.edge_u.tolist(), G.edge_v.tolist()):
            fh.write(f"{u} {v}\n")


def read_edgelist(path: str) -> Graph:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) not in (2, 3):
            raise DomainError(f"bad edge-list header: {header!r}")
        n, m = int(header[0]), int(header[1])
        wired = int(header[2]) if len(header) == 3 else None
        edges = np.loadtxt(fh, dtype=np.int64, max_rows=m, ndmin=2) if m else np.empty((0, 2), np.int64)
    if edges.shape != (m, 2):
        raise DomainError(f"expected {m} edges, file has shape {edges.shape}")
    return Graph(n, edges, wired_vertex=wired)
