"""Ray and bush decomposition of forest trees, join counts, and cut weights.

A tree sampled in a wired box carries a distinguished path from any vertex
to its root (the former attachment to the wired vertex); that path stands in
for the infinite ray. Bushes hang off the ray, join counts tally host edges
between bush pairs, and the rectangle sums of those counts give the cut
sizes #C_k and weights J_k feeding the resistance bounds.

Boundary effects contaminate the last stretch of the ray, so every derived
quantity is reported only up to a truncation index (default: the last 10% of
the ray is dropped); the raw counts always cover the full ray.

Hosts may be explicit Graphs or LatticeBoxSpecs; the lattice route never
materializes the box, so large-dimension boxes stay cheap.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels, lattice
from .errors import DomainError
from .graphs import Graph, subgraph
from .lattice import LatticeBoxSpec
from .resistance import effective_resistance
from .rng import RngStream
from .wilson import SpanningForest, wsf_wired_box


@dataclass(frozen=True)
class RayDecomposition:
    """Ray of a tree plus the bush index of every vertex.

    ray[0] is the chosen vertex, ray[-1] the tree root. bush[v] is the ray
    position whose bush contains v, or -1 for vertices of other trees.
    trunc_index marks how far along the ray derived statistics are trusted.
    """

    origin: int
    ray: np.ndarray
    ray_edges: np.ndarray
    bush: np.ndarray
    trunc_index: int

    @property
    def length(self) -> int:
        """Largest ray index (edge count of the ray)."""
        return len(self.ray) - 1

    def bush_sets(self) -> list[np.ndarray]:
        """Vertex sets Bush_0 .. Bush_N; they partition the tree."""
        order = np.argsort(self.bush, kind="stable")
        order = order[self.bush[order] >= 0]
        bounds = np.searchsorted(self.bush[order], np.arange(self.length + 2))
        return [order[bounds[i]:bounds[i + 1]] for i in range(self.length + 1)]


def ray_decompose(forest: SpanningForest, v: int, truncation: float = 0.1) -> RayDecomposition:
    """Ray of v's tree and the bush partition around it.

    truncation is the fraction of the ray (root end) withheld from derived
    statistics; counts are still tallied over the whole tree.
    """
    if not 0 <= v < forest.n:
        raise DomainError(f"vertex {v} outside the forest")
    if not 0.0 <= truncation < 1.0:
        raise DomainError("truncation must lie in [0, 1)")
    ray = forest.path_to_root(v)
    ray_edges = forest.parent_edge[ray[:-1]] if len(ray) > 1 else np.empty(0, np.int64)
    chain = np.empty(forest.n, dtype=np.int64)
    bush = _kernels.bush_indices(forest.parent, ray, forest.n, chain)
    trunc_index = int(np.floor((len(ray) - 1) * (1.0 - truncation)))
    return RayDecomposition(int(v), ray, ray_edges, bush, trunc_index)


@dataclass
class JoinStatistics:
    """Pair counts between bushes with the derived cut statistics.

    counts[a, b] (a <= b) is the number of host edges joining Bush_a and
    Bush_b; the diagonal holds within-bush edges, which no cut uses. Ray
    edges appear as consecutive-bush joins. Cut statistics follow from
    rectangle sums: an edge joining Bush_a and Bush_b lies in C_k exactly
    for a <= k < b, with multiplicity j(e) = b - a.
    """

    counts: np.ndarray
    trunc_index: int
    n: int | None = None
    _rect: np.ndarray = field(init=False, repr=False)
    _rect_weighted: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c = self.counts
        k = len(c)
        w = c * (np.arange(k)[None, :] - np.arange(k)[:, None])
        # _rect[a, b] = sum of counts over the rectangle a' <= a, b' >= b
        self._rect = np.cumsum(np.cumsum(c, axis=0)[:, ::-1], axis=1)[:, ::-1]
        self._rect_weighted = np.cumsum(np.cumsum(w, axis=0)[:, ::-1], axis=1)[:, ::-1]

    @property
    def max_index(self) -> int:
        return len(self.counts) - 1

    def pair_count(self, a: int, b: int) -> int:
        a, b = min(a, b), max(a, b)
        return int(self.counts[a, b])

    def N(self, j: int, l: int, n: int | None = None) -> int:
        """Edges joining Bush_{n-j} and Bush_{n+l} at the anchor n."""
        n = self.n if n is None else n
        if n is None:
            raise DomainError("join count needs an anchor index n")
        if j < 0 or n - j < 0:
            raise DomainError(f"offset j={j} leaves the ray at anchor {n}")
        if l < 0:
            raise DomainError("offset l must be nonnegative")
        if n + l > self.max_index:
            return 0
        return int(self.counts[n - j, n + l])

    def tail_sum(self, m: int, n: int | None = None) -> int:
        """Sum of N(j, l) over j <= n and l >= m."""
        n = self.n if n is None else n
        if n is None:
            raise DomainError("tail sum needs an anchor index n")
        if m < 1:
            raise DomainError("tail sum starts at l >= 1")
        if n + m > self.max_index:
            return 0
        return int(self._rect[n, n + m])

    def cut_size(self, k: int) -> int:
        """#C_k: edges joining bush indices <= k to indices >= k + 1."""
        if not 0 <= k <= self.max_index:
            raise DomainError(f"cut index {k} outside the ray")
        if k == self.max_index:
            return 0
        return int(self._rect[k, k + 1])

    def J(self, k: int) -> int:
        """Multiplicity-weighted cut size J_k."""
        if not 0 <= k <= self.max_index:
            raise DomainError(f"cut index {k} outside the ray")
        if k == self.max_index:
            return 0
        return int(self._rect_weighted[k, k + 1])

    def cut_sizes(self) -> np.ndarray:
        """#C_k for k below the truncation index."""
        ks = np.arange(self.trunc_index)
        return self._rect[ks, ks + 1] if len(ks) else np.empty(0, np.int64)

    def J_values(self) -> np.ndarray:
        """J_k for k below the truncation index."""
        ks = np.arange(self.trunc_index)
        return self._rect_weighted[ks, ks + 1] if len(ks) else np.empty(0, np.int64)


def _host_bush(host, bush: np.ndarray) -> np.ndarray:
    """Align a bush array with an explicit host, hiding its wired vertex."""
    if host.n == len(bush) + 1 and host.wired_vertex == len(bush):
        return np.append(bush, -1)
    if host.n != len(bush):
        raise DomainError("host graph does not match the forest size")
    return bush


def _pair_counts(host, decomposition: RayDecomposition) -> np.ndarray:
    """Dispatch the bush-pair edge count to the explicit or implicit route."""
    bush = decomposition.bush
    if isinstance(host, LatticeBoxSpec):
        if host.box_vertex_count != len(bush):
            raise DomainError("box spec does not match the forest size")
        return _kernels.bush_pair_counts_lattice(host.d, host.radius, bush)
    if isinstance(host, Graph):
        bush = _host_bush(host, bush)
        return _kernels.bush_pair_counts_csr(host.edge_u, host.edge_v, bush,
                                             int(bush.max()))
    raise DomainError("host must be a Graph or a LatticeBoxSpec")


def join_counts(host, decomposition: RayDecomposition, n: int) -> JoinStatistics:
    """Join counts N_{j, l} anchored at ray index n."""
    if not 0 <= n <= decomposition.length:
        raise DomainError(f"anchor {n} outside the ray of length {decomposition.length}")
    return JoinStatistics(_pair_counts(host, decomposition),
                          decomposition.trunc_index, n)


def cut_sets_and_J(host, decomposition: RayDecomposition) -> JoinStatistics:
    """Cut sizes and J_k values for every cut index below truncation."""
    return JoinStatistics(_pair_counts(host, decomposition),
                          decomposition.trunc_index)


def cut_set_edges(G: Graph, decomposition: RayDecomposition, k: int) -> np.ndarray:
    """Explicit edge ids of C_k; the counting route is checked against this."""
    bush = _host_bush(G, decomposition.bush)
    a = bush[G.edge_u]
    b = bush[G.edge_v]
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    return np.flatnonzero((lo >= 0) & (lo <= k) & (hi >= k + 1)).astype(np.int64)


def inter_component_joins(G: Graph, forest: SpanningForest, u: int, v: int) -> int:
    """Number of host edges joining the trees of u and v; 0 if they share one."""
    if not (0 <= u < forest.n and 0 <= v < forest.n):
        raise DomainError("probe vertex outside the forest")
    labels = forest.components().labels
    lu, lv = labels[u], labels[v]
    if lu == lv:
        return 0
    labels = _host_bush(G, labels)
    a, b = labels[G.edge_u], labels[G.edge_v]
    return int((((a == lu) & (b == lv)) | ((a == lv) & (b == lu))).sum())


def _closed_tree_graph(host, forest: SpanningForest, v: int):
    """Induced host graph on v's tree: the finite closed-tree surrogate.

    Returns (H, local) where local maps forest vertex ids to H ids (-1 off
    the tree). The lattice route assembles adjacency arithmetically.
    """
    labels = forest.components().labels
    tree_vertices = np.flatnonzero(labels == labels[v]).astype(np.int64)
    local = np.full(forest.n, -1, dtype=np.int64)
    local[tree_vertices] = np.arange(len(tree_vertices), dtype=np.int64)
    if isinstance(host, Graph):
        _host_bush(host, labels)  # size check
        H, _, _ = subgraph(host, tree_vertices)
        return H, local
    if not isinstance(host, LatticeBoxSpec):
        raise DomainError("host must be a Graph or a LatticeBoxSpec")
    if host.box_vertex_count != forest.n:
        raise DomainError("box spec does not match the forest size")
    L = host.side
    stride = lattice.strides(host)
    parts = []
    for axis in range(host.d):
        coord = (tree_vertices // stride[axis]) % L
        src = tree_vertices[coord < L - 1]
        dst = src + stride[axis]
        idx = np.searchsorted(tree_vertices, dst)
        idx[idx >= len(tree_vertices)] = 0
        hit = tree_vertices[idx] == dst
        parts.append(np.stack([local[src[hit]], local[dst[hit]]], axis=1))
    edges = np.concatenate(parts) if parts else np.empty((0, 2), dtype=np.int64)
    return Graph(len(tree_vertices), edges), local


def resistance_growth_profile(host, forest: SpanningForest, v: int,
                              n_max: int | None = None, truncation: float = 0.1,
                              rtol: float = 1e-10) -> np.ndarray:
    """Rows (n, R within the closed tree from v to Ray(n), sum_{k<n} 1/J_k).

    The resistance lives on the induced component graph of v's tree: the
    host subgraph on the tree's vertex set. The third column is its cut-set
    lower bound; R itself can never exceed n (the ray is an n-step path).
    """
    decomp = ray_decompose(forest, v, truncation)
    if n_max is None:
        n_max = decomp.trunc_index
    if not 1 <= n_max <= decomp.trunc_index:
        raise DomainError(f"n_max must lie in [1, {decomp.trunc_index}]")
    stats = cut_sets_and_J(host, decomp)
    H, local = _closed_tree_graph(host, forest, v)
    j_vals = stats.J_values().astype(np.float64)
    out = np.empty((n_max, 3))
    for n in range(1, n_max + 1):
        r = effective_resistance(H, [int(local[v])], [int(local[decomp.ray[n]])], rtol)
        out[n - 1] = (n, r, float((1.0 / j_vals[:n]).sum()))
    return out


@dataclass(frozen=True)
class RecurrenceDiagnostic:
    """Per-radius escape resistance of v's tree, with 1/#C_k partial sums."""

    radii: np.ndarray
    resistance: np.ndarray
    cut_partial_sums: list

    def rows(self) -> np.ndarray:
        return np.stack([self.radii.astype(np.float64), self.resistance], axis=1)


def recurrence_diagnostic(specs, v, rng: RngStream, truncation: float = 0.1,
                          rtol: float = 1e-10) -> RecurrenceDiagnostic:
    """Sample a wired forest per box and track the escape resistance of v.

    v is given in lattice coordinates, valid in every box. The resistance is
    measured inside the closed tree of v, from v to the tree's root: the
    former wired attachment, which is where the ray meets the boundary.
    Growth of this sequence, and of the 1/#C_k partial sums, is the finite
    diagnostic of recurrence of the closed tree.
    """
    specs = list(specs)
    if not specs:
        raise DomainError("empty box family")
    radii = np.array([s.radius for s in specs], dtype=np.int64)
    res = np.empty(len(specs))
    sums = []
    for i, spec in enumerate(specs):
        if spec.boundary != "wired":
            raise DomainError("recurrence diagnostic needs wired boxes")
        forest = wsf_wired_box(spec, rng.substream(i))
        vid = lattice.vertex_id(spec, v)
        decomp = ray_decompose(forest, vid, truncation)
        stats = cut_sets_and_J(spec, decomp)
        H, local = _closed_tree_graph(spec, forest, vid)
        root = int(decomp.ray[-1])
        if root == vid:
            res[i] = 0.0
        else:
            res[i] = effective_resistance(H, [int(local[vid])], [int(local[root])], rtol)
        sizes = stats.cut_sizes().astype(np.float64)
        sums.append(np.cumsum(1.0 / sizes) if len(sizes) else np.empty(0))
    return RecurrenceDiagnostic(radii, res, sums)
