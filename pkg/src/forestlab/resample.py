"""Resampling identity checks: conditional law of a forest inside a ball.

The fact under test: condition a wired-box spanning forest on the induced
component graph K of its restriction to a vertex ball B. The conditional law
of the restriction is then the uniform spanning forest of K, which on a
finite K is nothing but an independent uniform spanning tree per component.

Two verification routes live here. The exact route enumerates every spanning
tree of a small wired graph, groups by K, and checks the group counts are
literally equal integers. The statistical route runs two sampling pipelines
on a real box (direct restriction vs restrict-then-resample) and compares
the empirical laws over edge subsets of the ball.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .graphs import (Graph, InducedComponentGraph, build_lattice_box,
                     induced_component_graph, subgraph)
from .lattice import LatticeBoxSpec, lattice_ball
from .rng import RngStream
from .stats import (BootstrapTvResult, ChiSquareResult, Z_999,
                    bootstrap_tv_null, two_sample_chi_square)
from .unionfind import UnionFind
from .wilson import (SpanningForest, enumerate_spanning_trees,
                     spanning_tree_count, wilson_ust, wsf_wired_box_restricted)


def usf_on_components(K: InducedComponentGraph, rng: RngStream) -> SpanningForest:
    """Uniform spanning forest of K: independent uniform tree per component.

    Wilson's algorithm rooted at one representative per component does all
    components in a single pass. Edge ids in the result refer to K's host.
    """
    host = K.host
    eids = np.flatnonzero(np.asarray(K.edge_mask, dtype=bool)).astype(np.int64)
    edges = np.stack([host.edge_u[eids], host.edge_v[eids]], axis=1)
    masked = Graph(host.n, edges)
    roots = np.unique(K.components.labels)
    forest = wilson_ust(masked, roots, rng)
    parent_edge = np.where(forest.parent >= 0, eids[forest.parent_edge], -1)
    return SpanningForest(forest.parent, parent_edge)


def _restriction_key(B_local: int, edges_local: list, forest_edges: tuple):
    """Canonical K key: sorted closed edge ids plus the component partition."""
    uf = UnionFind(B_local)
    chosen = set(forest_edges)
    for eid, u, v in edges_local:
        if eid in chosen:
            uf.union(u, v)
    labels = uf.labels()
    k_edges = tuple(eid for eid, u, v in edges_local if labels[u] == labels[v])
    # renumber labels by first appearance so the partition encoding is canonical
    seen: dict = {}
    partition = tuple(seen.setdefault(l, len(seen)) for l in labels)
    return k_edges, partition


@dataclass(frozen=True)
class ConditionalLawTable:
    """Conditional law of the restricted forest for one K group.

    rows maps each restricted edge set (tuple of host edge ids) to its
    conditional probability; the probabilities sum to one.
    """

    key: tuple
    rows: dict

    def total(self) -> float:
        return float(sum(self.rows.values()))


@dataclass(frozen=True)
class ExactGroupReport:
    """Tree counts for one K group of the exact enumeration."""

    key_edges: tuple
    partition: tuple
    forest_counts: dict
    expected_forests: int

    @property
    def counts_equal(self) -> bool:
        return len(set(self.forest_counts.values())) == 1

    @property
    def complete(self) -> bool:
        return len(self.forest_counts) == self.expected_forests

    @property
    def extension_count(self) -> int:
        """Trees extending each restricted forest; -1 if the counts differ."""
        vals = set(self.forest_counts.values())
        return vals.pop() if len(vals) == 1 else -1


@dataclass(frozen=True)
class ExactConditionalReport:
    ball: tuple
    total_trees: int
    groups: tuple

    @property
    def passed(self) -> bool:
        return all(g.counts_equal and g.complete for g in self.groups)

    def law_tables(self) -> list[ConditionalLawTable]:
        tables = []
        for g in self.groups:
            total = sum(g.forest_counts.values())
            rows = {f: c / total for f, c in g.forest_counts.items()}
            tables.append(ConditionalLawTable((g.key_edges, g.partition), rows))
        return tables

    def as_dict(self) -> dict:
        groups = []
        for g in self.groups:
            groups.append({
                "k_edges": list(g.key_edges),
                "partition": list(g.partition),
                "forests": len(g.forest_counts),
                "expected_forests": g.expected_forests,
                "extension_count": g.extension_count,
                "counts": {" ".join(map(str, f)): c
                           for f, c in sorted(g.forest_counts.items())},
                "counts_equal": g.counts_equal,
                "complete": g.complete,
            })
        return {"ball": list(self.ball), "total_trees": self.total_trees,
                "passed": self.passed, "groups": groups}


def _expected_forest_count(B_local: int, edges_local: list, k_edges: tuple,
                           partition: tuple) -> int:
    """Product over K components of their spanning tree counts, exactly."""
    k_set = set(k_edges)
    total = 1
    for comp in range(max(partition) + 1):
        verts = [i for i in range(B_local) if partition[i] == comp]
        if len(verts) < 2:
            continue
        local = {v: i for i, v in enumerate(verts)}
        comp_edges = [(local[u], local[v]) for eid, u, v in edges_local
                      if eid in k_set and u in local and v in local]
        total *= spanning_tree_count(Graph(len(verts), comp_edges))
    return total


def exact_conditional_test(G: Graph, B) -> ExactConditionalReport:
    """Enumerate all spanning trees of the wired graph and verify the groups.

    Every spanning tree is restricted to the ball B; trees are grouped by the
    induced component graph K of their restriction. Within each group, each
    restricted forest must occur exactly equally often, and every spanning
    forest of K connected in each K component must occur. Both checks are
    integer-exact.
    """
    if G.wired_vertex is None:
        raise DomainError("exact conditional test needs a wired graph")
    ball = np.unique(np.asarray(list(B), dtype=np.int64))
    if ball.size == 0:
        raise DomainError("ball is empty")
    if ball.min() < 0 or ball.max() >= G.n:
        raise DomainError("ball vertex outside the graph")
    if G.wired_vertex in set(ball.tolist()):
        raise DomainError("ball must not contain the wired vertex")
    local = {int(v): i for i, v in enumerate(ball)}
    edges_local = [(e, local[int(G.edge_u[e])], local[int(G.edge_v[e])])
                   for e in range(G.m)
                   if int(G.edge_u[e]) in local and int(G.edge_v[e]) in local]
    ball_edge_ids = {e for e, _, _ in edges_local}

    trees = enumerate_spanning_trees(G)
    groups: dict = {}
    for tree in trees:
        restricted = tuple(e for e in tree if e in ball_edge_ids)
        key = _restriction_key(len(ball), edges_local, restricted)
        groups.setdefault(key, {}).setdefault(restricted, 0)
        groups[key][restricted] += 1

    reports = []
    for (k_edges, partition), forest_counts in sorted(groups.items()):
        expected = _expected_forest_count(len(ball), edges_local, k_edges, partition)
        reports.append(ExactGroupReport(k_edges, partition, forest_counts, expected))
    return ExactConditionalReport(tuple(int(v) for v in ball), len(trees),
                                  tuple(reports))


def _ball_edge_table(spec: LatticeBoxSpec, G: Graph, ball: np.ndarray):
    """Host ids (u, v, eid) of the box edges inside the ball."""
    inside = np.zeros(G.n, dtype=bool)
    inside[ball] = True
    eids = np.flatnonzero(inside[G.edge_u] & inside[G.edge_v]).astype(np.int64)
    return G.edge_u[eids], G.edge_v[eids], eids


def _present_mask(parent: np.ndarray, parent_edge: np.ndarray, bu, bv, be):
    """Which ball edges the (partial) forest uses, as a boolean vector."""
    return ((parent[bu] == bv) & (parent_edge[bu] == be)) | \
           ((parent[bv] == bu) & (parent_edge[bv] == be))


def _pack_key(mask: np.ndarray) -> int:
    return int.from_bytes(np.packbits(mask).tobytes(), "big")


@dataclass(frozen=True)
class EdgeMarginalRow:
    edge: int
    freq_direct: float
    freq_resampled: float
    z: float


# when this share of the observations sits in cells too thin for the
# chi-square floor, the joint-cell comparison is abandoned for the marginals
SPARSE_MASS_LIMIT = 0.25


@dataclass(frozen=True)
class ResampleTestReport:
    """Direct vs restrict-then-resample comparison over one ball.

    When most of the mass sits in near-singleton cells, both joint-cell
    statistics break: chi-square loses its cells to merging, and the
    bootstrap TV null is biased low (pooled atoms collide across resamples
    while fresh draws from a diffuse law do not). The comparison is then
    coarsened to per-edge inclusion marginals and flagged; the joint
    numbers stay in the report but carry no verdict.
    """

    replicas: int
    ball_radius: int
    ball_edges: int
    cells_direct: dict
    cells_resampled: dict
    tv: BootstrapTvResult
    chi_square: ChiSquareResult | None
    coarsened: bool
    sparse_fraction: float
    edge_marginals: tuple

    @property
    def passed(self) -> bool:
        if self.coarsened:
            return all(abs(r.z) <= Z_999 for r in self.edge_marginals)
        return self.tv.consistent_with_zero and self.chi_square.passes(1e-3)

    def as_dict(self) -> dict:
        return {
            "replicas": self.replicas,
            "ball_radius": self.ball_radius,
            "ball_edges": self.ball_edges,
            "distinct_cells": len(set(self.cells_direct) | set(self.cells_resampled)),
            "tv": {"observed": self.tv.observed, "threshold": self.tv.threshold,
                   "quantile": self.tv.quantile,
                   "consistent_with_zero": self.tv.consistent_with_zero},
            "chi_square": None if self.chi_square is None else {
                "statistic": self.chi_square.statistic, "dof": self.chi_square.dof,
                "pvalue": self.chi_square.pvalue, "merged": self.chi_square.merged},
            "coarsened": self.coarsened,
            "sparse_fraction": self.sparse_fraction,
            "edge_marginals": [{"edge": r.edge, "freq_direct": r.freq_direct,
                                "freq_resampled": r.freq_resampled, "z": r.z}
                               for r in self.edge_marginals],
            "passed": self.passed,
        }


def _edge_marginal_rows(eids, totals_a, totals_b, n) -> tuple:
    rows = []
    for i, e in enumerate(eids.tolist()):
        pa, pb = totals_a[i] / n, totals_b[i] / n
        pooled = (totals_a[i] + totals_b[i]) / (2 * n)
        var = pooled * (1.0 - pooled) * (2.0 / n)
        z = (pa - pb) / np.sqrt(var) if var > 0 else 0.0
        rows.append(EdgeMarginalRow(int(e), float(pa), float(pb), float(z)))
    return tuple(rows)


def statistical_resample_test(spec: LatticeBoxSpec, B_radius: int, replicas: int,
                              rng: RngStream, bootstrap: int = 1000,
                              budget_vertices: int | None = None) -> ResampleTestReport:
    """Compare direct WSF restriction against the restrict-then-resample law.

    Pipeline A samples the forest's restriction to the ball directly. An
    independent pipeline B samples a restriction, closes it to K, and redraws
    a uniform spanning tree on each K component. The empirical laws over
    ball edge subsets are compared by total variation (with a bootstrap null
    band) and chi-square; sparse cells trigger an edge-marginal fallback.
    """
    if spec.boundary != "wired":
        raise DomainError("resample test needs a wired box")
    if B_radius < 1:
        raise DomainError("ball radius must be at least 1")
    if B_radius * 4 > spec.radius:
        raise DomainError(f"ball radius {B_radius} exceeds a quarter of the box "
                          f"radius {spec.radius}")
    if replicas < 1:
        raise DomainError("need at least one replica")
    G = build_lattice_box(spec, budget_vertices)
    ball = lattice_ball(spec, B_radius)
    bu, bv, be = _ball_edge_table(spec, G, ball)
    G_ball, _, ball_eids = subgraph(G, ball)
    # local ids of the ball edge table within the subgraph, matching be
    pos = {int(e): i for i, e in enumerate(ball_eids)}
    order = np.array([pos[int(e)] for e in be], dtype=np.int64)

    counts_a: dict = {}
    counts_b: dict = {}
    edge_tot_a = np.zeros(len(be), dtype=np.int64)
    edge_tot_b = np.zeros(len(be), dtype=np.int64)
    stream_a = rng.substream(1)
    stream_b = rng.substream(2)
    for i in range(replicas):
        parent, parent_edge, _ = wsf_wired_box_restricted(spec, ball, stream_a.substream(i))
        mask_a = _present_mask(parent, parent_edge, bu, bv, be)
        key = _pack_key(mask_a)
        counts_a[key] = counts_a.get(key, 0) + 1
        edge_tot_a += mask_a

        sub = stream_b.substream(i)
        parent, parent_edge, _ = wsf_wired_box_restricted(spec, ball, sub.substream(0))
        # restriction as an edge mask of the ball subgraph, then close to K
        sub_mask = np.zeros(G_ball.m, dtype=bool)
        sub_mask[order[_present_mask(parent, parent_edge, bu, bv, be)]] = True
        K = induced_component_graph(G_ball, sub_mask)
        resampled = usf_on_components(K, sub.substream(1))
        hit = np.zeros(G_ball.m, dtype=bool)
        hit[resampled.parent_edge[resampled.parent >= 0]] = True
        mask_b = hit[order]
        key = _pack_key(mask_b)
        counts_b[key] = counts_b.get(key, 0) + 1
        edge_tot_b += mask_b

    tv = bootstrap_tv_null(counts_a, counts_b, rng.substream(3),
                           resamples=bootstrap)
    keys = sorted(set(counts_a) | set(counts_b))
    a = np.array([counts_a.get(k, 0) for k in keys], dtype=np.float64)
    b = np.array([counts_b.get(k, 0) for k in keys], dtype=np.float64)
    # mass in cells below the chi-square expectation floor on the joint table
    thin = replicas * (a + b) / (a.sum() + b.sum()) < 5.0
    sparse_fraction = float((a + b)[thin].sum() / (a.sum() + b.sum()))
    try:
        chi = two_sample_chi_square(counts_a, counts_b)
        coarsened = chi.dof < 1 or sparse_fraction > SPARSE_MASS_LIMIT
    except DomainError:
        chi, coarsened = None, True
    marginals = _edge_marginal_rows(be, edge_tot_a, edge_tot_b, replicas)
    return ResampleTestReport(replicas, B_radius, len(be), counts_a, counts_b,
                              tv, chi, coarsened, sparse_fraction, marginals)
