"""Resampling identity: component-wise USF, exact grouping, statistical test."""
import json

import numpy as np
import pytest

from forestlab import (
    DomainError,
    Graph,
    LatticeBoxSpec,
    RngStream,
    build_lattice_box,
    chi_square_gof,
    components,
    exact_conditional_test,
    induced_component_graph,
    lattice_ball,
    statistical_resample_test,
    subgraph,
    usf_on_components,
    wsf_wired_box_restricted,
)
from forestlab import lattice


def _two_triangles():
    return Graph(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])


def test_usf_on_components_structure():
    G = _two_triangles()
    K = induced_component_graph(G, np.ones(6, dtype=bool))
    forest = usf_on_components(K, RngStream(201))
    forest.validate(G)
    assert len(forest.roots) == 2
    comp = forest.components()
    assert comp.same(0, 2) and comp.same(3, 5) and not comp.same(0, 3)
    assert set(forest.edge_ids().tolist()) <= set(range(6))


def test_usf_on_components_product_law():
    # independent uniform trees per component: 3 x 3 outcomes, all equal
    G = _two_triangles()
    K = induced_component_graph(G, np.ones(6, dtype=bool))
    counts = {}
    for i in range(3600):
        forest = usf_on_components(K, RngStream(203, i))
        key = tuple(forest.edge_ids().tolist())
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 9
    probs = {k: 1 / 9 for k in counts}
    assert chi_square_gof(counts, probs).passes()
    # marginal per triangle is uniform as well
    left = {}
    for key, c in counts.items():
        lk = tuple(e for e in key if e < 3)
        left[lk] = left.get(lk, 0) + c
    assert chi_square_gof(left, {k: 1 / 3 for k in left}).passes()


def test_usf_respects_edge_mask():
    G = _two_triangles()
    mask = np.array([True, True, False, True, True, False])
    K = induced_component_graph(G, mask)
    # closure restores the chords, components stay the triangles
    assert K.edge_mask.all()
    narrow = induced_component_graph(
        Graph(4, [(0, 1), (2, 3), (1, 2)]), np.array([True, True, False]))
    forest = usf_on_components(narrow, RngStream(7))
    assert set(forest.edge_ids().tolist()) <= {0, 1}
    assert len(forest.roots) == 2


def test_exact_conditional_1d_frozen():
    G = build_lattice_box(LatticeBoxSpec(1, 1, "wired"))
    report = exact_conditional_test(G, [0, 1, 2])
    assert report.total_trees == 4
    assert report.passed
    assert len(report.groups) == 3
    by_edges = {g.key_edges: g for g in report.groups}
    both = by_edges[(0, 1)]
    assert both.extension_count == 2       # two boundary attachments
    assert both.forest_counts == {(0, 1): 2}
    assert by_edges[(0,)].forest_counts == {(0,): 1}
    assert by_edges[(1,)].forest_counts == {(1,): 1}
    for table in report.law_tables():
        assert table.total() == pytest.approx(1.0)
        assert all(p == 1.0 for p in table.rows.values())
    payload = report.as_dict()
    assert payload["passed"] is True
    json.dumps(payload)


def test_exact_conditional_2d_center_ball():
    spec = LatticeBoxSpec(2, 1, "wired")
    G = build_lattice_box(spec)
    ball = lattice_ball(spec, 1)
    report = exact_conditional_test(G, ball)
    assert report.passed
    assert report.total_trees > 100
    assert len(report.groups) > 1
    # groups partition the tree count
    assert sum(sum(g.forest_counts.values()) for g in report.groups) == report.total_trees
    for table in report.law_tables():
        assert table.total() == pytest.approx(1.0)


def test_exact_conditional_validation():
    spec = LatticeBoxSpec(1, 1, "wired")
    G = build_lattice_box(spec)
    free = build_lattice_box(LatticeBoxSpec(1, 1, "free"))
    with pytest.raises(DomainError):
        exact_conditional_test(free, [0, 1])
    with pytest.raises(DomainError):
        exact_conditional_test(G, [])
    with pytest.raises(DomainError):
        exact_conditional_test(G, [0, G.wired_vertex])
    with pytest.raises(DomainError):
        exact_conditional_test(G, [99])


def test_resampled_partition_matches_k():
    # pipeline B invariant: resampling cannot move vertices between
    # K components, and uses only K edges
    spec = LatticeBoxSpec(2, 4, "wired")
    G = build_lattice_box(spec)
    ball = lattice_ball(spec, 1)
    G_ball, _, ball_eids = subgraph(G, ball)
    inside = np.zeros(G.n, dtype=bool)
    inside[ball] = True
    host_eids = np.flatnonzero(inside[G.edge_u] & inside[G.edge_v])
    pos = {int(e): i for i, e in enumerate(ball_eids)}
    vmap = {int(v): i for i, v in enumerate(ball)}
    for i in range(20):
        parent, parent_edge, _ = wsf_wired_box_restricted(
            spec, ball, RngStream(211, i))
        mask = np.zeros(G_ball.m, dtype=bool)
        for e in host_eids.tolist():
            u, v = int(G.edge_u[e]), int(G.edge_v[e])
            if parent[u] == v and parent_edge[u] == e:
                mask[pos[e]] = True
            if parent[v] == u and parent_edge[v] == e:
                mask[pos[e]] = True
        K = induced_component_graph(G_ball, mask)
        forest = usf_on_components(K, RngStream(212, i))
        assert (K.edge_mask[forest.edge_ids()]).all()
        after = forest.components().labels
        assert (after == K.components.labels).all()


def test_statistical_resample_star_ball():
    # radius-1 ball is a star, so K always equals the restriction and the
    # two pipelines share one law; the verdict must come back clean
    spec = LatticeBoxSpec(2, 4, "wired")
    report = statistical_resample_test(spec, 1, 4000, RngStream(221))
    assert report.replicas == 4000
    assert report.ball_edges == 4
    assert not report.coarsened
    assert report.tv.consistent_with_zero
    assert report.chi_square.passes(1e-3)
    assert report.passed
    json.dumps(report.as_dict())


def test_statistical_resample_nontrivial_ball():
    # radius-2 ball carries 4-cycles, so resampling genuinely moves edges;
    # 2^16 cells at 3000 replicas is deep in the coarsened regime
    spec = LatticeBoxSpec(2, 8, "wired")
    report = statistical_resample_test(spec, 2, 3000, RngStream(223))
    assert report.ball_edges == 16
    assert report.coarsened
    assert report.sparse_fraction > 0.25
    assert report.passed
    # resampling produced at least one cell the direct pipeline also saw
    assert set(report.cells_direct) & set(report.cells_resampled)


def test_statistical_resample_deterministic():
    spec = LatticeBoxSpec(2, 4, "wired")
    a = statistical_resample_test(spec, 1, 400, RngStream(31))
    b = statistical_resample_test(spec, 1, 400, RngStream(31))
    assert a.cells_direct == b.cells_direct
    assert a.cells_resampled == b.cells_resampled
    assert a.tv.observed == b.tv.observed


def test_statistical_resample_validation():
    wired = LatticeBoxSpec(2, 4, "wired")
    with pytest.raises(DomainError):
        statistical_resample_test(LatticeBoxSpec(2, 4, "free"), 1, 10, RngStream(0))
    with pytest.raises(DomainError):
        statistical_resample_test(wired, 0, 10, RngStream(0))
    with pytest.raises(DomainError):
        statistical_resample_test(wired, 2, 10, RngStream(0))  # 2 * 4 > 4
    with pytest.raises(DomainError):
        statistical_resample_test(wired, 1, 0, RngStream(0))
