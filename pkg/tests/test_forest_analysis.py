"""Ray/bush decomposition, join counts, cut weights, recurrence diagnostics."""
import numpy as np
import pytest

from forestlab import (
    DomainError,
    Graph,
    LatticeBoxSpec,
    RngStream,
    SpanningForest,
    build_lattice_box,
    cut_set_edges,
    cut_sets_and_J,
    inter_component_joins,
    join_counts,
    ray_decompose,
    recurrence_diagnostic,
    resistance_growth_profile,
    vertex_id,
    wsf_wired_box,
)
from forestlab import lattice


def _line_forest():
    # 1-D radius-3 box, two trees: {0} and the chain 1 -> 2 -> ... -> 6
    spec = LatticeBoxSpec(1, 3, "wired")
    eid = lambda a: lattice.interior_edge_id(spec, a, 0)
    parent = np.array([-1, 2, 3, 4, 5, 6, -1], dtype=np.int64)
    parent_edge = np.array([-1, eid(1), eid(2), eid(3), eid(4), eid(5), -1],
                           dtype=np.int64)
    return spec, SpanningForest(parent, parent_edge)


def test_ray_decompose_hand_case():
    spec, forest = _line_forest()
    decomp = ray_decompose(forest, 3)
    assert decomp.origin == 3
    assert decomp.ray.tolist() == [3, 4, 5, 6]
    assert decomp.length == 3
    assert decomp.trunc_index == 2  # drop the last 10% of a 3-edge ray
    eid = lambda a: lattice.interior_edge_id(spec, a, 0)
    assert decomp.ray_edges.tolist() == [eid(3), eid(4), eid(5)]
    assert decomp.bush.tolist() == [-1, 0, 0, 0, 1, 2, 3]
    sets = decomp.bush_sets()
    assert [s.tolist() for s in sets] == [[1, 2, 3], [4], [5], [6]]


def test_ray_decompose_validation():
    _, forest = _line_forest()
    with pytest.raises(DomainError):
        ray_decompose(forest, 9)
    with pytest.raises(DomainError):
        ray_decompose(forest, 3, truncation=1.0)
    root_only = ray_decompose(forest, 0)
    assert root_only.length == 0
    assert root_only.ray_edges.size == 0


def test_join_counts_hand_case():
    spec, forest = _line_forest()
    decomp = ray_decompose(forest, 3)
    stats = join_counts(spec, decomp, n=0)
    assert stats.pair_count(0, 0) == 2      # edges (1,2) and (2,3)
    assert stats.pair_count(0, 1) == 1      # the ray edge (3,4)
    assert stats.N(0, 1) == 1
    assert stats.N(0, 2) == 0
    assert stats.tail_sum(1) == 1
    assert stats.cut_size(0) == 1 and stats.J(0) == 1
    assert stats.cut_sizes().tolist() == [1, 1]
    assert stats.J_values().tolist() == [1, 1]


def test_join_counts_multiplicity():
    # a chord jumping two bushes must appear in both cuts with j(e) = 2
    G = Graph(4, [(0, 1), (1, 2), (3, 0), (3, 2)])
    forest = SpanningForest(np.array([1, 2, -1, 0]),
                            np.array([0, 1, -1, 2]))
    decomp = ray_decompose(forest, 0, truncation=0.0)
    assert decomp.bush.tolist() == [0, 1, 2, 0]
    stats = cut_sets_and_J(G, decomp)
    assert stats.pair_count(0, 2) == 1
    assert stats.cut_size(0) == 2 and stats.cut_size(1) == 2
    assert stats.J(0) == 3 and stats.J(1) == 3   # chord counts twice
    assert sorted(cut_set_edges(G, decomp, 0).tolist()) == [0, 3]
    assert sorted(cut_set_edges(G, decomp, 1).tolist()) == [1, 3]
    # tail sums against a brute double loop over N(j, l)
    for n in (0, 1):
        for m in (1, 2):
            brute = sum(stats.N(j, l, n) for j in range(n + 1)
                        for l in range(m, stats.max_index + 1))
            assert stats.tail_sum(m, n) == brute


def test_join_statistics_validation():
    spec, forest = _line_forest()
    decomp = ray_decompose(forest, 3)
    stats = cut_sets_and_J(spec, decomp)
    with pytest.raises(DomainError):
        stats.N(0, 1)          # no anchor bound
    with pytest.raises(DomainError):
        stats.N(5, 0, n=2)     # walks off the ray start
    with pytest.raises(DomainError):
        stats.tail_sum(0, n=1)
    with pytest.raises(DomainError):
        stats.cut_size(7)
    with pytest.raises(DomainError):
        join_counts(spec, decomp, n=9)
    assert stats.cut_size(stats.max_index) == 0


def _brute_bush(forest, ray):
    pos = {int(v): i for i, v in enumerate(ray)}
    out = np.full(forest.n, -1, dtype=np.int64)
    ray_root = int(ray[-1])
    labels = forest.components().labels
    for v in range(forest.n):
        if labels[v] != labels[ray_root]:
            continue
        u = v
        while u not in pos:
            u = int(forest.parent[u])
        out[v] = pos[u]
    return out


def test_bush_matches_brute_force():
    spec = LatticeBoxSpec(2, 3, "wired")
    for i in range(5):
        forest = wsf_wired_box(spec, RngStream(141, i))
        v = int(RngStream(142, i).generator().integers(0, forest.n))
        decomp = ray_decompose(forest, v)
        assert (decomp.bush == _brute_bush(forest, decomp.ray)).all()
        sets = decomp.bush_sets()
        stacked = np.concatenate(sets)
        assert len(np.unique(stacked)) == len(stacked)
        for k, s in enumerate(sets):
            assert (decomp.bush[s] == k).all()


def test_pair_count_routes_agree():
    # lattice arithmetic, wired host graph, and free host graph must tally
    # the same interior joins
    spec = LatticeBoxSpec(2, 3, "wired")
    wired_host = build_lattice_box(spec)
    free_host = build_lattice_box(LatticeBoxSpec(2, 3, "free"))
    for i in range(5):
        forest = wsf_wired_box(spec, RngStream(151, i))
        decomp = ray_decompose(forest, lattice.origin_id(spec))
        a = cut_sets_and_J(spec, decomp)
        b = cut_sets_and_J(wired_host, decomp)
        c = cut_sets_and_J(free_host, decomp)
        assert (a.counts == b.counts).all()
        assert (a.counts == c.counts).all()


def test_cut_counting_matches_explicit_edges():
    spec = LatticeBoxSpec(2, 3, "wired")
    host = build_lattice_box(LatticeBoxSpec(2, 3, "free"))
    for i in range(5):
        forest = wsf_wired_box(spec, RngStream(161, i))
        decomp = ray_decompose(forest, lattice.origin_id(spec))
        stats = cut_sets_and_J(spec, decomp)
        bush = decomp.bush
        for k in range(decomp.length):
            edges = cut_set_edges(host, decomp, k)
            assert stats.cut_size(k) == len(edges)
            spans = np.abs(bush[host.edge_u[edges]] - bush[host.edge_v[edges]])
            assert stats.J(k) == int(spans.sum())


def test_inter_component_joins():
    G = Graph(4, [(0, 1), (1, 2), (2, 3), (1, 2)])
    forest = SpanningForest(np.array([-1, 0, -1, 2]), np.array([-1, 0, -1, 2]))
    assert inter_component_joins(G, forest, 0, 3) == 2   # both copies of (1,2)
    assert inter_component_joins(G, forest, 0, 1) == 0   # same tree
    with pytest.raises(DomainError):
        inter_component_joins(G, forest, 0, 9)


def test_growth_profile_sandwich():
    spec = LatticeBoxSpec(2, 4, "wired")
    o = lattice.origin_id(spec)
    checked = 0
    for i in range(8):
        forest = wsf_wired_box(spec, RngStream(171, i))
        decomp = ray_decompose(forest, o)
        if decomp.trunc_index < 1:
            continue
        rows = resistance_growth_profile(spec, forest, o)
        checked += 1
        for n, r, lower in rows:
            assert lower - 1e-9 <= r <= n + 1e-9
    assert checked >= 4


def test_growth_profile_host_routes_agree():
    spec = LatticeBoxSpec(2, 3, "wired")
    host = build_lattice_box(spec)
    o = lattice.origin_id(spec)
    for i in range(6):
        forest = wsf_wired_box(spec, RngStream(181, i))
        if ray_decompose(forest, o).trunc_index < 1:
            continue
        a = resistance_growth_profile(spec, forest, o)
        b = resistance_growth_profile(host, forest, o)
        assert np.allclose(a, b, rtol=1e-9, atol=1e-12)


def test_growth_profile_validation():
    spec, forest = _line_forest()
    with pytest.raises(DomainError):
        resistance_growth_profile(spec, forest, 3, n_max=9)
    with pytest.raises(DomainError):
        resistance_growth_profile(spec, forest, 0)  # v is its own root


def test_recurrence_diagnostic_1d_exact():
    # in one dimension the closed tree is an interval, so the escape
    # resistance equals the ray length exactly; every cut has one edge
    specs = [LatticeBoxSpec(1, r, "wired") for r in (2, 3, 5)]
    rng = RngStream(191)
    diag = recurrence_diagnostic(specs, [0], rng)
    assert diag.radii.tolist() == [2, 3, 5]
    for i, spec in enumerate(specs):
        forest = wsf_wired_box(spec, rng.substream(i))
        decomp = ray_decompose(forest, vertex_id(spec, [0]))
        assert diag.resistance[i] == pytest.approx(decomp.length, abs=1e-9)
        k = decomp.trunc_index
        assert diag.cut_partial_sums[i].tolist() == pytest.approx(
            np.arange(1, k + 1, dtype=float).tolist())
    rows = diag.rows()
    assert rows.shape == (3, 2)
    assert (rows[:, 0] == diag.radii).all()


def test_recurrence_diagnostic_2d_runs():
    specs = [LatticeBoxSpec(2, r, "wired") for r in (2, 4)]
    diag = recurrence_diagnostic(specs, [0, 0], RngStream(193))
    assert (diag.resistance >= 0).all()
    assert len(diag.cut_partial_sums) == 2
    with pytest.raises(DomainError):
        recurrence_diagnostic([], [0, 0], RngStream(0))
    with pytest.raises(DomainError):
        recurrence_diagnostic([LatticeBoxSpec(2, 2, "free")], [0, 0], RngStream(0))
