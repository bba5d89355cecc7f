"""Wilson sampler laws, exact tree counts, forest structure and io."""
import numpy as np
import pytest

from forestlab import (
    BudgetError,
    ContractError,
    DomainError,
    Graph,
    HitSet,
    HitWired,
    LatticeBoxSpec,
    RngStream,
    SpanningForest,
    build_lattice_box,
    chi_square_gof,
    components,
    enumerate_spanning_trees,
    origin_id,
    read_forest,
    reference_loop_erase,
    run_srw,
    spanning_tree_count,
    two_sample_chi_square,
    two_sided_wsf,
    vertex_coords,
    wilson_ust,
    write_forest,
    wsf_wired_box,
    wsf_wired_box_restricted,
)
from forestlab import lattice


def _complete(n):
    return Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def _cycle(n):
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def _cube():
    edges = []
    for v in range(8):
        for b in range(3):
            w = v ^ (1 << b)
            if w > v:
                edges.append((v, w))
    return Graph(8, edges)


def _forest_key(forest):
    return tuple(forest.edge_ids().tolist())


# ---------------------------------------------------------------------------
# exact tree counts

def test_spanning_tree_count_frozen():
    assert spanning_tree_count(_complete(4)) == 16       # Cayley 4^2
    assert spanning_tree_count(_complete(5)) == 125
    assert spanning_tree_count(_cycle(4)) == 4
    assert spanning_tree_count(_cube()) == 384
    assert spanning_tree_count(Graph(5, [(i, i + 1) for i in range(4)])) == 1
    assert spanning_tree_count(Graph(2, [(0, 1), (0, 1)])) == 2
    assert spanning_tree_count(Graph(3, [(0, 1), (1, 2), (2, 0)])) == 3
    assert spanning_tree_count(Graph(1, [])) == 1
    assert spanning_tree_count(Graph(4, [(0, 1), (2, 3)])) == 0


def _random_connected(gen, n):
    # random tree plus a few extra edges, parallel edges allowed
    edges = [(int(gen.integers(0, v)), v) for v in range(1, n)]
    extra = int(gen.integers(0, 5))
    for _ in range(extra):
        a, b = int(gen.integers(0, n)), int(gen.integers(0, n))
        if a != b:
            edges.append((a, b))
    return Graph(n, edges)


def test_count_matches_enumeration():
    gen = RngStream(13).generator()
    for _ in range(25):
        G = _random_connected(gen, int(gen.integers(2, 8)))
        trees = enumerate_spanning_trees(G)
        assert spanning_tree_count(G) == len(trees)
        assert trees == sorted(set(trees))
        for tree in trees[:50]:
            mask = np.zeros(G.m, dtype=bool)
            mask[list(tree)] = True
            assert components(G, mask).count == 1


def test_enumeration_is_spanning_and_capped():
    trees = enumerate_spanning_trees(_cycle(4))
    assert trees == [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
    big = Graph(28, [(i, i + 1) for i in range(27)])
    with pytest.raises(BudgetError):
        enumerate_spanning_trees(big)
    with pytest.raises(BudgetError):
        spanning_tree_count(_complete(4), max_vertices=3)


# ---------------------------------------------------------------------------
# wilson_ust law

def test_wilson_ust_is_spanning_tree():
    gen = RngStream(17).generator()
    for i in range(10):
        G = _random_connected(gen, int(gen.integers(2, 10)))
        forest = wilson_ust(G, 0, RngStream(17, i))
        forest.validate(G)
        assert forest.roots.tolist() == [0]
        assert len(forest.edge_ids()) == G.n - 1


def test_wilson_ust_root_set():
    P3 = Graph(3, [(0, 1), (1, 2)])
    counts = {}
    for i in range(2000):
        forest = wilson_ust(P3, [0, 2], RngStream(29, i))
        assert forest.roots.tolist() == [0, 2]
        p = int(forest.parent[1])
        counts[p] = counts.get(p, 0) + 1
    # the middle vertex attaches to either anchor with probability 1/2
    assert chi_square_gof(counts, {0: 0.5, 2: 0.5}).passes()


def test_wilson_ust_uniform_on_cycle():
    G = _cycle(4)
    counts = {}
    for i in range(4000):
        key = _forest_key(wilson_ust(G, 0, RngStream(43, i)))
        counts[key] = counts.get(key, 0) + 1
    probs = {tree: 0.25 for tree in enumerate_spanning_trees(G)}
    assert chi_square_gof(counts, probs).passes()


def test_wilson_order_invariance_small():
    G = _complete(4)
    fwd = np.arange(4)
    rev = fwd[::-1].copy()
    a, b = {}, {}
    for i in range(3000):
        ka = _forest_key(wilson_ust(G, 0, RngStream(51, i), order=fwd))
        kb = _forest_key(wilson_ust(G, 0, RngStream(52, i), order=rev))
        a[ka] = a.get(ka, 0) + 1
        b[kb] = b.get(kb, 0) + 1
    assert two_sample_chi_square(a, b).passes()


def test_wilson_validation():
    G = _cycle(4)
    with pytest.raises(DomainError):
        wilson_ust(G, 0, RngStream(0), order=[0, 1, 2])  # not a permutation
    with pytest.raises(DomainError):
        wilson_ust(G, [], RngStream(0))
    with pytest.raises(DomainError):
        wilson_ust(G, 7, RngStream(0))
    split = Graph(4, [(0, 1), (2, 3)])
    with pytest.raises(DomainError):
        wilson_ust(split, 0, RngStream(0))  # unreachable vertices
    with pytest.raises(BudgetError):
        wilson_ust(split, 0, RngStream(0), check_connectivity=False, step_budget=100)


# ---------------------------------------------------------------------------
# wired-box forest law

def test_wsf_wired_1d_law():
    # wired 1-D radius-1 box is a 4-cycle, so the tree drops one edge
    # uniformly; projecting out the wired vertex gives 1/2, 1/4, 1/4
    spec = LatticeBoxSpec(1, 1, "wired")
    left = lattice.interior_edge_id(spec, 0, 0)
    right = lattice.interior_edge_id(spec, 1, 0)
    counts = {}
    for i in range(4000):
        key = _forest_key(wsf_wired_box(spec, RngStream(61, i)))
        counts[key] = counts.get(key, 0) + 1
    probs = {
        (left, right): 0.5,
        (left,): 0.25,
        (right,): 0.25,
    }
    assert chi_square_gof(counts, probs).passes()


def test_wsf_wired_structure():
    spec = LatticeBoxSpec(2, 2, "wired")
    host = build_lattice_box(LatticeBoxSpec(2, 2, "free"))
    for i in range(5):
        forest = wsf_wired_box(spec, RngStream(71, i))
        forest.validate(host)
        for r in forest.roots.tolist():
            assert np.abs(vertex_coords(spec, r)).max() == spec.radius
        assert forest.components().count == len(forest.roots)
    with pytest.raises(DomainError):
        wsf_wired_box(LatticeBoxSpec(2, 2, "free"), RngStream(0))
    with pytest.raises(BudgetError):
        wsf_wired_box(spec, RngStream(0), budget_vertices=10)


def test_restricted_full_targets_bitwise():
    for spec in (LatticeBoxSpec(1, 3, "wired"), LatticeBoxSpec(2, 1, "wired")):
        n = spec.box_vertex_count
        parent, parent_edge, steps = wsf_wired_box_restricted(
            spec, np.arange(n), RngStream(83))
        assert steps > 0
        parent, parent_edge = parent[:n].copy(), parent_edge[:n].copy()
        at_wired = parent == n
        parent[at_wired] = -1
        parent_edge[at_wired] = -1
        full = wsf_wired_box(spec, RngStream(83))
        assert (full.parent == parent).all()
        assert (full.parent_edge == parent_edge).all()


def test_restricted_subset_matches_full_law():
    # restriction law at the origin: compare (parent, edge) categories against
    # full-box samples
    spec = LatticeBoxSpec(1, 2, "wired")
    o = origin_id(spec)
    sub_counts, full_counts = {}, {}
    for i in range(3000):
        parent, parent_edge, _ = wsf_wired_box_restricted(spec, [o], RngStream(97, i))
        key = (int(parent[o]), int(parent_edge[o]))
        sub_counts[key] = sub_counts.get(key, 0) + 1
        full = wsf_wired_box(spec, RngStream(98, i))
        p = int(full.parent[o])
        key_full = (spec.box_vertex_count if p == -1 else p, int(full.parent_edge[o]))
        full_counts[key_full] = full_counts.get(key_full, 0) + 1
    assert two_sample_chi_square(sub_counts, full_counts).passes()


def test_restricted_untouched_entries():
    spec = LatticeBoxSpec(2, 3, "wired")
    o = origin_id(spec)
    parent, parent_edge, _ = wsf_wired_box_restricted(spec, [o], RngStream(5))
    n = spec.box_vertex_count
    assert parent[n] == -1
    assert parent[o] != -2
    # filled entries are exactly the origin's branch down to the wired vertex
    branch = []
    u = o
    while u != n:
        branch.append(u)
        u = int(parent[u])
    filled = np.flatnonzero(parent[:n] != -2).tolist()
    assert sorted(branch) == filled
    with pytest.raises(DomainError):
        wsf_wired_box_restricted(spec, [n + 5], RngStream(0))


# ---------------------------------------------------------------------------
# forest structure and io

def test_forest_accessors():
    parent = np.array([-1, 0, 1, -1], dtype=np.int64)
    parent_edge = np.array([-1, 0, 1, -1], dtype=np.int64)
    forest = SpanningForest(parent, parent_edge)
    assert forest.n == 4
    assert forest.roots.tolist() == [0, 3]
    assert forest.edge_ids().tolist() == [0, 1]
    assert forest.edge_mask(3).tolist() == [True, True, False]
    assert forest.path_to_root(2).tolist() == [2, 1, 0]
    comp = forest.components()
    assert comp.same(0, 2) and not comp.same(0, 3)


def test_forest_validate_rejects():
    G = Graph(3, [(0, 1), (1, 2)])
    bad_edge = SpanningForest(np.array([-1, 0, 1]), np.array([-1, 1, 0]))
    with pytest.raises(ContractError):
        bad_edge.validate(G)
    cyc = SpanningForest(np.array([1, 2, 0]), np.array([0, 1, 0]))
    with pytest.raises(ContractError):
        cyc.validate(G)
    with pytest.raises(ContractError):
        SpanningForest(np.array([-3, 0]), np.array([-1, 0]))


def test_forest_io_roundtrip(tmp_path):
    forest = wsf_wired_box(LatticeBoxSpec(2, 2, "wired"), RngStream(3))
    path = tmp_path / "forest.txt"
    write_forest(forest, path)
    back = read_forest(path)
    assert (back.parent == forest.parent).all()
    assert (back.parent_edge == forest.parent_edge).all()
    text = path.read_text().splitlines()
    assert len(text) == forest.n
    assert text[0].endswith("-1 -1")


# ---------------------------------------------------------------------------
# two-sided sampler

def _trunk_chained(sample):
    ids = sample.trunk_ids
    forest = sample.forest
    for a, b in zip(ids[:-1].tolist(), ids[1:].tolist()):
        assert forest.parent[a] == b


def test_two_sided_wsf_lattice_mode():
    spec = LatticeBoxSpec(5, 2, "wired")
    sample = two_sided_wsf(5, 300, spec, RngStream(111), trunk_mode="lattice")
    assert sample.mode == "lattice"
    trunk = sample.trunk
    assert (trunk.coords[trunk.origin_offset] == 0).all()
    rows = set(map(tuple, trunk.coords))
    assert len(rows) == len(trunk.coords)
    _trunk_chained(sample)
    assert isinstance(sample.clipped, bool)
    host = build_lattice_box(LatticeBoxSpec(5, 2, "free"))
    sample.forest.validate(host)


def test_two_sided_wsf_box_mode():
    spec = LatticeBoxSpec(5, 1, "wired")
    sample = two_sided_wsf(5, 10, spec, RngStream(112), trunk_mode="box")
    assert sample.mode == "box" and not sample.clipped
    o, v = sample.origin_edge
    assert o == origin_id(spec)
    assert np.abs(vertex_coords(spec, o) - vertex_coords(spec, v)).sum() == 1
    _trunk_chained(sample)
    assert (sample.trunk.coords[sample.trunk.origin_offset] == 0).all()


def test_two_sided_wsf_validation():
    spec = LatticeBoxSpec(5, 1, "wired")
    with pytest.raises(DomainError):
        two_sided_wsf(6, 10, spec, RngStream(0))
    with pytest.raises(DomainError):
        two_sided_wsf(3, 10, LatticeBoxSpec(3, 1, "wired"), RngStream(0))
    with pytest.raises(DomainError):
        two_sided_wsf(5, 10, LatticeBoxSpec(5, 1, "free"), RngStream(0))
    with pytest.raises(DomainError):
        two_sided_wsf(5, 10, spec, RngStream(0), trunk_mode="diag")


def _local_box_trunk_len(G, spec, rng):
    # mirror of the documented in-box coupling, built from walk primitives
    o = origin_id(spec)
    w = G.wired_vertex
    nbrs = G.neighbors(o)[0]
    for attempt in range(1, 10001):
        sub = rng.substream(attempt)
        b1 = reference_loop_erase(
            run_srw(G, o, HitWired(), sub.substream(0)).vertices.tolist())
        v = int(nbrs[sub.substream(1).generator().integers(0, len(nbrs))])
        if v in b1:
            continue
        walk2 = run_srw(G, v, HitSet(frozenset(b1)), sub.substream(2))
        if int(walk2.vertices[-1]) != w:
            continue
        b2 = reference_loop_erase(walk2.vertices.tolist())
        return len(b2[:-1]) + len(b1[:-1])
    raise AssertionError("no acceptance")


def test_two_sided_box_trunk_law_matches_local_coupling():
    # the production trunk law should match a from-scratch implementation of
    # the same rejection coupling; compare trunk-length distributions
    spec = LatticeBoxSpec(5, 1, "wired")
    G = build_lattice_box(spec)
    prod, local = {}, {}
    for i in range(600):
        s = two_sided_wsf(5, 10, spec, RngStream(131, i), trunk_mode="box")
        k = len(s.trunk_ids)
        prod[k] = prod.get(k, 0) + 1
        k2 = _local_box_trunk_len(G, spec, RngStream(132, i))
        local[k2] = local.get(k2, 0) + 1
    assert two_sample_chi_square(prod, local).passes()
