import math

import numpy as np
import pytest

from unbalanced_sbm.graphs import (
    BudgetExceeded,
    LabeledGraph,
    LabeledTree,
    RevealedSet,
    extract_ball,
    sample_gw,
    sample_reveal,
    sample_sbm,
)
from unbalanced_sbm.model import derive_params, transition_matrix

nx = pytest.importorskip("networkx")


def triangle():
    return LabeledGraph(3, np.array([[0, 1], [1, 2], [0, 2]]), np.array([1, 2, 2]))


# -- LabeledGraph -----------------------------------------------------------

def test_graph_rejects_bad_input():
    labels = np.array([1, 2, 1])
    with pytest.raises(ValueError):
        LabeledGraph(3, np.array([[1, 1]]), labels)
    with pytest.raises(ValueError):
        LabeledGraph(3, np.array([[0, 1], [0, 1]]), labels)
    with pytest.raises(ValueError):
        LabeledGraph(3, np.array([[0, 3]]), labels)
    with pytest.raises(ValueError):
        LabeledGraph(3, np.zeros((0, 2)), np.array([1, 3, 1]))


def test_graph_adjacency():
    g = triangle()
    assert g.n_edges == 3
    np.testing.assert_array_equal(g.degrees(), [2, 2, 2])
    assert sorted(g.neighbors(1)) == [0, 2]


# -- sample_sbm -------------------------------------------------------------

def test_sbm_no_signal_is_erdos_renyi():
    P = derive_params(0.3, 6, 0)
    n = 1000
    g = sample_sbm(P, n, seed=3)
    lab = g.labels
    same = lab[g.edges[:, 0]] == lab[g.edges[:, 1]]
    n1 = int((lab == 1).sum())
    pairs_same = n1 * (n1 - 1) / 2 + (n - n1) * (n - n1 - 1) / 2
    pairs_cross = n1 * (n - n1)
    # the same edge density d/n within and across label classes
    for count, pairs in ((same.sum(), pairs_same), ((~same).sum(), pairs_cross)):
        expected = pairs * P.d / n
        assert abs(count - expected) < 5 * math.sqrt(expected)


def test_sbm_degree_and_label_fraction():
    P = derive_params(0.25, 5, 2)
    n = 10_000
    g = sample_sbm(P, n, seed=11)
    mean_deg = 2 * g.n_edges / n
    assert abs(mean_deg - 5) <= 5 * math.sqrt(2 * 5 / n)
    frac = (g.labels == 1).mean()
    assert abs(frac - 0.25) <= 5 * math.sqrt(0.25 * 0.75 / n)


def test_sbm_block_densities_follow_affinities():
    P = derive_params(0.25, 20, 10)
    n = 20_000
    g = sample_sbm(P, n, seed=5)
    lab = g.labels
    ids1 = np.flatnonzero(lab == 1)
    n1, n2 = len(ids1), n - len(ids1)
    kinds = lab[g.edges[:, 0]] + lab[g.edges[:, 1]]
    pairs = {2: n1 * (n1 - 1) / 2, 3: n1 * n2, 4: n2 * (n2 - 1) / 2}
    coeff = {2: P.a, 3: P.b, 4: P.c}
    for k in (2, 3, 4):
        expected = pairs[k] * P.d * coeff[k] / n
        assert abs((kinds == k).sum() - expected) < 5 * math.sqrt(expected)


def test_sbm_reproducible_and_simple():
    P = derive_params(0.25, 8, 3)
    g1 = sample_sbm(P, 3000, seed=42)
    g2 = sample_sbm(P, 3000, seed=42)
    np.testing.assert_array_equal(g1.edges, g2.edges)
    np.testing.assert_array_equal(g1.labels, g2.labels)
    assert np.all(g1.edges[:, 0] < g1.edges[:, 1])
    assert len(np.unique(g1.edges, axis=0)) == g1.n_edges
    g3 = sample_sbm(P, 3000, seed=43)
    assert not np.array_equal(g1.edges, g3.edges)


def test_sbm_rejects_probability_above_one():
    with pytest.raises(ValueError):
        sample_sbm(derive_params(0.25, 50, 2), 40, seed=0)


# -- sample_gw --------------------------------------------------------------

def test_gw_depth_zero_is_root_only():
    t = sample_gw(derive_params(0.3, 3, 1), 0, seed=1)
    assert t.n_vertices == 1 and t.labels[0] in (1, 2)


def test_gw_generation_means():
    P = derive_params(0.3, 2, 1)
    sizes = np.array([sample_gw(P, 5, seed=s).generation_sizes() for s in range(3000)])
    for k in range(6):
        m, se = sizes[:, k].mean(), sizes[:, k].std(ddof=1) / math.sqrt(len(sizes))
        assert abs(m - 2 ** k) < 5 * max(se, 1e-12)


def test_gw_child_labels_follow_transition_rows():
    P = derive_params(0.25, 100, 1)
    R = transition_matrix(P)
    counts = np.zeros((2, 2))
    s = 0
    while counts.sum() < 100_000:
        t = sample_gw(P, 1, seed=s)
        s += 1
        kids = t.level(1)
        counts[t.labels[0] - 1, 0] += (t.labels[kids] == 1).sum()
        counts[t.labels[0] - 1, 1] += (t.labels[kids] == 2).sum()
    for i in range(2):
        tot = counts[i].sum()
        frac = counts[i, 0] / tot
        assert abs(frac - R[i, 0]) < 5 * math.sqrt(R[i, 0] * R[i, 1] / tot)


def test_gw_structure_and_budget():
    P = derive_params(0.3, 3, 1)
    t = sample_gw(P, 4, seed=9)
    assert t.parent[0] == -1
    assert np.all(t.parent[1:] < np.arange(1, t.n_vertices))
    assert np.all(t.depth[1:] == t.depth[t.parent[1:]] + 1)
    assert t.depth.max() <= 4
    with pytest.raises(BudgetExceeded):
        sample_gw(derive_params(0.3, 50, 1), 4, seed=0, max_vertices=1000)


def test_tree_validation():
    with pytest.raises(ValueError):
        LabeledTree(np.array([-1, 2, 0]), np.array([0, 2, 1]), np.array([1, 1, 1]), 2)
    with pytest.raises(ValueError):
        LabeledTree(np.array([-1, 0]), np.array([0, 1]), np.array([1, 2]), 0)


# -- sample_reveal ----------------------------------------------------------

def test_reveal_extremes_and_rate():
    elig = np.arange(100_000)
    assert len(sample_reveal(elig, 0.0, seed=1)) == 0
    np.testing.assert_array_equal(sample_reveal(elig, 1.0, seed=1).members, elig)
    k = len(sample_reveal(elig, 0.3, seed=1))
    assert abs(k / 1e5 - 0.3) < 5 * math.sqrt(0.21 / 1e5)
    with pytest.raises(ValueError):
        sample_reveal(elig, 1.5)


def test_reveal_subset_and_membership():
    elig = np.array([5, 9, 12, 40])
    rev = sample_reveal(elig, 0.5, seed=4)
    assert set(rev.members) <= set(elig)
    for v in elig:
        assert (v in rev) == bool(rev.mask(41)[v])
    assert set(rev.restrict([5, 9]).members) == set(rev.members) & {5, 9}


# -- extract_ball -----------------------------------------------------------

def test_ball_radius_zero():
    b = extract_ball(triangle(), 1, 0)
    assert b.is_tree and list(b.vertices) == [1] and list(b.boundary) == [1]


def test_ball_triangle_is_cyclic():
    for v in range(3):
        b = extract_ball(triangle(), v, 1)
        assert not b.is_tree
        assert sorted(b.vertices) == [0, 1, 2]


def test_ball_matches_networkx_oracle():
    P = derive_params(0.3, 3, 1)
    g = sample_sbm(P, 2000, seed=2)
    G = nx.Graph()
    G.add_nodes_from(range(g.n))
    G.add_edges_from(map(tuple, g.edges))
    rng = np.random.default_rng(0)
    for c in rng.integers(0, g.n, size=300):
        for r in (1, 2, 3):
            b = extract_ball(g, c, r)
            dist = nx.single_source_shortest_path_length(G, int(c), cutoff=r)
            assert set(b.vertices.tolist()) == set(dist)
            for v, k in zip(b.vertices, b.depth):
                assert dist[int(v)] == k
            sub = G.subgraph(dist)
            assert b.is_tree == nx.is_tree(sub)
            assert len(b.edges) == sub.number_of_edges()
            assert set(b.boundary.tolist()) == {v for v, k in dist.items() if k == r}


def test_ball_mostly_trees_in_sparse_graph():
    g = sample_sbm(derive_params(0.3, 3, 1), 10_000, seed=8)
    centers = np.random.default_rng(1).integers(0, g.n, size=500)
    frac = np.mean([extract_ball(g, c, 2).is_tree for c in centers])
    assert frac > 0.8


def test_ball_budget_and_bad_center():
    g = sample_sbm(derive_params(0.3, 10, 1), 2000, seed=1)
    with pytest.raises(BudgetExceeded):
        extract_ball(g, 0, 3, max_vertices=20)
    with pytest.raises(ValueError):
        extract_ball(g, 5000, 1)


def test_revealed_set_is_immutable():
    rev = RevealedSet(0.5, np.array([3, 1, 3]))
    np.testing.assert_array_equal(rev.members, [1, 3])
    with pytest.raises(ValueError):
        rev.members[0] = 7
