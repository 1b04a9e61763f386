import json
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import brute_stats, brute_transversals
from itpack.graph import (
    GraphFormatError, ListAssignment, MultipartiteGraph, build_list_coloring_graph, dumps_graph,
    gen_avg_degree_counterexample, gen_cliques_extremal, gen_complete, gen_edge_free, gen_random,
    gen_yuster, load_graph, load_list_assignment, partite_complement, stats,
)
from itpack.oracle import exists_transversal


@st.composite
def graphs(draw, max_k=5, max_n=5, p_max=1.0):
    k = draw(st.integers(1, max_k))
    sizes = draw(st.lists(st.integers(1, max_n), min_size=k, max_size=k))
    offs = np.concatenate([[0], np.cumsum(sizes)])
    part = np.repeat(np.arange(k), sizes)
    cross = [(u, v) for u in range(offs[-1]) for v in range(u + 1, offs[-1]) if part[u] != part[v]]
    keep = draw(st.lists(st.booleans(), min_size=len(cross), max_size=len(cross)))
    return MultipartiteGraph(sizes, [e for e, b in zip(cross, keep) if b])


def test_load_smallest_instance():
    g = load_graph('{"k": 2, "sizes": [1, 1], "edges": [[0, 1]]}')
    s = stats(g)
    assert (s.max_degree, s.local_degree) == (1, 1)


def test_load_rejects_intra_part_edge():
    with pytest.raises(GraphFormatError, match="intra-part edge") as exc:
        load_graph('{"k": 2, "sizes": [2, 2], "edges": [[0, 1]]}')
    assert exc.value.where == "edges[0]"


@pytest.mark.parametrize(
    "doc, message",
    [
        ('{"k": 2, "sizes": [1, 1], "edges": [[0, 5]]}', "out of range"),
        ('{"k": 2, "sizes": [1, 1], "edges": [[0, 1], [1, 0]]}', "duplicate edge"),
        ('{"k": 2, "sizes": [1, 1], "edges": [[0, 1]', "JSON"),
        ('{"k": 3, "sizes": [1, 1], "edges": []}', "sizes"),
    ],
)
def test_load_errors(doc, message):
    with pytest.raises(GraphFormatError, match=message):
        load_graph(doc)


def test_two_triangles_stats():
    # parts {0,1},{2,3},{4,5}; triangles 0-2-4 and 1-3-5
    edges = [[0, 2], [2, 4], [0, 4], [1, 3], [3, 5], [1, 5]]
    g = load_graph(json.dumps({"k": 3, "sizes": [2, 2, 2], "edges": edges}))
    s = stats(g)
    ref = brute_stats([2, 2, 2], edges)
    assert (s.max_degree, s.local_degree) == (ref["max_degree"], ref["local_degree"]) == (2, 1)


def test_edge_order_irrelevant():
    a = load_graph('{"k": 3, "sizes": [1, 1, 1], "edges": [[0, 1], [2, 1]]}')
    b = load_graph('{"k": 3, "sizes": [1, 1, 1], "edges": [[1, 2], [1, 0]]}')
    assert a == b and dumps_graph(a) == dumps_graph(b)


def test_round_trip_with_format_and_meta():
    g = gen_yuster(3, 4, seed=2)
    h = load_graph(dumps_graph(g))
    assert h == g and h.meta == g.meta


def test_stats_examples():
    s = stats(gen_cliques_extremal(2))
    assert (s.max_degree, s.local_degree, s.min_part_size) == (2, 1, 2)
    s = stats(gen_edge_free(4, 3))
    assert (s.max_degree, s.local_degree, s.partite_min_degree) == (0, 0, 0)
    g = gen_complete(3, 2)
    s = stats(g)
    ref = brute_stats(g.sizes, g.edges.tolist())
    assert (s.max_degree, s.local_degree, s.partite_min_degree) == (4, 2, 2)
    assert ref == {"max_degree": 4, "local_degree": 2, "partite_min_degree": 2}


@given(graphs())
def test_stats_match_brute_force(g):
    s = stats(g)
    ref = brute_stats(g.sizes, g.edges.tolist())
    assert s.max_degree == ref["max_degree"]
    assert s.local_degree == ref["local_degree"]
    assert s.partite_min_degree == ref["partite_min_degree"]
    assert s.local_degree <= s.max_degree


@given(graphs())
def test_adjacency_symmetric_and_cross_part(g):
    for v in range(g.n_vertices):
        nb = g.neighbors(v)
        assert np.all(np.diff(nb) > 0)
        assert np.all(g.part_of[nb] != g.part_of[v])
        for w in nb:
            assert v in g.neighbors(int(w))
    assert sum(g.sizes) == g.n_vertices


@given(graphs())
def test_partite_complement_involution(g):
    h = partite_complement(g)
    assert partite_complement(h) == g
    for u in range(g.n_vertices):
        for v in range(u + 1, g.n_vertices):
            if g.part_of[u] != g.part_of[v]:
                assert g.has_edge(u, v) != h.has_edge(u, v)
            else:
                assert not h.has_edge(u, v)


def test_partite_complement_extremes():
    assert partite_complement(gen_complete(3, 3)).n_edges == 0
    assert partite_complement(gen_edge_free(3, 3)) == gen_complete(3, 3)


@given(st.integers(2, 4), st.integers(2, 6), st.integers(0, 10**6))
def test_complement_local_degree_is_n_minus_partite_min_degree(k, n, seed):
    g = gen_random(k, n, max_degree_cap=(k - 1) * n, local_degree_cap=n, seed=seed,
                   target_edges=k * (k - 1) * n * n // 4)
    h = partite_complement(g)
    assert stats(h).local_degree == n - stats(g).partite_min_degree


def test_list_coloring_graph_triangle():
    la = ListAssignment(3, [(0, 1), (1, 2), (0, 2)], [[1, 2]] * 3)
    gam, index = build_list_coloring_graph(la)
    assert gam.sizes == (2, 2, 2)
    assert gam.n_edges == 6  # three base edges, two shared colours each
    assert stats(gam).local_degree == 1
    assert index[0] == (0, 1) and index[5] == (2, 2)


def test_list_coloring_graph_edge_free_and_empty_list():
    gam, _ = build_list_coloring_graph(ListAssignment(3, [], [[1], [1, 2], [3]]))
    assert gam.n_edges == 0
    with pytest.raises(GraphFormatError, match="empty list for vertex 1"):
        ListAssignment(2, [], [[1], []])


@st.composite
def list_assignments(draw, max_n=5, colors=4):
    n = draw(st.integers(1, max_n))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    keep = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    lists = [draw(st.lists(st.integers(0, colors - 1), min_size=1, max_size=colors, unique=True))
             for _ in range(n)]
    return ListAssignment(n, [e for e, b in zip(pairs, keep) if b], lists)


@given(list_assignments())
def test_list_coloring_graph_properties(la):
    gam, index = build_list_coloring_graph(la)
    assert stats(gam).local_degree <= 1
    assert gam.n_edges == sum(len(set(la.lists[u]) & set(la.lists[v])) for u, v in la.edges)
    # independent transversals <-> proper list colourings
    colourings = set()
    for col in product(*la.lists):
        if all(col[u] != col[v] for u, v in la.edges):
            colourings.add(col)
    transversals = {tuple(index[g][1] for g in t) for t in brute_transversals(gam.sizes, gam.edges.tolist())}
    assert transversals == colourings


def test_load_list_assignment():
    la = load_list_assignment('{"n": 2, "edges": [[0, 1]], "lists": [[1, 2], ["a"]]}')
    assert la.lists[1] == ["a"]
    with pytest.raises(GraphFormatError):
        load_list_assignment('{"n": 2, "edges": [[0, 0]], "lists": [[1], [1]]}')


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_cliques_extremal(n):
    g = gen_cliques_extremal(n)
    s = stats(g)
    assert g.k == n + 1 and set(g.sizes) == {n}
    assert (s.max_degree, s.local_degree) == (n, 1)
    assert exists_transversal(g) is None
    if n <= 3:
        assert brute_transversals(g.sizes, g.edges.tolist()) == []


def test_cliques_extremal_n1_is_single_edge():
    g = gen_cliques_extremal(1)
    assert g.sizes == (1, 1) and g.edges.tolist() == [[0, 1]]


@pytest.mark.parametrize("k, n", [(2, 3), (3, 2), (4, 5)])
def test_yuster_pairs_are_perfect_matchings(k, n):
    g = gen_yuster(k, n, seed=11)
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            for v in g.part_range(i):
                assert g.neighbors_in_part(v, j).size == 1
    s = stats(g)
    assert (s.max_degree, s.local_degree) == (k - 1, 1)
    assert g == gen_yuster(k, n, seed=11)
    if n >= 4:
        assert g != gen_yuster(k, n, seed=12)


def test_avg_degree_counterexample_audit():
    g = gen_avg_degree_counterexample(8, Fraction(1, 2))
    assert g.k == 4 and set(g.sizes) == {8}
    deg = g.degree
    assert int(np.sum(deg == 0)) == 16  # kn/2 isolated vertices
    # two copies of K_{2,2,2,2}: each non-isolated vertex sees the 6 other-part vertices of its copy
    assert set(deg[deg > 0].tolist()) == {6}
    assert g.n_edges == 2 * 24
    assert stats(g).local_degree == 2
    for i in range(4):
        assert np.all(deg[g.offsets[i] + 4: g.offsets[i + 1]] == 0)


@pytest.mark.parametrize("n, eps", [(8, "1/4"), (12, "1/3"), (16, "1/2")])
def test_avg_degree_local_degree_two(n, eps):
    assert stats(gen_avg_degree_counterexample(n, eps)).local_degree == 2


@pytest.mark.parametrize("n, eps", [(6, "1/2"), (8, "1/3"), (8, 1)])
def test_avg_degree_divisibility_errors(n, eps):
    with pytest.raises(ValueError):
        gen_avg_degree_counterexample(n, eps)


def test_random_examples():
    assert gen_random(4, 6, 0, 0, seed=1).n_edges == 0
    g = gen_random(4, 6, 4, 1, seed=7)
    s = stats(g)
    assert s.max_degree <= 4 and s.local_degree <= 1 and g.n_edges > 0
    assert g == gen_random(4, 6, 4, 1, seed=7)
    assert g.meta["prng"].startswith("numpy-PCG64")
    with pytest.raises(ValueError, match="infeasible caps"):
        gen_random(3, 3, 2, 0, seed=1)


@given(st.integers(2, 8), st.integers(1, 20), st.integers(0, 12), st.integers(1, 3), st.integers(0, 2**32))
def test_random_respects_caps(k, n, dcap, lcap, seed):
    g = gen_random(k, n, dcap, lcap, seed=seed)
    ref = brute_stats(g.sizes, g.edges.tolist())
    assert ref["max_degree"] <= dcap and ref["local_degree"] <= lcap


def test_induced_subgraph_maps_back():
    g = gen_complete(3, 3)
    sub, mp = g.induced([[0, 2], [4], [6, 7]])
    assert sub.sizes == (2, 1, 2)
    for u, v in sub.edges.tolist():
        assert g.has_edge(int(mp[u]), int(mp[v]))
    assert sub.n_edges == 2 * 1 + 2 * 2 + 1 * 2
