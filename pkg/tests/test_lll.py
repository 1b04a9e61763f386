import math

import pytest
from hypothesis import given, strategies as st

from conftest import brute_transversals
from itpack.graph import MultipartiteGraph, gen_cliques_extremal, gen_edge_free, gen_random, gen_yuster, stats
from itpack.lll import (
    Exhausted, GuardExceeded, LllConfig, find_transversal, find_transversal_backtracking,
    is_independent_transversal,
)
from test_graph import graphs


def test_edge_free_zero_resamples():
    t = find_transversal(gen_edge_free(5, 4), cfg=LllConfig(seed=3))
    assert t.resamples == 0 and t.scope == frozenset(range(5))


def test_extremal_exhausts():
    with pytest.raises(Exhausted):
        find_transversal(gen_cliques_extremal(2), cfg=LllConfig(seed=1))


def test_extremal_exhausts_even_with_fallback():
    with pytest.raises(Exhausted):
        find_transversal(gen_cliques_extremal(2), cfg=LllConfig(seed=1, fallback="backtracking"))


def test_sparse_random_succeeds():
    g = gen_random(6, 40, 2, 1, seed=5)
    assert 40 >= 2 * math.e * stats(g).max_degree
    t = find_transversal(g, cfg=LllConfig(seed=5))
    assert is_independent_transversal(g, t.choice, range(6))


def test_backtracking_examples():
    assert find_transversal_backtracking(gen_cliques_extremal(2)) is None
    t = find_transversal_backtracking(gen_edge_free(3, 4))
    assert t.vertices() == [0, 4, 8]
    g = gen_yuster(2, 2, seed=0)
    # the complement of a perfect matching between two 2-sets has exactly 2 cross pairs
    assert len(brute_transversals(g.sizes, g.edges.tolist())) == 2
    t = find_transversal_backtracking(g)
    assert is_independent_transversal(g, t.choice, range(2))


def test_candidate_validation():
    g = gen_edge_free(2, 2)
    with pytest.raises(ValueError, match="empty"):
        find_transversal(g, [[0], []])
    with pytest.raises(ValueError, match="other parts"):
        find_transversal(g, [[2], [3]])


def test_guard_exceeded():
    g = gen_cliques_extremal(4)
    with pytest.raises(GuardExceeded):
        find_transversal_backtracking(g, node_limit=3)


def test_candidates_respected_and_deterministic():
    g = gen_random(5, 12, 3, 1, seed=2)
    cand = {i: g.part_vertices(i)[::2] for i in range(5)}
    a = find_transversal(g, cand, LllConfig(seed=9))
    b = find_transversal(g, cand, LllConfig(seed=9))
    assert a == b
    for i, v in a.choice.items():
        assert v in cand[i]


def test_partial_scope():
    g = gen_cliques_extremal(2)
    t = find_transversal_backtracking(g, {0: [0, 1], 1: [2, 3]})
    assert t is not None and t.scope == frozenset({0, 1})


def test_independence_checker_rejects():
    g = MultipartiteGraph([1, 1], [(0, 1)])
    assert not is_independent_transversal(g, {0: 0, 1: 1})
    assert not is_independent_transversal(g, {0: 1})
    assert is_independent_transversal(g, {0: 0}, [0])
    assert not is_independent_transversal(g, {0: 0}, [0, 1])


@given(graphs(max_k=5, max_n=4))
def test_backtracking_matches_enumeration(g):
    exists = bool(brute_transversals(g.sizes, g.edges.tolist()))
    t = find_transversal_backtracking(g)
    assert (t is not None) == exists
    if t is not None:
        assert is_independent_transversal(g, t.choice, range(g.k))


@given(graphs(max_k=4, max_n=4), st.integers(0, 2**31))
def test_mt_result_is_valid_or_exhausted(g, seed):
    try:
        t = find_transversal(g, cfg=LllConfig(seed=seed, max_resamples=200))
    except Exhausted:
        return
    assert is_independent_transversal(g, t.choice, range(g.k))


def test_mt_success_in_lll_regime_over_seeds():
    fails = 0
    for seed in range(100):
        g = gen_random(8, 24, 2, 1, seed=seed)
        assert 24 >= 2 * math.e * stats(g).max_degree
        try:
            find_transversal(g, cfg=LllConfig(seed=seed))
        except Exhausted:
            fails += 1
    assert fails == 0


def test_budget_default():
    assert LllConfig().budget(7) == 350
    with pytest.raises(ValueError):
        LllConfig(max_resamples=0).budget(3)
