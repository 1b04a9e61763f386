import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from itpack.graph import MultipartiteGraph, gen_complete, gen_edge_free, gen_random, stats
from itpack.oracle import OK, verify_packing
from itpack.reduce import (
    DIRECT, HALVE, TRIVIAL, PartSplit, SchedulePolicy, SplitError, audit_halving, audit_split, cbrt, halve_parts,
    halving_depth, halving_sequence, icbrt_floor_sq, plan_reduction, reduce_and_pack, split_parts,
)
from itpack.schedule import THEORY


def test_integer_roots():
    assert [icbrt_floor_sq(n) for n in (1, 7, 8, 27, 1000, 4096)] == [1, 3, 4, 9, 100, 256]
    assert cbrt(4096) == 16.0 and cbrt(1000) == 10.0 and cbrt(64) == 4.0
    for n in range(1, 3000):
        m = icbrt_floor_sq(n)
        assert m**3 <= n * n < (m + 1) ** 3


def test_split_edge_free():
    # n = 8: m = 4 blocks, D1 needs every block to hold >= (1 - 0.9/4) * 2 = 1.55 vertices
    g = gen_edge_free(1, 8)
    sp = split_parts(g, 0.9, seed=1, retry_budget=400, checks=("D1", "D2", "D3"))
    assert sp.m == 4 and sp.attempts > 1
    assert sp.audit["D2"]["value"] == 0 and sp.audit["D3"]["value"] == 0
    assert sp.audit["D1"]["passed"]
    assert sp.block_sizes(g).tolist() == [[2, 2, 2, 2]]
    g = gen_edge_free(3, 64)
    sp = split_parts(g, 0.5, seed=1, checks=("D2", "D3"))
    assert sp.m == 16 and np.all(sp.block_sizes(g).sum(axis=1) == 64)


def test_split_large_low_local_degree():
    g = gen_random(3, 4096, 6, 2, seed=3)
    assert stats(g).local_degree <= 2
    sp = split_parts(g, 0.1, seed=2, retry_budget=100, checks=("D3",))
    assert sp.m == 256 and cbrt(4096) == 16
    assert sp.audit["D3"]["value"] <= 12


def test_split_errors():
    with pytest.raises(ValueError, match="equal part sizes"):
        split_parts(MultipartiteGraph([2, 3], []), 0.1, 0)
    with pytest.raises(SplitError) as exc:
        split_parts(gen_complete(2, 8), 0.1, 0, retry_budget=3, checks=("D2",))
    assert not exc.value.audit["D2"]["passed"]


def test_halve_parts_of_size_two():
    g = gen_random(4, 2, 3, 1, seed=1)
    sp = halve_parts(g, seed=0, checks=())
    assert np.all(sp.block_sizes(g) == 1)


def test_halve_edge_free_single_draw():
    sp = halve_parts(gen_edge_free(3, 10), seed=5)
    assert sp.attempts == 1 and sp.audit["E2"]["value"] == 0


def test_halve_complete_bipartite_audit():
    npr = 6
    g = gen_complete(2, 2 * npr)
    sp = halve_parts(g, seed=3, checks=())
    # every vertex sees exactly npr vertices of each block of the other part
    labels = sp.labels
    for v in range(g.n_vertices):
        nb = g.neighbors(v)
        assert np.bincount(labels[nb], minlength=2).tolist() == [npr, npr]
    assert sp.audit["E2"]["value"] == npr
    assert sp.audit["E2"]["passed"] and sp.audit["E2"]["bound"] == pytest.approx(npr + (2 * npr) ** (2 / 3))


def test_halve_odd_error():
    with pytest.raises(ValueError, match="even"):
        halve_parts(gen_edge_free(2, 3), seed=0)


@given(st.integers(1, 4), st.integers(1, 12), st.integers(0, 2**20))
@settings(max_examples=40)
def test_halving_balanced_partition(k, half, seed):
    g = gen_random(k, 2 * half, 3, 1, seed=seed)
    sp = halve_parts(g, seed, checks=())
    sizes = sp.block_sizes(g)
    assert np.all(sizes[:, 0] == sizes[:, 1])
    labs = sp.labels
    assert np.all(labs[0::2] + labs[1::2] == 1)
    blocks = sp.blocks(g)
    for i in range(k):
        got = np.sort(np.concatenate([blocks[0][i], blocks[1][i]]))
        assert got.tolist() == g.part_vertices(i).tolist()


@given(st.integers(1, 4), st.integers(1, 40), st.integers(0, 2**20))
@settings(max_examples=40)
def test_split_partition(k, n, seed):
    g = gen_edge_free(k, n)
    sp = split_parts(g, 0.9, seed, checks=(), retry_budget=200)
    sizes = sp.block_sizes(g)
    assert np.all(sizes.sum(axis=1) == n)
    blocks = sp.blocks(g)
    for i in range(k):
        got = np.sort(np.concatenate([blocks[l][i] for l in range(sp.m)]))
        assert got.tolist() == g.part_vertices(i).tolist()
        assert [blocks[l][i].size for l in range(sp.m)] == sizes[i].tolist()


def test_two_halvings_of_size_four():
    g = gen_random(3, 4, 2, 1, seed=9)
    sp = halve_parts(g, 1, checks=())
    for blk in sp.blocks(g):
        sub, _ = g.induced(blk)
        sp2 = halve_parts(sub, 2, checks=())
        assert np.all(sp2.block_sizes(sub) == 1)


def test_plan_depth_and_first_term():
    plan = plan_reduction(0.1, 0.1, 1000)
    assert plan.case == HALVE and plan.j == 6
    assert 2**5 < 0.1 ** (4 / 3) * 1000 <= 2**6
    assert halving_sequence(100, 1)[1] == pytest.approx(50 + 100 ** (2 / 3), abs=1e-6)
    assert halving_sequence(100, 1)[1] == pytest.approx(71.5443469, abs=1e-6)


def test_plan_cases():
    assert plan_reduction(0.1, 0.1, 9).case == TRIVIAL
    assert plan_reduction(0.1, 0.1, 10).case == DIRECT  # 10 <= 0.1^(-4/3) = 21.54
    assert plan_reduction(0.1, 0.1, 21).case == DIRECT
    assert plan_reduction(0.1, 0.1, 22).case == HALVE
    with pytest.raises(ValueError):
        plan_reduction(0.1, 1.5, 10)


@given(st.floats(0.01, 0.9), st.floats(0.001, 0.9), st.integers(1, 10**9))
def test_plan_invariants(eps, gamma, n):
    plan = plan_reduction(eps, gamma, n)
    if plan.case != HALVE:
        return
    x = gamma ** (4 / 3) * n
    assert 2 ** (plan.j - 1) < x * (1 + 1e-12) and x <= 2**plan.j * (1 + 1e-12)
    for seq in (plan.delta_seq, plan.d_seq):
        assert len(seq) == plan.j + 1
        for a, b in zip(seq, seq[1:]):
            assert b == a / 2 + a ** (2 / 3)
    assert plan.delta_seq[0] == pytest.approx((1 - eps) * n)
    assert plan.d_seq[0] == pytest.approx(gamma * n)
    assert plan.checks["telescoped"]["passed"]
    assert set(plan.checks) == {"F1", "F2", "F3", "telescoped"}


def test_halving_depth_edges():
    assert halving_depth(0.5, 1) == 1
    assert halving_depth(1 / 8 ** (3 / 4), 64) == 3  # gamma^(4/3) n = 8 exactly


def test_plan_json():
    d = json.loads(plan_reduction(0.1, 0.1, 1000).to_json())
    assert d["j"] == 6 and len(d["delta_seq"]) == 7


def test_reduce_trivial_edge_free():
    g = gen_edge_free(4, 7)
    pk = reduce_and_pack(g, 0.1, 0.1)
    assert pk.count == 7 and pk.status == OK
    assert pk.diagnostics[0]["plan"]["case"] == TRIVIAL
    assert verify_packing(g, pk) == []


def test_reduce_desk_instance_leaf_local_degree():
    g = gen_random(6, 16, 4, 1, seed=3)
    pk = reduce_and_pack(g, 0.5, 0.25, SchedulePolicy(p=0.3, t_star=6), seed=3, split_checks=("D3",),
                         halve_checks=())
    assert verify_packing(g, pk) == []
    assert pk.diagnostics[0]["plan"]["case"] == HALVE
    assert not [d for d in pk.diagnostics[1:] if d.get("stage") in ("split", "halve")]


def test_reduce_double_halving():
    g = gen_edge_free(3, 4)
    plan = plan_reduction(0.1, 0.7, 4)
    assert plan.case == HALVE and plan.j == 2 and plan.n_prime == 1
    pk = reduce_and_pack(g, 0.1, 0.7, seed=1)
    assert pk.count == 4 and pk.diagnostics[0]["blocks"] == 4


def test_reduce_prunes_to_min_part_and_divisibility():
    g = gen_random(3, 10, 3, 1, seed=2)
    g = MultipartiteGraph([10, 10, 10], g.edges)
    pk = reduce_and_pack(g, 0.3, 0.5, SchedulePolicy(p=0.3), seed=0, split_checks=(), halve_checks=())
    plan = pk.diagnostics[0]["plan"]
    assert plan["case"] == HALVE
    assert all(len(d) == 10 % 2 ** plan["j"] for d in plan["deletions"])
    assert verify_packing(g, pk) == []


def test_reduce_unequal_parts():
    g = MultipartiteGraph([5, 7, 6], [])
    pk = reduce_and_pack(g, 0.1, 0.1)
    assert pk.count == 5


@pytest.mark.parametrize("seed", range(6))
def test_reduce_deterministic_across_workers(seed):
    g = gen_random(4, 24, 4, 2, seed=seed)
    pol = SchedulePolicy(p=0.3, t_star=5)
    a = reduce_and_pack(g, 0.5, 0.3, pol, seed=seed, workers=1, split_checks=(), halve_checks=())
    b = reduce_and_pack(g, 0.5, 0.3, pol, seed=seed, workers=3, split_checks=(), halve_checks=())
    assert a.transversals == b.transversals


def test_schedule_policy():
    pol = SchedulePolicy(p=0.01, t_star=4)
    s = pol.schedule(0.2, 10)
    assert s.p == pytest.approx(0.1) and s.eps == pytest.approx(0.1) and s.r_star == 10
    assert SchedulePolicy(mode=THEORY).schedule(0.2, 1000).mode == THEORY
    assert SchedulePolicy(p=0.99).schedule(0.2, 10).p <= 0.999


def test_part_split_json():
    sp = PartSplit(2, np.array([0, 1, 1, 0]))
    assert json.loads(sp.to_json()) == {"m": 2, "labels": [0, 1, 1, 0]}


def test_audits_report_values():
    g = gen_complete(2, 4)
    sp = PartSplit(2, np.array([0, 1, 0, 1, 0, 1, 0, 1]))
    a = audit_halving(g, sp)
    assert a["structure"]["passed"] and a["E3"]["value"] == 2
    s = audit_split(g, sp, 0.1)
    assert s["D3"]["value"] == 2 and s["D2"]["value"] == 2
