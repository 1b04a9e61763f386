"""Local-degree reduction: random part splitting, pair-and-halve, and the pipeline.

A graph with large local degree is cut into many vertex-disjoint blocks, one
vertex subset per part per block, so that inside each block every vertex has
few neighbours per part.  Blocks are packed independently and the packings
are merged; transversals from different blocks never share a vertex.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable

import numpy as np

from . import rng as _rng
from .graph import MultipartiteGraph, stats
from .lll import Transversal, find_transversal_backtracking
from .nibble import RetryPolicy, pack
from .oracle import BUDGET, INFEASIBLE, OK, PARTIAL, Packing, verify_packing
from .schedule import PRACTICAL, THEORY, MonitorConfig, NibbleSchedule, make_practical_schedule, make_schedule

log = logging.getLogger(__name__)

SPLIT_PROPERTIES = ("D1", "D2", "D3")
HALVE_PROPERTIES = ("E2", "E3")


class SplitError(RuntimeError):
    """No draw satisfied the enforced split properties within the budget."""

    def __init__(self, message: str, audit: dict):
        super().__init__(message)
        self.audit = audit


@dataclass
class PartSplit:
    """A block label in ``[m]`` for every vertex; blocks are ``(part, label)`` classes."""

    m: int
    labels: np.ndarray
    attempts: int = 1
    audit: dict = field(default_factory=dict)

    def blocks(self, g: MultipartiteGraph) -> list[list[np.ndarray]]:
        """``blocks[l][i]``: vertices of part ``i`` with label ``l``, ascending."""
        out = [[None] * g.k for _ in range(self.m)]
        for i in range(g.k):
            lo, hi = g.offsets[i], g.offsets[i + 1]
            lab = self.labels[lo:hi]
            order = np.argsort(lab, kind="stable")
            bounds = np.searchsorted(lab[order], np.arange(self.m + 1))
            for l in range(self.m):
                out[l][i] = lo + order[bounds[l]:bounds[l + 1]]
        return out

    def block_sizes(self, g: MultipartiteGraph) -> np.ndarray:
        """``(k, m)`` counts."""
        return np.bincount(g.part_of * self.m + self.labels, minlength=g.k * self.m).reshape(g.k, self.m)

    def to_dict(self) -> dict:
        return {"m": self.m, "labels": self.labels.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def icbrt_floor_sq(n: int) -> int:
    """``floor(n^(2/3))`` in exact integer arithmetic."""
    m = int(round(n ** (2 / 3)))
    while m > 0 and m**3 > n * n:
        m -= 1
    while (m + 1) ** 3 <= n * n:
        m += 1
    return m


def cbrt(n: float) -> float:
    """Cube root that is exact on perfect cubes."""
    c = n ** (1 / 3)
    r = round(c)
    return float(r) if r**3 == n else c


def _max_count(keys: np.ndarray) -> int:
    if keys.size == 0:
        return 0
    return int(np.unique(keys, return_counts=True)[1].max())


def _check(value: float, bound: float, passed: bool) -> dict:
    return {"value": float(value), "bound": float(bound), "passed": bool(passed)}


def audit_split(g: MultipartiteGraph, split: PartSplit, eps: float) -> dict:
    """Measured D1-D3 plus the structural check (every block nonempty, labels in range)."""
    n = min(g.sizes)
    c = cbrt(n)
    m, lab = split.m, split.labels
    sizes = split.block_sizes(g)
    src, dst = g.edge_src, g.indices
    d2 = _max_count(src * m + lab[dst])
    d3 = _max_count((src * g.k + g.part_of[dst]) * m + lab[dst])
    smin = int(sizes.min()) if sizes.size else 0
    return {
        "structure": _check(smin, 1, smin >= 1 and lab.min(initial=0) >= 0 and lab.max(initial=0) < m),
        "D1": _check(smin, (1 - eps / 4) * c, smin >= (1 - eps / 4) * c),
        "D2": _check(d2, (1 - 3 * eps / 4) * c, d2 <= (1 - 3 * eps / 4) * c),
        "D3": _check(d3, 12, d3 < 12),
    }


def audit_halving(g: MultipartiteGraph, split: PartSplit) -> dict:
    """Measured E1-E3 for a two-block split."""
    st = stats(g)
    D, d = st.max_degree, st.local_degree
    sizes = split.block_sizes(g)
    src, dst, lab = g.edge_src, g.indices, split.labels
    e2 = _max_count(src * 2 + lab[dst])
    e3 = _max_count((src * g.k + g.part_of[dst]) * 2 + lab[dst])
    balanced = bool(np.all(sizes[:, 0] == sizes[:, 1]))
    return {
        "structure": _check(int(balanced), 1, balanced),
        "E2": _check(e2, D / 2 + D ** (2 / 3), e2 <= D / 2 + D ** (2 / 3)),
        "E3": _check(e3, d / 2 + d ** (2 / 3), e3 <= d / 2 + d ** (2 / 3)),
    }


def _failed(audit: dict, enforce: Iterable[str]) -> list[str]:
    return [name for name in ("structure", *enforce) if not audit[name]["passed"]]


def split_parts(
    g: MultipartiteGraph,
    eps: float,
    seed: int,
    retry_budget: int = 100,
    checks: Iterable[str] = SPLIT_PROPERTIES,
    key: tuple = (),
) -> PartSplit:
    """Uniform labels in ``[m]``, ``m = floor(n^(2/3))``, redrawn until the enforced properties hold.

    ``checks`` selects which of D1-D3 must hold; the others are only audited.
    Every block must be nonempty regardless.
    """
    if len(set(g.sizes)) != 1:
        raise ValueError(f"split_parts needs equal part sizes, got {sorted(set(g.sizes))}")
    checks = tuple(checks)
    unknown = set(checks) - set(SPLIT_PROPERTIES)
    if unknown:
        raise ValueError(f"unknown split properties {sorted(unknown)}")
    n = g.sizes[0]
    st = stats(g)
    if st.local_degree > cbrt(n):
        log.warning("local degree %d exceeds n^(1/3) = %.3f", st.local_degree, cbrt(n))
    m = max(1, icbrt_floor_sq(n))
    audit: dict = {}
    for attempt in range(retry_budget):
        rg = _rng.substream(seed, _rng.SPLIT, *key, attempt)
        split = PartSplit(m, rg.integers(m, size=g.n_vertices), attempts=attempt + 1)
        audit = audit_split(g, split, eps)
        if not _failed(audit, checks):
            split.audit = audit
            return split
    raise SplitError(f"split budget of {retry_budget} draws exhausted; failing: {_failed(audit, checks)}", audit)


def halve_parts(
    g: MultipartiteGraph,
    seed: int,
    retry_budget: int = 100,
    checks: Iterable[str] = HALVE_PROPERTIES,
    key: tuple = (),
) -> PartSplit:
    """Pair local indices ``(2j, 2j+1)`` in each part and send one of each pair to each block by a fair coin."""
    odd = [i for i, s in enumerate(g.sizes) if s % 2]
    if odd:
        raise ValueError(f"halve_parts needs even part sizes; part {odd[0]} has size {g.sizes[odd[0]]}")
    checks = tuple(checks)
    unknown = set(checks) - set(HALVE_PROPERTIES)
    if unknown:
        raise ValueError(f"unknown halving properties {sorted(unknown)}")
    st = stats(g)
    if st.local_degree > 1 and st.local_degree <= math.log(max(st.max_degree, 2)) ** 4:
        log.info("local degree %d is below ln^4(max degree); halving bounds are not guaranteed", st.local_degree)
    # global ids are part-contiguous and every part has even size, so pairs are (2j, 2j+1) globally too
    audit: dict = {}
    for attempt in range(retry_budget):
        rg = _rng.substream(seed, _rng.HALVE, *key, attempt)
        coin = rg.integers(2, size=g.n_vertices // 2)
        labels = np.empty(g.n_vertices, dtype=np.int64)
        labels[0::2] = coin
        labels[1::2] = 1 - coin
        split = PartSplit(2, labels, attempts=attempt + 1)
        audit = audit_halving(g, split)
        if not _failed(audit, checks):
            split.audit = audit
            return split
    raise SplitError(f"halving budget of {retry_budget} draws exhausted; failing: {_failed(audit, checks)}", audit)


# -- planning -------------------------------------------------------------------

TRIVIAL = "edge-free-trivial"
DIRECT = "direct-split"
HALVE = "halve-then-split"


def halving_sequence(x0: float, j: int) -> list[float]:
    """``x_0, ..., x_j`` with ``x_{t+1} = x_t / 2 + x_t^(2/3)``."""
    seq = [float(x0)]
    for _ in range(j):
        x = seq[-1]
        seq.append(x / 2 + x ** (2 / 3))
    return seq


def halving_depth(gamma: float, n: int) -> int:
    """The ``j >= 1`` with ``2^(j-1) < gamma^(4/3) n <= 2^j``."""
    x = gamma ** (4 / 3) * n * (1 - 1e-12)  # exact powers of two land on the lower j
    j = max(1, math.ceil(math.log2(x))) if x > 0 else 1
    while j > 1 and 2 ** (j - 1) >= x:
        j -= 1
    while 2**j < x:
        j += 1
    return j


@dataclass
class ReductionPlan:
    eps: float
    gamma: float
    n: int
    case: str
    j: int
    delta_seq: list[float]
    d_seq: list[float]
    n_prime: int
    checks: dict
    deletions: list[list[int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def plan_reduction(eps: float, gamma: float, n: int) -> ReductionPlan:
    """Classify ``(eps, gamma, n)``, pick the halving depth and evaluate F1-F3.

    Nothing to do when ``n < 1/gamma``; a single split when
    ``n <= gamma^(-4/3)``; otherwise ``j`` halving levels first.  Property flags
    may fail at desk scale, where ``gamma`` is not small enough.
    """
    if not 0 < eps < 1 or not 0 < gamma < 1:
        raise ValueError("eps and gamma must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    D0, d0 = (1 - eps) * n, gamma * n
    if n < 1 / gamma:
        return ReductionPlan(eps, gamma, n, TRIVIAL, 0, [D0], [d0], n, {})
    if n <= gamma ** (-4 / 3):
        return ReductionPlan(eps, gamma, n, DIRECT, 0, [D0], [d0], n, {})
    j = halving_depth(gamma, n)
    Ds, ds = halving_sequence(D0, j), halving_sequence(d0, j)
    leaf = n / 2**j - 1
    g43 = gamma ** (4 / 3)
    checks = {
        "F1": {"lower": 1 / (4 * g43), "value": Ds[j], "upper": (1 - eps / 2) * leaf,
               "passed": 1 / (4 * g43) < Ds[j] <= (1 - eps / 2) * leaf},
        "F2": {"value": ds[j], "bound": max(leaf, 0) ** (1 / 3), "passed": ds[j] <= max(leaf, 0) ** (1 / 3)},
        "F3": {"margins": [ds[t] - math.log(Ds[t]) ** 4 for t in range(j)],
               "passed": all(ds[t] > math.log(Ds[t]) ** 4 for t in range(j))},
        "telescoped": {"value": Ds[j] ** (1 / 3), "bound": Ds[0] ** (1 / 3) / 2 ** (j / 3) + 4,
                       "passed": Ds[j] ** (1 / 3) <= Ds[0] ** (1 / 3) / 2 ** (j / 3) + 4},
    }
    return ReductionPlan(eps, gamma, n, HALVE, j, Ds, ds, n // 2**j, checks)


# -- pipeline -------------------------------------------------------------------


@dataclass(frozen=True)
class SchedulePolicy:
    """How each block is packed: a schedule per block size plus retry behaviour.

    Practical mode uses ``p`` (raised to ``1/n`` on blocks too small for it),
    ``r_star`` rounds (default: the block's part size, enough to use every
    vertex) and ``t_star`` iterations.  Theory mode derives everything from
    the block size with ``eps`` scaled by ``eps_scale``.
    """

    mode: str = PRACTICAL
    p: float = 0.25
    r_star: int | None = None
    t_star: int = 10
    eps_scale: float = 0.5
    retry_budget: int = 8
    enforce: tuple = ()

    def schedule(self, eps: float, n: int) -> NibbleSchedule:
        e = eps * self.eps_scale
        if self.mode == THEORY and n >= 3:
            return make_schedule(e, n)
        p = min(max(self.p, 1.0 / n), 0.999)
        return make_practical_schedule(e, n, p, self.r_star or n, self.t_star)

    def monitors(self, sched: NibbleSchedule) -> MonitorConfig:
        return MonitorConfig.for_schedule(sched, retry_budget=self.retry_budget, enforce=self.enforce)

    def retry(self, sched: NibbleSchedule) -> RetryPolicy:
        return RetryPolicy.for_mode(sched.mode, retry_budget=self.retry_budget)


def _prune(g: MultipartiteGraph, target: int, seed: int, tag: int) -> tuple[MultipartiteGraph, np.ndarray, list[list[int]]]:
    """Keep ``target`` uniformly chosen vertices per part; returns subgraph, id map and removed ids."""
    keep, removed = [], []
    for i in range(g.k):
        verts = g.part_vertices(i)
        rg = _rng.substream(seed, _rng.PRUNE, tag, i)
        chosen = np.sort(rg.choice(verts, size=target, replace=False)) if verts.size > target else verts
        keep.append(chosen)
        removed.append(sorted(set(verts.tolist()) - set(chosen.tolist())))
    sub, mapping = g.induced(keep)
    return sub, mapping, removed


def pack_with_policy(g: MultipartiteGraph, eps: float, policy: SchedulePolicy, seed: int = 0,
                     workers: int = 1) -> Packing:
    """Nibble-pack ``g`` with a schedule sized to its smallest part."""
    n = min(g.sizes) if g.k else 0
    if n == 0:
        return Packing([], status=INFEASIBLE)
    if n == 1:  # a single candidate transversal; no schedule fits
        t = find_transversal_backtracking(g)
        return Packing([] if t is None else [t], status=OK if t is not None else INFEASIBLE)
    sched = policy.schedule(eps, n)
    return pack(g, sched, policy.monitors(sched), policy.retry(sched), seed=seed, workers=workers)


def _pack_block(args) -> Packing:
    sub, mapping, eps, policy, seed, workers = args
    pk = pack_with_policy(sub, eps, policy, seed, workers)
    pk.transversals = [Transversal({i: int(mapping[v]) for i, v in t.choice.items()}, t.resamples)
                       for t in pk.transversals]
    return pk


def reduce_and_pack(
    g: MultipartiteGraph,
    eps: float,
    gamma: float,
    policy: SchedulePolicy = SchedulePolicy(),
    seed: int = 0,
    workers: int = 1,
    split_checks: Iterable[str] = SPLIT_PROPERTIES,
    halve_checks: Iterable[str] = HALVE_PROPERTIES,
    retry_budget: int = 100,
) -> Packing:
    """Split into low-local-degree blocks, pack each block, return the union.

    Parts larger than the smallest one are pruned at random first.  Stage
    failures do not abort the run: the affected blocks contribute nothing and
    the result is flagged ``partial``.  The plan is recorded in the first
    diagnostics entry.
    """
    st = stats(g)
    n = st.min_part_size
    warnings = []
    if st.max_degree > (1 - eps) * n:
        warnings.append(f"max degree {st.max_degree} exceeds (1-eps)n = {(1 - eps) * n:.4g}")
    if st.local_degree > gamma * n:
        warnings.append(f"local degree {st.local_degree} exceeds gamma*n = {gamma * n:.4g}")
    for w in warnings:
        log.warning(w)
    plan = plan_reduction(eps, gamma, max(n, 1))
    out = Packing([])
    diags: list[dict] = []
    if g.k == 0 or n == 0:
        out.status = INFEASIBLE
        out.diagnostics = [{"plan": plan.to_dict(), "warnings": warnings}]
        return out

    base, base_map, removed = _prune(g, n, seed, 0)
    leaves: list[tuple[MultipartiteGraph, np.ndarray, tuple]] = []
    if plan.case == TRIVIAL:
        if g.n_edges == 0:
            out.transversals = [Transversal({i: int(base_map[base.offsets[i] + c]) for i in range(g.k)})
                                for c in range(n)]
            out.diagnostics = [{"plan": plan.to_dict(), "warnings": warnings}]
            return out
        diags.append({"stage": "plan", "note": "edges present below 1/gamma; packing the whole graph"})
        leaves.append((base, base_map, None))
    elif plan.case == DIRECT:
        leaves.append((base, base_map, (0,)))
    else:
        size = n - n % 2**plan.j
        cut, cut_map, cut_removed = _prune(base, size, seed, 1)
        for i in range(g.k):
            removed[i] = sorted(removed[i] + base_map[cut_removed[i]].tolist())
        plan = replace(plan, deletions=removed, n_prime=size // 2**plan.j)
        frontier = [(cut, base_map[cut_map], 1)]
        for _ in range(plan.j):
            nxt = []
            for sub, mp, node in frontier:
                try:
                    split = halve_parts(sub, seed, retry_budget, halve_checks, key=(node,))
                except SplitError as exc:
                    diags.append({"stage": "halve", "node": node, "error": str(exc), "audit": exc.audit})
                    continue
                for l, blk in enumerate(split.blocks(sub)):
                    child, cmap = sub.induced(blk)
                    nxt.append((child, mp[cmap], 2 * node + l))
            frontier = nxt
        leaves.extend((sub, mp, (node,)) for sub, mp, node in frontier)
    if plan.case != HALVE:
        plan = replace(plan, deletions=removed)

    jobs = []
    for leaf_idx, (sub, mp, key) in enumerate(leaves):
        if key is None:
            jobs.append((sub, mp, eps, policy, _rng.derive_seed(seed, _rng.LEAF, leaf_idx), 1))
            continue
        try:
            split = split_parts(sub, eps, seed, retry_budget, split_checks, key=key)
        except SplitError as exc:
            diags.append({"stage": "split", "leaf": leaf_idx, "error": str(exc), "audit": exc.audit})
            continue
        for l, blk in enumerate(split.blocks(sub)):
            child, cmap = sub.induced(blk)
            jobs.append((child, mp[cmap], eps, policy, _rng.derive_seed(seed, _rng.LEAF, leaf_idx, l), 1))

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_pack_block, jobs))
    else:
        results = [_pack_block(j) for j in jobs]

    for pk in results:
        out.transversals.extend(pk.transversals)
        out.trace.extend(pk.trace)
        if pk.status == BUDGET and out.status == OK:
            out.status = BUDGET
        diags.extend(pk.diagnostics)
    if any(d.get("stage") in ("halve", "split") for d in diags) and out.status == OK:
        out.status = PARTIAL
    if out.count == 0:
        out.status = INFEASIBLE if out.status == OK else out.status
    out.diagnostics = [{"plan": plan.to_dict(), "warnings": warnings, "blocks": len(jobs)}] + diags
    problems = verify_packing(g, out)
    assert not problems, [str(v) for v in problems]
    return out
