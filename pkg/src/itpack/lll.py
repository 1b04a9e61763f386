"""Single independent transversals: Moser-Tardos resampling and exact backtracking.

The resampling finder is the algorithmic form of the local-lemma bound
``|V_i| >= 2e * Delta``: bad events are edges with both endpoints chosen, and
resampling an event redraws exactly the two endpoint parts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .graph import MultipartiteGraph


class Exhausted(RuntimeError):
    """Resampling budget hit without finding an independent transversal."""

    def __init__(self, resamples: int, violated: int):
        self.resamples = resamples
        self.violated = violated
        super().__init__(f"resample budget exhausted after {resamples} resamples ({violated} violated edges left)")


class GuardExceeded(RuntimeError):
    """Exact search explored more nodes than its guard allows."""


@dataclass(frozen=True)
class Transversal:
    """One chosen vertex per covered part."""

    choice: Mapping[int, int]
    resamples: int = field(default=0, compare=False)

    @property
    def scope(self) -> frozenset[int]:
        return frozenset(self.choice)

    def vertices(self) -> list[int]:
        return [self.choice[i] for i in sorted(self.choice)]

    def as_row(self, k: int) -> list[int]:
        return [int(self.choice[i]) for i in range(k)]


@dataclass(frozen=True)
class LllConfig:
    max_resamples: int | None = None  # None: 50 * (number of parts in scope)
    seed: int = 0
    fallback: str = "none"  # "none" | "backtracking"
    node_limit: int = 100_000

    def budget(self, n_parts: int) -> int:
        b = self.max_resamples if self.max_resamples is not None else 50 * max(n_parts, 1)
        if b < 1:
            raise ValueError("max_resamples must be >= 1")
        return b


def _normalize(g: MultipartiteGraph, candidates) -> dict[int, np.ndarray]:
    if candidates is None:
        return {i: g.part_vertices(i) for i in range(g.k)}
    if not isinstance(candidates, Mapping):
        candidates = dict(enumerate(candidates))
    out = {}
    for i, c in candidates.items():
        arr = np.unique(np.asarray(c, dtype=np.int64))
        if arr.size == 0:
            raise ValueError(f"empty candidate set for part {i}")
        if np.any(g.part_of[arr] != i):
            raise ValueError(f"candidate set for part {i} contains vertices of other parts")
        out[int(i)] = arr
    return out


def is_independent_transversal(g: MultipartiteGraph, choice: Mapping[int, int], scope: Sequence[int] | None = None) -> bool:
    if scope is not None and set(choice) != set(scope):
        return False
    chosen = list(choice.values())
    if len(set(chosen)) != len(chosen):
        return False
    for i, v in choice.items():
        if not (0 <= v < g.n_vertices) or g.part_of[v] != i:
            return False
    mark = np.zeros(g.n_vertices, dtype=bool)
    mark[chosen] = True
    return not any(mark[g.neighbors(v)].any() for v in chosen)


def find_transversal(
    g: MultipartiteGraph,
    candidates=None,
    cfg: LllConfig = LllConfig(),
    rng: np.random.Generator | None = None,
) -> Transversal:
    """Moser-Tardos search for an independent transversal over the candidate sets.

    Raises :class:`Exhausted` when the resample budget runs out (after trying
    the backtracking fallback if configured).
    """
    cand = _normalize(g, candidates)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    parts = sorted(cand)
    budget = cfg.budget(len(parts))
    choice: dict[int, int] = {}
    mark = np.zeros(g.n_vertices, dtype=bool)
    draws = rng.random(len(parts))
    for i, u in zip(parts, draws):
        c = cand[i]
        v = int(c[int(u * c.size)])
        choice[i] = v
        mark[v] = True

    violated: set[tuple[int, int]] = set()
    for v in choice.values():
        for w in g.neighbors(v)[mark[g.neighbors(v)]]:
            w = int(w)
            if v < w:
                violated.add((v, w))

    resamples = 0
    while violated:
        if resamples >= budget:
            if cfg.fallback == "backtracking":
                try:
                    t = find_transversal_backtracking(g, cand, node_limit=cfg.node_limit)
                except GuardExceeded:
                    t = None
                if t is not None:
                    return Transversal(t.choice, resamples=resamples)
            raise Exhausted(resamples, len(violated))
        a, b = min(violated)
        resamples += 1
        for i in (int(g.part_of[a]), int(g.part_of[b])):
            old = choice[i]
            mark[old] = False
            violated.difference_update({(min(old, int(w)), max(old, int(w))) for w in g.neighbors(old)})
            c = cand[i]
            new = int(c[rng.integers(c.size)])
            choice[i] = new
            mark[new] = True
            nb = g.neighbors(new)
            violated.update((min(new, int(w)), max(new, int(w))) for w in nb[mark[nb]])

    assert is_independent_transversal(g, choice, parts), "resampling returned a dependent set"
    return Transversal(choice, resamples=resamples)


def find_transversal_backtracking(
    g: MultipartiteGraph,
    candidates=None,
    node_limit: int = 1_000_000,
) -> Transversal | None:
    """Exact search; returns a transversal iff one exists over the candidate sets.

    Fail-first: the next part is always the one with fewest surviving
    candidates; within a part, vertices are tried by ascending degree then id.
    Raises :class:`GuardExceeded` after ``node_limit`` search nodes.
    """
    cand = _normalize(g, candidates)
    parts = sorted(cand)
    if not parts:
        return Transversal({})
    in_cand = np.zeros(g.n_vertices, dtype=bool)
    for c in cand.values():
        in_cand[c] = True
    deg = g.degree
    order = {i: sorted(cand[i].tolist(), key=lambda v: (int(deg[v]), v)) for i in parts}
    # neighbours restricted to candidate vertices
    nbrs: dict[int, list[int]] = {}
    for c in cand.values():
        for v in c.tolist():
            nb = g.neighbors(v)
            nbrs[v] = nb[in_cand[nb]].tolist()
    part_of = g.part_of
    blocked = dict.fromkeys(nbrs, 0)
    alive = {i: len(order[i]) for i in parts}
    unassigned = set(parts)
    choice: dict[int, int] = {}
    nodes = 0

    def place(v: int) -> bool:
        ok = True
        for w in nbrs[v]:
            pw = int(part_of[w])
            if pw in unassigned:
                blocked[w] += 1
                if blocked[w] == 1:
                    alive[pw] -= 1
                    if alive[pw] == 0:
                        ok = False
        return ok

    def unplace(v: int) -> None:
        for w in nbrs[v]:
            pw = int(part_of[w])
            if pw in unassigned:
                blocked[w] -= 1
                if blocked[w] == 0:
                    alive[pw] += 1

    def search() -> bool:
        nonlocal nodes
        if not unassigned:
            return True
        i = min(unassigned, key=lambda j: (alive[j], j))
        unassigned.discard(i)
        for v in order[i]:
            if blocked[v]:
                continue
            nodes += 1
            if nodes > node_limit:
                raise GuardExceeded(f"backtracking explored more than {node_limit} nodes")
            choice[i] = v
            ok = place(v)
            if ok and search():
                return True
            unplace(v)
            del choice[i]
        unassigned.add(i)
        return False

    if search():
        return Transversal(dict(choice))
    return None
