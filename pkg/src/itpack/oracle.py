"""Ground truth for small instances, and the packing verifier used everywhere."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable

from .graph import MultipartiteGraph
from .lll import GuardExceeded, Transversal, find_transversal_backtracking

OK = "ok"
PARTIAL = "partial"
INFEASIBLE = "infeasible"
BUDGET = "budget"


@dataclass
class Packing:
    """Pairwise disjoint independent transversals, plus how the run ended."""

    transversals: list[Transversal] = field(default_factory=list)
    status: str = OK
    diagnostics: list[dict] = field(default_factory=list)
    trace: list[dict] = field(default_factory=list, compare=False, repr=False)

    @property
    def count(self) -> int:
        return len(self.transversals)

    def rows(self, k: int) -> list[list[int]]:
        return [t.as_row(k) for t in self.transversals]

    def extend(self, other: "Packing") -> None:
        self.transversals.extend(other.transversals)
        self.diagnostics.extend(other.diagnostics)
        self.trace.extend(other.trace)
        if other.status != OK and self.status == OK:
            self.status = other.status


@dataclass(frozen=True)
class Violation:
    kind: str  # coverage | membership | independence | disjointness
    transversal: int
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}: transversal {self.transversal}: {self.detail}"


def _as_choice(t: Any) -> dict[int, int]:
    if isinstance(t, Transversal):
        return dict(t.choice)
    if isinstance(t, dict):
        return {int(i): int(v) for i, v in t.items()}
    return {i: int(v) for i, v in enumerate(t)}


def verify_packing(g: MultipartiteGraph, packing: Packing | Iterable) -> list[Violation]:
    """All violations of the packing properties; an empty list means valid."""
    items = packing.transversals if isinstance(packing, Packing) else list(packing)
    out: list[Violation] = []
    owner: dict[int, int] = {}
    for idx, t in enumerate(items):
        choice = _as_choice(t)
        if set(choice) != set(range(g.k)):
            missing = sorted(set(range(g.k)) - set(choice))
            extra = sorted(set(choice) - set(range(g.k)))
            out.append(Violation("coverage", idx, f"missing parts {missing}, unknown parts {extra}"))
        verts = []
        for i, v in sorted(choice.items()):
            if not (0 <= v < g.n_vertices):
                out.append(Violation("membership", idx, f"vertex {v} out of range"))
                continue
            if 0 <= i < g.k and int(g.part_of[v]) != i:
                out.append(Violation("membership", idx, f"vertex {v} is in part {int(g.part_of[v])}, not {i}"))
            verts.append(v)
        vs = set(verts)
        for v in sorted(vs):
            for w in g.neighbors(v).tolist():
                if w in vs and v < w:
                    out.append(Violation("independence", idx, f"edge ({v}, {w}) inside transversal"))
        for v in verts:
            if v in owner and owner[v] != idx:
                out.append(Violation("disjointness", idx, f"vertex {v} also used by transversal {owner[v]}"))
            owner.setdefault(v, idx)
    return out


def exists_transversal(g: MultipartiteGraph, node_limit: int = 1_000_000) -> Transversal | None:
    """Exact: an independent transversal of ``g`` or ``None``."""
    if any(s == 0 for s in g.sizes):
        return None
    return find_transversal_backtracking(g, None, node_limit=node_limit)


def enumerate_transversals(g: MultipartiteGraph, limit: int = 2_000_000) -> list[tuple[int, ...]]:
    """Every independent transversal, as vertex tuples ordered by part."""
    out: list[tuple[int, ...]] = []
    if g.k == 0:
        return [()]
    nbr = [set(g.neighbors(v).tolist()) for v in range(g.n_vertices)]
    cur: list[int] = []

    def rec(i: int, forbidden: frozenset) -> None:
        if i == g.k:
            out.append(tuple(cur))
            if len(out) > limit:
                raise GuardExceeded(f"more than {limit} independent transversals")
            return
        for v in g.part_range(i):
            if v not in forbidden:
                cur.append(v)
                rec(i + 1, forbidden | nbr[v])
                cur.pop()

    rec(0, frozenset())
    return out


def max_disjoint_transversals(g: MultipartiteGraph, node_limit: int = 2_000_000) -> tuple[int, Packing]:
    """Exact maximum number of pairwise disjoint independent transversals.

    Every transversal uses exactly one vertex of the smallest part, so the
    search branches over that part's vertices (use one transversal through
    the vertex, or leave it unused), with a counting bound and dominance
    memo on ``(position, used-vertex set)``.
    """
    if g.k == 0 or any(s == 0 for s in g.sizes):
        return 0, Packing([])
    trans = enumerate_transversals(g)
    pivot = min(range(g.k), key=lambda i: (g.sizes[i], i))
    groups: dict[int, list[int]] = {v: [] for v in g.part_range(pivot)}
    masks = []
    for t in trans:
        m = 0
        for v in t:
            m |= 1 << v
        masks.append(m)
        groups[t[pivot]].append(len(masks) - 1)
    pivots = sorted(groups, key=lambda v: (len(groups[v]), v))
    part_masks = [sum(1 << v for v in g.part_range(i)) for i in range(g.k)]
    sizes = list(g.sizes)

    best_count = 0
    best: list[int] = []
    chosen: list[int] = []
    seen: dict[tuple[int, int], int] = {}
    nodes = 0

    def rec(idx: int, used: int) -> None:
        nonlocal best_count, best, nodes
        nodes += 1
        if nodes > node_limit:
            raise GuardExceeded(f"max-packing search exceeded {node_limit} nodes")
        count = len(chosen)
        if count > best_count:
            best_count, best = count, list(chosen)
        remaining = len(pivots) - idx
        bound = min([remaining] + [sizes[i] - (used & part_masks[i]).bit_count() for i in range(g.k)])
        if count + bound <= best_count:
            return
        key = (idx, used)
        if seen.get(key, -1) >= count:
            return
        seen[key] = count
        for ti in groups[pivots[idx]]:
            if masks[ti] & used == 0:
                chosen.append(ti)
                rec(idx + 1, used | masks[ti])
                chosen.pop()
        rec(idx + 1, used)

    if pivots:
        rec(0, 0)
    packing = Packing([Transversal(dict(enumerate(trans[ti]))) for ti in best])
    return best_count, packing
