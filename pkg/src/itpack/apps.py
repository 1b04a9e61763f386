"""Clique packing and disjoint list-colouring packing via independent transversals."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Hashable, Iterable

from .graph import ListAssignment, MultipartiteGraph, build_list_coloring_graph, partite_complement, stats
from .oracle import INFEASIBLE, OK, Packing, verify_packing
from .reduce import HALVE_PROPERTIES, SPLIT_PROPERTIES, SchedulePolicy, pack_with_policy, reduce_and_pack

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveConfig:
    """How to pack a multipartite graph.

    ``method="auto"`` packs directly when the local degree is at most
    ``direct_local_degree`` and runs the reduction pipeline otherwise.
    """

    method: str = "auto"  # auto | direct | reduce
    eps: float = 0.1
    gamma: float = 0.25
    schedule: SchedulePolicy = SchedulePolicy()
    seed: int = 0
    workers: int = 1
    split_checks: tuple = SPLIT_PROPERTIES
    halve_checks: tuple = HALVE_PROPERTIES
    direct_local_degree: int = 12


def solve(g: MultipartiteGraph, cfg: SolveConfig = SolveConfig()) -> Packing:
    if cfg.method not in ("auto", "direct", "reduce"):
        raise ValueError(f"unknown method {cfg.method!r}")
    method = cfg.method
    if method == "auto":
        method = "direct" if stats(g).local_degree <= cfg.direct_local_degree else "reduce"
    if method == "direct":
        return pack_with_policy(g, cfg.eps, cfg.schedule, cfg.seed, cfg.workers)
    return reduce_and_pack(g, cfg.eps, cfg.gamma, cfg.schedule, cfg.seed, cfg.workers,
                           cfg.split_checks, cfg.halve_checks)


@dataclass
class CliquePacking:
    cliques: list[tuple[int, ...]]
    status: str = OK
    diagnostics: list[dict] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.cliques)

    def to_dict(self) -> dict:
        return {"cliques": [list(c) for c in self.cliques], "status": self.status}


@dataclass
class ColoringPacking:
    colorings: list[dict[int, Hashable]]
    status: str = OK
    diagnostics: list[dict] = field(default_factory=list)
    color_degree: int = 0
    min_list_size: int = 0

    @property
    def count(self) -> int:
        return len(self.colorings)

    def to_dict(self) -> dict:
        return {
            "colorings": [[c[v] for v in sorted(c)] for c in self.colorings],
            "status": self.status,
            "color_degree": self.color_degree,
            "min_list_size": self.min_list_size,
        }


def is_clique(g: MultipartiteGraph, verts: Iterable[int]) -> bool:
    vs = list(verts)
    return all(g.has_edge(a, b) for x, a in enumerate(vs) for b in vs[x + 1:])


def clique_pack(g: MultipartiteGraph, eps: float = 0.1, delta_param: float = 0.1,
                solve_cfg: SolveConfig = SolveConfig()) -> CliquePacking:
    """Vertex-disjoint cliques with one vertex per part.

    Independent transversals of the partite complement are exactly such
    cliques of ``g``.
    """
    st = stats(g)
    n, k = st.min_part_size, g.k
    diags = []
    if st.min_part_size != st.max_part_size:
        diags.append({"warning": "unequal part sizes"})
    need = (1 - (1 - delta_param) / max(k, 1)) * n
    if k >= 2 and st.partite_min_degree < need:
        diags.append({"warning": f"partite minimum degree {st.partite_min_degree} below {need:.4g}"})
    for d in diags:
        log.warning(d["warning"])
    h = partite_complement(g)
    pk = solve(h, solve_cfg)
    cliques = [tuple(t.as_row(k)) for t in pk.transversals]
    for c in cliques:
        assert is_clique(g, c), f"returned set {c} is not a clique"
    assert not verify_packing(h, pk)
    return CliquePacking(cliques, pk.status, diags + pk.diagnostics)


def coloring_violations(la: ListAssignment, colorings: list[dict[int, Hashable]]) -> list[str]:
    """Properness, list membership and pairwise disjointness problems (empty if valid)."""
    out = []
    for x, col in enumerate(colorings):
        if set(col) != set(range(la.n)):
            out.append(f"coloring {x}: does not colour every vertex")
            continue
        for v, c in col.items():
            if c not in la.lists[v]:
                out.append(f"coloring {x}: colour {c!r} not in the list of vertex {v}")
        for u, v in la.edges:
            if col[u] == col[v]:
                out.append(f"coloring {x}: edge ({u}, {v}) monochromatic")
    for v in range(la.n):
        used = [col[v] for col in colorings if v in col]
        if len(used) != len(set(used)):
            out.append(f"vertex {v} gets the same colour in two colorings")
    return out


def pack_list_colorings(la: ListAssignment, solve_cfg: SolveConfig = SolveConfig()) -> ColoringPacking:
    """Pairwise disjoint proper list colourings via transversals of the conflict graph."""
    gamma_g, index = build_list_coloring_graph(la)
    st = stats(gamma_g)
    pk = solve(gamma_g, solve_cfg)
    colorings = [{index[gid][0]: index[gid][1] for gid in t.choice.values()} for t in pk.transversals]
    problems = coloring_violations(la, colorings)
    assert not problems, problems
    status = pk.status if colorings else INFEASIBLE
    return ColoringPacking(colorings, status, pk.diagnostics, color_degree=st.max_degree,
                           min_list_size=st.min_part_size)
