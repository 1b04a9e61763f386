"""Multipartite graphs: data model, JSON I/O, statistics, generators, reductions.

Vertices carry global ids ``0..N-1`` assigned part by part, so part ``i`` is the
contiguous id range ``offsets[i]:offsets[i+1]``.  Adjacency is stored in CSR
form with each neighbour list sorted by id; because ids are contiguous per
part, a sorted neighbour list is automatically grouped by neighbour part.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Any, Hashable, Sequence

import numpy as np

from . import rng as _rng

INSTANCE_FORMAT = "itpack-instance/1"
LIST_FORMAT = "itpack-lists/1"


class GraphFormatError(ValueError):
    """Malformed or invalid instance data.  ``where`` names the offending location."""

    def __init__(self, message: str, where: str | None = None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


class MultipartiteGraph:
    """Immutable vertex-partitioned graph whose edges all join distinct parts."""

    def __init__(self, sizes: Sequence[int], edges: Any = (), meta: dict | None = None):
        sizes = tuple(int(s) for s in sizes)
        for i, s in enumerate(sizes):
            if s < 0:
                raise GraphFormatError(f"negative part size {s}", f"sizes[{i}]")
        self.k = len(sizes)
        self.sizes = sizes
        self.offsets = np.zeros(self.k + 1, dtype=np.int64)
        np.cumsum(sizes, out=self.offsets[1:])
        self.n_vertices = int(self.offsets[-1])
        self.part_of = np.repeat(np.arange(self.k, dtype=np.int64), sizes)
        self.meta = dict(meta or {})

        e = np.asarray(edges, dtype=np.int64)
        if e.size == 0:
            e = np.zeros((0, 2), dtype=np.int64)
        if e.ndim != 2 or e.shape[1] != 2:
            raise GraphFormatError("edges must be a list of [u, v] pairs", "edges")
        self.edges = _canonical_edges(e, self.n_vertices, self.part_of)
        self._build_csr()
        for a in (self.offsets, self.part_of, self.edges, self.indptr, self.indices):
            a.setflags(write=False)

    def _build_csr(self) -> None:
        n, e = self.n_vertices, self.edges
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        order = np.lexsort((dst, src))
        self.indices = dst[order]
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=self.indptr[1:])

    # -- basic queries -------------------------------------------------

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    def part_range(self, i: int) -> range:
        return range(int(self.offsets[i]), int(self.offsets[i + 1]))

    def part_vertices(self, i: int) -> np.ndarray:
        return np.arange(self.offsets[i], self.offsets[i + 1], dtype=np.int64)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    def neighbors_in_part(self, v: int, i: int) -> np.ndarray:
        nb = self.neighbors(v)
        lo, hi = np.searchsorted(nb, [self.offsets[i], self.offsets[i + 1]])
        return nb[lo:hi]

    @cached_property
    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    @cached_property
    def edge_src(self) -> np.ndarray:
        """Source vertex of each directed CSR entry."""
        return np.repeat(np.arange(self.n_vertices, dtype=np.int64), self.degree)

    @cached_property
    def _groups(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # one group per (vertex, neighbour part) pair with at least one edge
        m = self.indices.shape[0]
        src = self.edge_src
        npart = self.part_of[self.indices]
        flag = np.ones(m, dtype=bool)
        if m:
            flag[1:] = (src[1:] != src[:-1]) | (npart[1:] != npart[:-1])
        gid = np.cumsum(flag) - 1
        return gid, src[flag], npart[flag]

    @property
    def group_id(self) -> np.ndarray:
        return self._groups[0]

    @property
    def group_src(self) -> np.ndarray:
        return self._groups[1]

    @property
    def group_part(self) -> np.ndarray:
        return self._groups[2]

    @cached_property
    def _edge_keys(self) -> np.ndarray:
        return self.edges[:, 0] * self.n_vertices + self.edges[:, 1]

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        j = np.searchsorted(nb, v)
        return bool(j < nb.shape[0] and nb[j] == v)

    def induced(self, blocks: Sequence[Sequence[int]]) -> tuple["MultipartiteGraph", np.ndarray]:
        """Subgraph induced by one vertex list per part.

        Returns the subgraph (ids renumbered part by part, in the given order)
        and an array mapping new ids back to ids of ``self``.
        """
        if len(blocks) != self.k:
            raise ValueError("need one vertex list per part")
        mapping = np.concatenate([np.asarray(b, dtype=np.int64) for b in blocks]) if self.k else np.zeros(0, np.int64)
        for i, b in enumerate(blocks):
            b = np.asarray(b, dtype=np.int64)
            if b.size and (np.any(self.part_of[b] != i)):
                raise ValueError(f"block for part {i} contains vertices of another part")
        new_id = np.full(self.n_vertices, -1, dtype=np.int64)
        new_id[mapping] = np.arange(mapping.shape[0])
        e = new_id[self.edges]
        keep = (e[:, 0] >= 0) & (e[:, 1] >= 0)
        sub = MultipartiteGraph([len(b) for b in blocks], e[keep])
        return sub, mapping

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MultipartiteGraph):
            return NotImplemented
        return self.sizes == other.sizes and np.array_equal(self.edges, other.edges)

    def __hash__(self) -> int:
        return hash((self.sizes, self.edges.tobytes()))

    def __repr__(self) -> str:
        return f"MultipartiteGraph(k={self.k}, sizes={list(self.sizes)}, edges={self.n_edges})"

    def to_dict(self) -> dict:
        d = {
            "format": INSTANCE_FORMAT,
            "k": self.k,
            "sizes": list(self.sizes),
            "edges": self.edges.tolist(),
        }
        if self.meta:
            d["meta"] = self.meta
        return d


def _canonical_edges(e: np.ndarray, n: int, part_of: np.ndarray) -> np.ndarray:
    if e.shape[0] == 0:
        return e.reshape(0, 2)
    bad = np.flatnonzero((e < 0).any(axis=1) | (e >= n).any(axis=1))
    if bad.size:
        j = int(bad[0])
        raise GraphFormatError(f"vertex index out of range (N={n}) in edge {e[j].tolist()}", f"edges[{j}]")
    same = np.flatnonzero(part_of[e[:, 0]] == part_of[e[:, 1]])
    if same.size:
        j = int(same[0])
        raise GraphFormatError(
            f"intra-part edge {e[j].tolist()} inside part {int(part_of[e[j, 0]])}", f"edges[{j}]"
        )
    c = np.sort(e, axis=1)
    keys = c[:, 0] * n + c[:, 1]
    order = np.argsort(keys, kind="stable")
    sk = keys[order]
    dup = np.flatnonzero(sk[1:] == sk[:-1])
    if dup.size:
        j = int(order[dup[0] + 1])
        raise GraphFormatError(f"duplicate edge {e[j].tolist()}", f"edges[{j}]")
    return c[order]


# -- JSON ---------------------------------------------------------------


def _parse_json(data: bytes | str) -> Any:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise GraphFormatError(f"not UTF-8: {exc}") from exc
    try:
        return json.loads(data)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"JSON parse error: {exc.msg}", f"line {exc.lineno} col {exc.colno}") from exc


def _int_field(obj: dict, name: str) -> int:
    if name not in obj:
        raise GraphFormatError("missing field", name)
    v = obj[name]
    if isinstance(v, bool) or not isinstance(v, int):
        raise GraphFormatError(f"expected integer, got {v!r}", name)
    return v


def _edge_list(obj: dict) -> list:
    edges = obj.get("edges", [])
    if not isinstance(edges, list):
        raise GraphFormatError("expected a list", "edges")
    for j, pair in enumerate(edges):
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or any(isinstance(x, bool) or not isinstance(x, int) for x in pair)
        ):
            raise GraphFormatError(f"expected [u, v] integer pair, got {pair!r}", f"edges[{j}]")
    return edges


def load_graph(data: bytes | str) -> MultipartiteGraph:
    """Parse the JSON instance format ``{"k", "sizes", "edges"}``."""
    obj = _parse_json(data)
    if not isinstance(obj, dict):
        raise GraphFormatError("top level must be an object")
    fmt = obj.get("format")
    if fmt is not None and fmt != INSTANCE_FORMAT:
        raise GraphFormatError(f"unsupported format {fmt!r}", "format")
    k = _int_field(obj, "k")
    sizes = obj.get("sizes")
    if not isinstance(sizes, list) or any(isinstance(s, bool) or not isinstance(s, int) for s in sizes):
        raise GraphFormatError("expected a list of integers", "sizes")
    if len(sizes) != k:
        raise GraphFormatError(f"k={k} but {len(sizes)} part sizes given", "sizes")
    return MultipartiteGraph(sizes, _edge_list(obj), meta=obj.get("meta"))


def dumps_graph(g: MultipartiteGraph) -> str:
    return json.dumps(g.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"


# -- statistics ---------------------------------------------------------


@dataclass(frozen=True)
class GraphStats:
    max_degree: int
    local_degree: int
    partite_min_degree: int
    min_part_size: int
    max_part_size: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def stats(g: MultipartiteGraph) -> GraphStats:
    """Maximum degree, local degree, partite minimum degree and part-size range."""
    deg = g.degree
    gsize = np.bincount(g.group_id) if g.group_id.size else np.zeros(0, dtype=np.int64)
    pmd = 0
    if g.k >= 2 and g.n_vertices:
        per_vertex = np.bincount(g.group_src, minlength=g.n_vertices)
        if np.all(per_vertex == g.k - 1) and gsize.size:
            pmd = int(gsize.min())
    return GraphStats(
        max_degree=int(deg.max()) if deg.size else 0,
        local_degree=int(gsize.max()) if gsize.size else 0,
        partite_min_degree=pmd,
        min_part_size=min(g.sizes) if g.k else 0,
        max_part_size=max(g.sizes) if g.k else 0,
    )


# -- reductions ---------------------------------------------------------


def partite_complement(g: MultipartiteGraph) -> MultipartiteGraph:
    """Same parts; edges are exactly the cross-part non-edges of ``g``."""
    n = g.n_vertices
    a, b = np.triu_indices(n, 1)
    cross = g.part_of[a] != g.part_of[b]
    a, b = a[cross], b[cross]
    keep = ~np.isin(a * n + b, g._edge_keys, assume_unique=True)
    return MultipartiteGraph(g.sizes, np.stack([a[keep], b[keep]], axis=1))


@dataclass
class ListAssignment:
    """A simple base graph on vertices ``0..n-1`` with a colour list per vertex."""

    n: int
    edges: list[tuple[int, int]]
    lists: list[list[Hashable]]

    def __post_init__(self) -> None:
        if len(self.lists) != self.n:
            raise GraphFormatError(f"n={self.n} but {len(self.lists)} lists given", "lists")
        seen = set()
        for j, (u, v) in enumerate(self.edges):
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphFormatError(f"vertex index out of range in edge {[u, v]}", f"edges[{j}]")
            if u == v:
                raise GraphFormatError(f"self-loop at {u}", f"edges[{j}]")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphFormatError(f"duplicate edge {[u, v]}", f"edges[{j}]")
            seen.add(key)
        for v, lst in enumerate(self.lists):
            if len(lst) == 0:
                raise GraphFormatError(f"empty list for vertex {v}", f"lists[{v}]")

    def to_dict(self) -> dict:
        return {"format": LIST_FORMAT, "n": self.n, "edges": [list(e) for e in self.edges], "lists": self.lists}


def load_list_assignment(data: bytes | str) -> ListAssignment:
    obj = _parse_json(data)
    if not isinstance(obj, dict):
        raise GraphFormatError("top level must be an object")
    n = _int_field(obj, "n")
    lists = obj.get("lists")
    if not isinstance(lists, list) or not all(isinstance(x, list) for x in lists):
        raise GraphFormatError("expected a list of colour lists", "lists")
    return ListAssignment(n, [tuple(e) for e in _edge_list(obj)], lists)


def build_list_coloring_graph(la: ListAssignment) -> tuple[MultipartiteGraph, list[tuple[int, Hashable]]]:
    """Conflict graph: one part per base vertex, one vertex per (vertex, colour).

    ``(v1, c1)`` and ``(v2, c2)`` are adjacent iff ``v1 v2`` is a base edge and
    ``c1 == c2``.  The second return value maps each conflict-graph id back to
    its ``(vertex, colour)`` pair.
    """
    index: list[tuple[int, Hashable]] = []
    pos: list[dict] = []
    for v, lst in enumerate(la.lists):
        if not lst:
            raise GraphFormatError(f"empty list for vertex {v}", f"lists[{v}]")
        here: dict = {}
        for c in lst:
            if c not in here:
                here[c] = len(index)
                index.append((v, c))
        pos.append(here)
    edges = []
    for u, v in la.edges:
        pu, pv = pos[u], pos[v]
        small, other = (pu, pv) if len(pu) <= len(pv) else (pv, pu)
        for c, gid in small.items():
            if c in other:
                edges.append((gid, other[c]))
    sizes = [len(p) for p in pos]
    return MultipartiteGraph(sizes, edges), index


# -- generators ---------------------------------------------------------


def _gen_meta(name: str, **params: Any) -> dict:
    return {"generator": name, "params": params, "prng": _rng.PRNG_NAME}


def gen_edge_free(k: int, n: int) -> MultipartiteGraph:
    return MultipartiteGraph([n] * k, meta=_gen_meta("edge-free", k=k, n=n))


def gen_complete(k: int, n: int) -> MultipartiteGraph:
    """Complete k-partite graph with parts of size n."""
    g = gen_edge_free(k, n)
    h = partite_complement(g)
    return MultipartiteGraph(h.sizes, h.edges, meta=_gen_meta("complete", k=k, n=n))


def gen_cliques_extremal(n: int) -> MultipartiteGraph:
    """n disjoint copies of K_{n+1}; part i holds the i-th vertex of every clique.

    Local degree 1, maximum degree n, parts of size n, and no independent
    transversal.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    k = n + 1
    # vertex (part i, clique c) has global id i*n + c
    edges = [(i * n + c, j * n + c) for c in range(n) for i in range(k) for j in range(i + 1, k)]
    return MultipartiteGraph([n] * k, edges, meta=_gen_meta("cliques-extremal", n=n))


def gen_yuster(k: int, n: int, seed: int) -> MultipartiteGraph:
    """Every pair of the k parts induces a uniformly random perfect matching."""
    if k < 2 or n < 1:
        raise ValueError("need k >= 2 and n >= 1")
    rg = _rng.substream(seed, _rng.GEN, 2, k, n)
    edges = []
    for i in range(k):
        for j in range(i + 1, k):
            perm = rg.permutation(n)
            edges.extend(zip(range(i * n, i * n + n), (j * n + perm).tolist()))
    return MultipartiteGraph([n] * k, edges, meta=_gen_meta("yuster", k=k, n=n, seed=seed))


def _as_fraction(x: Any) -> Fraction:
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x).limit_denominator(10**9)


def gen_avg_degree_counterexample(n: int, eps: Any) -> MultipartiteGraph:
    """kn/2 isolated vertices plus n/4 copies of complete k-partite K_{2,...,2}.

    ``k = (1 - eps) n``.  In each part, local ids ``2c, 2c+1`` belong to copy
    ``c`` and the last ``n/2`` vertices are isolated.
    """
    f = _as_fraction(eps)
    kf = (1 - f) * n
    if kf.denominator != 1 or kf < 1:
        raise ValueError(f"k = (1-eps)*n = {kf} is not a positive integer")
    if n % 4:
        raise ValueError(f"n={n} is not divisible by 4")
    k = int(kf)
    if (k * n) % 2:
        raise ValueError("kn/2 is not an integer")
    edges = []
    for c in range(n // 4):
        verts = [[i * n + 2 * c, i * n + 2 * c + 1] for i in range(k)]
        for i in range(k):
            for j in range(i + 1, k):
                edges.extend((a, b) for a in verts[i] for b in verts[j])
    return MultipartiteGraph([n] * k, edges, meta=_gen_meta("avg-degree", n=n, eps=str(f)))


def _rank_within(keys: np.ndarray) -> np.ndarray:
    """Position of each element among earlier elements with the same key."""
    order = np.argsort(keys, kind="stable")
    sk = keys[order]
    start = np.ones(sk.shape[0], dtype=bool)
    start[1:] = sk[1:] != sk[:-1]
    first = np.maximum.accumulate(np.where(start, np.arange(sk.shape[0]), 0))
    rank = np.empty_like(order)
    rank[order] = np.arange(sk.shape[0]) - first
    return rank


def _lookup_counts(sorted_keys: np.ndarray, counts: np.ndarray, q: np.ndarray) -> np.ndarray:
    if sorted_keys.size == 0:
        return np.zeros(q.shape[0], dtype=np.int64)
    j = np.searchsorted(sorted_keys, q)
    j = np.minimum(j, sorted_keys.size - 1)
    return np.where(sorted_keys[j] == q, counts[j], 0)


def gen_random(
    k: int,
    n: int,
    max_degree_cap: int,
    local_degree_cap: int,
    seed: int,
    target_edges: int | None = None,
) -> MultipartiteGraph:
    """Random k-partite graph, parts of size n, respecting both degree caps.

    Uniform random cross-part pairs are proposed in batches and accepted only
    while every endpoint stays under ``max_degree_cap`` and under
    ``local_degree_cap`` towards the other endpoint's part.  Stops at
    ``target_edges`` (default: enough to saturate the degree cap) or when
    proposals stop being accepted.
    """
    if max_degree_cap < 0 or local_degree_cap < 0 or k < 0 or n < 0:
        raise ValueError("caps and sizes must be >= 0")
    N = k * n
    if target_edges is None:
        target_edges = N * max_degree_cap // 2
    meta = _gen_meta(
        "random", k=k, n=n, max_degree_cap=max_degree_cap, local_degree_cap=local_degree_cap,
        seed=seed, target_edges=target_edges,
    )
    if max_degree_cap > 0 and local_degree_cap == 0 and target_edges > 0:
        raise ValueError("infeasible caps: local degree cap 0 forbids every edge")
    if k < 2 or n == 0 or max_degree_cap == 0 or target_edges <= 0:
        return MultipartiteGraph([n] * k, meta=meta)

    rg = _rng.substream(seed, _rng.GEN, 1, k, n, max_degree_cap, local_degree_cap)
    deg = np.zeros(N, dtype=np.int64)
    keys = np.zeros(0, dtype=np.int64)  # accepted, sorted, a*N+b with a<b
    loc_keys = np.zeros(0, dtype=np.int64)
    loc_counts = np.zeros(0, dtype=np.int64)
    stalls = 0
    while keys.size < target_edges and stalls < 4:
        need = target_edges - keys.size
        batch = max(1024, 2 * need)
        u = rg.integers(0, N, size=batch)
        pv = (u // n + rg.integers(1, k, size=batch)) % k
        v = pv * n + rg.integers(0, n, size=batch)
        a, b = np.minimum(u, v), np.maximum(u, v)
        bk = a * N + b
        _, first = np.unique(bk, return_index=True)
        first.sort()
        a, b, bk = a[first], b[first], bk[first]
        fresh = ~np.isin(bk, keys, assume_unique=True)
        a, b, bk = a[fresh], b[fresh], bk[fresh]
        pa, pb = a // n, b // n
        # rank over both endpoint columns together, so a vertex seen as a and as b is counted once per use
        nb = a.size
        rank = _rank_within(np.concatenate([a, b]))
        ok = (deg[a] + rank[:nb] < max_degree_cap) & (deg[b] + rank[nb:] < max_degree_cap)
        la, lb = a * k + pb, b * k + pa
        lrank = _rank_within(np.concatenate([la, lb]))
        ok &= _lookup_counts(loc_keys, loc_counts, la) + lrank[:nb] < local_degree_cap
        ok &= _lookup_counts(loc_keys, loc_counts, lb) + lrank[nb:] < local_degree_cap
        idx = np.flatnonzero(ok)[:need]
        if idx.size == 0:
            stalls += 1
            continue
        stalls = 0
        a, b = a[idx], b[idx]
        np.add.at(deg, a, 1)
        np.add.at(deg, b, 1)
        keys = np.union1d(keys, bk[idx])
        allk = np.concatenate([loc_keys, a * k + b // n, b * k + a // n])
        allc = np.concatenate([loc_counts, np.ones(2 * idx.size, dtype=np.int64)])
        loc_keys, inv = np.unique(allk, return_inverse=True)
        loc_counts = np.bincount(inv, weights=allc).astype(np.int64)
    edges = np.stack([keys // N, keys % N], axis=1) if keys.size else np.zeros((0, 2), np.int64)
    return MultipartiteGraph([n] * k, edges, meta=meta)


GENERATORS = {
    "cliques-extremal": gen_cliques_extremal,
    "yuster": gen_yuster,
    "avg-degree": gen_avg_degree_counterexample,
    "random": gen_random,
    "complete": gen_complete,
    "edge-free": gen_edge_free,
}
