"""Two-level nibble: rounds of simultaneously grown transversals.

Round ``r`` grows ``m`` partial transversals at once.  Each iteration of a
round (for every transversal ``l`` and every part ``i`` it still has to
visit) picks a uniform candidate vertex, activates the part with probability
``p``, keeps activated picks that are unique across all transversals and have
no neighbour among the transversal's other activated picks, and finally
deletes candidates so that every candidate vertex disappears with the same
probability ``p_r``.  After the iterations, the partial transversals are
completed one by one with the resampling finder.

Candidate sets are stored as one boolean row per transversal over the global
vertex ids (``alive[l, v]``); rows are zero outside the parts the transversal
still has to visit.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from . import rng as _rng
from .graph import MultipartiteGraph, stats
from .lll import Exhausted, LllConfig, Transversal, find_transversal, is_independent_transversal
from .oracle import BUDGET, INFEASIBLE, OK, PARTIAL, Packing, verify_packing
from .schedule import ALL_MONITORS, PRACTICAL, THEORY, MonitorConfig, NibbleSchedule

log = logging.getLogger(__name__)


class NibbleError(RuntimeError):
    pass


class DepletedPart(NibbleError):
    pass


class RetryBudgetExhausted(NibbleError):
    """An iteration kept failing enforced monitors after every retry."""

    def __init__(self, r: int, t: int, report: "MonitorReport", attempts: int):
        self.r, self.t, self.report, self.attempts = r, t, report, attempts
        worst = "; ".join(str(c) for c in report.checks.values() if not c.passed)
        super().__init__(f"round {r}, iteration {t + 1}: retry budget exhausted after {attempts} attempts ({worst})")


# -- state ----------------------------------------------------------------


@dataclass
class RoundState:
    g: MultipartiteGraph
    r: int
    t: int
    used: np.ndarray      # (N,) bool: vertices of finished transversals
    alive: np.ndarray     # (m, N) bool: candidate sets
    active: np.ndarray    # (m, k) bool: parts still to visit
    partial: np.ndarray   # (m, k) int: chosen vertex, -1 if none yet
    sizes: np.ndarray     # (m, k) int: candidate set sizes (0 for inactive parts)

    @property
    def m(self) -> int:
        return int(self.alive.shape[0])

    def candidates(self, l: int, i: int) -> np.ndarray:
        lo, hi = self.g.offsets[i], self.g.offsets[i + 1]
        return lo + np.flatnonzero(self.alive[l, lo:hi])

    def active_parts(self, l: int) -> list[int]:
        return np.flatnonzero(self.active[l]).tolist()

    def transversal(self, l: int) -> Transversal:
        cols = np.flatnonzero(self.partial[l] >= 0)
        return Transversal({int(i): int(self.partial[l, i]) for i in cols})

    def copy(self) -> "RoundState":
        return replace(self, used=self.used, alive=self.alive.copy(), active=self.active.copy(),
                       partial=self.partial.copy(), sizes=self.sizes.copy())


def _part_sizes(g: MultipartiteGraph, row: np.ndarray) -> np.ndarray:
    if g.n_vertices == 0:
        return np.zeros(g.k, dtype=np.int64)
    cs = np.concatenate([[0], np.cumsum(row, dtype=np.int64)])
    return cs[g.offsets[1:]] - cs[g.offsets[:-1]]


def init_round(g: MultipartiteGraph, used: np.ndarray, r: int, m: int) -> RoundState:
    """Round ``r`` with ``m`` empty partial transversals; every candidate set is ``V_i minus used``."""
    used = np.asarray(used, dtype=bool)
    free = ~used
    remaining = _part_sizes(g, free)
    short = np.flatnonzero(remaining < m)
    if m < 1:
        raise ValueError("m must be >= 1")
    if short.size:
        i = int(short[0])
        raise DepletedPart(f"part {i} has {int(remaining[i])} unused vertices, round {r} needs {m}")
    alive = np.broadcast_to(free, (m, g.n_vertices)).copy()
    return RoundState(
        g=g, r=r, t=0, used=used, alive=alive,
        active=np.ones((m, g.k), dtype=bool),
        partial=np.full((m, g.k), -1, dtype=np.int64),
        sizes=np.broadcast_to(remaining, (m, g.k)).copy(),
    )


def check_round_state(state: RoundState) -> list[str]:
    """Exhaustive invariant audit; returns a list of problems (empty if sound)."""
    g, out = state.g, []
    committed: dict[int, int] = {}
    for l in range(state.m):
        t = state.transversal(l)
        covered = set(t.choice)
        if covered != set(np.flatnonzero(~state.active[l]).tolist()):
            out.append(f"l={l}: partial covers {sorted(covered)} but active parts disagree")
        if not is_independent_transversal(g, t.choice):
            out.append(f"l={l}: partial transversal not independent")
        for v in t.choice.values():
            if state.used[v]:
                out.append(f"l={l}: partial uses finished vertex {v}")
            if v in committed:
                out.append(f"l={l}: vertex {v} shared with l={committed[v]}")
            committed[v] = l
        row = state.alive[l]
        if np.any(row & state.used):
            out.append(f"l={l}: candidates contain finished vertices")
        inactive = ~state.active[l][g.part_of]
        if np.any(row & inactive):
            out.append(f"l={l}: candidates in already covered parts")
        verts = list(t.choice.values())
        if verts:
            nb = np.concatenate([g.neighbors(v) for v in verts])
            if np.any(row[nb]):
                out.append(f"l={l}: candidates adjacent to the partial transversal")
        if not np.array_equal(_part_sizes(g, row), state.sizes[l]):
            out.append(f"l={l}: cached sizes stale")
    return out


# -- iteration building blocks -------------------------------------------


def _edge_positions(g: MultipartiteGraph, verts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lens = g.degree[verts]
    total = int(lens.sum())
    if total == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    owner = np.repeat(np.arange(verts.size), lens)
    pos = np.arange(total) - np.repeat(np.cumsum(lens) - lens, lens) + np.repeat(g.indptr[verts], lens)
    return pos, owner


def _gather_neighbors(g: MultipartiteGraph, verts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated neighbour lists of ``verts`` and, per entry, the index of its owner."""
    pos, owner = _edge_positions(g, np.asarray(verts, dtype=np.int64))
    return g.indices[pos], owner


def select_vertices(state: RoundState, l: int, u: np.ndarray) -> np.ndarray:
    """Step 1: for each active part, the ``floor(u_i * s_i)``-th candidate (-1 elsewhere)."""
    g = state.g
    parts = np.flatnonzero(state.active[l] & (state.sizes[l] > 0))
    sel = np.full(g.k, -1, dtype=np.int64)
    if parts.size == 0:
        return sel
    cs = np.cumsum(state.alive[l], dtype=np.int64)
    s = state.sizes[l, parts]
    before = np.where(g.offsets[parts] > 0, cs[np.maximum(g.offsets[parts] - 1, 0)], 0)
    target = before + np.minimum((u[parts] * s).astype(np.int64), s - 1) + 1
    sel[parts] = np.searchsorted(cs, target, side="left")
    return sel


def deletion_probabilities(state: RoundState, l: int, p: float, p_r: float,
                           verts: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per vertex: ``q`` = P(some neighbour lands in the activated picks of ``l``),
    and the artificial deletion probability ``b`` making the union exactly ``p_r``.

    ``q = 1 - prod_i (1 - p d_i / s_i)`` over active parts ``i`` with ``d_i``
    neighbours among the ``s_i`` candidates; picks and activations are
    independent across parts, so this is exact.  Where ``q > p_r`` no ``b``
    can compensate and ``b`` is 0.  With ``verts`` given, values are computed
    for those vertices only (in that order).
    """
    g = state.g
    row = state.alive[l]
    verts = np.arange(g.n_vertices) if verts is None else np.asarray(verts, dtype=np.int64)
    pos, owner = _edge_positions(g, verts)
    if pos.size == 0:
        q = np.zeros(verts.size)
    else:
        gid = g.group_id[pos]
        first = np.ones(pos.size, dtype=bool)
        first[1:] = gid[1:] != gid[:-1]
        local = np.cumsum(first) - 1
        d = np.bincount(local, weights=row[g.indices[pos]])
        s = state.sizes[l][g.part_of[g.indices[pos[first]]]].astype(np.float64)
        term = np.log1p(-p * d / np.maximum(s, 1.0))
        q = -np.expm1(np.bincount(owner[first], weights=term, minlength=verts.size))
    with np.errstate(divide="ignore", invalid="ignore"):
        b = np.where(q <= p_r, 1.0 - (1.0 - p_r) / (1.0 - q), 0.0)
    np.clip(b, 0.0, 1.0, out=b)
    return q, b


def neighbors_hit(g: MultipartiteGraph, picks: np.ndarray) -> np.ndarray:
    """Boolean mask of vertices with a neighbour in ``picks``."""
    hit = np.zeros(g.n_vertices, dtype=bool)
    if picks.size:
        nb, _ = _gather_neighbors(g, picks)
        hit[nb] = True
    return hit


def sample_deletion(state: RoundState, l: int, p: float, p_r: float, rg: np.random.Generator,
                    b: np.ndarray | None = None) -> np.ndarray:
    """One draw of Steps 1, 2 and the calibrated deletion event for transversal ``l``.

    Consumes ``rg`` in the same order as :func:`run_iteration`.
    """
    g = state.g
    u = rg.random(g.k)
    act = (rg.random(g.k) < p) & state.active[l]
    sel = select_vertices(state, l, u)
    picks = sel[act & (sel >= 0)]
    if b is None:
        _, b = deletion_probabilities(state, l, p, p_r)
    return neighbors_hit(g, picks) | (rg.random(g.n_vertices) < b)


# -- monitors ----------------------------------------------------------------


@dataclass
class MonitorCheck:
    name: str
    passed: bool
    value: float
    bound: float
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.name}: {'ok' if self.passed else 'FAIL'} (value={self.value:.6g}, bound={self.bound:.6g}{'; ' + self.detail if self.detail else ''})"


@dataclass
class MonitorReport:
    r: int
    t: int
    checks: dict[str, MonitorCheck]

    def failures(self, enforce: Iterable[str]) -> list[str]:
        names = set(enforce) | {"nonempty"}
        return [n for n, c in self.checks.items() if n in names and not c.passed]

    def flags(self) -> dict[str, bool]:
        return {n: c.passed for n, c in self.checks.items()}


@dataclass
class IterationSample:
    selected: np.ndarray     # (m, k) Step-1 picks, -1 for parts not visited
    activated: np.ndarray    # (m, k) Step-2 activations
    kept: np.ndarray         # (m, k) kept indices J
    hat: np.ndarray          # multiset of activated picks over all transversals
    artificial: list[np.ndarray] = field(default_factory=list)  # per l: vertices with B = 1
    excess_q: int = 0
    sizes_before: np.ndarray | None = None


def _monitor(state: RoundState, before: RoundState, sample: IterationSample, sched: NibbleSchedule,
             cfg: MonitorConfig, seed: int, m: int) -> MonitorReport:
    g, r, t1 = state.g, state.r, state.t
    p, pr, dl = sched.p, sched.p_r(r), sched.delta
    checks: dict[str, MonitorCheck] = {}

    act = state.active
    sz = state.sizes[act].astype(np.float64)
    checks["nonempty"] = MonitorCheck("nonempty", bool(np.all(sz > 0)), float(sz.min()) if sz.size else math.inf, 1.0)

    lo, hi = float(sched.S_minus(r, t1)), float(sched.S_plus(r, t1))
    inside = (sz >= lo) & (sz <= hi)
    worst = float(sz[np.argmax(np.maximum(lo - sz, sz - hi))]) if sz.size else lo
    checks["C1"] = MonitorCheck("C1", bool(inside.all()), worst, lo,
                                f"fraction in [{lo:.4g}, {hi:.4g}] = {inside.mean() if sz.size else 1:.4f}")

    old = before.sizes[act].astype(np.float64)
    dev = np.abs(sz - (1 - pr) * old)
    slack = cfg.size_slack(pr, old)
    frac = float(np.mean(dev <= slack)) if sz.size else 1.0
    checks["size_band"] = MonitorCheck("size_band", frac >= cfg.statistical_quantile, frac, cfg.statistical_quantile,
                                     f"max deviation/slack = {float(np.max(dev / np.maximum(slack, 1e-300))) if sz.size else 0:.3g}")

    # vertex sample from G_r
    pool = np.flatnonzero(~state.used)
    if not cfg.exhaustive and pool.size > cfg.sample_size:
        rg = _rng.substream(seed, _rng.MONITOR, r, t1)
        pool = np.sort(rg.choice(pool, size=cfg.sample_size, replace=False))
    nb, owner = _gather_neighbors(g, pool)
    live_nb = ~state.used[nb]
    d_gr = np.bincount(owner, weights=live_nb, minlength=pool.size)

    deg_l = np.zeros((m, pool.size))
    for l in range(m):
        deg_l[l] = np.bincount(owner, weights=state.alive[l][nb], minlength=pool.size)
    dbound = float(sched.D(r, t1)) * cfg.degree_scale
    dmax = float(deg_l.max()) if deg_l.size else 0.0
    checks["C2"] = MonitorCheck("C2", dmax <= dbound, dmax, dbound)

    in_T = np.zeros(g.n_vertices, dtype=bool)
    pv = state.partial[state.partial >= 0]
    in_T[pv] = True
    have3 = np.bincount(owner, weights=in_T[nb] & live_nb, minlength=pool.size)
    x = 1 - (1 + 2 * dl) * p
    geo = (1 - x**t1) / ((1 + 2 * dl) * p) if p > 0 else float(t1)  # sum of x^j over j < t1
    need3 = (1 - 3 * dl) * p**2 * geo * d_gr
    big = d_gr >= cfg.deg_threshold_c3
    slack3 = float(np.min(have3[big] - need3[big])) if big.any() else 0.0
    checks["C3"] = MonitorCheck("C3", slack3 >= 0, slack3, 0.0, f"{int(big.sum())} vertices above threshold")

    have4 = deg_l.sum(axis=0)
    need4 = m * max(1 - p - pr - dl * p, 0.0) ** t1 * d_gr
    slack4 = float(np.min(have4 - need4)) if pool.size else 0.0
    checks["C4"] = MonitorCheck("C4", slack4 >= -1e-9, slack4, 0.0)

    tilde = sample.selected[sample.selected >= 0]
    appear = int(np.bincount(tilde).max()) if tilde.size else 0
    crowd = 0
    for l in range(sample.selected.shape[0]):
        row = sample.selected[l]
        picks = row[row >= 0]
        if picks.size:
            nbp, _ = _gather_neighbors(g, picks)
            if nbp.size:
                crowd = max(crowd, int(np.bincount(nbp).max()))
    worst_c = max(crowd, appear)
    checks["crowding"] = MonitorCheck("crowding", worst_c <= cfg.crowd_bound, worst_c, cfg.crowd_bound,
                                      f"neighbours in one pick set <= {crowd}, pick sets per vertex <= {appear}")
    checks["uniform_deletion"] = MonitorCheck("uniform_deletion", sample.excess_q == 0, sample.excess_q, 0.0,
                                 "vertices with q > p_r")
    return MonitorReport(r=r, t=t1, checks=checks)


# -- one iteration --------------------------------------------------------------


def _pmap(fn: Callable, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def run_iteration(
    state: RoundState,
    sched: NibbleSchedule,
    monitor_cfg: MonitorConfig,
    seed: int,
    attempt: int = 0,
    workers: int = 1,
) -> tuple[RoundState, IterationSample, MonitorReport]:
    """Steps 1-6 of one iteration; returns the new state, what was drawn, and the monitors.

    All randomness for transversal ``l`` comes from the substream
    ``(seed, r, t, attempt, l)``, so results do not depend on ``workers``.
    """
    g, m, k, N = state.g, state.m, state.g.k, state.g.n_vertices
    p, pr = sched.p, sched.p_r(state.r)
    gens = [_rng.substream(seed, _rng.NIBBLE, state.r, state.t, attempt, l) for l in range(m)]

    def steps12(l: int):
        rg = gens[l]
        u = rg.random(k)
        act = (rg.random(k) < p) & state.active[l]
        sel = select_vertices(state, l, u)
        return sel, act & (sel >= 0)

    drawn = _pmap(steps12, list(range(m)), workers)
    selected = np.stack([d[0] for d in drawn]) if m else np.zeros((0, k), np.int64)
    activated = np.stack([d[1] for d in drawn]) if m else np.zeros((0, k), bool)

    # Step 3: uniqueness in the multiset of activated picks, independence inside each transversal
    hat = selected[activated]
    mult = np.bincount(hat, minlength=N) if hat.size else np.zeros(N, np.int64)
    kept = np.zeros_like(activated)
    for l in range(m):
        parts = np.flatnonzero(activated[l])
        if parts.size == 0:
            continue
        picks = selected[l, parts]
        mark = np.zeros(N, dtype=bool)
        mark[picks] = True
        nb, owner = _gather_neighbors(g, picks)
        conflict = np.zeros(parts.size, dtype=bool)
        if nb.size:
            np.logical_or.at(conflict, owner, mark[nb])
        kept[l, parts] = (mult[picks] == 1) & ~conflict
    committed = np.zeros(N, dtype=bool)
    committed[selected[kept]] = True

    new = state.copy()
    new.t = state.t + 1
    new.partial[kept] = selected[kept]
    new.active &= ~kept  # Step 4

    def steps56(l: int):
        rg = gens[l]
        row = state.alive[l]
        u = rg.random(N)
        # b <= p_r, so only draws below p_r can trigger B; q > p_r needs the union bound above p_r
        sz = state.sizes[l][state.active[l] & (state.sizes[l] > 0)]
        bound = p * g.degree / max(int(sz.min()), 1) if sz.size else np.zeros(N)
        need = np.flatnonzero(row & ((u < pr) | (bound > pr)))
        q, b = deletion_probabilities(state, l, p, pr, need)
        viol = int(np.count_nonzero(q > pr))
        art = need[u[need] < b]
        picks = selected[l, activated[l]]
        deleted = neighbors_hit(g, picks)
        deleted[art] = True
        newrow = row & ~deleted & ~committed  # committed picks leave every other candidate set
        newrow &= new.active[l][g.part_of]
        return newrow, art, viol

    results = _pmap(steps56, list(range(m)), workers)
    excess = 0
    artificial = []
    for l, (row, art, viol) in enumerate(results):
        new.alive[l] = row
        new.sizes[l] = _part_sizes(g, row)
        artificial.append(art)
        excess += viol

    sample = IterationSample(selected=np.where(state.active, selected, -1), activated=activated, kept=kept,
                             hat=hat, artificial=artificial, excess_q=excess, sizes_before=state.sizes)
    report = _monitor(new, state, sample, sched, monitor_cfg, seed, m)
    return new, sample, report


TRACE_COLUMNS = (
    "r", "t", "active_transversals", "min_candidate", "max_candidate", "S_minus", "S_plus", "D",
    *(f"{name}_pass" for name in ALL_MONITORS), "retries",
)


# -- rounds ----------------------------------------------------------------------


@dataclass(frozen=True)
class RetryPolicy:
    """What to do when an iteration fails its enforced monitors.

    ``on_exhausted="error"`` raises :class:`RetryBudgetExhausted`;
    ``"complete"`` stops iterating and goes straight to completion.
    ``widen_completion`` lets a completion that fails on ``V_i^l(t)`` retry on
    every unused vertex of ``V_i`` that is still compatible with the partial
    transversal (the artificial deletions are not needed for correctness).
    """

    retry_budget: int = 8
    on_exhausted: str = "error"
    widen_completion: bool = False
    lll: LllConfig = LllConfig()

    @classmethod
    def for_mode(cls, mode: str, **overrides) -> "RetryPolicy":
        if mode == PRACTICAL:
            base = dict(on_exhausted="complete", widen_completion=True, lll=LllConfig(fallback="backtracking"))
        else:
            base = {}
        base.update(overrides)
        return cls(**base)


@dataclass
class RoundResult:
    transversals: list[Transversal]
    trace: list[dict]
    diagnostics: list[dict]
    status: str
    iterations: int


def _trace_row(state: RoundState, sched: NibbleSchedule, report: MonitorReport | None, retries: int) -> dict:
    act = state.active
    sz = state.sizes[act]
    row = {
        "r": state.r,
        "t": state.t,
        "active_transversals": int(np.count_nonzero(act.any(axis=1))),
        "min_candidate": int(sz.min()) if sz.size else 0,
        "max_candidate": int(sz.max()) if sz.size else 0,
        "S_minus": float(sched.S_minus(state.r, state.t)),
        "S_plus": float(sched.S_plus(state.r, state.t)),
        "D": float(sched.D(state.r, state.t)),
    }
    flags = report.flags() if report else {}
    for name in ALL_MONITORS:
        row[f"{name}_pass"] = int(flags.get(name, True))
    row["retries"] = retries
    return row


def _complete(state: RoundState, policy: RetryPolicy, seed: int) -> tuple[list[Transversal], list[dict]]:
    g, m = state.g, state.m
    excluded = np.zeros(g.n_vertices, dtype=bool)
    excluded[state.partial[state.partial >= 0]] = True
    done: list[Transversal] = []
    diags: list[dict] = []
    for l in range(m):
        base = state.transversal(l)
        parts = state.active_parts(l)
        if not parts:
            done.append(base)
            continue
        own = np.zeros(g.n_vertices, dtype=bool)
        verts = list(base.choice.values())
        if verts:
            own[np.concatenate([g.neighbors(v) for v in verts])] = True
        tries = [("candidates", state.alive[l] & ~excluded)]
        if policy.widen_completion:
            tries.append(("widened", ~state.used & ~excluded & ~own))
        found = None
        for attempt, (label, mask) in enumerate(tries):
            cand = {}
            for i in parts:
                lo, hi = g.offsets[i], g.offsets[i + 1]
                cand[i] = lo + np.flatnonzero(mask[lo:hi])
            if any(c.size == 0 for c in cand.values()):
                diags.append({"round": state.r, "transversal": l, "stage": label, "error": "empty candidate set"})
                continue
            rg = _rng.substream(seed, _rng.COMPLETE, state.r, l, attempt)
            try:
                found = find_transversal(g, cand, policy.lll, rng=rg)
                break
            except Exhausted as exc:
                diags.append({"round": state.r, "transversal": l, "stage": label, "error": str(exc)})
        if found is None:
            continue
        choice = dict(base.choice)
        choice.update(found.choice)
        full = Transversal(choice, resamples=found.resamples)
        assert is_independent_transversal(g, full.choice, range(g.k)), "completion produced a dependent set"
        for v in found.choice.values():
            excluded[v] = True
        done.append(full)
    return done, diags


def run_round(
    g: MultipartiteGraph,
    used: np.ndarray,
    r: int,
    m: int,
    sched: NibbleSchedule,
    monitor_cfg: MonitorConfig,
    policy: RetryPolicy,
    seed: int,
    workers: int = 1,
) -> RoundResult:
    """Grow ``m`` transversals through up to ``t*`` iterations, then complete them in order."""
    state = init_round(g, used, r, m)
    trace = [_trace_row(state, sched, None, 0)]
    diags: list[dict] = []
    status = OK
    for _ in range(sched.t_star):
        if not state.active.any():
            break
        for attempt in range(policy.retry_budget + 1):
            new, sample, report = run_iteration(state, sched, monitor_cfg, seed, attempt, workers)
            if monitor_cfg.exhaustive:
                problems = check_round_state(new)
                assert not problems, problems
            if not report.failures(monitor_cfg.enforce):
                break
        else:
            if policy.on_exhausted == "error":
                raise RetryBudgetExhausted(r, state.t, report, policy.retry_budget + 1)
            diags.append({"round": r, "iteration": state.t + 1, "stopped": "retry budget exhausted",
                          "failed": report.failures(monitor_cfg.enforce)})
            break
        state = new
        trace.append(_trace_row(state, sched, report, attempt))
    done, cdiags = _complete(state, policy, seed)
    diags.extend(cdiags)
    if len(done) < m:
        status = PARTIAL
    return RoundResult(done, trace, diags, status, state.t)


def round_size(sched: NibbleSchedule, remaining: int) -> int:
    """Transversals to grow in a round whose parts have ``remaining`` unused vertices.

    ``floor(p * remaining)``; practical mode grows at least one.
    """
    m = int(math.floor(sched.p * remaining * (1 + 1e-12)))
    if sched.mode == PRACTICAL:
        m = max(1, m)
    return min(m, remaining)


def pack(
    g: MultipartiteGraph,
    sched: NibbleSchedule,
    monitor_cfg: MonitorConfig | None = None,
    policy: RetryPolicy | None = None,
    seed: int = 0,
    workers: int = 1,
    local_degree_bound: int | None = None,
) -> Packing:
    """Rounds ``r = 1..r*``, each adding a batch of disjoint independent transversals.

    Stops early when a round cannot complete all its transversals or runs out
    of retries; whatever was finished is returned, flagged in ``status``.
    """
    monitor_cfg = monitor_cfg or MonitorConfig.for_schedule(sched)
    policy = policy or RetryPolicy.for_mode(sched.mode)
    out = Packing([])
    if sched.mode == THEORY:
        st = stats(g)
        if st.max_degree > (1 - sched.eps) * st.min_part_size:
            out.diagnostics.append({"warning": f"max degree {st.max_degree} exceeds (1-eps)n"})
        if local_degree_bound is not None and st.local_degree > local_degree_bound:
            out.diagnostics.append({"warning": f"local degree {st.local_degree} exceeds {local_degree_bound}"})
        for d in out.diagnostics:
            log.warning(d["warning"])
    used = np.zeros(g.n_vertices, dtype=bool)
    for r in range(1, sched.r_star + 1):
        remaining = _part_sizes(g, ~used)
        s = int(remaining.min()) if g.k else 0
        if s == 0:
            break
        m = round_size(sched, s)
        if m < 1:
            break
        try:
            res = run_round(g, used, r, m, sched, monitor_cfg, policy, seed, workers)
        except RetryBudgetExhausted as exc:
            out.status = BUDGET
            out.diagnostics.append({"round": r, "error": str(exc),
                                    "checks": {n: str(c) for n, c in exc.report.checks.items()}})
            break
        out.transversals.extend(res.transversals)
        out.trace.extend(res.trace)
        out.diagnostics.extend(res.diagnostics)
        for t in res.transversals:
            used[list(t.choice.values())] = True
        if res.status != OK:
            out.status = PARTIAL
            break
    if out.count == 0 and out.status in (OK, PARTIAL):
        out.status = INFEASIBLE
    problems = verify_packing(g, out)
    assert not problems, [str(v) for v in problems]
    return out
