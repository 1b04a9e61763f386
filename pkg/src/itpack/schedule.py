"""Round/iteration schedule for the two-level nibble.

All logarithms are natural.  Schedule values are evaluated in log space and
returned as :class:`mpmath.mpf`, because in the theory regime quantities such as
``S_r^-(t*)`` are of order ``exp(-30/eps) * n`` and underflow a double.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import mpmath
import numpy as np

THEORY = "theory"
PRACTICAL = "practical"


class ScheduleError(ValueError):
    pass


def _log_power(x: float, t: int) -> float:
    """``log((1+x)^t)``; a non-positive base (large practical ``p``) gives ``-inf`` for ``t > 0``."""
    if t == 0:
        return 0.0
    return t * math.log1p(x) if x > -1 else -math.inf


@dataclass(frozen=True)
class NibbleSchedule:
    """Scalar parameters of one packing run.

    ``m_r(r)`` is the number of transversals grown in round ``r`` when part
    sizes follow the schedule exactly.
    """

    eps: float
    n: int
    p: float
    delta: float
    r_star: int
    t_star: int
    mode: str = THEORY

    # -- log-space primitives ------------------------------------------

    def log_S0(self, r: int) -> float:
        return _log_power(-self.p, r - 1) + math.log(self.n)

    def log_D0(self, r: int) -> float:
        e, p = self.eps, self.p
        return math.log1p(-e) + _log_power(-p + e**3 * p, r - 1) + math.log(self.n)

    def p_r(self, r: int) -> float:
        """Deletion probability of round r: ``D_r(0) p / S_r(0)``."""
        e, p = self.eps, self.p
        if r == 1:
            return (1 - e) * p
        # (1-p+e^3 p)/(1-p) = 1 + e^3 p/(1-p)
        return math.exp(math.log1p(-e) + (r - 1) * math.log1p(e**3 * p / (1 - p))) * p

    def log_S_minus(self, r: int, t: int) -> float:
        return _log_power(-self.p_r(r) - self.p**2, t) + self.log_S0(r)

    def log_S_plus(self, r: int, t: int) -> float:
        return _log_power(-self.p_r(r) + self.p**2, t) + self.log_S0(r)

    def log_D(self, r: int, t: int) -> float:
        return _log_power(-self.p + self.eps * self.p / 2, t) + self.log_D0(r)

    # -- values --------------------------------------------------------

    def S0(self, r: int) -> mpmath.mpf:
        return mpmath.exp(self.log_S0(r))

    def D0(self, r: int) -> mpmath.mpf:
        return mpmath.exp(self.log_D0(r))

    def S_minus(self, r: int, t: int) -> mpmath.mpf:
        return mpmath.exp(self.log_S_minus(r, t))

    def S_plus(self, r: int, t: int) -> mpmath.mpf:
        return mpmath.exp(self.log_S_plus(r, t))

    def D(self, r: int, t: int) -> mpmath.mpf:
        return mpmath.exp(self.log_D(r, t))

    def m_r(self, r: int) -> int:
        """``floor(p * S_r(0))``; rounds down so no more transversals are promised than mass allows."""
        return int(mpmath.floor(self.p * self.S0(r) * (1 + 1e-12)))

    def total_scheduled(self) -> float:
        """Closed form ``n (1 - (1-p)^{r*})`` of the summed per-round counts ``p S_r(0)``."""
        return -self.n * math.expm1(self.r_star * math.log1p(-self.p))

    def total_scheduled_by_summation(self, chunk: int = 1 << 20) -> float:
        """Sum ``p S_r(0)`` over ``r = 1..r*`` term by term (chunked, pairwise summation)."""
        total = 0.0
        lp = math.log1p(-self.p)
        for start in range(1, self.r_star + 1, chunk):
            r = np.arange(start, min(start + chunk, self.r_star + 1), dtype=np.float64)
            total += float(np.sum(self.p * self.n * np.exp((r - 1) * lp)))
        return total

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "NibbleSchedule":
        fields = ("eps", "n", "p", "delta", "r_star", "t_star", "mode")
        missing = [f for f in fields if f not in d]
        if missing:
            raise ScheduleError(f"schedule missing fields {missing}")
        return cls(**{f: d[f] for f in fields})

    @classmethod
    def from_json(cls, s: str) -> "NibbleSchedule":
        return cls.from_dict(json.loads(s))


def make_schedule(eps: float, n: int) -> NibbleSchedule:
    """Theory-mode schedule: ``p = 1/ln^3 n``, ``delta = eps^5``, ``r* = t* = ceil(30/(eps p))``."""
    if not 0 < eps < 1:
        raise ScheduleError(f"eps must lie in (0, 1), got {eps}")
    if n < 3:
        raise ScheduleError(f"n={n} too small: need ln n > 1 so that p = 1/ln^3 n < 1")
    p = 1.0 / math.log(n) ** 3
    rs = math.ceil(30.0 / (eps * p))
    return NibbleSchedule(eps=eps, n=n, p=p, delta=eps**5, r_star=rs, t_star=rs, mode=THEORY)


def make_practical_schedule(eps: float, n: int, p: float, r_star: int, t_star: int) -> NibbleSchedule:
    """Desk-scale schedule with user-chosen ``p``, ``r*``, ``t*`` and the same formula shapes."""
    if not 0 < eps < 1:
        raise ScheduleError(f"eps must lie in (0, 1), got {eps}")
    if not 0 < p < 1:
        raise ScheduleError(f"p must lie in (0, 1), got {p}")
    if r_star < 1 or t_star < 1:
        raise ScheduleError("r_star and t_star must be >= 1")
    if math.floor(p * n) < 1:
        raise ScheduleError(f"floor(p*n) = floor({p}*{n}) = 0: round 1 would grow no transversals")
    return NibbleSchedule(eps=eps, n=n, p=p, delta=eps**5, r_star=r_star, t_star=t_star, mode=PRACTICAL)


# -- monitor thresholds -------------------------------------------------


@dataclass(frozen=True)
class MonitorConfig:
    """Thresholds for the per-iteration statistical monitors.

    ``enforce`` names the monitors whose failure makes an iteration be
    re-drawn; the others are only reported.  ``degree_scale`` multiplies the
    degree bound ``D_r(t)`` (values below 1 are useful for fault injection).
    """

    log_n: float
    deg_threshold_c3: float
    deg_threshold_small: float
    crowd_bound: float
    retry_budget: int = 8
    statistical_quantile: float = 0.99
    sample_size: int = 4096
    enforce: frozenset = field(default_factory=frozenset)
    degree_scale: float = 1.0
    exhaustive: bool = False

    def size_slack(self, p_r: float, s: float | np.ndarray) -> float | np.ndarray:
        return self.log_n * np.sqrt(p_r * np.asarray(s, dtype=np.float64))

    @classmethod
    def for_schedule(cls, sched: NibbleSchedule, **overrides) -> "MonitorConfig":
        """Theory thresholds are powers of ``ln n``; practical mode lowers the C3
        threshold to ``1/p^2`` since no desk-scale degree reaches ``ln^15 n``."""
        ln = math.log(max(sched.n, 3))
        if sched.mode == THEORY:
            base = dict(log_n=ln, deg_threshold_c3=ln**15, deg_threshold_small=ln**5, crowd_bound=ln**2,
                        enforce=frozenset(ALL_MONITORS))
        else:
            base = dict(log_n=ln, deg_threshold_c3=1.0 / sched.p**2 if sched.p > 0 else math.inf, deg_threshold_small=ln**5,
                        crowd_bound=ln**2)
        base.update(overrides)
        base["enforce"] = frozenset(base.get("enforce", ()))
        unknown = base["enforce"] - set(ALL_MONITORS)
        if unknown:
            raise ValueError(f"unknown monitors {sorted(unknown)}")
        return cls(**base)


ALL_MONITORS = ("C1", "size_band", "C2", "C3", "C4", "crowding", "uniform_deletion")


# -- schedule relation checks -------------------------------------------------


@dataclass
class ClauseResult:
    clause: str
    values: dict
    passed: bool | None  # None for informational (asymptotic) clauses


@dataclass
class ObservationReport:
    eps: float
    n: int
    clauses: list[ClauseResult]

    @property
    def passed(self) -> bool:
        return all(c.passed is not False for c in self.clauses)

    def clause(self, name: str) -> ClauseResult:
        for c in self.clauses:
            if c.clause == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "n": self.n,
            "passed": self.passed,
            "clauses": [{"clause": c.clause, "passed": c.passed, "values": c.values} for c in self.clauses],
        }

    def to_text(self) -> str:
        lines = [f"schedule check  eps={self.eps}  n={self.n}"]
        for c in self.clauses:
            flag = "info" if c.passed is None else ("PASS" if c.passed else "FAIL")
            vals = ", ".join(f"{k}={_fmt(v)}" for k, v in c.values.items())
            lines.append(f"  ({c.clause:>3}) {flag:4}  {vals}")
        lines.append(f"  overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _ratio_v(sched: NibbleSchedule, r: int) -> float:
    """log of D_r(t*) / (S_r^-(t*) - p S_r(0)); +inf when the denominator is <= 0."""
    t = sched.t_star
    log_num = sched.log_D(r, t)
    # S^-(t*) - p S(0) = S(0) * (exp(t log(1-p_r-p^2)) - p)
    a = t * math.log1p(-sched.p_r(r) - sched.p**2)
    if a <= math.log(sched.p):
        return math.inf
    log_den = sched.log_S0(r) + a + math.log1p(-sched.p * math.exp(-a))
    return log_num - log_den


def validate_observation(sched: NibbleSchedule) -> ObservationReport:
    """Numerically evaluate the five schedule relations.

    ``p_r`` and the clause (v) ratio are increasing in ``r``, so the concrete
    clauses are checked at the endpoints ``r = 1`` and ``r = r*`` only.
    """
    e, p, n, rs, ts = sched.eps, sched.p, sched.n, sched.r_star, sched.t_star
    out: list[ClauseResult] = []

    # (i) (1-3p)^t stays bounded below; asymptotic, report log values (the powers underflow)
    log_i = ts * math.log1p(-3 * p) if 3 * p < 1 else -math.inf
    out.append(ClauseResult("i", {"log (1-3p)^t*": log_i, "-6 p t*": -6 * p * ts}, None))

    # (ii) (1-eps) p <= p_r <= (1 - 2eps/3) p
    p1, prs = sched.p_r(1), sched.p_r(rs)
    lower_ok = (1 - e) * p <= p1 * (1 + 1e-12)
    upper_ok = prs <= (1 - 2 * e / 3) * p
    chain = (1 - e) * math.exp(60 * e**2)
    out.append(ClauseResult(
        "ii",
        {"p_1/p": p1 / p, "p_r*/p": prs / p, "upper": 1 - 2 * e / 3,
         "(1-eps)e^(60eps^2)": chain, "chain_holds": chain <= 1 - 2 * e / 3},
        lower_ok and upper_ok,
    ))

    # (iii) D_r(t)/S^-_r(t) <= D_r(0)/S_r(0) <= 1
    factor = (1 - p + e * p / 2) / (1 - prs - p**2)
    ratio0 = prs / p
    out.append(ClauseResult("iii", {"D0/S0 at r*": ratio0, "per-iteration factor at r*": factor},
                            ratio0 <= 1 and factor <= 1))

    # (iv) n >= S^-_r(t) >= D_r(t) = Omega(n); asymptotic lower bound, report values
    out.append(ClauseResult(
        "iv",
        {"log(D_r*(t*)/n)": sched.log_D(rs, ts) - math.log(n),
         "log(S^-_1(0)/n)": sched.log_S_minus(1, 0) - math.log(n)},
        None,
    ))

    # (v) D_r(t*) / (S^-_r(t*) - p S_r(0)) < 1/(2e); the denominator is positive only when
    # (1-p_r-p^2)^t* > p, so both that margin and the intermediate D/S^- < 1/(4e) are reported
    lr1, lrs = _ratio_v(sched, 1), _ratio_v(sched, rs)
    bound = 1 / (2 * math.e)
    margin = ts * math.log1p(-prs - p**2) - math.log(p)
    out.append(ClauseResult("v", {"ratio at r=1": math.exp(lr1) if lr1 < 700 else math.inf,
                                  "ratio at r*": math.exp(lrs) if lrs < 700 else math.inf,
                                  "bound": bound,
                                  "log(S^-(t*)/(p S(0))) at r*": margin,
                                  "D(t*)/S^-(t*) at r*": math.exp(sched.log_D(rs, ts) - sched.log_S_minus(rs, ts)),
                                  "1/(4e)": 1 / (4 * math.e)},
                            lrs < math.log(bound)))
    return ObservationReport(eps=e, n=n, clauses=out)
