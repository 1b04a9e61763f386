"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 infeasible or partial result
(whatever was found is still written), 4 budget exhausted.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .apps import SolveConfig, clique_pack, pack_list_colorings
from .graph import (GENERATORS, GraphFormatError, dumps_graph, load_graph, load_list_assignment)
from .lll import GuardExceeded
from .nibble import TRACE_COLUMNS, RetryPolicy, pack
from .oracle import BUDGET, OK, exists_transversal, max_disjoint_transversals, verify_packing
from .reduce import HALVE_PROPERTIES, SPLIT_PROPERTIES, SchedulePolicy, reduce_and_pack
from .rng import PRNG_NAME
from .schedule import (ALL_MONITORS, PRACTICAL, THEORY, MonitorConfig, ScheduleError, make_practical_schedule,
                       make_schedule, validate_observation)

EXIT_OK, EXIT_INPUT, EXIT_PARTIAL, EXIT_BUDGET = 0, 2, 3, 4

PACKING_FORMAT = "itpack-packing/1"
CLIQUES_FORMAT = "itpack-cliques/1"
COLORINGS_FORMAT = "itpack-colorings/1"

# argparse destinations that never enter the embedded config
_NOT_CONFIG = {"func", "input", "output", "trace", "figure", "workers", "verbose"}

log = logging.getLogger("itpack")


class InputError(Exception):
    pass


def _json_default(o: Any):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, (np.ndarray, tuple, set, frozenset)):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, default=_json_default) + "\n"


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _status_code(status: str) -> int:
    if status == OK:
        return EXIT_OK
    if status == BUDGET:
        return EXIT_BUDGET
    return EXIT_PARTIAL


def _config(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIG}


def _envelope(fmt: str, args: argparse.Namespace, raw: bytes) -> dict:
    return {
        "format": fmt,
        "tool": {"name": "itpack", "version": __version__, "prng": PRNG_NAME},
        "command": args.command,
        "config": _config(args),
        "seed": args.seed,
        "input_sha256": hashlib.sha256(raw).hexdigest(),
    }


def _names(text: str, allowed: Sequence[str], what: str) -> tuple[str, ...]:
    if text.strip().lower() in ("", "none"):
        return ()
    names = tuple(x.strip() for x in text.split(",") if x.strip())
    bad = [x for x in names if x not in allowed]
    if bad:
        raise InputError(f"unknown {what} {bad}; choose from {list(allowed)}")
    return names


def _schedule_policy(args: argparse.Namespace) -> SchedulePolicy:
    if args.mode == THEORY and (args.p is not None or args.rounds is not None or args.iters is not None):
        raise InputError("--p/--rounds/--iters belong to practical mode")
    return SchedulePolicy(
        mode=args.mode,
        p=args.p if args.p is not None else 0.25,
        r_star=args.rounds,
        t_star=args.iters if args.iters is not None else 10,
        retry_budget=args.retry_budget,
        enforce=_names(args.enforce, ALL_MONITORS, "monitors"),
    )


def write_trace(path: str, rows: Sequence[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(TRACE_COLUMNS), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: r[c] for c in TRACE_COLUMNS})


def read_trace(path: str) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _emit_trace(args: argparse.Namespace, rows: Sequence[dict]) -> None:
    if args.trace:
        write_trace(args.trace, rows)
    if args.figure:
        from .plotting import plot_trace

        plot_trace(rows, args.figure, title=f"itpack {args.command} (seed {args.seed})")


def _report_status(status: str, count: int, what: str) -> None:
    print(f"{count} {what}; status {status}", file=sys.stderr)


# -- subcommands -----------------------------------------------------------------


def cmd_gen(args: argparse.Namespace) -> int:
    name = args.generator
    try:
        if name == "random":
            g = GENERATORS[name](args.k, args.n, args.max_deg, args.local, args.seed, args.edges)
        elif name == "yuster":
            g = GENERATORS[name](args.k, args.n, args.seed)
        elif name in ("cliques-extremal",):
            g = GENERATORS[name](args.n)
        elif name == "avg-degree":
            g = GENERATORS[name](args.n, args.eps)
        else:
            g = GENERATORS[name](args.k, args.n)
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    _write(args.output, dumps_graph(g) + "\n")
    return EXIT_OK


def _solve_pack(args: argparse.Namespace, raw: bytes) -> tuple[dict, int, list]:
    g = load_graph(raw)
    n = min(g.sizes) if g.k else 0
    policy = _schedule_policy(args)
    if n < 1:
        raise InputError("instance has an empty part")
    if args.mode == THEORY:
        sched = make_schedule(args.eps, n)
    else:
        sched = make_practical_schedule(args.eps, n, policy.p, policy.r_star or n, policy.t_star)
    mon = MonitorConfig.for_schedule(sched, retry_budget=args.retry_budget, enforce=policy.enforce)
    retry = RetryPolicy.for_mode(sched.mode, retry_budget=args.retry_budget)
    pk = pack(g, sched, mon, retry, seed=args.seed, workers=args.workers)
    return _packing_doc(args, raw, g.k, pk), _status_code(pk.status), pk.trace


def _packing_doc(args, raw, k, pk) -> dict:
    doc = _envelope(PACKING_FORMAT, args, raw)
    doc.update(status=pk.status, count=pk.count, transversals=pk.rows(k), diagnostics=pk.diagnostics)
    return doc


def cmd_pack(args: argparse.Namespace) -> int:
    raw = _read(args.input)
    doc, code, trace = _solve_pack(args, raw)
    _write(args.output, dumps(doc))
    _emit_trace(args, trace)
    _report_status(doc["status"], doc["count"], "transversals")
    return code


def cmd_reduce_pack(args: argparse.Namespace) -> int:
    raw = _read(args.input)
    g = load_graph(raw)
    pk = reduce_and_pack(
        g, args.eps, args.gamma, _schedule_policy(args), seed=args.seed, workers=args.workers,
        split_checks=_names(args.split_checks, SPLIT_PROPERTIES, "split checks"),
        halve_checks=_names(args.halve_checks, HALVE_PROPERTIES, "halving checks"),
    )
    doc = _packing_doc(args, raw, g.k, pk)
    _write(args.output, dumps(doc))
    _emit_trace(args, pk.trace)
    _report_status(pk.status, pk.count, "transversals")
    return _status_code(pk.status)


def _solve_cfg(args: argparse.Namespace) -> SolveConfig:
    return SolveConfig(
        method=args.method, eps=args.eps, gamma=args.gamma, schedule=_schedule_policy(args), seed=args.seed,
        workers=args.workers,
        split_checks=_names(args.split_checks, SPLIT_PROPERTIES, "split checks"),
        halve_checks=_names(args.halve_checks, HALVE_PROPERTIES, "halving checks"),
    )


def cmd_clique_pack(args: argparse.Namespace) -> int:
    raw = _read(args.input)
    g = load_graph(raw)
    cp = clique_pack(g, args.eps, args.delta, _solve_cfg(args))
    doc = _envelope(CLIQUES_FORMAT, args, raw)
    doc.update(status=cp.status, count=cp.count, cliques=[list(c) for c in cp.cliques], diagnostics=cp.diagnostics)
    _write(args.output, dumps(doc))
    _report_status(cp.status, cp.count, "cliques")
    return _status_code(cp.status)


def cmd_list_color(args: argparse.Namespace) -> int:
    raw = _read(args.input)
    la = load_list_assignment(raw)
    cp = pack_list_colorings(la, _solve_cfg(args))
    doc = _envelope(COLORINGS_FORMAT, args, raw)
    doc.update(cp.to_dict(), count=cp.count, diagnostics=cp.diagnostics)
    _write(args.output, dumps(doc))
    _report_status(cp.status, cp.count, "colorings")
    return _status_code(cp.status)


def cmd_oracle(args: argparse.Namespace) -> int:
    g = load_graph(_read(args.input))
    try:
        if args.query == "exists":
            t = exists_transversal(g, node_limit=args.node_limit)
            if t is None:
                print("no transversal")
                return EXIT_PARTIAL
            _write(args.output, dumps({"transversal": t.as_row(g.k)}))
            return EXIT_OK
        count, pk = max_disjoint_transversals(g, node_limit=args.node_limit)
    except GuardExceeded as exc:
        print(f"guard exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    _write(args.output, dumps({"count": count, "transversals": pk.rows(g.k)}))
    return EXIT_OK if count else EXIT_PARTIAL


def cmd_validate(args: argparse.Namespace) -> int:
    raw = _read(args.input)
    g = load_graph(raw)
    try:
        doc = json.loads(_read(args.packing))
        rows = doc["transversals"]
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{args.packing}: not a packing file ({exc})") from exc
    want = doc.get("input_sha256")
    if want and want != hashlib.sha256(raw).hexdigest():
        print("warning: packing was produced from a different instance file", file=sys.stderr)
    problems = verify_packing(g, rows)
    for v in problems:
        print(v)
    if problems:
        return EXIT_INPUT
    print(f"ok: {len(rows)} disjoint independent transversals")
    return EXIT_OK


def cmd_schedule_check(args: argparse.Namespace) -> int:
    rep = validate_observation(make_schedule(args.eps, args.n))
    _write(args.output, dumps(rep.to_dict()) if args.json else rep.to_text() + "\n")
    return EXIT_OK if rep.passed else EXIT_PARTIAL


def cmd_report(args: argparse.Namespace) -> int:
    from .plotting import plot_trace

    try:
        rows = read_trace(args.input)
    except OSError as exc:
        raise InputError(f"cannot read {args.input}: {exc.strerror}") from exc
    missing = [c for c in TRACE_COLUMNS if rows and c not in rows[0]]
    if missing:
        raise InputError(f"{args.input}: missing trace columns {missing}")
    plot_trace(rows, args.output, title=args.title)
    return EXIT_OK


_SOLVERS = {"pack": cmd_pack, "reduce-pack": cmd_reduce_pack, "clique-pack": cmd_clique_pack,
            "list-color": cmd_list_color}


def cmd_rerun(args: argparse.Namespace) -> int:
    """Re-run the command and config embedded in an output file against an instance."""
    try:
        doc = json.loads(_read(args.result))
        command, config = doc["command"], doc["config"]
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{args.result}: no embedded config ({exc})") from exc
    if command not in _SOLVERS:
        raise InputError(f"cannot rerun command {command!r}")
    ns = build_parser().parse_args([command, args.input])
    for k, v in config.items():
        setattr(ns, k, v)
    ns.output, ns.trace, ns.figure, ns.workers = args.output, None, None, args.workers
    return _SOLVERS[command](ns)


# -- parser ----------------------------------------------------------------------


def _add_solver_args(p: argparse.ArgumentParser, gamma: bool = False, method: bool = False) -> None:
    p.add_argument("input", help="instance JSON")
    p.add_argument("-o", "--output", help="result JSON (default: stdout)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=[PRACTICAL, THEORY], default=PRACTICAL)
    p.add_argument("--eps", type=float, default=0.1)
    g = p.add_argument_group("practical mode")
    g.add_argument("--p", type=float, default=None, help="activation probability (default 0.25)")
    g.add_argument("--rounds", type=int, default=None, help="r* (default: the smallest part size)")
    g.add_argument("--iters", type=int, default=None, help="t* (default 10)")
    p.add_argument("--retry-budget", type=int, default=8)
    p.add_argument("--enforce", default="", help="comma-separated monitors whose failure forces a retry")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--trace", help="per-iteration CSV trace")
    p.add_argument("--figure", help="render the trace to this image file")
    if gamma:
        p.add_argument("--gamma", type=float, default=0.25)
        p.add_argument("--split-checks", default=",".join(SPLIT_PROPERTIES),
                       help="split properties to enforce, or 'none'")
        p.add_argument("--halve-checks", default=",".join(HALVE_PROPERTIES),
                       help="halving properties to enforce, or 'none'")
    if method:
        p.add_argument("--method", choices=["auto", "direct", "reduce"], default="auto")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="itpack", description="Pack disjoint independent transversals.")
    ap.add_argument("--version", action="version", version=f"itpack {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an instance")
    p.add_argument("generator", choices=sorted(GENERATORS))
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--max-deg", type=int, default=0)
    p.add_argument("--local", type=int, default=0)
    p.add_argument("--edges", type=int, default=None, help="target edge count (random)")
    p.add_argument("--eps", default="1/2", help="avg-degree: k = (1-eps) n")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("pack", help="nibble packing")
    _add_solver_args(p)
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("reduce-pack", help="local-degree reduction, then packing")
    _add_solver_args(p, gamma=True)
    p.set_defaults(func=cmd_reduce_pack)

    p = sub.add_parser("clique-pack", help="disjoint cliques with one vertex per part")
    _add_solver_args(p, gamma=True, method=True)
    p.add_argument("--delta", type=float, default=0.1)
    p.set_defaults(func=cmd_clique_pack)

    p = sub.add_parser("list-color", help="disjoint proper list colourings")
    _add_solver_args(p, gamma=True, method=True)
    p.set_defaults(func=cmd_list_color)

    p = sub.add_parser("oracle", help="exact answers for small instances")
    p.add_argument("query", choices=["exists", "max"])
    p.add_argument("input")
    p.add_argument("--node-limit", type=int, default=1_000_000)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("validate", help="check a packing file against an instance")
    p.add_argument("input")
    p.add_argument("packing")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("schedule", help="schedule utilities")
    ssub = p.add_subparsers(dest="action", required=True)
    c = ssub.add_parser("check", help="evaluate the schedule relations")
    c.add_argument("--eps", type=float, required=True)
    c.add_argument("--n", type=lambda x: int(float(x)), required=True)
    c.add_argument("--json", action="store_true")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_schedule_check)

    p = sub.add_parser("report", help="render figures from a trace CSV")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--title")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("rerun", help="reproduce a result file from its embedded config")
    p.add_argument("result")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_rerun)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, GraphFormatError, ScheduleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
