"""Command line interface: run scenarios, sweep the corpus, bench backends.

    overrun run <file|corpus:name> --backend bounds --policy context
    overrun corpus --all --format json --csv matrix.csv --plot matrix.png
    overrun bench --op strlen --lengths 10,100,1000 --backend bounds,shadow

Exit codes: 0 when every expectation held, 1 when one failed, 2 for usage
or input errors.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

from .arena import ConfigError, OffsetOverflow
from .bench import BENCH_OPS, DEFAULT_LENGTHS, bench_size_right
from .libc import BadCall, OverlapError
from .scenario import (
    BACKEND_CHOICES,
    CORPUS_NAMES,
    POLICY_CHOICES,
    Interpreter,
    ParseError,
    corpus_scenario,
    parse,
    run_matrix,
)

_INPUT_ERRORS = (ParseError, ConfigError, OffsetOverflow, BadCall, OverlapError)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="overrun",
        description="Buffer-overflow laboratory: scenarios, corpus matrix, and backend benchmarks.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario file or corpus:<name>")
    run_p.add_argument("scenario", help="path to a .scn file, or corpus:<name>")
    run_p.add_argument("--backend", choices=BACKEND_CHOICES, default="bounds")
    run_p.add_argument("--policy", choices=POLICY_CHOICES, default="context")
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--redzone", type=int, default=16)
    run_p.add_argument("--format", choices=("text", "json"), default="text")

    corpus_p = sub.add_parser("corpus", help="list the corpus or run the full matrix")
    corpus_p.add_argument("--all", action="store_true", help="run scenarios x backends x policies")
    corpus_p.add_argument("--seed", type=int, default=0)
    corpus_p.add_argument("--redzone", type=int, default=16)
    corpus_p.add_argument("--format", choices=("text", "json"), default="text")
    corpus_p.add_argument("--csv", metavar="FILE", help="also write the matrix as CSV")
    corpus_p.add_argument("--plot", metavar="FILE", help="also render the outcome grid")

    bench_p = sub.add_parser("bench", help="measure introspection cost per call")
    bench_p.add_argument("--op", choices=BENCH_OPS, default="strlen")
    bench_p.add_argument(
        "--lengths",
        default=",".join(str(n) for n in DEFAULT_LENGTHS),
        help="comma-separated string lengths",
    )
    bench_p.add_argument(
        "--backend",
        default="bounds,shadow",
        help="bounds, shadow, or a comma-separated list of both",
    )
    bench_p.add_argument("--reps", type=int, default=5)
    bench_p.add_argument("--redzone", type=int, default=16)
    bench_p.add_argument("--format", choices=("text", "json"), default="text")
    bench_p.add_argument("--csv", metavar="FILE", help="also write results as CSV")
    bench_p.add_argument("--plot", metavar="FILE", help="also render the cost curve")
    return p


# ----------------------------------------------------------------------
# run


def _load_scenario(spec: str):
    if spec.startswith("corpus:"):
        return corpus_scenario(spec.split(":", 1)[1])
    path = Path(spec)
    return parse(path.read_text("utf-8"), name=path.stem)


def _format_run_text(report, peeks) -> str:
    lines = [
        f"scenario: {report.name}",
        f"backend: {report.config['backend_label']}    policy: {report.policy}    "
        f"redzone: {report.config['redzone']}    seed: {report.config['seed']}",
    ]
    for name, off, data in peeks:
        lines.append(f"peek {name}+{off}: {data.hex()} {data!r}")
    if report.events:
        lines.append("events:")
        lines.extend(f"  [{e.kind.value}] {e.site}: {e.detail}" for e in report.events)
    else:
        lines.append("events: none")
    c = report.counters
    lines.append(
        f"counters: shadow_reads={c.shadow_reads} metadata_lookups={c.metadata_lookups} "
        f"bytes_clamped={c.bytes_clamped}"
    )
    if report.config["conservative_estimates_seen"]:
        lines.append("note: conservative size estimates were used; clamps may land in padding")
    if report.expectation_failures:
        lines.append(f"expectations: FAILED_EXPECTATION ({report.expectations_checked} checked)")
        lines.extend(f"  {f}" for f in report.expectation_failures)
    else:
        lines.append(f"expectations: {report.expectations_checked} checked, all held")
    lines.append(f"outcome: {report.outcome.value}")
    return "\n".join(lines)


def _cmd_run(args) -> int:
    scenario = _load_scenario(args.scenario)
    interp = Interpreter(
        scenario, args.backend, args.policy, seed=args.seed, redzone=args.redzone
    )
    report = interp.run()
    if args.format == "json":
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(_format_run_text(report, interp.peeks))
    return 0 if report.all_expectations_held else 1


# ----------------------------------------------------------------------
# corpus


def _event_counts(report) -> dict:
    counts: dict[str, int] = {}
    for e in report.events:
        counts[e.kind.value] = counts.get(e.kind.value, 0) + 1
    return dict(sorted(counts.items()))


def _matrix_rows(entries) -> list[dict]:
    rows = []
    for e in entries:
        rows.append(
            {
                "scenario": e.scenario,
                "backend": e.backend,
                "policy": e.policy,
                "outcome": e.report.outcome.value,
                "expected": None if e.expected is None else e.expected.value,
                "matched": e.matched,
                "expectations_checked": e.report.expectations_checked,
                "expectation_failures": list(e.report.expectation_failures),
                "counters": e.report.counters.as_dict(),
                "event_counts": _event_counts(e.report),
            }
        )
    return rows


def _cmd_corpus(args) -> int:
    if not args.all:
        if args.format == "json":
            print(json.dumps({"scenarios": list(CORPUS_NAMES)}, indent=2))
        else:
            print("bundled scenarios (use: overrun run corpus:<name>):")
            for name in CORPUS_NAMES:
                print(f"  {name}")
        return 0

    entries = run_matrix(seed=args.seed, redzone=args.redzone)
    rows = _matrix_rows(entries)
    mismatched = [r for r in rows if r["matched"] is False]
    failed = [r for r in rows if r["expectation_failures"]]
    if args.format == "json":
        doc = {
            "seed": args.seed,
            "redzone": args.redzone,
            "matrix": rows,
            "summary": {
                "runs": len(rows),
                "outcome_mismatches": len(mismatched),
                "expectation_failures": len(failed),
            },
        }
        print(json.dumps(doc, indent=2))
    else:
        width = max(len(r["scenario"]) for r in rows)
        print(f"{'scenario':<{width}}  {'backend':<7}  {'policy':<10}  {'outcome':<19}  ok")
        for r in rows:
            ok = "yes" if (r["matched"] and not r["expectation_failures"]) else "NO"
            print(
                f"{r['scenario']:<{width}}  {r['backend']:<7}  {r['policy']:<10}  "
                f"{r['outcome']:<19}  {ok}"
            )
        print(
            f"{len(rows)} runs, {len(mismatched)} outcome mismatches, "
            f"{len(failed)} runs with failed expectations"
        )
    if args.csv:
        _write_matrix_csv(rows, args.csv)
    if args.plot:
        from . import plotting

        plotting.plot_corpus_matrix(entries, args.plot)
    return 0 if not mismatched and not failed else 1


def _write_matrix_csv(rows, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(
            [
                "scenario",
                "backend",
                "policy",
                "outcome",
                "expected",
                "matched",
                "shadow_reads",
                "metadata_lookups",
                "bytes_clamped",
            ]
        )
        for r in rows:
            w.writerow(
                [
                    r["scenario"],
                    r["backend"],
                    r["policy"],
                    r["outcome"],
                    r["expected"],
                    r["matched"],
                    r["counters"]["shadow_reads"],
                    r["counters"]["metadata_lookups"],
                    r["counters"]["bytes_clamped"],
                ]
            )


# ----------------------------------------------------------------------
# bench


def _cmd_bench(args) -> int:
    try:
        lengths = tuple(int(tok) for tok in args.lengths.split(",") if tok)
    except ValueError:
        print(f"bad --lengths value: {args.lengths!r}", file=sys.stderr)
        return 2
    backends = tuple(tok.strip() for tok in args.backend.split(",") if tok.strip())
    for b in backends:
        if b not in ("bounds", "shadow"):
            print(f"bench backend must be bounds or shadow, got {b!r}", file=sys.stderr)
            return 2
    results = []
    for b in backends:
        results.extend(bench_size_right(b, lengths, reps=args.reps, redzone=args.redzone))
    if args.format == "json":
        doc = {"op": args.op, "reps": args.reps, "results": [r.as_dict() for r in results]}
        print(json.dumps(doc, indent=2))
    else:
        print(f"{'backend':<8}  {'length':>7}  {'shadow_reads':>12}  {'lookups':>8}  {'us/call':>9}")
        for r in results:
            print(
                f"{r.backend:<8}  {r.string_length:>7}  {r.shadow_reads:>12}  "
                f"{r.metadata_lookups:>8}  {r.wall_time * 1e6:>9.2f}"
            )
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(
                ["function", "backend", "string_length", "shadow_reads", "metadata_lookups", "wall_time"]
            )
            for r in results:
                w.writerow(
                    [
                        r.function,
                        r.backend,
                        r.string_length,
                        r.shadow_reads,
                        r.metadata_lookups,
                        f"{r.wall_time:.9f}",
                    ]
                )
    if args.plot:
        from . import plotting

        plotting.plot_bench(results, args.plot)
    return 0


# ----------------------------------------------------------------------


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "corpus":
            return _cmd_corpus(args)
        return _cmd_bench(args)
    except _INPUT_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (FileNotFoundError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())
