"""Command-line front end: serve, check, run.

Every store flag is mirrored by a WEAKSTORE_-prefixed environment
variable (flags win): WEAKSTORE_ISOLATION, WEAKSTORE_SEED,
WEAKSTORE_LATEST_READS, WEAKSTORE_DELAY_MS, WEAKSTORE_DEFAULT_VALUE,
WEAKSTORE_BIND.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from .history import History, HistoryFormatError
from .isolation import LEVELS, satisfies
from .program import evaluate_assertions, observe, parse_program_json, run_program
from .reporting import RunRecord, summarize, write_report
from .store import StoreConfig
from .testkit import freeze_observable

_ENV_PREFIX = "WEAKSTORE_"


def _env(name: str, default: Optional[str] = None) -> Optional[str]:
    return os.environ.get(_ENV_PREFIX + name, default)


def _env_flag(name: str) -> bool:
    return (_env(name, "") or "").strip().lower() in ("1", "true", "yes", "on")


def _parse_scalar(text: str):
    """Default values come in as JSON scalars; bare words fall back to strings."""
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        return text
    if isinstance(value, (dict, list)):
        raise argparse.ArgumentTypeError("default value must be a scalar")
    return value


def _add_store_args(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--isolation",
        choices=sorted(LEVELS),
        default=_env("ISOLATION", "serializability"),
        help="isolation level the store simulates",
    )
    p.add_argument("--seed", type=int, default=int(_env("SEED", "0") or 0))
    p.add_argument(
        "--latest-reads",
        action="store_true",
        default=_env_flag("LATEST_READS"),
        help="restrict read candidates to each session's latest valid write",
    )
    p.add_argument("--delay-ms", type=int, default=int(_env("DELAY_MS", "0") or 0))
    p.add_argument(
        "--default-value",
        type=_parse_scalar,
        default=_parse_scalar(_env("DEFAULT_VALUE", "0") or "0"),
        help="initial value of every key (JSON scalar)",
    )


def _store_config(args: argparse.Namespace) -> StoreConfig:
    return StoreConfig(
        level=args.isolation,
        seed=args.seed,
        latest_per_session=args.latest_reads,
        delay_max_ms=args.delay_ms,
        default_value=args.default_value,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weakstore",
        description="mock transactional store that simulates weak isolation levels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve_p = sub.add_parser("serve", help="run the HTTP/JSON service")
    _add_store_args(serve_p)
    serve_p.add_argument("--bind", default=_env("BIND", "127.0.0.1:7474"))
    serve_p.add_argument("--begin-timeout", type=float, default=30.0)
    serve_p.add_argument(
        "--dump-history", metavar="PATH", help="write the final history JSON on shutdown"
    )

    check_p = sub.add_parser("check", help="check a history file against a level")
    check_p.add_argument("history_file")
    check_p.add_argument(
        "--isolation",
        choices=sorted(LEVELS),
        default=_env("ISOLATION", "serializability"),
    )

    run_p = sub.add_parser("run", help="run a program file many times and report")
    run_p.add_argument("program_file")
    _add_store_args(run_p)
    run_p.add_argument("--iterations", type=int, default=1000)
    run_p.add_argument(
        "--report-dir",
        metavar="DIR",
        help="write report.csv, summary.json and coverage.png here",
    )
    return parser


def cmd_serve(args: argparse.Namespace) -> int:
    from .server import serve

    config = _store_config(args)
    print(
        f"serving on {args.bind} (isolation={config.level}, seed={config.seed})",
        file=sys.stderr,
    )
    serve(
        config,
        bind=args.bind,
        begin_timeout=args.begin_timeout,
        dump_history_path=args.dump_history,
    )
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    try:
        with open(args.history_file, "r", encoding="utf-8") as f:
            history = History.parse_json(f.read())
    except OSError as exc:
        print(f"error: cannot read {args.history_file}: {exc}", file=sys.stderr)
        return 2
    except HistoryFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    verdict = satisfies(history, args.isolation)
    print(f"isolation: {args.isolation}")
    print(f"transactions: {len(history)}")
    if verdict:
        print("result: satisfied")
        print("witness-order: " + " ".join(str(t) for t in verdict.commit_order))
        return 0
    print("result: violation")
    print("detail: " + verdict.violation.describe())
    return 1


def cmd_run(args: argparse.Namespace) -> int:
    try:
        with open(args.program_file, "r", encoding="utf-8") as f:
            program = parse_program_json(f.read())
    except OSError as exc:
        print(f"error: cannot read {args.program_file}: {exc}", file=sys.stderr)
        return 2
    records: list[RunRecord] = []
    seen_states: set[tuple] = set()
    for i in range(args.iterations):
        seed = args.seed + i
        config = StoreConfig(
            level=args.isolation,
            seed=seed,
            latest_per_session=args.latest_reads,
            delay_max_ms=args.delay_ms,
            default_value=args.default_value,
        )
        history = run_program(program, config)
        observation = observe(program, history)
        outcomes = evaluate_assertions(program, observation)
        seen_states.add(freeze_observable(observation.vector))
        records.append(
            RunRecord(
                iteration=i + 1,
                seed=seed,
                observable=observation.vector,
                assertions=outcomes,
                distinct_states=len(seen_states),
            )
        )
    summary = summarize(records, args.isolation)
    if args.report_dir:
        paths = write_report(args.report_dir, records, summary)
        print(f"report written to {paths['csv']}, {paths['figure']}", file=sys.stderr)
    print(json.dumps(summary, indent=2))
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        return cmd_serve(args)
    if args.command == "check":
        return cmd_check(args)
    if args.command == "run":
        return cmd_run(args)
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
