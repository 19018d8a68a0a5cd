"""Command-line entry point: ``bftlab run|sweep|fuzz|replay``.

Scenario arguments are either a file path or ``--preset <name>`` from the
bundled catalog; the two are interchangeable.  Exports go to ``--out`` or, if
unset, to ``$BFTLAB_OUT``; with neither, nothing is written.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

from .harness.campaign import FuzzSpec, campaign
from .harness.metrics import to_jsonl
from .harness.oracles import evaluate
from .harness.scenario import (
    EXIT_CONFIG,
    ScenarioError,
    ScenarioOutcome,
    load,
    run_scenario,
    write_outputs,
)
from .simnet import ConfigError, Trace, from_dict, run

EXIT_USAGE = 64
OUT_ENV = "BFTLAB_OUT"

PRESETS = (
    "happy_path_fhs",
    "happy_path_hotstuff",
    "aggqc_failover",
    "forking_sweep_hotstuff",
    "forking_sweep_fhs",
    "worstcase_rotation",
    "partition_fig8",
    "twins_safety",
    "liveness_roundrobin",
    "liveness_random",
)


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage, which collides with the safety code."""

    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def preset_path(name: str) -> Path:
    if name not in PRESETS:
        raise UsageError(f"unknown preset {name!r} (choose from {', '.join(PRESETS)})")
    return Path(str(resources.files("bftlab.presets").joinpath(f"{name}.yaml")))


def scenario_path(args: argparse.Namespace) -> Path:
    if args.preset and args.file:
        raise UsageError("give a scenario file or --preset, not both")
    if args.preset:
        return preset_path(args.preset)
    if not args.file:
        raise UsageError("a scenario file or --preset is required")
    return Path(args.file)


def out_dir(args: argparse.Namespace) -> str | None:
    return args.out or os.environ.get(OUT_ENV) or None


def format_table(rows: list[dict[str, Any]]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    cells = [[str(r.get(c, "")) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def emit_rows(rows: list[dict[str, Any]], fmt: str) -> None:
    flat = [{k: json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v for k, v in r.items()}
            for r in rows]
    sys.stdout.write(to_jsonl(rows) if fmt == "jsonl" else format_table(flat))


def summarize(outcome: ScenarioOutcome) -> str:
    bad_safety = sum(1 for r in outcome.results if not r.report.safety_ok)
    bad_live = sum(1 for r in outcome.results if not r.report.liveness_ok)
    return (f"{outcome.name}: {len(outcome.results)} run(s), safety failures {bad_safety}, "
            f"liveness failures {bad_live}, exit {outcome.exit_code}")


# -- subcommands -------------------------------------------------------------


def cmd_run(args: argparse.Namespace, sweep: bool) -> int:
    path = scenario_path(args)
    try:
        doc = load(path)
        if sweep and "sweep" not in doc.data:
            raise doc.error("not a sweep file: missing 'sweep' key")
        outcome = run_scenario(doc, args.seed)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    emit_rows(outcome.rows, args.format)
    dest = out_dir(args)
    if dest:
        write_outputs(outcome, dest, args.format)
    print(summarize(outcome), file=sys.stderr)
    return outcome.exit_code


def cmd_fuzz(args: argparse.Namespace) -> int:
    path = scenario_path(args)
    try:
        doc = load(path)
        spec = FuzzSpec.from_dict(doc.data.get("fuzz"))
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TypeError as exc:
        print(f"error: {path}: fuzz: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    start = args.seed or 0
    summary = campaign(doc.sim_data(), spec, range(start, start + args.seeds), workers=args.workers)
    text = json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    dest = out_dir(args)
    if dest:
        Path(dest).mkdir(parents=True, exist_ok=True)
        (Path(dest) / "fuzz.json").write_text(text)
    return summary.exit_code


def cmd_replay(args: argparse.Namespace) -> int:
    """Re-run the configuration stored in a trace up to an event index.

    The replayed records must equal the stored ones up to that event;
    otherwise the trace does not reproduce and the exit code is 4.  With a
    match, the exit code is the safety verdict on the prefix.
    """
    try:
        original = Trace.read(args.trace)
        cfg = from_dict(original.config)
    except (OSError, ValueError, KeyError, IndexError) as exc:
        print(f"error: {args.trace}: cannot read trace: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {args.trace}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    replay = run(cfg, until_event=args.until)
    want = [r for r in original if r["k"] != "end" and r.get("ev", 0) <= args.until]
    got = [r for r in replay if r["k"] != "end"]
    if want != got:
        first = next((i for i, (a, b) in enumerate(zip(want, got)) if a != b), min(len(want), len(got)))
        print(f"error: replay diverges from {args.trace} at record {first}", file=sys.stderr)
        return EXIT_CONFIG
    report = evaluate(replay)
    for r in got[-args.tail:] if args.tail else []:
        print(json.dumps(r, sort_keys=True))
    dest = out_dir(args)
    if dest:
        Path(dest).mkdir(parents=True, exist_ok=True)
        replay.write(Path(dest) / f"replay-{args.until}.jsonl")
    print(f"replayed {len(got)} records up to event {args.until}; safety "
          f"{'ok' if report.safety_ok else 'FAILED: ' + json.dumps(report.safety_counterexample)}",
          file=sys.stderr)
    return 0 if report.safety_ok else 2


# -- argument parsing ----------------------------------------------------------


def build_parser() -> Parser:
    common = Parser(add_help=False)
    common.add_argument("--out", help=f"export directory (default ${OUT_ENV})")
    common.add_argument("--seed", type=int, help="override the scenario seed (fuzz: first seed)")
    common.add_argument("--format", choices=("table", "jsonl"), default="table",
                        help="metrics as a table/CSV or as JSON records")

    def scenario_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("file", nargs="?", help="scenario YAML file")
        p.add_argument("--preset", help="bundled scenario name")

    parser = Parser(prog="bftlab", description="Consensus lab scenarios, sweeps, fuzzing and replay.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)
    scenario_args(sub.add_parser("run", parents=[common], help="run a scenario"))
    scenario_args(sub.add_parser("sweep", parents=[common], help="run a sweep file"))
    fz = sub.add_parser("fuzz", parents=[common], help="seeded fuzz campaign")
    scenario_args(fz)
    fz.add_argument("--seeds", type=int, required=True, help="number of campaign seeds")
    fz.add_argument("--workers", type=int, default=1)
    rp = sub.add_parser("replay", parents=[common], help="replay a trace up to an event")
    rp.add_argument("trace")
    rp.add_argument("--until", type=int, required=True, help="last event index to process")
    rp.add_argument("--tail", type=int, default=10, help="print this many final records")
    sub.add_parser("presets", help="list bundled presets")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("run", "sweep"):
            return cmd_run(args, args.command == "sweep")
        if args.command == "fuzz":
            if args.seeds < 1:
                raise UsageError("--seeds must be positive")
            return cmd_fuzz(args)
        if args.command == "replay":
            return cmd_replay(args)
        print("\n".join(PRESETS))
        return 0
    except UsageError as exc:
        print(f"bftlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
