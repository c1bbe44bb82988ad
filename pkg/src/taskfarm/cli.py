"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 deadlock (or a straggler under the
``error`` policy), 3 replay divergence. ``TASKFARM_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import reliability
from .protocol import MalformedMessage
from .simnet import (Equal, EventTrace, FirstDivergence, ScenarioError,
                     compare_traces, load_scenario, run_collecting)
from .simnet.trace import MAGIC

EXIT_OK, EXIT_INPUT, EXIT_DEADLOCK, EXIT_DIVERGED = 0, 1, 2, 3


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_INPUT


def _write_outputs(sc, result, out: Path, trace_format: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    if trace_format == "bin":
        (out / "trace.bin").write_bytes(result.trace.encode())
    else:
        (out / "trace.txt").write_text(result.trace.render_text(), encoding="utf-8")
    (out / "metrics.csv").write_text(result.metrics.runs_csv(sc.name), encoding="utf-8")
    (out / "summary.csv").write_text(result.metrics.summary_csv(sc.name), encoding="utf-8")
    (out / "utilization.csv").write_text(result.metrics.utilization_csv(), encoding="utf-8")
    for i, artifact in enumerate(result.artifacts, start=1):
        (out / f"run-{i}.out").write_bytes(artifact)


def _simulate_one(sc, out: Path, trace_format: str) -> tuple[int, str]:
    result, error = run_collecting(sc)
    _write_outputs(sc, result, out, trace_format)
    m = result.metrics
    line = (f"{sc.name} seed={sc.seed}: {m.runs_completed} run(s) completed, "
            f"{m.redundant_assignments} redundant assignment(s), {m.alarms} alarm(s), "
            f"{m.duplicate_outputs} duplicate(s), {m.stragglers} straggler(s)")
    if error is not None:
        return EXIT_DEADLOCK, f"{line}\n{type(error).__name__}: {error}"
    return EXIT_OK, line


def cmd_simulate(args) -> int:
    try:
        sc = load_scenario(args.scenario)
    except OSError as exc:
        return _fail(str(exc))
    except ScenarioError as exc:
        return _fail(f"{args.scenario}: {exc}")
    out = Path(args.out)
    if args.repeat <= 1:
        code, line = _simulate_one(sc, out, args.trace_format)
        print(line, file=sys.stderr if code else sys.stdout)
        return code
    batch = [sc.with_seed(sc.seed + i * args.seed_stride) for i in range(args.repeat)]
    dirs = [out / f"seed-{s.seed}" for s in batch]
    formats = [args.trace_format] * len(batch)
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_simulate_one, batch, dirs, formats))
    else:
        results = list(map(_simulate_one, batch, dirs, formats))
    for code, line in results:
        print(line, file=sys.stderr if code else sys.stdout)
    return max(code for code, _ in results)


def cmd_replay(args) -> int:
    try:
        sc = load_scenario(args.scenario)
        data = Path(args.trace).read_bytes()
    except OSError as exc:
        return _fail(str(exc))
    except ScenarioError as exc:
        return _fail(f"{args.scenario}: {exc}")
    result, _ = run_collecting(sc)
    if data.startswith(MAGIC):
        try:
            recorded = EventTrace.decode(data)
        except MalformedMessage as exc:
            return _fail(f"{args.trace}: {exc}")
        verdict = compare_traces(recorded, result.trace)
    else:
        try:
            lines = data.decode("utf-8").splitlines()
        except UnicodeDecodeError as exc:
            return _fail(f"{args.trace}: not a trace ({exc})")
        fresh = result.trace.render_text().splitlines()
        verdict = Equal()
        for i in range(max(len(lines), len(fresh))):
            if i >= len(lines) or i >= len(fresh) or lines[i] != fresh[i]:
                verdict = FirstDivergence(i)
                break
    if isinstance(verdict, Equal):
        print(f"replay equal: {len(result.trace)} records")
        return EXIT_OK
    print(f"replay diverged at record {verdict.index}", file=sys.stderr)
    return EXIT_DIVERGED


def _count_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("at least one n is required")
    return values


def cmd_reliability(args) -> int:
    if args.samples < 2:
        return _fail("--samples must be >= 2")
    bad = [n for n in args.n if n < 1]
    if bad:
        return _fail(f"--n values must be >= 1, got {bad[0]}")
    text = reliability.emit_curves(args.n, args.samples)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        sc = load_scenario(args.scenario)
    except OSError as exc:
        return _fail(str(exc))
    except ScenarioError as exc:
        return _fail(f"{args.scenario}: {exc}")
    print(f"{args.scenario}: ok (m={sc.m}, n={sc.n}, {sc.image_count} image(s), "
          f"{len(sc.faults)} fault(s), seed={sc.seed})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taskfarm", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario file")
    p.add_argument("scenario")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--trace-format", choices=("text", "bin"), default="bin")
    p.add_argument("--repeat", type=int, default=1, help="run N seeds in batch")
    p.add_argument("--seed-stride", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1, help="parallel processes for --repeat")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay", help="re-run a scenario and compare with a saved trace")
    p.add_argument("trace")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("reliability", help="series/parallel reliability curves as CSV")
    p.add_argument("--n", type=_count_list, default=[1, 2, 4, 8, 16])
    p.add_argument("--samples", type=int, default=101)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_reliability)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("TASKFARM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
