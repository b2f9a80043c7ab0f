"""Command-line front end: run policies or sweeps and write CSV / JSON results.

Exit status: 0 success, 1 usage error, 2 invalid scenario, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from .catalog import ScenarioError, default_scenario, validate_scenario
from .cost import CostBreakdown
from .engine import SWEEP_AXES, ConstraintViolation, RunReport, SweepRun, run, sweep
from .policy import PolicyKind

log = logging.getLogger("pfmcache")

CSV_HEADER = ["axis_value", "policy", "seed", "slot", *CostBreakdown.COMPONENTS, "total"]
EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    return f"{x:.9g}"


def _axis(value) -> str:
    return "" if value is None else _fmt(value)


def output_rows(runs: Sequence[SweepRun], per_slot: bool) -> list[list[str]]:
    """Long-format rows; per-slot output adds an ``avg`` row after each run's slots."""
    rows = []
    for r in runs:
        head = [_axis(r.axis_value), r.policy, str(r.seed)]
        if per_slot:
            for m in r.report.per_slot:
                c = m.cost
                rows.append(head + [str(m.slot)] + [_fmt(getattr(c, k)) for k in CSV_HEADER[4:]])
        comps = r.report.component_averages
        rows.append(head + ["avg"] + [_fmt(comps[k]) for k in CostBreakdown.COMPONENTS]
                    + [_fmt(r.report.average_total)])
    return rows


def render_csv(runs: Sequence[SweepRun], per_slot: bool) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerows(output_rows(runs, per_slot))
    return buf.getvalue()


def render_json(runs: Sequence[SweepRun]) -> str:
    """One top-level key per policy, each holding an array of runs in seed order."""
    out: dict[str, list] = {}
    for r in runs:
        entry = {"axis_value": r.axis_value, **r.report.to_dict()}
        out.setdefault(r.policy, []).append(entry)
    return json.dumps(out, indent=1) + "\n"


def emit_results(runs: Sequence[SweepRun], fmt: str, destination: str | Path) -> list[Path]:
    """Write results into directory ``destination``; returns the files written.

    ``csv`` writes ``summary.csv`` (one row per run) and ``per_slot.csv``
    (T + 1 rows per run); ``json`` writes ``results.json``.
    """
    if not runs:
        raise ValueError("no results to emit")
    dest = Path(destination)
    dest.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        files = {dest / "summary.csv": render_csv(runs, per_slot=False),
                 dest / "per_slot.csv": render_csv(runs, per_slot=True)}
    elif fmt == "json":
        files = {dest / "results.json": render_json(runs)}
    else:
        raise ValueError(f"unknown format {fmt!r}; expected csv or json")
    for path, text in files.items():
        path.write_text(text, encoding="utf-8")
    return list(files)


def emit_default_scenario(destination: str | Path) -> Path:
    path = Path(destination)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(default_scenario().to_dict(), indent=2) + "\n", encoding="utf-8")
    return path


def load_scenario(path: str | Path):
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario ({exc.strerror or exc})") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not a valid scenario document ({exc})") from exc
    try:
        return validate_scenario(raw)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pfmcache", description="Edge foundation-model caching simulator.")
    p.add_argument("--config", help="scenario JSON document (default: built-in default scenario)")
    p.add_argument("--policy", default="lc",
                   help="comma-separated policies: " + ",".join(k.value for k in PolicyKind))
    seeds = p.add_mutually_exclusive_group()
    seeds.add_argument("--seed", type=int, help="single seed (default: the scenario's seed)")
    seeds.add_argument("--seeds", type=int, help="run seeds 0..N-1")
    p.add_argument("--sweep", metavar="AXIS=V1,V2,...",
                   help="sweep one axis: " + ", ".join(SWEEP_AXES))
    p.add_argument("--out", default="results", help="output directory (default: results)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--emit-default", metavar="PATH", help="write the default scenario and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _parse_sweep(text: str) -> tuple[str, list[float]]:
    axis, sep, values = text.partition("=")
    axis = axis.strip()
    if not sep or not values.strip():
        raise UsageError(f"--sweep expects AXIS=V1,V2,..., got {text!r}")
    if axis not in SWEEP_AXES:
        raise UsageError(f"unknown sweep axis {axis!r}; valid axes: {', '.join(SWEEP_AXES)}")
    try:
        vals = [float(v) for v in values.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"--sweep values must be numbers ({exc})") from exc
    return axis, [int(v) if v.is_integer() else v for v in vals]


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        if args.emit_default:
            emit_default_scenario(args.emit_default)
            log.info("wrote %s", args.emit_default)
            return EXIT_OK
        try:
            kinds = [PolicyKind.parse(p) for p in args.policy.split(",") if p.strip()]
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        if not kinds:
            raise UsageError("--policy needs at least one name")
        if args.seeds is not None and args.seeds < 1:
            raise UsageError("--seeds must be >= 1")
        sweep_spec = _parse_sweep(args.sweep) if args.sweep else None

        scenario = load_scenario(args.config) if args.config else default_scenario()
        if args.seeds is not None:
            seeds = list(range(args.seeds))
        else:
            seeds = [scenario.seed if args.seed is None else args.seed]

        if sweep_spec:
            axis, values = sweep_spec
            report = sweep(scenario, kinds, axis, values, seeds)
            runs = list(report.runs)
        else:
            runs = [SweepRun(None, k.value, s, run(scenario, k, s)) for k in kinds for s in seeds]
        for path in emit_results(runs, args.format, args.out):
            log.info("wrote %s", path)
        return EXIT_OK
    except UsageError as exc:
        print(f"pfmcache: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioError as exc:
        print(f"pfmcache: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        # sweep values that break a field bound surface here
        print(f"pfmcache: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ConstraintViolation, OSError) as exc:
        print(f"pfmcache: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
