"""Command line: ``recmarl run|verify|plot``.

Exit codes: 0 ok, 1 validation or usage error, 2 runtime failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from recmarl.experiment.config import ConfigError, load, resolve
from recmarl.experiment.plot import PlotUsageError, plot
from recmarl.experiment.runner import RunFailure, output_root, run_experiment
from recmarl.experiment.verify import SUITES, run_suite

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3

log = logging.getLogger("recmarl")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="recmarl", description="Distributed policy-gradient experiments on networked MDPs.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train and evaluate every learner of a config")
    run.add_argument("config", help="config path or bundled config name")
    run.add_argument("--seed-override", type=int, nargs="+", metavar="SEED", help="replace trial.seeds")
    run.add_argument("--threads", type=int, default=1, help="worker processes (seeds run in parallel)")
    run.add_argument("--out-dir", help="output root (default: trial.output_dir, $RECMARL_OUT, ./runs)")

    ver = sub.add_parser("verify", help="run oracle certification suites")
    ver.add_argument("suite", choices=SUITES + ("all",))
    ver.add_argument("--out-dir", help="directory for the JSON report")

    pl = sub.add_parser("plot", help="plot metric files matching a glob")
    pl.add_argument("pattern", help="glob of per-seed metric CSVs, e.g. 'runs/x/**/seed_*.csv'")
    pl.add_argument("output", help="SVG path")
    return p


def _run(args) -> int:
    if args.threads < 1:
        log.error("--threads must be at least 1")
        return EXIT_VALIDATION
    cfg = load(resolve(args.config))
    results = run_experiment(cfg, args.seed_override, args.threads, args.out_dir, log=log.info)
    for label, recs in results.items():
        finals = [r.final_metric() for r in recs]
        print(f"{label}: mean final avg reward {sum(finals) / len(finals):.4f} over {len(finals)} seed(s)")
    print(f"wrote {output_root(args.out_dir, cfg) / cfg.name}")
    return EXIT_OK


def _verify(args) -> int:
    reports = run_suite(args.suite)
    out = output_root(args.out_dir) / f"verify_{args.suite}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    payload = {"suite": args.suite, "passed": all(r.passed for r in reports), "reports": [r.as_dict() for r in reports]}
    out.write_text(json.dumps(payload, indent=2) + "\n")
    for rep in reports:
        for c in rep.checks:
            print(f"[{'PASS' if c.passed else 'FAIL'}] {rep.suite}.{c.name}: {c.measured:.3g} (threshold {c.threshold:g})")
    print(f"report: {out}")
    return EXIT_OK if payload["passed"] else EXIT_VERIFY


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "verify":
            return _verify(args)
        print(f"wrote {plot(args.pattern, Path(args.output))}")
        return EXIT_OK
    except (ConfigError, PlotUsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except RunFailure as exc:
        print(f"error: {exc}; completed seeds were written", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # anything else is a runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
