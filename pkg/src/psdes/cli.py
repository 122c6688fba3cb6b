"""Command-line entry point: ``psdes run | stats | potential``."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .config import ConfigError, load_config, with_overrides
from .harness import aggregate, load_results, run_experiment, save_run, write_reports
from .postselect import FConvention, PotentialKind, PotentialMetric, potential

METRIC_ALIASES = {
    "acc": PotentialKind.ACCURACY,
    "accuracy": PotentialKind.ACCURACY,
    "f": PotentialKind.F_SCORE,
    "f_score": PotentialKind.F_SCORE,
    "mcc": PotentialKind.MCC,
}


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    cfg = with_overrides(cfg, output_dir=args.out, master_seed=args.seed)
    started = time.time()

    def progress(i, total, out):
        path, rep, _, err = out
        status = "failed" if err else "ok"
        print(f"[{i}/{total}] {Path(path).stem} replication {rep}: {status} ({time.time() - started:.0f}s)", flush=True)

    store = run_experiment(cfg, jobs=args.jobs, progress=progress)
    raw = save_run(store, cfg, cfg.output_dir)
    for path, err in store.failures:
        print(f"failure: {path}: {err}", file=sys.stderr)
    if not store.records:
        print("no results produced", file=sys.stderr)
        return 1
    reports = aggregate(store, cfg.wilcoxon_alternative, cfg.zero_method)
    write_reports(reports, cfg.output_dir)
    print(f"raw scores: {raw}")
    print((Path(cfg.output_dir) / "summary.md").read_text())
    return 0


def _cmd_stats(args) -> int:
    store = load_results(args.results)
    out = args.out or str(Path(args.results).parent)
    reports = aggregate(store, args.alternative, args.zero_method)
    for path in write_reports(reports, out):
        print(path)
    return 0


def _cmd_potential(args) -> int:
    try:
        votes = [int(v) for v in args.votes.split(",") if v.strip()]
    except ValueError:
        print("votes must be comma-separated integers", file=sys.stderr)
        return 2
    if not votes:
        print("at least one vote is required", file=sys.stderr)
        return 2
    metric = PotentialMetric(METRIC_ALIASES[args.metric], args.f_convention)
    print(f"{potential(votes, metric):.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psdes", description="Post-selection dynamic ensemble selection")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the replication benchmark")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="output directory (overrides output_dir)")
    run.add_argument("--seed", type=int, help="master seed (overrides master_seed)")
    run.add_argument("--jobs", type=int, default=1)
    run.set_defaults(func=_cmd_run)

    stats = sub.add_parser("stats", help="recompute reports from a raw score CSV")
    stats.add_argument("--results", required=True)
    stats.add_argument("--out")
    stats.add_argument("--alternative", choices=["greater", "two_sided"], default="greater")
    stats.add_argument("--zero-method", choices=["wilcox", "pratt"], default="wilcox")
    stats.set_defaults(func=_cmd_stats)

    pot = sub.add_parser("potential", help="score a vote list")
    pot.add_argument("--votes", required=True, help="comma-separated class indices")
    pot.add_argument("--metric", choices=sorted(METRIC_ALIASES), default="acc")
    pot.add_argument("--f-convention", choices=[c.value for c in FConvention], default=FConvention.MAJORITY_LABEL.value)
    pot.set_defaults(func=_cmd_potential)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
