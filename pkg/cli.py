"""
Command-line frontend.

    python cli.py run      --synth scenario.json --alg A_eps,A_eps_m --deadline 6 --out out/
    python cli.py sweep    --prices prices.csv --workload load.csv --alg offline,A --deadline 0-12
    python cli.py classify --jobs jobs.csv --k 10 --out out/ --workload-out classes.csv

Exit codes: 0 success, 1 run or ingestion failure (including deadline violations), 2 usage error.
"""
import argparse
import os
import sys
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config.presets import MARKET_SITES, get_sites
from config.settings import (
    DEFAULT_CAPACITY, DEFAULT_FILTER_K, DEFAULT_KMEANS_CLUSTERS, DEFAULT_MIGRATION_RATE_PER_1000KM, DEFAULT_SEED,
    DEFAULT_SLOT_SECONDS, configure_logging,
)
from database import Database
from src.errors import GlbError, IngestionError
from src.job_classifier import classify_jobs, jobs_to_workload
from src.model import CloudConfig, DeadlineMode, PriceTrace, WorkloadTrace
from src.predictor import PredictionMode, PredictionModel
from src.renderer import (
    render_reports_markdown, render_sweep_markdown, write_clusters, write_report, write_sweep,
)
from src.simulator import Algorithm, RunConfig, run, sweep
from src.synthesizer import SynthesisSpec, synthesize_traces
from src.trace_loader import load_jobs_csv, load_price_csv, load_workload_csv, write_workload_csv


EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
DEFAULT_RUN_DEADLINE = "6"
DEFAULT_SWEEP_DEADLINES = "0-12"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_deadlines(text: str) -> List[int]:
    """'0-12', '1,3,6' or a mix such as '0-3,6'."""
    values: List[int] = []
    for part in (p.strip() for p in str(text).split(",")):
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = (int(v) for v in part.split("-", 1))
                if hi < lo:
                    raise UsageError(f"empty deadline range '{part}'")
                values.extend(range(lo, hi + 1))
            else:
                values.append(int(part))
        except ValueError:
            raise UsageError(f"cannot parse deadline '{part}'")
    if not values:
        raise UsageError("at least one deadline is required")
    if min(values) < 0:
        raise UsageError("deadlines must be nonnegative")
    return list(dict.fromkeys(values))


def parse_algorithms(text: str) -> List[Algorithm]:
    names = [p.strip() for p in str(text).split(",") if p.strip()]
    if not names:
        raise UsageError("at least one algorithm is required")
    try:
        return list(dict.fromkeys(Algorithm.parse(n) for n in names))
    except GlbError as e:
        raise UsageError(str(e))


def parse_floats(text: str, what: str) -> Tuple[float, ...]:
    try:
        return tuple(float(p) for p in str(text).split(",") if p.strip())
    except ValueError:
        raise UsageError(f"cannot parse {what} '{text}'")


def load_migration_matrix(path: str) -> np.ndarray:
    """Square matrix CSV without header, one row per source data center."""
    if not os.path.exists(path):
        raise IngestionError("file not found", path)
    try:
        frame = pd.read_csv(path, header=None, dtype=float)
    except (ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IngestionError(f"migration matrix parse error: {e}", path) from e
    matrix = frame.to_numpy()
    if matrix.shape[0] != matrix.shape[1]:
        raise IngestionError(f"migration matrix must be square, got {matrix.shape}", path)
    return matrix


def _build_parser() -> _Parser:
    parser = _Parser(prog="cli.py", description="Geographical load balancing simulator")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add_inputs(p: argparse.ArgumentParser, deadline_default: str):
        p.add_argument("--prices", help="price CSV (day,slot,location,price)")
        p.add_argument("--workload", help="workload CSV (slot,load or slot,deadline_class,load)")
        p.add_argument("--jobs", help="jobs CSV, bucketed into slots")
        p.add_argument("--synth", help="synthesis spec JSON; replaces --prices/--workload")
        p.add_argument("--alg", default="greedy,A,A_eps,A_eps_m,offline", help="comma-separated algorithms")
        p.add_argument("--deadline", default=deadline_default, help="deadlines, e.g. 6, 0-12 or 1,3,6")
        p.add_argument("--seed", type=int, default=None, help=f"prediction seed (default {DEFAULT_SEED})")
        p.add_argument("--mode", default="sampled", help="sampled | mean-only | oracle")
        p.add_argument("--nonuniform", action="store_true", help="per-class deadlines")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--capacity", default=None, help="M_i, one value or one per data center")
        p.add_argument("--migration-rate", default=None, help="CSV matrix of b_ij")
        p.add_argument("--filter-k", default=",".join(str(k) for k in DEFAULT_FILTER_K),
                       help="variance filter weights k1,k2,k7")
        p.add_argument("--save", action="store_true", help="store reports in the run database")
        p.add_argument("--verbose", action="store_true")

    add_inputs(sub.add_parser("run", help="run algorithms at one deadline"), DEFAULT_RUN_DEADLINE)
    sweep_parser = sub.add_parser("sweep", help="total cost over a deadline range")
    add_inputs(sweep_parser, DEFAULT_SWEEP_DEADLINES)
    sweep_parser.add_argument("--workers", type=int, default=1)

    classify = sub.add_parser("classify", help="k-means deadline classes for a job trace")
    classify.add_argument("--jobs", required=True)
    classify.add_argument("--k", type=int, default=DEFAULT_KMEANS_CLUSTERS)
    classify.add_argument("--seed", type=int, default=DEFAULT_SEED)
    classify.add_argument("--out", default="out")
    classify.add_argument("--workload-out", default=None, help="also write the classified nonuniform workload CSV")
    classify.add_argument("--verbose", action="store_true")
    return parser


def _cloud_for(names: Sequence[str], args) -> CloudConfig:
    capacity = DEFAULT_CAPACITY
    if args.capacity:
        values = parse_floats(args.capacity, "capacity")
        if len(values) not in (1, len(names)):
            raise UsageError(f"--capacity needs 1 or {len(names)} values")
        capacity = np.asarray(values, dtype=float)
    if all(name in MARKET_SITES for name in names):
        cloud = CloudConfig.from_locations(get_sites(names), DEFAULT_MIGRATION_RATE_PER_1000KM, capacity=capacity)
    else:
        cloud = CloudConfig.uniform(len(names), migration_rate=DEFAULT_MIGRATION_RATE_PER_1000KM, names=names)
        cloud = replace(cloud, capacity=np.broadcast_to(np.asarray(capacity, dtype=float), (len(names),)))
    if args.migration_rate:
        matrix = load_migration_matrix(args.migration_rate)
        if matrix.shape != (cloud.n, cloud.n):
            raise UsageError(f"--migration-rate must be {cloud.n}x{cloud.n}")
        cloud = cloud.with_migration_rate(matrix)
    return cloud


def _load_inputs(args) -> Tuple[CloudConfig, PriceTrace, WorkloadTrace]:
    if args.synth:
        if args.prices or args.workload or args.jobs:
            raise UsageError("--synth cannot be combined with --prices, --workload or --jobs")
        spec = SynthesisSpec.from_json(args.synth)
        if args.seed is not None:
            spec = replace(spec, seed=args.seed)
        prices, work = synthesize_traces(spec)
        cloud = spec.cloud()
        if args.capacity or args.migration_rate:
            cloud = _cloud_for(cloud.names, args)
        return cloud, prices, work

    if not args.prices:
        raise UsageError("--prices (or --synth) is required")
    if bool(args.workload) == bool(args.jobs):
        raise UsageError("exactly one of --workload and --jobs is required")
    prices = load_price_csv(args.prices)
    if args.workload:
        work = load_workload_csv(args.workload)
    else:
        jobs, work = load_jobs_csv(args.jobs, DEFAULT_SLOT_SECONDS, num_slots=prices.T)
        if args.nonuniform:
            _, classified = classify_jobs(jobs, DEFAULT_KMEANS_CLUSTERS,
                                          DEFAULT_SEED if args.seed is None else args.seed)
            work = jobs_to_workload(classified, DEFAULT_SLOT_SECONDS, num_slots=prices.T)
    return _cloud_for(prices.locations, args), prices, work


def _base_config(args, algorithm: Algorithm) -> RunConfig:
    cloud, prices, work = _load_inputs(args)
    try:
        mode = PredictionMode.parse(args.mode)
    except GlbError as e:
        raise UsageError(str(e))
    filter_k = parse_floats(args.filter_k, "--filter-k")
    if len(filter_k) != 3:
        raise UsageError("--filter-k needs three weights")
    seed = DEFAULT_SEED if args.seed is None else args.seed
    prediction = PredictionModel(filter=filter_k, rng_seed=seed, mode=mode)
    deadline_mode = DeadlineMode.NONUNIFORM if args.nonuniform else DeadlineMode.UNIFORM
    label = os.path.basename(args.synth or args.prices)
    return RunConfig(algorithm, cloud, prices, work, prediction, deadline_mode, label)


def cmd_run(args) -> int:
    algorithms = parse_algorithms(args.alg)
    deadlines = parse_deadlines(args.deadline)
    if len(deadlines) != 1:
        raise UsageError("run takes a single deadline; use sweep for several")
    base = _base_config(args, algorithms[0]).with_horizon(deadlines[0])
    db = Database() if args.save else None

    code = EXIT_OK
    reports = []
    for alg in algorithms:
        out_dir = args.out if len(algorithms) == 1 else os.path.join(args.out, alg.value)
        try:
            report = run(base.with_algorithm(alg))
        except GlbError as e:
            print(f"✗ {alg.value} failed: {e}", file=sys.stderr)
            code = EXIT_FAILURE
            continue
        write_report(report, out_dir)
        if db is not None:
            db.save_run(report, seed=base.prediction.rng_seed)
        print(f"✓ {alg.value}: total cost {report.total_cost:.6f} -> {out_dir}")
        reports.append(report)
        if not report.ok:
            print(f"✗ {alg.value}: {len(report.violations)} audit violations", file=sys.stderr)
            code = EXIT_FAILURE
    if args.verbose:
        print(render_reports_markdown(reports))
    return code


def cmd_sweep(args) -> int:
    algorithms = parse_algorithms(args.alg)
    deadlines = parse_deadlines(args.deadline)
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    base = _base_config(args, algorithms[0])
    table = sweep(base, deadlines, algorithms, workers=args.workers)
    path = write_sweep(table, args.out)
    print(f"✓ Sweep of {len(table.rows)} cells -> {path}")
    if args.verbose:
        print(render_sweep_markdown(table))
    return EXIT_OK if table.ok else EXIT_FAILURE


def cmd_classify(args) -> int:
    if args.k < 1:
        raise UsageError("--k must be positive")
    jobs, _ = load_jobs_csv(args.jobs, DEFAULT_SLOT_SECONDS)
    table, classified = classify_jobs(jobs, args.k, args.seed)
    path = write_clusters(table, args.out)
    print(f"✓ {len(jobs)} jobs in {table.k} clusters -> {path}")
    if args.workload_out:
        work = jobs_to_workload(classified, DEFAULT_SLOT_SECONDS)
        write_workload_csv(work, args.workload_out, by_class=True)
        print(f"✓ Classified workload -> {args.workload_out}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "classify": cmd_classify}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required: run, sweep or classify")
        configure_logging("DEBUG" if args.verbose else None)
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except GlbError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
