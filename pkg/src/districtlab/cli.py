"""Command-line interface.

Subcommands: gen-city, run-chain, metrics, validate, experiment,
summarize. Exit codes: 0 success, 1 usage error, 2 data error,
3 non-convergence. Worker count for experiments comes from the
DISTRICTLAB_WORKERS environment variable.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .citygen import DissimilarityTargetError, GenSpec, InfeasibleSpecError, generate_grid_city, generate_modeled_city
from .citygraph import GraphError, load_graph, save_graph
from .experiment import (
    ExperimentConfig,
    bin_by_fairness,
    read_records_csv,
    regression_summary,
    run_experiment,
    write_records_csv,
)
from .metrics import (
    UndefinedIndexError,
    dissimilarity,
    ensemble_fairness,
    fairness,
    minority_majority_count,
)
from .partition import SeedStuckError, block_plan, load_plan, save_plan, seed_from_scratch, stripe_plan
from .recom import ChainConfig, ChainStallError, run_chain
from .templates import city_template, template_names
from .validation import coverage_report

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NONCONVERGENCE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


class DataError(Exception):
    pass


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (GraphError, DataError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DissimilarityTargetError, SeedStuckError, ChainStallError, InfeasibleSpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


def _build_parser() -> _Parser:
    parser = _Parser(prog="districtlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-city", help="generate a synthetic city")
    p.add_argument("--template", required=True, help="'grid', a built-in city name, or a dual-graph file")
    p.add_argument("--q-frac", type=float, default=0.3, help="target subgroup share (grid only)")
    p.add_argument("--target-d", type=float, required=True)
    p.add_argument("--tol", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_city)

    p = sub.add_parser("run-chain", help="run a recombination chain and save its states")
    p.add_argument("--graph", required=True)
    p.add_argument("--seed-plan", required=True, help="assignment file or 'scratch'")
    p.add_argument("--districts", type=int, default=10, help="district count for 'scratch' seeds")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--rng", type=int, default=0)
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_run_chain)

    p = sub.add_parser("metrics", help="print metrics for a city, plan, or ensemble")
    p.add_argument("--graph", required=True)
    p.add_argument("--plan")
    p.add_argument("--ensemble-manifest")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("validate", help="distant-plan coverage of an ensemble")
    p.add_argument("--graph", required=True)
    p.add_argument("--reference", required=True, help="assignment file, 'stripes', 'blocks', or 'scratch:<seed>'")
    p.add_argument("--ensemble-manifest", required=True)
    p.add_argument("--exact", action="store_true", help="solve the maximum distant set exactly")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("experiment", help="run a city sweep from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", help="override the config's output directory")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("summarize", help="regression and binning over a results CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--x", default="dissimilarity")
    p.add_argument("--y", default="f_bar")
    p.add_argument("--bins", help="comma-separated ascending bin edges ('inf' allowed)")
    p.add_argument("--split-dir", help="write each fairness bin's records to its own CSV")
    p.set_defaults(func=_cmd_summarize)

    return parser


def _cmd_gen_city(args) -> int:
    spec = GenSpec(
        target_q_frac=args.q_frac,
        target_d=args.target_d,
        d_tolerance=args.tol,
        rng_seed=args.seed,
    )
    if args.template == "grid":
        city = generate_grid_city(spec)
    elif args.template.lower() in template_names():
        city = generate_modeled_city(city_template(args.template), spec)
    else:
        city = generate_modeled_city(load_graph(args.template), spec)
    save_graph(city, args.out)
    print(f"wrote {args.out}: {city!r} D={dissimilarity(city):.6f}")
    return EXIT_OK


def _cmd_run_chain(args) -> int:
    graph = load_graph(args.graph)
    if args.seed_plan == "scratch":
        seed_plan = seed_from_scratch(graph, args.districts, args.epsilon, rng_seed=args.rng)
    else:
        seed_plan = load_plan(graph, args.seed_plan)
    cfg = ChainConfig(
        steps=args.steps, epsilon=args.epsilon, rng_seed=args.rng, record_every=args.record_every
    )
    states = run_chain(graph, seed_plan, cfg)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    plan_files = []
    for i, plan in enumerate(states):
        if i % cfg.record_every != 0:
            continue
        name = f"plan_{i:06d}.csv"
        save_plan(graph, plan, out_dir / name)
        plan_files.append(name)
    manifest = {
        "graph": str(Path(args.graph).resolve()),
        "n_districts": seed_plan.n_districts,
        "epsilon": args.epsilon,
        "rng_seed": args.rng,
        "plans": plan_files,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    print(f"wrote {len(plan_files)} plans to {out_dir}")
    return EXIT_OK


def _load_manifest_plans(graph, manifest_path):
    manifest_path = Path(manifest_path)
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if "plans" not in manifest:
        raise DataError(f"{manifest_path}: manifest has no 'plans' list")
    return [load_plan(graph, manifest_path.parent / name) for name in manifest["plans"]]


def _cmd_metrics(args) -> int:
    graph = load_graph(args.graph)
    try:
        print(f"D = {dissimilarity(graph)!r}")
    except UndefinedIndexError as exc:
        raise DataError(str(exc))
    if args.plan:
        plan = load_plan(graph, args.plan)
        print(f"d_Q = {minority_majority_count(graph, plan)}")
        print(f"F = {fairness(graph, plan)!r}")
    if args.ensemble_manifest:
        plans = _load_manifest_plans(graph, args.ensemble_manifest)
        stats = ensemble_fairness(graph, plans)
        print(f"F_bar = {stats.f_bar!r}")
        print(f"mean_dq = {stats.mean_dq!r}")
        print(f"n_plans = {stats.n_plans}")
        for dq, count in stats.dq_histogram.items():
            print(f"d_Q[{dq}] = {count}")
    return EXIT_OK


def _reference_plan(graph, spec: str):
    if spec == "stripes":
        rows, cols = _grid_shape(graph)
        return stripe_plan(rows, cols, 10)
    if spec == "blocks":
        rows, cols = _grid_shape(graph)
        return block_plan(rows, cols, 2, 5)
    if spec.startswith("scratch"):
        seed = int(spec.split(":", 1)[1]) if ":" in spec else 0
        return seed_from_scratch(graph, 10, rng_seed=seed)
    return load_plan(graph, spec)


def _grid_shape(graph):
    name = graph.name
    if name.startswith("grid-") and "x" in name:
        rows, cols = name.removeprefix("grid-").split("x")
        return int(rows), int(cols)
    raise DataError(f"built-in references need a grid city, got {name!r}")


def _cmd_validate(args) -> int:
    graph = load_graph(args.graph)
    reference = _reference_plan(graph, args.reference)
    plans = _load_manifest_plans(graph, args.ensemble_manifest)
    report = coverage_report(plans, reference, mode="exact" if args.exact else "greedy")
    print(f"set_size = {report.set_size}")
    print(f"upper_bound = {report.upper_bound}")
    print(f"ratio = {report.ratio!r}")
    print(f"mode = {report.mode}")
    print(f"members = {','.join(str(i) for i in report.member_ids)}")
    return EXIT_OK


def parse_config(path) -> ExperimentConfig:
    """Flat ``key = value`` config; '#' starts a comment."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key] = value

    cfg = ExperimentConfig()
    known = {
        "template": str,
        "cities": int,
        "seeds_per_city": int,
        "steps_per_seed": int,
        "master_seed": int,
        "out_dir": str,
        "n_districts": int,
        "epsilon": float,
        "d_tolerance": float,
        "retain_artifacts": lambda s: s.lower() in ("1", "true", "yes"),
    }
    range_slots = {
        "q_frac_min": 0,
        "q_frac_max": 1,
        "target_d_min": 0,
        "target_d_max": 1,
    }
    q_range = list(cfg.q_frac_range)
    d_range = list(cfg.target_d_range)
    updates: dict = {}
    for key, value in values.items():
        if key in known:
            try:
                updates[key] = known[key](value)
            except ValueError as exc:
                raise DataError(f"{path}: bad value for {key}: {exc}")
        elif key in range_slots:
            target = q_range if key.startswith("q_frac") else d_range
            target[range_slots[key]] = float(value)
        else:
            raise DataError(f"{path}: unknown config key {key!r}")
    updates["q_frac_range"] = tuple(q_range)
    updates["target_d_range"] = tuple(d_range)
    return replace(cfg, **updates)


def _cmd_experiment(args) -> int:
    cfg = parse_config(args.config)
    if args.out_dir:
        cfg = replace(cfg, out_dir=args.out_dir)
    records, csv_path = run_experiment(cfg)
    print(f"wrote {len(records)} records to {csv_path}")
    return EXIT_OK


def _cmd_summarize(args) -> int:
    records = read_records_csv(args.input)
    if len(records) >= 2:
        try:
            summary = regression_summary(records, args.x, args.y)
        except ValueError as exc:
            print(f"regression skipped: {exc}", file=sys.stderr)
        else:
            print(f"slope = {summary.slope!r}")
            print(f"intercept = {summary.intercept!r}")
            print(f"r_squared = {summary.r_squared!r}")
            print(f"mean_y = {summary.mean_y!r}")
    if args.bins:
        edges = [float(e) for e in args.bins.split(",")]
        bins = bin_by_fairness(records, edges)
        for k, count in enumerate(bins.counts):
            print(f"bin[{k}] = {count}")
        if args.split_dir:
            split_dir = Path(args.split_dir)
            split_dir.mkdir(parents=True, exist_ok=True)
            for k, members in enumerate(bins.members):
                write_records_csv(members, split_dir / f"bin_{k}.csv")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
