"""Experiment orchestration.

Sweeps generation targets over many cities, builds a plan ensemble per
city, and records one row per city: subgroup share, dissimilarity
index, mean fairness, mean majority-district count, and ensemble size.
Cities are independent jobs seeded from a master seed, so runs are
reproducible and can be spread over worker processes.
"""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .citygen import (
    DissimilarityTargetError,
    GenSpec,
    InfeasibleSpecError,
    generate_grid_city,
    generate_modeled_city,
)
from .citygraph import CityGraph, load_graph, save_graph
from .metrics import UndefinedIndexError, dissimilarity, ensemble_fairness
from .partition import SeedStuckError, save_plan, seed_from_scratch
from .recom import ChainConfig, ChainStallError, build_ensemble
from .templates import city_template, district_count, template_names

WORKERS_ENV = "DISTRICTLAB_WORKERS"

RESULT_COLUMNS = ["city_id", "template", "q_frac", "dissimilarity", "f_bar", "mean_dq", "n_plans"]

SEED_RETRIES = 10


@dataclass
class CityRecord:
    city_id: str
    template: str
    q_frac: float
    dissimilarity: float
    f_bar: float
    mean_dq: float
    n_plans: int
    n_districts: int

    def csv_row(self) -> list[str]:
        return [
            self.city_id,
            self.template,
            repr(self.q_frac),
            repr(self.dissimilarity),
            repr(self.f_bar),
            repr(self.mean_dq),
            str(self.n_plans),
        ]


@dataclass
class ExperimentConfig:
    template: str = "grid"  # "grid", a built-in city name, or a dual-graph file path
    cities: int = 100
    q_frac_range: tuple[float, float] = (0.0, 1.0)
    target_d_range: tuple[float, float] = (0.0, 1.0)
    seeds_per_city: int = 2
    steps_per_seed: int = 500
    master_seed: int = 0
    out_dir: str = "out"
    n_districts: int = 10
    epsilon: float = 0.2
    d_tolerance: float = 0.01
    retain_artifacts: bool = False

    def __post_init__(self):
        for lo, hi in (self.q_frac_range, self.target_d_range):
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError(f"sampling range must lie within [0, 1], got {lo}..{hi}")
        if self.cities < 1 or self.seeds_per_city < 1 or self.steps_per_seed < 0:
            raise ValueError("counts must be positive (steps may be zero)")


class RegressionSummary(NamedTuple):
    slope: float
    intercept: float
    r_squared: float
    mean_y: float


@dataclass
class FairnessBins:
    edges: list[float]
    counts: list[int]
    members: list[list[CityRecord]]


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}")


def city_seed(master_seed: int, index: int) -> int:
    """Stable per-city seed so any city can rerun in isolation."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


def _resolve_template(name: str) -> CityGraph | None:
    """None means grid cities; otherwise the template graph to redistribute."""
    if name == "grid":
        return None
    if name.lower() in template_names():
        return city_template(name)
    return load_graph(name)


def run_city(cfg: ExperimentConfig, index: int) -> tuple[CityRecord | None, dict]:
    """Generate one city, build its ensemble, and measure it.

    Returns (record, manifest_entry); the record is None on failure and
    the manifest entry carries the reason.
    """
    seed = city_seed(cfg.master_seed, index)
    rng = np.random.default_rng(seed)
    q_frac = float(rng.uniform(*cfg.q_frac_range))
    target_d = float(rng.uniform(*cfg.target_d_range))
    city_id = f"city-{index:04d}"
    entry: dict = {"city_id": city_id, "seed": seed, "target_d": target_d}

    template = _resolve_template(cfg.template)
    n_districts = _district_count_for(cfg)
    spec = GenSpec(
        target_q_frac=q_frac,
        target_d=target_d,
        d_tolerance=cfg.d_tolerance,
        rng_seed=seed,
    )
    try:
        if template is None:
            entry["target_q_frac"] = q_frac
            graph = generate_grid_city(spec)
        else:
            graph = generate_modeled_city(template, spec)
        seeds = _seed_plans(graph, n_districts, cfg, seed)
        chain_cfg = ChainConfig(
            steps=max(1, cfg.steps_per_seed), epsilon=cfg.epsilon, rng_seed=seed
        )
        ensemble = build_ensemble(graph, seeds, cfg.steps_per_seed, chain_cfg)
        stats = ensemble_fairness(graph, ensemble)
    except (
        InfeasibleSpecError,
        DissimilarityTargetError,
        UndefinedIndexError,
        SeedStuckError,
        ChainStallError,
    ) as exc:
        entry.update(status="failed", reason=f"{type(exc).__name__}: {exc}")
        return None, entry

    record = CityRecord(
        city_id=city_id,
        template=cfg.template,
        q_frac=graph.subgroup_population / graph.total_population,
        dissimilarity=dissimilarity(graph),
        f_bar=stats.f_bar,
        mean_dq=stats.mean_dq,
        n_plans=stats.n_plans,
        n_districts=n_districts,
    )
    entry["status"] = "ok"
    if cfg.retain_artifacts:
        entry["artifacts"] = _write_artifacts(cfg, city_id, graph, ensemble)
    return record, entry


def _district_count_for(cfg: ExperimentConfig) -> int:
    """Built-in templates carry their own district count; anything else uses the config."""
    if cfg.template != "grid" and cfg.template.lower() in template_names():
        return district_count(cfg.template)
    return cfg.n_districts


def _seed_plans(graph, n_districts, cfg, seed):
    plans = []
    for s in range(cfg.seeds_per_city):
        last_exc = None
        for attempt in range(SEED_RETRIES):
            try:
                plans.append(
                    seed_from_scratch(
                        graph,
                        n_districts,
                        cfg.epsilon,
                        rng_seed=city_seed(seed, 1000 + s * SEED_RETRIES + attempt),
                    )
                )
                break
            except SeedStuckError as exc:
                last_exc = exc
        else:
            raise last_exc
    return plans


def _write_artifacts(cfg, city_id, graph, ensemble):
    city_dir = Path(cfg.out_dir) / "cities" / city_id
    city_dir.mkdir(parents=True, exist_ok=True)
    graph_path = city_dir / "city.json"
    save_graph(graph, graph_path)
    plan_files = []
    for i, plan in enumerate(ensemble):
        plan_file = f"plan_{i:06d}.csv"
        save_plan(graph, plan, city_dir / plan_file)
        plan_files.append(plan_file)
    manifest = {
        "graph": "city.json",
        "n_districts": ensemble[0].n_districts,
        "plans": plan_files,
    }
    with open(city_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return str(city_dir)


def _run_city_task(args):
    cfg_dict, index = args
    return index, run_city(ExperimentConfig(**cfg_dict), index)


def run_experiment(cfg: ExperimentConfig) -> tuple[list[CityRecord], Path]:
    """Run the full sweep and write results.csv plus a run manifest.

    Deterministic for a fixed config, byte for byte, regardless of the
    worker count. Per-city failures are recorded in the manifest and do
    not stop the run.
    """
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = worker_count()

    results: dict[int, tuple[CityRecord | None, dict]] = {}
    if workers == 1:
        for i in range(cfg.cities):
            results[i] = run_city(cfg, i)
    else:
        cfg_dict = cfg.__dict__.copy()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, res in pool.map(_run_city_task, [(cfg_dict, i) for i in range(cfg.cities)]):
                results[i] = res

    records = []
    entries = []
    for i in range(cfg.cities):
        record, entry = results[i]
        entries.append(entry)
        if record is not None:
            records.append(record)

    csv_path = out_dir / "results.csv"
    write_records_csv(records, csv_path)
    manifest = {
        "config": {k: list(v) if isinstance(v, tuple) else v for k, v in cfg.__dict__.items()},
        "cities": entries,
        "records_written": len(records),
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return records, csv_path


def write_records_csv(records: list[CityRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for record in records:
            writer.writerow(record.csv_row())


def read_records_csv(path) -> list[CityRecord]:
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in RESULT_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: results file is missing columns {missing}")
        for row in reader:
            records.append(
                CityRecord(
                    city_id=row["city_id"],
                    template=row["template"],
                    q_frac=float(row["q_frac"]),
                    dissimilarity=float(row["dissimilarity"]),
                    f_bar=float(row["f_bar"]),
                    mean_dq=float(row["mean_dq"]),
                    n_plans=int(row["n_plans"]),
                    n_districts=0,  # not part of the file contract
                )
            )
    return records


def regression_summary(records, x: str, y: str) -> RegressionSummary:
    """Ordinary least squares of ``y`` on ``x`` over record fields."""
    if len(records) < 2:
        raise ValueError("need at least 2 records for a regression")
    xs = np.asarray([getattr(r, x) for r in records], dtype=np.float64)
    ys = np.asarray([getattr(r, y) for r in records], dtype=np.float64)
    sxx = float(((xs - xs.mean()) ** 2).sum())
    if sxx == 0.0:
        raise ValueError(f"field {x!r} has no variance; regression is degenerate")
    sxy = float(((xs - xs.mean()) * (ys - ys.mean())).sum())
    slope = sxy / sxx
    intercept = float(ys.mean()) - slope * float(xs.mean())
    syy = float(((ys - ys.mean()) ** 2).sum())
    residual = float(((ys - (intercept + slope * xs)) ** 2).sum())
    r_squared = 0.0 if syy == 0.0 else 1.0 - residual / syy
    return RegressionSummary(slope, intercept, r_squared, float(ys.mean()))


def bin_by_fairness(records, edges) -> FairnessBins:
    """Partition records into half-open mean-fairness bins.

    ``edges`` are ascending upper bounds; bin k holds records with
    ``edges[k-1] <= f_bar < edges[k]`` (the first bin is unbounded
    below, and an infinite last edge catches everything above).
    """
    edges = [float(e) for e in edges]
    if edges != sorted(edges) or len(set(edges)) != len(edges):
        raise ValueError("bin edges must be strictly ascending")
    members: list[list[CityRecord]] = [[] for _ in edges]
    spill: list[CityRecord] = []
    for record in records:
        for k, edge in enumerate(edges):
            if record.f_bar < edge:
                members[k].append(record)
                break
        else:
            spill.append(record)
    if spill:
        raise ValueError(
            f"{len(spill)} records above the last edge {edges[-1]}; "
            "use an infinite final edge to catch them"
        )
    return FairnessBins(edges=edges, counts=[len(m) for m in members], members=members)
