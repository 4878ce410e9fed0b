"""Seeded synthetic mobility data and the benchmark sweep."""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import artifacts
from .errors import DeadlineExceeded, InvalidConfig, ODKAnonError
from .hexgrid import APERTURE, CellId, SyntheticHierarchy, parse_hierarchy_spec
from .metrics import compute_metrics
from .model import Mode, TripDataset, TripRecord, load_trips, segment
from .pipeline import ALGORITHMS, run_algorithm
from .timing import Deadline

DEFAULT_SCHEMA = {
    "sex": ["F", "M"],
    "age": ["10-19", "20-29", "30-39", "40-49", "50-59", "60-69", "70+"],
    "profession": [f"cat{i}" for i in range(1, 9)],
}

REPORT_COLUMNS = ("algorithm", "segment", "protect_mode", "eval_mode", "c_dm", "c_avg", "g_bar", "e", "time_s")
NA = "N/A"


@dataclass(frozen=True)
class SynthConfig:
    n_trips: int = 10_000
    target_resolution: int = 6
    n_hotspots: int = 20
    hotspot_concentration: float = 0.5
    weight_mu: float = 7.4
    weight_sigma: float = 1.0
    trips_per_participant: float = 24.5
    segment_schema: dict = field(default_factory=lambda: dict(DEFAULT_SCHEMA))
    seed: int = 0
    # hotspot trips land uniformly among the leaves this many levels below
    # the hotspot's ancestor; 0 pins them to the hotspot leaf itself
    hotspot_spread: int = 0

    def validate(self) -> None:
        if self.n_trips < 1:
            raise InvalidConfig("n_trips must be >= 1")
        if self.target_resolution < 0:
            raise InvalidConfig("target_resolution must be >= 0")
        if self.n_hotspots < 1:
            raise InvalidConfig("n_hotspots must be >= 1")
        if not 0.0 < self.hotspot_concentration <= 1.0:
            raise InvalidConfig("hotspot_concentration must be in (0, 1]")
        if self.weight_sigma < 0:
            raise InvalidConfig("weight_sigma must be >= 0")
        if self.trips_per_participant <= 0:
            raise InvalidConfig("trips_per_participant must be > 0")
        if not 0 <= self.hotspot_spread <= self.target_resolution:
            raise InvalidConfig("hotspot_spread must be within 0..target_resolution")
        for attr, cats in self.segment_schema.items():
            if not cats:
                raise InvalidConfig(f"segment {attr!r} has no categories")


def leaf_cell(index: int, resolution: int, root: str = "R") -> CellId:
    digits = []
    for _ in range(resolution):
        index, d = divmod(index, APERTURE)
        digits.append(d)
    return CellId(root, tuple(reversed(digits)))


def gen_synthetic(cfg: SynthConfig) -> TripDataset:
    """Deterministic skewed trip dataset over one synthetic root."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    res = cfg.target_resolution
    n_leaves = APERTURE**res
    hot_o = rng.integers(0, n_leaves, cfg.n_hotspots)
    hot_d = rng.integers(0, n_leaves, cfg.n_hotspots)

    # participants until the trip budget is covered
    counts, weights = [], []
    total = 0
    while total < cfg.n_trips:
        c = max(1, int(rng.poisson(cfg.trips_per_participant)))
        counts.append(min(c, cfg.n_trips - total))
        weights.append(float(rng.lognormal(cfg.weight_mu, cfg.weight_sigma)))
        total += counts[-1]
    n_people = len(counts)
    attrs = {
        a: rng.integers(0, len(cats), n_people) for a, cats in sorted(cfg.segment_schema.items())
    }
    owner = np.repeat(np.arange(n_people), counts)

    block = APERTURE**cfg.hotspot_spread

    def endpoints(hot):
        n = cfg.n_trips
        is_hot = rng.random(n) < cfg.hotspot_concentration
        pick = hot[rng.integers(0, len(hot), n)]
        if block > 1:
            pick = (pick // block) * block + rng.integers(0, block, n)
        uniform = rng.integers(0, n_leaves, n)
        return np.where(is_hot, pick, uniform)

    o_idx = endpoints(hot_o)
    d_idx = endpoints(hot_d)
    cells: dict = {}

    def cell(i):
        c = cells.get(i)
        if c is None:
            c = cells[i] = leaf_cell(int(i), res)
        return c

    width = len(str(n_people))
    records = []
    for t in range(cfg.n_trips):
        p = int(owner[t])
        a = {name: cfg.segment_schema[name][int(v[p])] for name, v in attrs.items()}
        records.append(TripRecord(f"p{p:0{width}d}", cell(o_idx[t]), cell(d_idx[t]), weights[p], a))
    return TripDataset(tuple(records), SyntheticHierarchy(res), res, True)


@dataclass(frozen=True)
class CorridorConfig:
    """Commuter corridors: every home leaf feeds exactly one work leaf.

    Most corridors are busy; a few carry only a handful of commuters, so
    their trip counts and weight sums can disagree about the threshold.
    """

    target_resolution: int = 3
    thin_fraction: float = 0.09
    thin_max_participants: int = 3
    busy_participants: float = 20.0
    trips_per_participant: float = 4.0
    weight_mu: float = 7.4
    weight_sigma: float = 1.5
    seed: int = 0

    def validate(self) -> None:
        if self.target_resolution < 0:
            raise InvalidConfig("target_resolution must be >= 0")
        if not 0.0 <= self.thin_fraction <= 1.0:
            raise InvalidConfig("thin_fraction must be in [0, 1]")
        if self.thin_max_participants < 1:
            raise InvalidConfig("thin_max_participants must be >= 1")
        if self.busy_participants < 0 or self.trips_per_participant <= 0 or self.weight_sigma < 0:
            raise InvalidConfig("busy_participants, trips_per_participant and weight_sigma must be positive")


def gen_corridors(cfg: CorridorConfig) -> TripDataset:
    """Deterministic corridor dataset; all of a participant's trips share one pair."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    res = cfg.target_resolution
    n = APERTURE**res
    work = rng.permutation(n)
    thin = rng.random(n) < cfg.thin_fraction
    people = np.where(
        thin,
        rng.integers(1, cfg.thin_max_participants + 1, n),
        1 + rng.poisson(cfg.busy_participants, n),
    )
    home = np.repeat(np.arange(n), people)
    weights = rng.lognormal(cfg.weight_mu, cfg.weight_sigma, len(home))
    trips = np.maximum(1, rng.poisson(cfg.trips_per_participant, len(home)))
    width = len(str(len(home)))
    records = []
    for p, (h, w, t) in enumerate(zip(home, weights, trips)):
        o, d = leaf_cell(int(h), res), leaf_cell(int(work[h]), res)
        rec = TripRecord(f"p{p:0{width}d}", o, d, float(w))
        records.extend([rec] * int(t))
    return TripDataset(tuple(records), SyntheticHierarchy(res), res, True)


@dataclass
class DatasetSpec:
    name: str
    path: str | None = None
    hierarchy: str | None = None
    synth: SynthConfig | None = None

    def load(self) -> TripDataset:
        if self.synth is not None:
            return gen_synthetic(self.synth)
        if self.path is None or self.hierarchy is None:
            raise InvalidConfig(f"dataset {self.name!r} needs path and hierarchy or synth")
        return load_trips(self.path, parse_hierarchy_spec(self.hierarchy))


@dataclass
class BenchPlan:
    datasets: list[DatasetSpec]
    algorithms: tuple[str, ...] = ALGORITHMS
    segments: tuple[str, ...] = ("whole",)
    base_k: float = 10
    protect_modes: tuple[str, ...] = ("participant", "population")
    eval_modes: tuple[str, ...] = ("participant", "population")
    time_limit_s: float = 7200.0
    suppression_budget: float = 0.1
    max_gen_levels: int = 5
    output: str | None = None
    workers: int | None = None

    def __post_init__(self):
        if not self.time_limit_s > 0:
            raise InvalidConfig("time_limit_s must be > 0")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise InvalidConfig(f"unknown algorithms {sorted(bad)}")

    @classmethod
    def from_dict(cls, d: dict) -> "BenchPlan":
        d = dict(d)
        specs = []
        for item in d.pop("datasets"):
            item = dict(item)
            synth = item.pop("synth", None)
            specs.append(DatasetSpec(synth=SynthConfig(**synth) if synth is not None else None, **item))
        for key in ("algorithms", "segments", "protect_modes", "eval_modes"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(datasets=specs, **d)

    @classmethod
    def load(cls, path) -> "BenchPlan":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get("ODKANON_THREADS")
    n = requested if requested is not None else 1
    if cap:
        n = min(n, max(1, int(cap))) if requested is not None else max(1, int(cap))
    return max(1, n)


@dataclass
class CellJob:
    dataset: str
    segment: str
    algorithm: str
    protect_mode: str
    ds: TripDataset


def _segment_datasets(ds: TripDataset, segments) -> list[tuple[str, TripDataset]]:
    out = []
    for s in segments:
        if s == "whole":
            out.append(("whole", ds))
        else:
            out.extend((f"{s}={cat}", sub) for cat, sub in segment(ds, s).items())
    return out


def run_cell(job: CellJob, plan: BenchPlan, out_dir: str | None = None) -> dict:
    """One (algorithm, segment, protect mode) cell; never raises."""
    deadline = Deadline(plan.time_limit_s)
    cell = {
        "dataset": job.dataset,
        "segment": job.segment,
        "algorithm": job.algorithm,
        "protect_mode": job.protect_mode,
        "status": "ok",
        "rows": [],
    }
    try:
        out = run_algorithm(
            job.ds,
            job.algorithm,
            plan.base_k,
            job.protect_mode,
            plan.suppression_budget,
            plan.max_gen_levels,
            deadline,
        )
        elapsed = deadline.elapsed()
        if elapsed > plan.time_limit_s:
            raise DeadlineExceeded("finished after the time limit")
    except DeadlineExceeded:
        cell["status"] = "timeout"
    except (ODKAnonError, ValueError) as exc:
        cell["status"] = f"error: {exc}"
    if cell["status"] != "ok":
        for em in plan.eval_modes:
            cell["rows"].append(_na_row(job, em, plan))
        return cell

    cell["terminated"] = out.result.terminated
    cell["timings"] = out.timings
    if out.suppression is not None:
        cell["suppressed_rows"] = out.suppression.suppressed_row_count
    for em in plan.eval_modes:
        m = compute_metrics(out.result, job.ds, em, plan.base_k, out.suppressed_pairs, elapsed)
        cell["rows"].append(
            {
                "algorithm": job.algorithm,
                "segment": job.segment,
                "protect_mode": job.protect_mode,
                "eval_mode": em,
                "c_dm": m.c_dm,
                "c_avg": m.c_avg,
                "g_bar": m.g_bar,
                "e": m.recon_loss,
                "time_s": elapsed,
                "min_k_cross": m.min_k_cross,
            }
        )
    if out_dir is not None:
        _write_cell_artifacts(Path(out_dir), job, out, cell)
    return cell


def _na_row(job: CellJob, eval_mode: str, plan: BenchPlan) -> dict:
    return {
        "algorithm": job.algorithm,
        "segment": job.segment,
        "protect_mode": job.protect_mode,
        "eval_mode": eval_mode,
        "c_dm": NA,
        "c_avg": NA,
        "g_bar": NA,
        "e": NA,
        "time_s": f">{plan.time_limit_s}",
    }


def _write_cell_artifacts(root: Path, job: CellJob, out, cell: dict) -> None:
    d = root / job.algorithm / job.segment / job.protect_mode
    if job.dataset:
        d = root / job.dataset / job.algorithm / job.segment / job.protect_mode
    d.mkdir(parents=True, exist_ok=True)
    h = job.ds.hierarchy
    res = out.result
    if res.hierarchy_based:
        artifacts.write_matrix(d / "matrix.csv", res.matrix, h)
        artifacts.write_zone_map(d / "origin_zones.csv", res.origin_map, h)
        artifacts.write_zone_map(d / "destination_zones.csv", res.destination_map, h)
    else:
        artifacts.write_regions(d / "regions.csv", res)
        artifacts.write_assignment(d / "assignment.csv", res)
    artifacts.write_json(d / "metrics.json", {"rows": cell["rows"]})
    artifacts.write_json(
        d / artifacts.MANIFEST,
        {
            "algorithm": job.algorithm,
            "segment": job.segment,
            "protect_mode": job.protect_mode,
            "k": out.k,
            "terminated": res.terminated,
            "suppression": out.suppression.to_dict(h) if out.suppression else None,
            "timings": out.timings,
        },
    )


def _run_job(args):
    job, plan, out_dir = args
    return run_cell(job, plan, out_dir)


def run_benchmark(plan: BenchPlan, datasets: dict | None = None) -> dict:
    """Run every cell of the plan and return the consolidated report."""
    jobs = []
    single = len(plan.datasets) == 1
    for spec in plan.datasets:
        ds = datasets[spec.name] if datasets and spec.name in datasets else spec.load()
        for seg_name, sub in _segment_datasets(ds, plan.segments):
            for alg in plan.algorithms:
                for pm in plan.protect_modes:
                    jobs.append(CellJob("" if single else spec.name, seg_name, alg, Mode(pm).value, sub))
    t0 = time.perf_counter()
    workers = worker_count(plan.workers)
    args = [(j, plan, plan.output) for j in jobs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            cells = list(ex.map(_run_job, args))
    else:
        cells = [_run_job(a) for a in args]
    rows = [r for c in cells for r in c["rows"]]
    report = {
        "plan": _plan_dict(plan),
        "cells": cells,
        "rows": rows,
        "wall_time_s": time.perf_counter() - t0,
    }
    if plan.output is not None:
        write_report(report, Path(plan.output))
    return report


def _plan_dict(plan: BenchPlan) -> dict:
    d = asdict(plan)
    d.pop("output", None)
    d.pop("workers", None)
    return d


def write_report(report: dict, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_table(report["rows"], out / "report.csv")
    artifacts.write_json(out / "report.json", report)


def write_table(rows: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            w.writerow([artifacts.fmt(r.get(c)) for c in REPORT_COLUMNS])
