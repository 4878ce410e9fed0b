"""Command-line interface.

Exit codes: 0 success (k reached), 2 partial result (generalization
exhausted before reaching k), 1 runtime error, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

from . import __version__, artifacts
from .bench import BenchPlan, DatasetSpec, SynthConfig, gen_synthetic, run_benchmark, write_table
from .errors import DeadlineExceeded, ODKAnonError
from .generalize import GeneralizationResult, remap
from .hexgrid import parse_hierarchy_spec
from .metrics import COVERAGE, DATA, compute_metrics, min_k_audit
from .model import Mode, build_od, effective_k, load_trips, write_trips
from .pipeline import ALGORITHMS, run_algorithm
from .timing import Deadline
from .treebuild import DESTINATION, ORIGIN, build_tree

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 2
EXIT_USAGE = 64

DEFAULT_SEED = 0
METRIC_NAMES = ("c_dm", "c_avg", "g_bar", "e")
HIERARCHY_FREE_UNDEFINED = {"g_bar", "e"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, output_required: bool = True) -> None:
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--output", required=output_required, help="output directory")


def _data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="trip CSV")
    p.add_argument("--hierarchy", required=True, help="synthetic:<resolution> or parents:<file>")
    p.add_argument("--centroids", help="cell,x,y CSV for external hierarchies")
    p.add_argument("--k", type=float, default=10)


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--suppression-budget", type=float, default=0.1)
    p.add_argument("--max-gen-levels", type=int, default=5)
    p.add_argument("--time-limit", type=float, default=7200.0)


def _eval_modes(value: str) -> list[Mode]:
    if value == "both":
        return [Mode.PARTICIPANT, Mode.POPULATION]
    return [Mode(value)]


def _metric_list(value: str | None) -> list[str]:
    if not value:
        return []
    names = [m.strip() for m in value.split(",") if m.strip()]
    bad = [m for m in names if m not in METRIC_NAMES]
    if bad:
        raise UsageError(f"unknown metrics {bad}; choose from {','.join(METRIC_NAMES)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="odkanon", description="k-anonymous homogeneous OD matrices")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic trip dataset")
    _common(p)
    p.add_argument("--n-trips", type=int, default=10_000)
    p.add_argument("--resolution", type=int, default=6)
    p.add_argument("--hotspots", type=int, default=20)
    p.add_argument("--concentration", type=float, default=0.5)
    p.add_argument("--hotspot-spread", type=int, default=0)
    p.add_argument("--weight-mu", type=float, default=7.4)
    p.add_argument("--weight-sigma", type=float, default=1.0)
    p.add_argument("--trips-per-participant", type=float, default=24.5)

    p = sub.add_parser("anonymize", help="anonymize one trip dataset")
    _common(p)
    _data_flags(p)
    _run_flags(p)
    p.add_argument("--mode", choices=[m.value for m in Mode], default="participant")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="odkanon")
    p.add_argument("--metrics", help="comma list of c_dm,c_avg,g_bar,e to compute")
    p.add_argument("--eval-mode", choices=["participant", "population", "both"], default="both")

    p = sub.add_parser("metrics", help="metrics of an anonymize output directory")
    _common(p)
    _data_flags(p)
    p.add_argument("--result", required=True, help="anonymize output directory")
    p.add_argument("--metrics", help="comma list (default: all applicable)")
    p.add_argument("--eval-mode", choices=["participant", "population", "both"], default="both")
    p.add_argument("--leaf-count", choices=[COVERAGE, DATA], default=COVERAGE)

    p = sub.add_parser("audit", help="cross-protection k audit")
    _common(p)
    _data_flags(p)
    _run_flags(p)
    p.add_argument("--algorithm", choices=("odkanon", "oigh"), default="odkanon")
    p.add_argument("--result", help="audit an existing anonymize output instead of running both protections")

    p = sub.add_parser("segment", help="per-segment anonymization sweep")
    _common(p)
    _data_flags(p)
    _run_flags(p)
    p.add_argument("--by", required=True, help="whole, sex, age or profession")
    p.add_argument("--algorithm", default="odkanon", help="comma list of algorithms")
    p.add_argument("--mode", default="participant", help="comma list of protection modes")
    p.add_argument("--eval-mode", choices=["participant", "population", "both"], default="both")

    p = sub.add_parser("bench", help="run a benchmark plan")
    _common(p, output_required=False)
    p.add_argument("--plan", required=True, help="plan JSON")
    p.add_argument("--time-limit", type=float, help="override the plan's per-cell limit")
    return ap


def _load(args):
    h = parse_hierarchy_spec(args.hierarchy, args.centroids)
    ds = load_trips(args.input, h)
    return h, ds


def _input_digests(args) -> dict:
    out = {}
    for attr in ("input", "centroids", "plan"):
        path = getattr(args, attr, None)
        if path:
            out[attr] = artifacts.file_digest(path)
    spec = getattr(args, "hierarchy", None)
    if spec and spec.startswith("parents:"):
        out["hierarchy"] = artifacts.file_digest(spec.partition(":")[2])
    result = getattr(args, "result", None)
    if result:
        for name in ("origin_zones.csv", "destination_zones.csv", "assignment.csv"):
            f = Path(result) / name
            if f.exists():
                out[f"result/{name}"] = artifacts.file_digest(f)
    return out


def _write_manifest(out: Path, args, argv, extra: dict, timings: dict) -> None:
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    manifest = {
        "command": list(argv),
        "subcommand": args.command,
        "config": config,
        "config_hash": artifacts.config_hash(config),
        "inputs": _input_digests(args),
        "seed": args.seed,
        "version": __version__,
        "timings": timings,
        **extra,
    }
    artifacts.write_json(out / artifacts.MANIFEST, manifest)


def cmd_synth(args, argv) -> int:
    t0 = time.perf_counter()
    cfg = SynthConfig(
        n_trips=args.n_trips,
        target_resolution=args.resolution,
        n_hotspots=args.hotspots,
        hotspot_concentration=args.concentration,
        weight_mu=args.weight_mu,
        weight_sigma=args.weight_sigma,
        trips_per_participant=args.trips_per_participant,
        seed=args.seed,
        hotspot_spread=args.hotspot_spread,
    )
    ds = gen_synthetic(cfg)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_trips(ds, out / "trips.csv")
    _write_manifest(
        out,
        args,
        argv,
        {"hierarchy": f"synthetic:{cfg.target_resolution}", "n_trips": len(ds)},
        {"total_s": time.perf_counter() - t0},
    )
    return EXIT_OK


def _write_result(out: Path, outcome, h) -> None:
    res = outcome.result
    if res.hierarchy_based:
        artifacts.write_matrix(out / "matrix.csv", res.matrix, h)
        artifacts.write_zone_map(out / "origin_zones.csv", res.origin_map, h)
        artifacts.write_zone_map(out / "destination_zones.csv", res.destination_map, h)
    else:
        artifacts.write_regions(out / "regions.csv", res)
        artifacts.write_assignment(out / "assignment.csv", res)


def _metrics_rows(result, ds, modes, base_k, suppressed, wanted, algorithm, protect_mode, leaf_count=COVERAGE, wall=0.0):
    rows, reports = [], []
    for em in modes:
        m = compute_metrics(result, ds, em, base_k, suppressed, wall, leaf_count)
        values = {"c_dm": m.c_dm, "c_avg": m.c_avg, "g_bar": m.g_bar, "e": m.recon_loss}
        rows.append(
            {
                "algorithm": algorithm,
                "segment": "whole",
                "protect_mode": protect_mode,
                "eval_mode": em.value,
                **{name: (values[name] if name in wanted else None) for name in METRIC_NAMES},
                "time_s": wall,
            }
        )
        d = m.to_dict()
        for name, key in (("c_dm", "c_dm"), ("c_avg", "c_avg"), ("g_bar", "g_bar"), ("e", "recon_loss")):
            if name not in wanted:
                d.pop(key)
        reports.append(d)
    return rows, reports


def cmd_anonymize(args, argv) -> int:
    wanted = _metric_list(args.metrics)
    if args.algorithm == "mondrian" and HIERARCHY_FREE_UNDEFINED & set(wanted):
        raise UsageError("g_bar and e are undefined for mondrian")
    h, ds = _load(args)
    deadline = Deadline(args.time_limit)
    outcome = run_algorithm(
        ds, args.algorithm, args.k, args.mode, args.suppression_budget, args.max_gen_levels, deadline
    )
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    _write_result(out, outcome, h)
    res = outcome.result
    extra = {
        "algorithm": args.algorithm,
        "protect_mode": outcome.mode.value,
        "base_k": args.k,
        "k": outcome.k,
        "termination": res.terminated,
        "suppression": outcome.suppression.to_dict(h) if outcome.suppression else None,
    }
    if args.algorithm == "odkanon":
        extra["steps"] = res.steps
        extra["below_k"] = [[h.token(o), h.token(d), v] for o, d, v in res.below_k]
    elif args.algorithm == "oigh":
        extra["levels"] = {"origin": res.origin_level, "destination": res.destination_level}
    if wanted:
        rows, reports = _metrics_rows(
            res, ds, _eval_modes(args.eval_mode), args.k, outcome.suppressed_pairs, wanted,
            args.algorithm, outcome.mode.value, wall=outcome.timings["total_s"],
        )
        artifacts.write_json(out / "metrics.json", {"reports": reports})
        write_table(rows, out / "metrics.csv")
    _write_manifest(out, args, argv, extra, outcome.timings)
    return EXIT_OK if res.terminated == "reached_k" else EXIT_PARTIAL


def load_result(result_dir: Path, ds, h):
    """Rebuild a result object from an anonymize output directory."""
    manifest = json.loads((result_dir / artifacts.MANIFEST).read_text(encoding="utf-8"))
    mode = Mode(manifest["protect_mode"])
    algorithm = manifest["algorithm"]
    supp = manifest.get("suppression") or {"suppressed_pairs": []}
    suppressed = {(h.parse(p["origin"]), h.parse(p["destination"])) for p in supp["suppressed_pairs"]}
    if algorithm == "mondrian":
        res = artifacts.read_mondrian(result_dir / "assignment.csv", ds, manifest["k"], mode)
        return manifest, res, suppressed
    od = build_od(ds, mode).without(suppressed)
    tree_o = build_tree(od, h, ORIGIN, ds.target_resolution)
    tree_d = build_tree(od, h, DESTINATION, ds.target_resolution)
    omap = artifacts.read_zone_map(result_dir / "origin_zones.csv", h)
    dmap = artifacts.read_zone_map(result_dir / "destination_zones.csv", h)
    res = GeneralizationResult(
        matrix=remap(od, omap, dmap),
        origin_map=omap,
        destination_map=dmap,
        steps=manifest.get("steps", 0),
        terminated=manifest["termination"],
        k=manifest["k"],
        origin_tree=tree_o,
        destination_tree=tree_d,
    )
    return manifest, res, suppressed


def cmd_metrics(args, argv) -> int:
    t0 = time.perf_counter()
    h, ds = _load(args)
    manifest, res, suppressed = load_result(Path(args.result), ds, h)
    wanted = _metric_list(args.metrics) or list(METRIC_NAMES)
    if not res.hierarchy_based:
        if args.metrics and HIERARCHY_FREE_UNDEFINED & set(wanted):
            raise UsageError("g_bar and e are undefined for mondrian")
        wanted = [m for m in wanted if m not in HIERARCHY_FREE_UNDEFINED]
    base_k = manifest.get("base_k", args.k)
    rows, reports = _metrics_rows(
        res, ds, _eval_modes(args.eval_mode), base_k, suppressed, wanted,
        manifest["algorithm"], manifest["protect_mode"], args.leaf_count,
        wall=manifest.get("timings", {}).get("total_s", 0.0),
    )
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    artifacts.write_json(out / "metrics.json", {"reports": reports})
    write_table(rows, out / "metrics.csv")
    _write_manifest(out, args, argv, {"result_manifest": artifacts.strip_timing(manifest)}, {"total_s": time.perf_counter() - t0})
    return EXIT_OK


AUDIT_COLUMNS = (
    "protect_mode", "k_dataset", "k_population",
    "cells_below_dataset", "cells_below_population",
    "required_k_dataset", "required_k_population",
)


def _audit_row(protect_mode: str, res, ds, base_k, suppressed) -> dict:
    row = {"protect_mode": protect_mode}
    for mode, tag in ((Mode.PARTICIPANT, "dataset"), (Mode.POPULATION, "population")):
        k = effective_k(base_k, ds, mode)
        a = min_k_audit(res, ds, mode, k, suppressed)
        row[f"k_{tag}"] = a.min_volume
        row[f"cells_below_{tag}"] = a.cells_below
        row[f"required_k_{tag}"] = k
    return row


def cmd_audit(args, argv) -> int:
    t0 = time.perf_counter()
    h, ds = _load(args)
    rows = []
    if args.result:
        manifest, res, suppressed = load_result(Path(args.result), ds, h)
        rows.append(_audit_row(manifest["protect_mode"], res, ds, manifest.get("base_k", args.k), suppressed))
    else:
        for pm in (Mode.PARTICIPANT, Mode.POPULATION):
            deadline = Deadline(args.time_limit)
            outcome = run_algorithm(
                ds, args.algorithm, args.k, pm, args.suppression_budget, args.max_gen_levels, deadline
            )
            rows.append(_audit_row(pm.value, outcome.result, ds, args.k, outcome.suppressed_pairs))
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "audit.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AUDIT_COLUMNS)
        for r in rows:
            w.writerow([artifacts.fmt(r[c]) for c in AUDIT_COLUMNS])
    artifacts.write_json(out / "audit.json", {"rows": rows})
    _write_manifest(out, args, argv, {}, {"total_s": time.perf_counter() - t0})
    return EXIT_OK


def cmd_segment(args, argv) -> int:
    t0 = time.perf_counter()
    algorithms = tuple(a.strip() for a in args.algorithm.split(","))
    bad = set(algorithms) - set(ALGORITHMS)
    if bad:
        raise UsageError(f"unknown algorithms {sorted(bad)}")
    try:
        modes = tuple(Mode(m.strip()).value for m in args.mode.split(","))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    h, ds = _load(args)
    out = Path(args.output)
    plan = BenchPlan(
        datasets=[DatasetSpec(name="input")],
        algorithms=algorithms,
        segments=(args.by,),
        base_k=args.k,
        protect_modes=modes,
        eval_modes=tuple(m.value for m in _eval_modes(args.eval_mode)),
        time_limit_s=args.time_limit,
        suppression_budget=args.suppression_budget,
        max_gen_levels=args.max_gen_levels,
        output=str(out),
    )
    report = run_benchmark(plan, datasets={"input": ds})
    write_table(report["rows"], out / "segment_table.csv")
    _write_manifest(out, args, argv, {"cells": len(report["cells"])}, {"total_s": time.perf_counter() - t0})
    return EXIT_OK


def cmd_bench(args, argv) -> int:
    t0 = time.perf_counter()
    plan = BenchPlan.load(args.plan)
    if args.output:
        plan.output = args.output
    if args.time_limit is not None:
        plan.time_limit_s = args.time_limit
        plan.__post_init__()
    if plan.output is None:
        raise UsageError("bench needs --output or an output entry in the plan")
    report = run_benchmark(plan)
    _write_manifest(Path(plan.output), args, argv, {"cells": len(report["cells"])}, {"total_s": time.perf_counter() - t0})
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "anonymize": cmd_anonymize,
    "metrics": cmd_metrics,
    "audit": cmd_audit,
    "segment": cmd_segment,
    "bench": cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(f"odkanon {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DeadlineExceeded as exc:
        print(f"odkanon {args.command}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ODKAnonError, ValueError, OSError) as exc:
        print(f"odkanon {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
