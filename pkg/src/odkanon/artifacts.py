"""Readers and writers for the on-disk outputs (CSV tables, JSON manifests)."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .baselines import MondrianResult, Region
from .hexgrid import Hierarchy
from .model import Mode, SparseOD, TripDataset

MANIFEST = "manifest.json"
TIMING_KEYS = ("timings", "wall_time_s", "time_s")


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_matrix(path, matrix: SparseOD, h: Hierarchy) -> None:
    rows = sorted(matrix.entries.items(), key=lambda kv: (h.sort_key(kv[0][0]), h.sort_key(kv[0][1])))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["origin_zone", "destination_zone", "count", "weight_sum"])
        for (o, d), e in rows:
            w.writerow([h.token(o), h.token(d), e.count, fmt(e.weight_sum)])


def write_zone_map(path, mapping: dict, h: Hierarchy) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["leaf_cell", "zone_cell"])
        for leaf in sorted(mapping, key=h.sort_key):
            w.writerow([h.token(leaf), h.token(mapping[leaf])])


def read_zone_map(path, h: Hierarchy) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        return {h.parse(r["leaf_cell"]): h.parse(r["zone_cell"]) for r in csv.DictReader(fh)}


def write_regions(path, result: MondrianResult) -> None:
    header = [f"dim{i}_{s}" for i in range(4) for s in ("lo", "hi")] + ["count", "weight_sum"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(header)
        for reg in result.regions:
            bounds = [fmt(x) for pair in zip(reg.lo, reg.hi) for x in pair]
            w.writerow(bounds + [reg.count, fmt(reg.weight_sum)])


def write_assignment(path, result: MondrianResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["row", "region"])
        for i, j in enumerate(result.assignment):
            w.writerow([i + 1, int(j)])


def read_mondrian(path, ds: TripDataset, k: float, mode: Mode) -> MondrianResult:
    """Rebuild a region result from a ``row,region`` assignment file."""
    with open(path, newline="", encoding="utf-8") as fh:
        pairs = [(int(r["row"]) - 1, int(r["region"])) for r in csv.DictReader(fh)]
    assignment = np.empty(len(ds.records), dtype=np.int64)
    for i, j in pairs:
        assignment[i] = j
    n_regions = int(assignment.max()) + 1 if len(pairs) else 0
    weights = np.array([r.weight for r in ds.records])
    regions = []
    for j in range(n_regions):
        members = np.flatnonzero(assignment == j)
        regions.append(Region((), (), members, len(members), float(np.sum(weights[members]))))
    return MondrianResult(regions, k, mode, len(ds.records), assignment)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode()).hexdigest()


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2, default=fmt) + "\n", encoding="utf-8")


def strip_timing(obj):
    """Drop timing fields recursively; used for reproducibility comparisons."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj
