"""Trip records, sparse OD matrices and protection modes."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

from .errors import (
    EmptyDataset,
    MissingAttribute,
    MissingWeights,
    NonPositiveWeight,
    ParseError,
    UnknownCell,
)
from .hexgrid import Cell, Hierarchy

SEGMENT_KEYS = ("sex", "age", "profession")
TRIP_COLUMNS = ("person_id", "start_cell", "end_cell", "weight") + SEGMENT_KEYS


class Mode(str, Enum):
    """Whose volumes count: survey records or the population they represent."""

    PARTICIPANT = "participant"
    POPULATION = "population"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, slots=True)
class TripRecord:
    person_id: str
    origin: Cell
    destination: Cell
    weight: float = 1.0
    attributes: Mapping[str, str] = field(default_factory=dict)

    def volume(self, mode: Mode) -> float:
        return 1 if mode is Mode.PARTICIPANT else self.weight


@dataclass(frozen=True)
class TripDataset:
    records: tuple[TripRecord, ...]
    hierarchy: Hierarchy
    target_resolution: int
    has_weights: bool = True

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def subset(self, records: Iterable[TripRecord]) -> "TripDataset":
        return TripDataset(tuple(records), self.hierarchy, self.target_resolution, self.has_weights)

    def total_volume(self, mode: Mode) -> float:
        if mode is Mode.PARTICIPANT:
            return len(self.records)
        return math.fsum(r.weight for r in self.records)


class ODEntry(NamedTuple):
    count: int
    weight_sum: float


@dataclass(frozen=True)
class SparseOD:
    """Sparse OD matrix ``(origin, destination) -> ODEntry``; zero entries are never stored."""

    entries: Mapping[tuple[Cell, Cell], ODEntry]
    mode: Mode = Mode.PARTICIPANT

    def __len__(self) -> int:
        return len(self.entries)

    def volume(self, pair) -> float:
        e = self.entries[pair]
        return e.count if self.mode is Mode.PARTICIPANT else e.weight_sum

    def volumes(self) -> dict:
        if self.mode is Mode.PARTICIPANT:
            return {p: e.count for p, e in self.entries.items()}
        return {p: e.weight_sum for p, e in self.entries.items()}

    def total_volume(self) -> float:
        if self.mode is Mode.PARTICIPANT:
            return sum(e.count for e in self.entries.values())
        return math.fsum(e.weight_sum for e in self.entries.values())

    def total_count(self) -> int:
        return sum(e.count for e in self.entries.values())

    def without(self, pairs: Iterable) -> "SparseOD":
        drop = set(pairs)
        return SparseOD({p: e for p, e in self.entries.items() if p not in drop}, self.mode)


def _parse_cell(h: Hierarchy, token: str, row: int, column: str, target_resolution: int | None):
    if not token:
        raise ParseError(row, column, "empty cell")
    try:
        cell = h.parse(token)
    except UnknownCell as exc:
        raise UnknownCell(f"row {row}, column {column!r}: {exc}") from None
    if target_resolution is not None and h.resolution(cell) != target_resolution:
        raise ParseError(
            row, column, f"cell {token!r} is not at target resolution {target_resolution}"
        )
    return cell


def load_trips(
    path: str | Path, hierarchy: Hierarchy, target_resolution: int | None = None
) -> TripDataset:
    """Read the trip CSV. Row numbers in errors count data rows from 1."""
    if target_resolution is None and hierarchy.kind == "synthetic":
        target_resolution = hierarchy.max_resolution
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = set(reader.fieldnames or ())
        missing = {"person_id", "start_cell", "end_cell"} - cols
        if missing:
            raise ParseError(0, ",".join(sorted(missing)), "missing required column")
        has_weights = "weight" in cols
        attr_cols = [a for a in SEGMENT_KEYS if a in cols]
        for i, row in enumerate(reader, start=1):
            pid = (row["person_id"] or "").strip()
            if not pid:
                raise ParseError(i, "person_id", "empty person id")
            o = _parse_cell(hierarchy, (row["start_cell"] or "").strip(), i, "start_cell", target_resolution)
            if target_resolution is None:
                target_resolution = hierarchy.resolution(o)
            d = _parse_cell(hierarchy, (row["end_cell"] or "").strip(), i, "end_cell", target_resolution)
            w = 1.0
            if has_weights:
                raw = (row["weight"] or "").strip()
                try:
                    w = float(raw)
                except ValueError:
                    raise ParseError(i, "weight", f"not a number: {raw!r}") from None
                if not (math.isfinite(w) and w > 0):
                    raise NonPositiveWeight(i, "weight", f"weight must be > 0, got {raw!r}")
            attrs = {a: row[a].strip() for a in attr_cols if row[a] is not None and row[a].strip()}
            records.append(TripRecord(pid, o, d, w, attrs))
    if target_resolution is None:
        target_resolution = 0
    return TripDataset(tuple(records), hierarchy, target_resolution, has_weights)


def write_trips(ds: TripDataset, path: str | Path) -> None:
    attr_cols = [a for a in SEGMENT_KEYS if any(a in r.attributes for r in ds.records)]
    h = ds.hierarchy
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["person_id", "start_cell", "end_cell", "weight", *attr_cols])
        for r in ds.records:
            w.writerow(
                [r.person_id, h.token(r.origin), h.token(r.destination), repr(float(r.weight))]
                + [r.attributes.get(a, "") for a in attr_cols]
            )


def build_od(ds: TripDataset, mode: Mode | str = Mode.PARTICIPANT) -> SparseOD:
    mode = Mode(mode)
    if mode is Mode.POPULATION and not ds.has_weights:
        raise MissingWeights("population mode needs a weight column")
    counts: dict = {}
    weights: dict = {}
    for r in ds.records:
        key = (r.origin, r.destination)
        counts[key] = counts.get(key, 0) + 1
        if mode is Mode.POPULATION:
            weights.setdefault(key, []).append(r.weight)
    if mode is Mode.PARTICIPANT:
        entries = {k: ODEntry(c, float(c)) for k, c in counts.items()}
    else:
        entries = {k: ODEntry(c, math.fsum(weights[k])) for k, c in counts.items()}
    return SparseOD(entries, mode)


def segment(ds: TripDataset, attribute: str) -> dict[str, TripDataset]:
    """Partition records by one attribute; categories in sorted order."""
    groups: dict[str, list[TripRecord]] = {}
    for i, r in enumerate(ds.records):
        try:
            cat = r.attributes[attribute]
        except KeyError:
            raise MissingAttribute(f"record {i + 1} has no {attribute!r} attribute") from None
        groups.setdefault(cat, []).append(r)
    return {cat: ds.subset(groups[cat]) for cat in sorted(groups)}


def participant_weights(ds: TripDataset) -> dict[str, float]:
    """First-seen weight of every distinct participant."""
    out: dict[str, float] = {}
    for r in ds.records:
        out.setdefault(r.person_id, r.weight)
    return out


def effective_k(base_k: float, ds: TripDataset, mode: Mode | str) -> float:
    """Anonymity threshold in the units of ``mode``.

    Population mode scales ``base_k`` by the unrounded mean weight of the
    distinct participants.
    """
    mode = Mode(mode)
    if base_k < 2:
        raise ValueError("base_k must be >= 2")
    if not ds.records:
        raise EmptyDataset("cannot derive k from an empty dataset")
    if mode is Mode.PARTICIPANT:
        return base_k
    if not ds.has_weights:
        raise MissingWeights("population mode needs a weight column")
    w = participant_weights(ds)
    return base_k * (math.fsum(w.values()) / len(w))
