"""Budgeted pre-suppression of OD pairs that stay below k within L levels."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import InvalidConfig
from .hexgrid import Hierarchy
from .model import SparseOD
from .timing import Deadline


@dataclass(frozen=True)
class SuppressionConfig:
    k: float
    max_levels: int = 5
    budget_fraction: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.budget_fraction <= 1.0:
            raise InvalidConfig(f"budget_fraction must be in [0, 1], got {self.budget_fraction}")
        if self.max_levels < 0:
            raise InvalidConfig("max_levels must be >= 0")
        if not self.k > 0:
            raise InvalidConfig("k must be positive")


@dataclass
class SuppressionReport:
    suppressed_pairs: list = field(default_factory=list)  # (origin, destination, volume)
    suppressed_volume: float = 0
    suppressed_row_count: int = 0
    budget_rows: int = 0
    problematic_row_count: int = 0
    suppressed_trip_count: int = 0
    total_rows: int = 0
    total_trip_count: int = 0

    @property
    def budget_binding(self) -> bool:
        return self.problematic_row_count > self.budget_rows

    @property
    def pairs(self) -> set:
        return {(o, d) for o, d, _ in self.suppressed_pairs}

    def to_dict(self, h: Hierarchy) -> dict:
        return {
            "suppressed_pairs": [
                {"origin": h.token(o), "destination": h.token(d), "volume": v}
                for o, d, v in self.suppressed_pairs
            ],
            "suppressed_volume": self.suppressed_volume,
            "suppressed_row_count": self.suppressed_row_count,
            "suppressed_trip_count": self.suppressed_trip_count,
            "budget_rows": self.budget_rows,
            "problematic_row_count": self.problematic_row_count,
            "total_rows": self.total_rows,
            "total_trip_count": self.total_trip_count,
        }


def budget_rows(n: int, beta: float) -> int:
    """``floor(n * beta)`` evaluated on the decimal value of ``beta``."""
    return math.floor(n * Fraction(repr(float(beta))))


def prefilter(
    od: SparseOD, h: Hierarchy, cfg: SuppressionConfig, deadline: Deadline | None = None
) -> tuple[SparseOD, SuppressionReport]:
    """Drop OD pairs that reach ``k`` at no generalization level ``0..L``.

    Suppression is capped at ``floor(n * beta)`` pairs; when more pairs are
    problematic the lowest-volume ones go first.
    """
    vols = od.volumes()
    n = len(vols)
    report = SuppressionReport(
        budget_rows=budget_rows(n, cfg.budget_fraction),
        total_rows=n,
        total_trip_count=od.total_count(),
    )
    if n == 0:
        return od, report

    lineage: dict = {}
    for o, d in vols:
        if o not in lineage:
            lineage[o] = h.lineage(o)
        if d not in lineage:
            lineage[d] = h.lineage(d)

    valid: set = set()
    for level in range(cfg.max_levels + 1):
        if deadline is not None:
            deadline.check()
        groups: dict = {}
        keys = {}
        for pair, v in vols.items():
            lo, ld = lineage[pair[0]], lineage[pair[1]]
            g = (lo[min(level, len(lo) - 1)], ld[min(level, len(ld) - 1)])
            keys[pair] = g
            groups[g] = groups.get(g, 0) + v
        for pair, g in keys.items():
            if groups[g] >= cfg.k:
                valid.add(pair)

    problematic = [p for p in vols if p not in valid]
    report.problematic_row_count = len(problematic)
    if len(problematic) > report.budget_rows:
        problematic.sort(key=lambda p: (vols[p], h.sort_key(p[0]), h.sort_key(p[1])))
        chosen = problematic[: report.budget_rows]
    else:
        chosen = sorted(problematic, key=lambda p: (h.sort_key(p[0]), h.sort_key(p[1])))
    if not chosen:
        return od, report

    report.suppressed_pairs = [(o, d, vols[(o, d)]) for o, d in chosen]
    svols = [vols[p] for p in chosen]
    report.suppressed_volume = sum(svols) if isinstance(svols[0], int) else math.fsum(svols)
    report.suppressed_row_count = len(chosen)
    report.suppressed_trip_count = sum(od.entries[p].count for p in chosen)
    return od.without(chosen), report
