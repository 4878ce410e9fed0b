"""One anonymization run: OD build, suppression, trees, algorithm."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .baselines import mondrian, oigh
from .errors import EmptyMatrix
from .generalize import anonymize
from .model import Mode, SparseOD, TripDataset, build_od, effective_k
from .suppress import SuppressionConfig, SuppressionReport, prefilter
from .timing import Deadline
from .treebuild import DESTINATION, ORIGIN, build_tree

ALGORITHMS = ("odkanon", "oigh", "mondrian")


@dataclass
class RunOutcome:
    algorithm: str
    mode: Mode
    base_k: float
    k: float
    result: object
    od: SparseOD | None
    suppression: SuppressionReport | None = None
    timings: dict = field(default_factory=dict)

    @property
    def suppressed_pairs(self) -> set:
        return self.suppression.pairs if self.suppression else set()


def run_algorithm(
    ds: TripDataset,
    algorithm: str = "odkanon",
    base_k: float = 10,
    mode: Mode | str = Mode.PARTICIPANT,
    suppression_budget: float = 0.1,
    max_gen_levels: int = 5,
    deadline: Deadline | None = None,
) -> RunOutcome:
    mode = Mode(mode)
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    h = ds.hierarchy
    k = effective_k(base_k, ds, mode)
    t0 = time.perf_counter()
    timings = {}

    if algorithm == "mondrian":
        if mode is Mode.POPULATION:
            build_od(ds, mode)  # weight precondition
        res = mondrian(ds, h, k, mode, deadline)
        timings["total_s"] = time.perf_counter() - t0
        return RunOutcome(algorithm, mode, base_k, k, res, None, None, timings)

    od = build_od(ds, mode)
    if len(od) == 0:
        raise EmptyMatrix("dataset has no trips")
    report = None
    work = od
    if algorithm == "odkanon":
        cfg = SuppressionConfig(k=k, max_levels=max_gen_levels, budget_fraction=suppression_budget)
        work, report = prefilter(od, h, cfg, deadline)
        timings["suppress_s"] = time.perf_counter() - t0
        if len(work) == 0:
            raise EmptyMatrix("every OD pair was suppressed")
    t1 = time.perf_counter()
    tree_o = build_tree(work, h, ORIGIN, ds.target_resolution)
    tree_d = build_tree(work, h, DESTINATION, ds.target_resolution)
    timings["trees_s"] = time.perf_counter() - t1
    if deadline is not None:
        deadline.check()
    t2 = time.perf_counter()
    if algorithm == "odkanon":
        res = anonymize(work, tree_o, tree_d, k, deadline)
    else:
        res = oigh(work, tree_o, tree_d, k, deadline)
    timings["generalize_s"] = time.perf_counter() - t2
    timings["total_s"] = time.perf_counter() - t0
    return RunOutcome(algorithm, mode, base_k, k, res, od, report, timings)
