"""Utility metrics (discernibility, normalized class size, generalization error,
reconstruction loss) and the cross-protection k audit.

Every metric takes an evaluation mode independent of the protection mode the
result was produced under: volumes are record counts or weight sums.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .errors import NoValidClasses, NotApplicable
from .model import Mode, SparseOD, TripDataset, build_od, effective_k
from .treebuild import DESTINATION, ORIGIN

COVERAGE = "coverage"
DATA = "data"


def _total(values) -> float:
    vals = list(values)
    if all(isinstance(v, int) for v in vals):
        return sum(vals)
    return math.fsum(vals)


@dataclass
class EquivalenceClasses:
    classes: dict  # zone pair or region id -> volume
    suppressed_volume: float
    total_volume: float
    k: float
    evaluation_mode: Mode

    def valid(self) -> dict:
        return {key: v for key, v in self.classes.items() if v >= self.k}

    def invalid_volume(self) -> float:
        return _total(v for v in self.classes.values() if v < self.k)

    @property
    def d_plus(self) -> float:
        return _total(self.valid().values())


def equivalence_classes(
    result,
    original: SparseOD,
    k: float,
    suppressed_pairs=(),
) -> EquivalenceClasses:
    """Classes of a hierarchy-based result, evaluated on ``original`` volumes.

    ``original`` is the pre-suppression matrix in the evaluation mode.
    """
    if not result.hierarchy_based:
        raise NotApplicable("use mondrian_classes for region results")
    suppressed = set(suppressed_pairs)
    omap, dmap = result.origin_map, result.destination_map
    classes: dict = {}
    supp = []
    for pair, v in original.volumes().items():
        if pair in suppressed:
            supp.append(v)
            continue
        key = (omap[pair[0]], dmap[pair[1]])
        classes[key] = classes.get(key, 0) + v
    return EquivalenceClasses(
        classes, _total(supp) if supp else 0, original.total_volume(), k, original.mode
    )


def mondrian_classes(result, ds: TripDataset, k: float, mode: Mode | str) -> EquivalenceClasses:
    mode = Mode(mode)
    classes = {j: reg.volume(mode) for j, reg in enumerate(result.regions)}
    return EquivalenceClasses(classes, 0, ds.total_volume(mode), k, mode)


def c_dm(eq: EquivalenceClasses) -> float:
    """Discernibility: squared class sizes, plus ``|D|`` per suppressed or sub-k unit."""
    valid = eq.valid().values()
    penalised = _total([eq.invalid_volume(), eq.suppressed_volume])
    return _total([_total(v * v for v in valid), eq.total_volume * penalised])


def c_avg(eq: EquivalenceClasses) -> float:
    """Mean valid class size divided by ``k``."""
    valid = eq.valid()
    if not valid:
        raise NoValidClasses("no equivalence class reaches k")
    return (eq.d_plus / len(valid)) / eq.k


def _leaf_counter(result, axis: str, leaf_count: str):
    tree = result.origin_tree if axis == ORIGIN else result.destination_tree
    if leaf_count == COVERAGE:
        return tree.leaf_count
    if leaf_count == DATA:
        return tree.data_leaf_count
    raise ValueError(f"leaf_count must be {COVERAGE!r} or {DATA!r}")


def g_bar(result, eq: EquivalenceClasses, leaf_count: str = COVERAGE) -> float:
    """Volume-weighted mean of ``|o| + |d|`` leaf cells over valid classes.

    ``leaf_count="coverage"`` counts every target-resolution leaf under a zone;
    ``"data"`` counts only data-bearing leaves.
    """
    if not result.hierarchy_based:
        raise NotApplicable("generalization error needs a hierarchy")
    valid = eq.valid()
    if not valid:
        raise NoValidClasses("no equivalence class reaches k")
    n_o = _leaf_counter(result, ORIGIN, leaf_count)
    n_d = _leaf_counter(result, DESTINATION, leaf_count)
    acc = math.fsum((n_o(o) + n_d(d)) * v for (o, d), v in valid.items())
    return acc / eq.d_plus


def reconstruction_loss(result, original: SparseOD, eq: EquivalenceClasses) -> float:
    """Mean absolute leaf-level error after spreading each valid class uniformly.

    Leaf pairs outside every valid class reconstruct to zero. Pairs with no
    original volume inside a class only contribute the spread value, so the
    sum is closed-form per class and never enumerates empty leaf pairs.
    """
    if not result.hierarchy_based:
        raise NotApplicable("reconstruction loss needs a hierarchy")
    if not eq.total_volume:
        return 0.0
    tree_o, tree_d = result.origin_tree, result.destination_tree
    valid = eq.valid()
    spread = {
        key: v / (tree_o.leaf_count(key[0]) * tree_d.leaf_count(key[1])) for key, v in valid.items()
    }
    data_pairs = dict.fromkeys(valid, 0)
    terms = []
    zo_cache: dict = {}
    zd_cache: dict = {}
    for (o, d), v in original.volumes().items():
        zo = zo_cache.get(o)
        if zo is None:
            zo = zo_cache[o] = result.zone_of(ORIGIN, o) if tree_o.covers(o) else False
        zd = zd_cache.get(d)
        if zd is None:
            zd = zd_cache[d] = result.zone_of(DESTINATION, d) if tree_d.covers(d) else False
        key = (zo, zd)
        if zo is not False and zd is not False and key in spread:
            terms.append(abs(spread[key] - v))
            data_pairs[key] += 1
        else:
            terms.append(v)
    for key, s in spread.items():
        n_leaf_pairs = tree_o.leaf_count(key[0]) * tree_d.leaf_count(key[1])
        terms.append((n_leaf_pairs - data_pairs[key]) * s)
    return math.fsum(terms) / eq.total_volume


@dataclass
class AuditResult:
    min_volume: float | None
    cells_below: int
    required_k: float


def min_k_audit(
    result,
    ds: TripDataset,
    eval_mode: Mode | str,
    required_k: float,
    suppressed_pairs=(),
) -> AuditResult:
    """Re-aggregate the unsuppressed trips through the result and count sub-k cells."""
    mode = Mode(eval_mode)
    if result.hierarchy_based:
        suppressed = set(suppressed_pairs)
        omap, dmap = result.origin_map, result.destination_map
        cells: dict = {}
        for r in ds.records:
            if (r.origin, r.destination) in suppressed:
                continue
            key = (omap[r.origin], dmap[r.destination])
            cells.setdefault(key, []).append(r.volume(mode))
        vols = [_total(v) for v in cells.values()]
    else:
        vols = [reg.volume(mode) for reg in result.regions]
    vols = [v for v in vols if v > 0]
    if not vols:
        return AuditResult(None, 0, required_k)
    return AuditResult(min(vols), sum(1 for v in vols if v < required_k), required_k)


@dataclass
class MetricsReport:
    c_dm: float
    c_avg: float | None
    g_bar: float | None
    recon_loss: float | None
    min_k_cross: dict = field(default_factory=dict)
    wall_time_s: float = 0.0
    evaluation_mode: str = "participant"
    k: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def compute_metrics(
    result,
    ds: TripDataset,
    eval_mode: Mode | str,
    base_k: float,
    suppressed_pairs=(),
    wall_time_s: float = 0.0,
    leaf_count: str = COVERAGE,
) -> MetricsReport:
    """All applicable metrics of ``result`` in one evaluation mode."""
    mode = Mode(eval_mode)
    k = effective_k(base_k, ds, mode)
    if result.hierarchy_based:
        original = build_od(ds, mode)
        eq = equivalence_classes(result, original, k, suppressed_pairs)
    else:
        eq = mondrian_classes(result, ds, k, mode)
    try:
        cavg = c_avg(eq)
    except NoValidClasses:
        cavg = None
    gb = e = None
    if result.hierarchy_based:
        e = reconstruction_loss(result, original, eq)
        if cavg is not None:
            gb = g_bar(result, eq, leaf_count)
    audit = min_k_audit(result, ds, mode, k, suppressed_pairs)
    return MetricsReport(
        c_dm=c_dm(eq),
        c_avg=cavg,
        g_bar=gb,
        recon_loss=e,
        min_k_cross=asdict(audit),
        wall_time_s=wall_time_s,
        evaluation_mode=mode.value,
        k=k,
    )
