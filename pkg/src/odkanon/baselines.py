"""Comparison baselines: uniform hierarchy cuts (OIGH) and 4-D Mondrian."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientVolume
from .generalize import remap
from .hexgrid import Hierarchy
from .model import Mode, SparseOD, TripDataset
from .timing import Deadline
from .treebuild import ORIGIN, CountTree


@dataclass
class OighResult:
    origin_level: int
    destination_level: int
    matrix: SparseOD
    feasible: bool
    origin_map: dict
    destination_map: dict
    k: float
    origin_tree: CountTree
    destination_tree: CountTree
    checked: int = 0

    hierarchy_based = True

    @property
    def hierarchy(self) -> Hierarchy:
        return self.origin_tree.hierarchy

    @property
    def terminated(self) -> str:
        return "reached_k" if self.feasible else "exhausted"

    def zones(self, axis: str) -> set:
        return set((self.origin_map if axis == ORIGIN else self.destination_map).values())

    def zone_of(self, axis: str, leaf):
        tree = self.origin_tree if axis == ORIGIN else self.destination_tree
        level = self.origin_level if axis == ORIGIN else self.destination_level
        return tree.hierarchy.ancestor_at(leaf, level)


def _level_ids(tree: CountTree, leaves: list, levels: range) -> dict[int, np.ndarray]:
    h = tree.hierarchy
    out = {}
    for lvl in levels:
        ids: dict = {}
        out[lvl] = np.array([ids.setdefault(h.ancestor_at(c, lvl), len(ids)) for c in leaves], dtype=np.int64)
    return out


def level_pair_order(levels_o: range, levels_d: range) -> list[tuple[int, int]]:
    """Candidate pairs, most preferred first: finest total, then balanced, then finer origins."""
    pairs = [(lo, ld) for lo in levels_o for ld in levels_d]
    return sorted(pairs, key=lambda p: (-(p[0] + p[1]), -min(p), -p[0]))


def oigh(
    od: SparseOD,
    tree_o: CountTree,
    tree_d: CountTree,
    k: float,
    deadline: Deadline | None = None,
) -> OighResult:
    """Finest uniform (origin level, destination level) cut that makes every entry >= k."""
    h = tree_o.hierarchy
    pairs = list(od.entries)
    vols = np.array([od.volume(p) for p in pairs], dtype=np.float64)
    levels_o = range(h.resolution(tree_o.root), tree_o.target_resolution + 1)
    levels_d = range(h.resolution(tree_d.root), tree_d.target_resolution + 1)
    ids_o = _level_ids(tree_o, [p[0] for p in pairs], levels_o)
    ids_d = _level_ids(tree_d, [p[1] for p in pairs], levels_d)

    chosen = (levels_o.start, levels_d.start)
    feasible = False
    checked = 0
    for lo, ld in level_pair_order(levels_o, levels_d):
        if deadline is not None:
            deadline.check()
        checked += 1
        io, idd = ids_o[lo], ids_d[ld]
        key = io * (int(idd.max()) + 1) + idd
        _, inv = np.unique(key, return_inverse=True)
        sums = np.bincount(inv, weights=vols)
        if sums.min() >= k:
            chosen, feasible = (lo, ld), True
            break
    if not feasible:
        total = od.total_volume()
        feasible = total >= k

    lo, ld = chosen
    omap = {c: h.ancestor_at(c, lo) for c in tree_o.data_leaves()}
    dmap = {c: h.ancestor_at(c, ld) for c in tree_d.data_leaves()}
    return OighResult(lo, ld, remap(od, omap, dmap), feasible, omap, dmap, k, tree_o, tree_d, checked)


N_DIMS = 4
DIM_NAMES = ("origin_x", "origin_y", "destination_x", "destination_y")


@dataclass
class Region:
    lo: tuple
    hi: tuple
    members: np.ndarray  # record indices into the dataset
    count: int
    weight_sum: float

    def volume(self, mode: Mode) -> float:
        return self.count if Mode(mode) is Mode.PARTICIPANT else self.weight_sum


@dataclass
class MondrianResult:
    regions: list[Region]
    k: float
    mode: Mode
    n_records: int
    assignment: np.ndarray = field(repr=False, default=None)  # record index -> region index

    hierarchy_based = False
    terminated = "reached_k"


def trip_points(ds: TripDataset) -> np.ndarray:
    """``(n, 4)`` array of origin x/y and destination x/y centroids."""
    h = ds.hierarchy
    cache: dict = {}

    def c(cell):
        p = cache.get(cell)
        if p is None:
            p = cache[cell] = h.centroid(cell)
        return p

    pts = np.empty((len(ds.records), N_DIMS), dtype=np.float64)
    for i, r in enumerate(ds.records):
        pts[i, 0:2] = c(r.origin)
        pts[i, 2:4] = c(r.destination)
    return pts


def _balanced_split(vol_sorted: np.ndarray) -> int:
    """Split position whose left volume is closest to half the total."""
    cum = np.cumsum(vol_sorted)
    return int(np.argmin(np.abs(2.0 * cum[:-1] - cum[-1]))) + 1


def mondrian(
    ds: TripDataset,
    h: Hierarchy | None,
    k: float,
    mode: Mode | str = Mode.PARTICIPANT,
    deadline: Deadline | None = None,
    points: np.ndarray | None = None,
) -> MondrianResult:
    """Relaxed median partitioning over (origin x, origin y, dest x, dest y).

    At each node the dimensions are tried by decreasing normalized range;
    the first balanced split leaving volume >= k on both sides is taken.
    """
    mode = Mode(mode)
    if h is not None and h is not ds.hierarchy:
        ds = TripDataset(ds.records, h, ds.target_resolution, ds.has_weights)
    pts = trip_points(ds) if points is None else points
    n = len(ds.records)
    if mode is Mode.PARTICIPANT:
        vol = np.ones(n)
    else:
        vol = np.array([r.weight for r in ds.records], dtype=np.float64)
    total = float(vol.sum())
    if n == 0 or total < k:
        raise InsufficientVolume(f"total volume {total} < k={k}")

    span = pts.max(axis=0) - pts.min(axis=0) if n else np.zeros(N_DIMS)
    final: list[np.ndarray] = []
    stack = [np.arange(n)]
    while stack:
        if deadline is not None:
            deadline.check()
        idx = stack.pop()
        sub = pts[idx]
        rng = sub.max(axis=0) - sub.min(axis=0)
        norm = np.divide(rng, span, out=np.zeros(N_DIMS), where=span > 0)
        split = None
        for dim in sorted(range(N_DIMS), key=lambda d: (-norm[d], d)):
            if norm[dim] <= 0:
                break
            order = idx[np.lexsort((idx, sub[:, dim]))]
            pos = _balanced_split(vol[order])
            left, right = order[:pos], order[pos:]
            if vol[left].sum() >= k and vol[right].sum() >= k:
                split = (left, right)
                break
        if split is None:
            final.append(np.sort(idx))
        else:
            # right pushed first so the left half is processed first
            stack.append(split[1])
            stack.append(split[0])

    regions = []
    assignment = np.empty(n, dtype=np.int64)
    weights = np.array([r.weight for r in ds.records], dtype=np.float64)
    for j, members in enumerate(final):
        sub = pts[members]
        assignment[members] = j
        regions.append(
            Region(
                lo=tuple(float(x) for x in sub.min(axis=0)),
                hi=tuple(float(x) for x in sub.max(axis=0)),
                members=members,
                count=int(len(members)),
                weight_sum=float(np.sum(weights[members])),
            )
        )
    return MondrianResult(regions, k, mode, n, assignment)
