"""Greedy homogeneous generalization of a sparse OD matrix.

Origins are the matrix columns and destinations the rows. Each step merges
one sibling group (live labels sharing a parent in the count tree) into its
parent, on an axis picked by the ratio-balancing rule, until every nonzero
entry reaches ``k`` or no merge is left.

Both orientations of the matrix are kept as dict-of-dicts so merging a
group only touches the nonzeros of the merged lines. Candidate groups live
in one lazy min-heap per axis; an entry is stale once its group's version
changes.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from .errors import InconsistentInputs
from .hexgrid import Cell, Hierarchy
from .model import Mode, ODEntry, SparseOD
from .timing import Deadline
from .treebuild import DESTINATION, ORIGIN, CountTree

REACHED_K = "reached_k"
EXHAUSTED = "exhausted"

RATIO_TOLERANCE = 0.03
DEADLINE_EVERY = 256


def other_axis(axis: str) -> str:
    return DESTINATION if axis == ORIGIN else ORIGIN


def select_axis(
    n_origins: int, n_destinations: int, initial_ratio: float, last_axis: str | None
) -> str:
    """Force the dominant axis once the live shape drifts beyond +-3 %, else alternate."""
    ratio = n_origins / n_destinations
    if ratio > initial_ratio * (1 + RATIO_TOLERANCE):
        return ORIGIN
    if ratio < initial_ratio * (1 - RATIO_TOLERANCE):
        return DESTINATION
    if last_axis is None:
        return ORIGIN
    return other_axis(last_axis)


@dataclass
class GeneralizationResult:
    matrix: SparseOD
    origin_map: dict
    destination_map: dict
    steps: int
    terminated: str
    k: float
    origin_tree: CountTree
    destination_tree: CountTree
    merges: list = field(default_factory=list)  # (axis, parent cell, cost)
    below_k: list = field(default_factory=list)  # (origin zone, destination zone, volume)
    min_volume: float | None = None
    config: dict = field(default_factory=dict)
    _zone_sets: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    hierarchy_based = True

    @property
    def hierarchy(self) -> Hierarchy:
        return self.origin_tree.hierarchy

    def zones(self, axis: str) -> set:
        z = self._zone_sets.get(axis)
        if z is None:
            z = set((self.origin_map if axis == ORIGIN else self.destination_map).values())
            self._zone_sets[axis] = z
        return z

    def zone_of(self, axis: str, leaf: Cell) -> Cell:
        """Zone of any covered leaf; zero-volume leaves under no zone are their own zone."""
        return _zone_lookup(
            self.origin_tree if axis == ORIGIN else self.destination_tree,
            self.zones(axis),
            leaf,
        )


def _zone_lookup(tree: CountTree, live, leaf):
    for a in tree.hierarchy.lineage(leaf)[: tree.target_resolution - tree.hierarchy.resolution(tree.root) + 1]:
        if a in live:
            return a
    return leaf


class _AxisState:
    def __init__(self, tree: CountTree):
        self.tree = tree
        self.h = tree.hierarchy
        self.lines: dict = {}  # label -> {other label: volume}
        self.marginal: dict = {}
        self.members: dict = {}  # parent -> set of live child labels
        self.live_under: dict = {}  # cell -> live labels strictly below it
        self.version: dict = {}
        self.heap: list = []
        self._ancestors: dict = {}

    def ancestors(self, cell) -> list:
        """Strict ancestors of ``cell`` inside the tree, nearest first."""
        a = self._ancestors.get(cell)
        if a is None:
            depth = self.h.resolution(cell) - self.h.resolution(self.tree.root)
            a = self.h.lineage(cell)[1 : depth + 1]
            self._ancestors[cell] = a
        return a

    def add_label(self, label) -> None:
        anc = self.ancestors(label)
        for a in anc:
            self.live_under[a] = self.live_under.get(a, 0) + 1
        if anc:
            self.members.setdefault(anc[0], set()).add(label)

    def consistent(self, parent) -> bool:
        m = self.members.get(parent)
        return bool(m) and self.live_under.get(parent, 0) == len(m)

    def cost(self, parent):
        vals = [self.marginal[m] for m in sorted(self.members[parent], key=self.h.sort_key)]
        return sum(vals) if isinstance(vals[0], int) else math.fsum(vals)

    def push(self, parent) -> None:
        if self.consistent(parent):
            v = self.version.get(parent, 0)
            heapq.heappush(self.heap, (self.cost(parent), self.h.sort_key(parent), v, parent))

    def best(self):
        heap = self.heap
        while heap:
            cost, _, v, parent = heap[0]
            if self.version.get(parent, 0) == v and self.consistent(parent):
                return parent, cost
            heapq.heappop(heap)
        return None


class SparseGeneralizer:
    """Mutable state of one generalization run."""

    def __init__(self, od: SparseOD, tree_o: CountTree, tree_d: CountTree, k: float):
        _check_inputs(od, tree_o, tree_d)
        self.k = k
        self.od = od
        self.axes = {ORIGIN: _AxisState(tree_o), DESTINATION: _AxisState(tree_d)}
        cols, rows = self.axes[ORIGIN].lines, self.axes[DESTINATION].lines
        self.n_below = 0
        for (o, d), v in od.volumes().items():
            if not v:
                continue
            cols.setdefault(o, {})[d] = v
            rows.setdefault(d, {})[o] = v
            if v < k:
                self.n_below += 1
        for st in self.axes.values():
            for label, line in st.lines.items():
                st.marginal[label] = _sum(line.values())
            for label in sorted(st.lines, key=st.h.sort_key):
                st.add_label(label)
            for parent in sorted(st.members, key=st.h.sort_key):
                st.push(parent)
        self.initial_ratio = len(cols) / len(rows) if rows else 1.0
        self.last_axis: str | None = None
        self.steps = 0
        self.merges: list = []

    def shape(self) -> tuple[int, int]:
        return len(self.axes[ORIGIN].lines), len(self.axes[DESTINATION].lines)

    def best_group(self, axis: str):
        return self.axes[axis].best()

    def apply_merge(self, axis: str, parent) -> None:
        st = self.axes[axis]
        other = self.axes[other_axis(axis)].lines
        members = sorted(st.members.pop(parent), key=st.h.sort_key)
        k = self.k
        merged: dict = {}
        for m in members:
            for o, v in st.lines.pop(m).items():
                if v < k:
                    self.n_below -= 1
                merged[o] = merged[o] + v if o in merged else v
                del other[o][m]
            del st.marginal[m]
        for o, v in merged.items():
            other[o][parent] = v
            if v < k:
                self.n_below += 1
        st.lines[parent] = merged
        st.marginal[parent] = _sum(merged.values())
        st.version[parent] = st.version.get(parent, 0) + 1
        anc = st.ancestors(parent)
        st.live_under[parent] = 0
        for a in anc:
            st.live_under[a] -= len(members) - 1
        if anc:
            g = anc[0]
            st.members.setdefault(g, set()).add(parent)
            st.version[g] = st.version.get(g, 0) + 1
            st.push(g)

    def run(self, deadline: Deadline | None = None) -> str:
        while self.n_below > 0:
            if deadline is not None and self.steps % DEADLINE_EVERY == 0:
                deadline.check()
            n_o, n_d = self.shape()
            axis = select_axis(n_o, n_d, self.initial_ratio, self.last_axis)
            best = self.best_group(axis)
            if best is None:
                axis = other_axis(axis)
                best = self.best_group(axis)
                if best is None:
                    return EXHAUSTED
            parent, cost = best
            self.apply_merge(axis, parent)
            self.merges.append((axis, parent, cost))
            self.last_axis = axis
            self.steps += 1
        return REACHED_K

    def zone_map(self, axis: str) -> dict:
        st = self.axes[axis]
        live = st.lines
        out = {}
        for leaf in st.tree.data_leaves():
            out[leaf] = _zone_lookup(st.tree, live, leaf)
        return out


def _sum(values):
    vals = list(values)
    if all(isinstance(v, int) for v in vals):
        return sum(vals)
    return math.fsum(vals)


def _check_inputs(od: SparseOD, tree_o: CountTree, tree_d: CountTree) -> None:
    total = od.total_volume()
    for t in (tree_o, tree_d):
        tv = t.total_volume
        if not math.isclose(tv, total, rel_tol=1e-9, abs_tol=1e-12):
            raise InconsistentInputs(f"{t.endpoint} tree volume {tv} != matrix volume {total}")
    if tree_o.hierarchy is not tree_d.hierarchy and tree_o.hierarchy != tree_d.hierarchy:
        raise InconsistentInputs("trees use different hierarchies")


def remap(od: SparseOD, origin_map: dict, destination_map: dict, mode: Mode | None = None) -> SparseOD:
    """Aggregate ``od`` through zone maps, keeping counts and weight sums."""
    counts: dict = {}
    weights: dict = {}
    for (o, d), e in od.entries.items():
        key = (origin_map[o], destination_map[d])
        counts[key] = counts.get(key, 0) + e.count
        weights.setdefault(key, []).append(e.weight_sum)
    return SparseOD(
        {key: ODEntry(c, math.fsum(weights[key])) for key, c in counts.items()},
        od.mode if mode is None else mode,
    )


def anonymize(
    od: SparseOD,
    tree_o: CountTree,
    tree_d: CountTree,
    k: float,
    deadline: Deadline | None = None,
) -> GeneralizationResult:
    """Merge sibling groups greedily until every nonzero entry is >= ``k``."""
    gen = SparseGeneralizer(od, tree_o, tree_d, k)
    terminated = gen.run(deadline)
    omap, dmap = gen.zone_map(ORIGIN), gen.zone_map(DESTINATION)
    matrix = remap(od, omap, dmap)
    vols = matrix.volumes()
    h = tree_o.hierarchy
    below = sorted(
        ((o, d, v) for (o, d), v in vols.items() if v < k),
        key=lambda t: (h.sort_key(t[0]), h.sort_key(t[1])),
    )
    return GeneralizationResult(
        matrix=matrix,
        origin_map=omap,
        destination_map=dmap,
        steps=gen.steps,
        terminated=terminated,
        k=k,
        origin_tree=tree_o,
        destination_tree=tree_d,
        merges=gen.merges,
        below_k=below,
        min_volume=min(vols.values()) if vols else None,
    )
