"""Per-endpoint count trees over the cell hierarchy.

The tree is rooted at the deepest cell that is an ancestor of every used
endpoint cell and conceptually covers every target-resolution descendant of
that root. Only data-bearing nodes carry stored volumes; zero-volume nodes
are materialized on first access (or eagerly for small trees), so a
resolution-10 coverage never has to exist in memory.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterator

from .errors import DisjointRoots, EmptyMatrix, UnknownCell
from .hexgrid import Cell, Hierarchy
from .model import Mode, SparseOD

ORIGIN = "origin"
DESTINATION = "destination"

EAGER_LEAF_LIMIT = 7**3


@dataclass(frozen=True)
class TreeNode:
    volume: float
    children: tuple
    parent: Cell | None


class CountTree:
    def __init__(
        self,
        hierarchy: Hierarchy,
        root: Cell,
        target_resolution: int,
        endpoint: str,
        volumes: dict,
        mode: Mode = Mode.PARTICIPANT,
    ):
        self.hierarchy = hierarchy
        self.root = root
        self.target_resolution = target_resolution
        self.endpoint = endpoint
        self.mode = mode
        self._volume = volumes
        self._nodes: dict = {}
        self._root_res = hierarchy.resolution(root)
        self._data_leaf_counts: dict | None = None

    def __repr__(self) -> str:
        return (
            f"CountTree({self.endpoint}, root={self.hierarchy.token(self.root)}, "
            f"target={self.target_resolution}, volume={self.total_volume})"
        )

    @property
    def total_volume(self) -> float:
        return self._volume.get(self.root, 0)

    def covers(self, cell: Cell) -> bool:
        h = self.hierarchy
        if not h.contains(cell):
            return False
        r = h.resolution(cell)
        if r > self.target_resolution or r < self._root_res:
            return False
        return r == self._root_res and cell == self.root or h.is_ancestor(self.root, cell)

    def _require(self, cell: Cell) -> None:
        if not self.covers(cell):
            raise UnknownCell(f"{cell} is not covered by this tree")

    def volume(self, cell: Cell) -> float:
        self._require(cell)
        return self._volume.get(cell, 0)

    def parent(self, cell: Cell) -> Cell | None:
        if cell == self.root:
            return None
        return self.hierarchy.parent(cell, 1)

    def is_leaf(self, cell: Cell) -> bool:
        return self.hierarchy.resolution(cell) == self.target_resolution

    def children(self, cell: Cell) -> tuple:
        return self.node(cell).children

    def node(self, cell: Cell) -> TreeNode:
        n = self._nodes.get(cell)
        if n is None:
            self._require(cell)
            if self.is_leaf(cell):
                kids = ()
            else:
                h = self.hierarchy
                # external maps may hold dead branches with no target-resolution leaves
                kids = tuple(
                    c
                    for c in h.children(cell)
                    if h.kind == "synthetic" or h.leaf_count(c, self.target_resolution) > 0
                )
            n = TreeNode(self._volume.get(cell, 0), kids, self.parent(cell))
            self._nodes[cell] = n
        return n

    def materialize(self) -> None:
        """Create every node of the full coverage."""
        stack = [self.root]
        while stack:
            stack.extend(self.node(stack.pop()).children)

    @property
    def nodes(self) -> dict:
        """Materialized nodes so far (everything after :meth:`materialize`)."""
        return self._nodes

    def leaf_count(self, cell: Cell) -> int:
        """Target-resolution leaves under ``cell`` within the coverage."""
        return self.hierarchy.leaf_count(cell, self.target_resolution)

    def leaves(self, cell: Cell | None = None) -> Iterator[Cell]:
        return self.hierarchy.iter_leaves(self.root if cell is None else cell, self.target_resolution)

    def data_leaves(self) -> list:
        h = self.hierarchy
        return sorted(
            (c for c, v in self._volume.items() if v and h.resolution(c) == self.target_resolution),
            key=h.sort_key,
        )

    def data_leaf_count(self, cell: Cell) -> int:
        """Data-bearing leaves under ``cell``."""
        if self._data_leaf_counts is None:
            counts: dict = {}
            for leaf in self.data_leaves():
                for a in self.hierarchy.lineage(leaf)[: self.target_resolution - self._root_res + 1]:
                    counts[a] = counts.get(a, 0) + 1
            self._data_leaf_counts = counts
        return self._data_leaf_counts.get(cell, 0)

    def dump(self) -> str:
        """Debug JSON of materialized nodes: id, volume, child count."""
        h = self.hierarchy
        rows = [
            {"id": h.token(c), "volume": n.volume, "children": len(n.children)}
            for c, n in sorted(self._nodes.items(), key=lambda kv: h.sort_key(kv[0]))
        ]
        return json.dumps({"root": h.token(self.root), "endpoint": self.endpoint, "nodes": rows})


def find_root(h: Hierarchy, cells, target_resolution: int) -> Cell:
    """Deepest cell that is an ancestor-or-self of every cell in ``cells``."""
    cells = list(cells)
    if len({h.ancestor_at(c, 0) for c in cells}) > 1:
        raise DisjointRoots("endpoint cells have no common ancestor")
    root = h.ancestor_at(cells[0], 0)
    for r in range(1, target_resolution + 1):
        anc = {h.ancestor_at(c, r) for c in cells}
        if len(anc) != 1:
            break
        root = anc.pop()
    return root


def build_tree(
    od: SparseOD,
    h: Hierarchy,
    endpoint: str,
    target_resolution: int | None = None,
    eager_leaf_limit: int = EAGER_LEAF_LIMIT,
) -> CountTree:
    if endpoint not in (ORIGIN, DESTINATION):
        raise ValueError(f"endpoint must be {ORIGIN!r} or {DESTINATION!r}")
    if len(od) == 0:
        raise EmptyMatrix("cannot build a tree from an empty matrix")
    idx = 0 if endpoint == ORIGIN else 1
    leaf_vol: dict = {}
    for pair, v in od.volumes().items():
        c = pair[idx]
        leaf_vol.setdefault(c, []).append(v)
    if target_resolution is None:
        target_resolution = max(h.resolution(c) for c in leaf_vol)
    for c in leaf_vol:
        if h.resolution(c) != target_resolution:
            raise UnknownCell(f"{c} is not at target resolution {target_resolution}")

    root = find_root(h, leaf_vol, target_resolution)
    depth = target_resolution - h.resolution(root)
    volumes: dict = {}
    participant = od.mode is Mode.PARTICIPANT
    for leaf in sorted(leaf_vol, key=h.sort_key):
        vs = leaf_vol[leaf]
        v = sum(vs) if participant else math.fsum(vs)
        for a in h.lineage(leaf)[: depth + 1]:
            volumes[a] = volumes.get(a, 0) + v
    tree = CountTree(h, root, target_resolution, endpoint, volumes, od.mode)
    if h.kind != "synthetic" or tree.leaf_count(root) <= eager_leaf_limit:
        tree.materialize()
    return tree
