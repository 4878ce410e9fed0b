"""Hierarchical hexagonal grid: cell identifiers and parent/child navigation.

Two hierarchies share one interface:

* :class:`SyntheticHierarchy` is an exact aperture-7 tree. A cell is a root
  token plus a path of base-7 digits, one digit per resolution level.
* :class:`ExternalHierarchy` wraps a precomputed ``child -> parent`` map
  (for instance exported from real H3 indices). Cells are plain string
  tokens and fan-out may vary (pentagons have fewer children).

The algorithms only ever look at the tree, never at geometry. Centroids
exist for the Mondrian baseline.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Hashable, Iterator, Mapping

from .errors import (
    AboveRoot,
    InvalidHierarchy,
    LeafCell,
    MissingCentroid,
    UnknownCell,
)

APERTURE = 7
# Digit whose centroid coincides with its parent's.
CENTER_DIGIT = 6
# Spacing between roots of a multi-root synthetic hierarchy; a subtree's
# embedding stays within radius sum(7**(-r/2)) < 1.61 of its root.
ROOT_SPACING = 4.0

Cell = Hashable


@dataclass(frozen=True, order=True, slots=True)
class CellId:
    """A node of the synthetic hierarchy: ``root`` plus base-7 digit ``path``."""

    root: str
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.root or "/" in self.root:
            raise ValueError(f"invalid root token {self.root!r}")
        for d in self.path:
            if not (isinstance(d, int) and 0 <= d < APERTURE):
                raise ValueError(f"path digit {d!r} outside 0..6")

    @classmethod
    def _derived(cls, root: str, path: tuple) -> "CellId":
        # cells cut from an already valid cell skip the digit checks
        c = object.__new__(cls)
        object.__setattr__(c, "root", root)
        object.__setattr__(c, "path", path)
        return c

    @property
    def resolution(self) -> int:
        return len(self.path)

    def __str__(self) -> str:
        if not self.path:
            return self.root
        return self.root + "/" + "/".join(map(str, self.path))

    @classmethod
    def parse(cls, token: str) -> "CellId":
        parts = token.strip().split("/")
        try:
            path = tuple(int(p) for p in parts[1:])
        except ValueError as exc:
            raise ValueError(f"malformed cell token {token!r}") from exc
        return cls(parts[0], path)


class Hierarchy:
    """Common navigation interface. Subclasses are immutable after init."""

    kind: str
    max_resolution: int

    def parse(self, token: str) -> Cell:
        raise NotImplementedError

    def token(self, cell: Cell) -> str:
        return str(cell)

    def contains(self, cell: Cell) -> bool:
        raise NotImplementedError

    def resolution(self, cell: Cell) -> int:
        raise NotImplementedError

    def parent(self, cell: Cell, levels_up: int = 1) -> Cell:
        raise NotImplementedError

    def children(self, cell: Cell) -> list:
        raise NotImplementedError

    def has_children(self, cell: Cell) -> bool:
        raise NotImplementedError

    def leaf_count(self, cell: Cell, target_resolution: int) -> int:
        """Number of descendants of ``cell`` at ``target_resolution``."""
        raise NotImplementedError

    def iter_leaves(self, cell: Cell, target_resolution: int) -> Iterator[Cell]:
        raise NotImplementedError

    def centroid(self, cell: Cell) -> tuple[float, float]:
        raise NotImplementedError

    def sort_key(self, cell: Cell):
        raise NotImplementedError

    def ancestor_at(self, cell: Cell, resolution: int) -> Cell:
        """Ancestor (or self) at an absolute resolution."""
        r = self.resolution(cell)
        if resolution > r:
            raise ValueError(f"resolution {resolution} is finer than cell {cell}")
        if resolution == r:
            return cell
        return self.parent(cell, r - resolution)

    def is_ancestor(self, anc: Cell, cell: Cell) -> bool:
        """True if ``anc`` is a strict ancestor of ``cell``."""
        ra, rc = self.resolution(anc), self.resolution(cell)
        return ra < rc and self.parent(cell, rc - ra) == anc

    def lineage(self, cell: Cell) -> list:
        """``[cell, parent, grandparent, ..., root]``."""
        out = [cell]
        for _ in range(self.resolution(cell)):
            cell = self.parent(cell, 1)
            out.append(cell)
        return out


class SyntheticHierarchy(Hierarchy):
    """Exact aperture-7 hierarchy with ``max_resolution`` levels below each root."""

    kind = "synthetic"

    def __init__(self, max_resolution: int, roots: tuple[str, ...] = ("R",)):
        if max_resolution < 0:
            raise InvalidHierarchy("max_resolution must be >= 0")
        if not roots or len(set(roots)) != len(roots):
            raise InvalidHierarchy("roots must be non-empty and distinct")
        self.max_resolution = int(max_resolution)
        self.roots = tuple(roots)
        self._root_index = {r: i for i, r in enumerate(self.roots)}

    def __repr__(self) -> str:
        return f"SyntheticHierarchy(max_resolution={self.max_resolution}, roots={self.roots!r})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SyntheticHierarchy)
            and other.max_resolution == self.max_resolution
            and other.roots == self.roots
        )

    def __hash__(self) -> int:
        return hash((self.kind, self.max_resolution, self.roots))

    def parse(self, token: str) -> CellId:
        try:
            cell = CellId.parse(token)
        except ValueError as exc:
            raise UnknownCell(str(exc)) from exc
        if not self.contains(cell):
            raise UnknownCell(f"cell {token!r} not in hierarchy")
        return cell

    def contains(self, cell) -> bool:
        return (
            isinstance(cell, CellId)
            and cell.root in self._root_index
            and len(cell.path) <= self.max_resolution
        )

    def _check(self, cell) -> None:
        if not self.contains(cell):
            raise UnknownCell(f"cell {cell} not in hierarchy")

    def resolution(self, cell: CellId) -> int:
        return len(cell.path)

    def parent(self, cell: CellId, levels_up: int = 1) -> CellId:
        if levels_up < 1:
            raise ValueError("levels_up must be >= 1")
        if levels_up > len(cell.path):
            raise AboveRoot(f"cannot go {levels_up} levels above {cell}")
        return CellId._derived(cell.root, cell.path[: len(cell.path) - levels_up])

    def ancestor_at(self, cell: CellId, resolution: int) -> CellId:
        if resolution > len(cell.path):
            raise ValueError(f"resolution {resolution} is finer than cell {cell}")
        if resolution == len(cell.path):
            return cell
        return CellId._derived(cell.root, cell.path[:resolution])

    def is_ancestor(self, anc: CellId, cell: CellId) -> bool:
        return (
            anc.root == cell.root
            and len(anc.path) < len(cell.path)
            and cell.path[: len(anc.path)] == anc.path
        )

    def has_children(self, cell: CellId) -> bool:
        return len(cell.path) < self.max_resolution

    def children(self, cell: CellId) -> list[CellId]:
        self._check(cell)
        if len(cell.path) >= self.max_resolution:
            raise LeafCell(f"{cell} is at maximum resolution")
        return [CellId._derived(cell.root, cell.path + (d,)) for d in range(APERTURE)]

    def leaf_count(self, cell: CellId, target_resolution: int) -> int:
        depth = target_resolution - len(cell.path)
        if depth < 0:
            raise ValueError(f"{cell} is finer than target resolution {target_resolution}")
        return APERTURE**depth

    def iter_leaves(self, cell: CellId, target_resolution: int) -> Iterator[CellId]:
        depth = target_resolution - len(cell.path)
        if depth < 0:
            raise ValueError(f"{cell} is finer than target resolution {target_resolution}")
        if depth == 0:
            yield cell
            return
        for d in range(APERTURE):
            yield from self.iter_leaves(CellId(cell.root, cell.path + (d,)), target_resolution)

    def centroid(self, cell: CellId) -> tuple[float, float]:
        self._check(cell)
        return _synthetic_centroid(self._root_index[cell.root], cell.path)

    def sort_key(self, cell: CellId):
        return (cell.root, cell.path)

    def iter_cells(self, resolution: int) -> Iterator[CellId]:
        """All cells at ``resolution``, canonical order."""
        for root in sorted(self.roots):
            yield from self.iter_leaves(CellId(root), resolution)


@lru_cache(maxsize=1 << 18)
def _synthetic_centroid(root_index: int, path: tuple[int, ...]) -> tuple[float, float]:
    if not path:
        return (ROOT_SPACING * root_index, 0.0)
    x, y = _synthetic_centroid(root_index, path[:-1])
    r = len(path) - 1  # depth of the parent
    d = path[-1]
    if d != CENTER_DIGIT:
        scale = APERTURE ** (-r / 2)
        angle = math.pi / 3 * d
        x += scale * math.cos(angle)
        y += scale * math.sin(angle)
    return (x, y)


class ExternalHierarchy(Hierarchy):
    """Forest given by a ``child -> parent`` token map, variable fan-out allowed."""

    kind = "external"

    def __init__(
        self,
        parent_map: Mapping[str, str],
        centroids: Mapping[str, tuple[float, float]] | None = None,
    ):
        self._parent = dict(parent_map)
        cells = set(self._parent) | set(self._parent.values())
        kids: dict[str, list[str]] = {c: [] for c in cells}
        for child, par in self._parent.items():
            if child == par:
                raise InvalidHierarchy(f"cell {child!r} is its own parent")
            kids[par].append(child)
        self._children = {c: sorted(v) for c, v in kids.items()}
        self._depth: dict[str, int] = {}
        for c in cells:
            self._resolve_depth(c)
        self.max_resolution = max(self._depth.values(), default=0)
        self.roots = tuple(sorted(c for c in cells if c not in self._parent))
        self._centroids = dict(centroids) if centroids else {}
        self._leaf_counts: dict[tuple[str, int], int] = {}

    def __repr__(self) -> str:
        return f"ExternalHierarchy({len(self._depth)} cells, roots={len(self.roots)})"

    def _resolve_depth(self, cell: str) -> int:
        chain = []
        seen = set()
        c = cell
        while c not in self._depth:
            if c in seen:
                raise InvalidHierarchy(f"cycle in parent map through {c!r}")
            seen.add(c)
            chain.append(c)
            if c not in self._parent:
                self._depth[c] = 0
                chain.pop()
                break
            c = self._parent[c]
        base = self._depth[c]
        for i, node in enumerate(reversed(chain)):
            self._depth[node] = base + i + 1
        return self._depth[cell]

    def parse(self, token: str) -> str:
        token = token.strip()
        if token not in self._depth:
            raise UnknownCell(f"cell {token!r} absent from parent map")
        return token

    def contains(self, cell) -> bool:
        return cell in self._depth

    def resolution(self, cell: str) -> int:
        try:
            return self._depth[cell]
        except KeyError:
            raise UnknownCell(f"cell {cell!r} absent from parent map") from None

    def parent(self, cell: str, levels_up: int = 1) -> str:
        if levels_up < 1:
            raise ValueError("levels_up must be >= 1")
        if levels_up > self.resolution(cell):
            raise AboveRoot(f"cannot go {levels_up} levels above {cell!r}")
        for _ in range(levels_up):
            cell = self._parent[cell]
        return cell

    def has_children(self, cell: str) -> bool:
        return bool(self._children.get(cell))

    def children(self, cell: str) -> list[str]:
        self.resolution(cell)
        kids = self._children[cell]
        if not kids:
            raise LeafCell(f"{cell!r} has no registered children")
        return list(kids)

    def leaf_count(self, cell: str, target_resolution: int) -> int:
        key = (cell, target_resolution)
        n = self._leaf_counts.get(key)
        if n is None:
            r = self.resolution(cell)
            if r > target_resolution:
                raise ValueError(f"{cell!r} is finer than target resolution {target_resolution}")
            if r == target_resolution:
                n = 1
            else:
                n = sum(self.leaf_count(c, target_resolution) for c in self._children[cell])
            self._leaf_counts[key] = n
        return n

    def iter_leaves(self, cell: str, target_resolution: int) -> Iterator[str]:
        r = self.resolution(cell)
        if r > target_resolution:
            raise ValueError(f"{cell!r} is finer than target resolution {target_resolution}")
        if r == target_resolution:
            yield cell
            return
        for c in self._children[cell]:
            yield from self.iter_leaves(c, target_resolution)

    def centroid(self, cell: str) -> tuple[float, float]:
        self.resolution(cell)
        try:
            return self._centroids[cell]
        except KeyError:
            raise MissingCentroid(f"no centroid supplied for {cell!r}") from None

    def sort_key(self, cell: str):
        return cell


def load_parent_map(path: str | Path, centroids_path: str | Path | None = None) -> ExternalHierarchy:
    """Read a ``child,parent`` CSV (and optional ``cell,x,y`` CSV)."""
    parent_map: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"child", "parent"} <= set(reader.fieldnames):
            raise InvalidHierarchy(f"{path}: header must contain child,parent")
        for i, row in enumerate(reader, start=2):
            child, par = row["child"].strip(), row["parent"].strip()
            if not child or not par:
                raise InvalidHierarchy(f"{path}:{i}: empty cell token")
            if child in parent_map and parent_map[child] != par:
                raise InvalidHierarchy(f"{path}:{i}: {child!r} has two parents")
            parent_map[child] = par
    centroids = None
    if centroids_path is not None:
        centroids = {}
        with open(centroids_path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                centroids[row["cell"].strip()] = (float(row["x"]), float(row["y"]))
    return ExternalHierarchy(parent_map, centroids)


def parse_hierarchy_spec(spec: str, centroids_path: str | Path | None = None) -> Hierarchy:
    """Parse ``synthetic:<resolution>`` or ``parents:<file>``."""
    kind, _, arg = spec.partition(":")
    if kind == "synthetic":
        try:
            return SyntheticHierarchy(int(arg))
        except ValueError as exc:
            raise InvalidHierarchy(f"bad synthetic resolution in {spec!r}") from exc
    if kind == "parents":
        if not arg:
            raise InvalidHierarchy("parents: needs a file path")
        return load_parent_map(arg, centroids_path)
    raise InvalidHierarchy(f"unknown hierarchy spec {spec!r}")
