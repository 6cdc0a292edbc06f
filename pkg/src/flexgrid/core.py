"""Self-balancing multi-dimensional grid index: layout, cells, and queries.

The index slices R^D into half-open slabs along every axis except one
designated *sort dimension*; the cross product of slabs forms a dense table
of cells. Each cell keeps its vectors ordered by the sort-dimension value
(full coordinate tuple as tiebreak) so an orthogonal range query scans only
the matching slice of each intersected cell. Insert and erase maintain
per-axis slab load counters and invoke an optional hook through which the
re-balancing layer (see `repartition`) splits, merges, or equalizes slabs.

Vectors are plain tuples of finite floats; two vectors are the same point
iff all coordinates compare equal, which gives the structure set semantics.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from itertools import product
from operator import itemgetter
from typing import Callable, Iterable, Iterator, Sequence

from .tuner import PartitionSpec, equal_depth_boundaries

Vector = tuple[float, ...]
CellCoords = tuple[int, ...]


def as_vector(coords: Sequence[float]) -> Vector:
    """Validate and normalize a coordinate sequence into a Vector."""
    v = tuple(float(c) for c in coords)
    if not v:
        raise ValueError("vector must have at least one coordinate")
    for c in v:
        if not math.isfinite(c):
            raise ValueError(f"non-finite coordinate {c!r}")
    return v


@dataclass(frozen=True)
class QueryBox:
    """Closed axis-aligned box [lo, hi]; matches v iff lo[d] <= v[d] <= hi[d]."""

    lo: Vector
    hi: Vector

    def __post_init__(self) -> None:
        lo, hi = tuple(self.lo), tuple(self.hi)
        if len(lo) != len(hi):
            raise ValueError("lo and hi must have equal dimensionality")
        for l, h in zip(lo, hi):
            if not (math.isfinite(l) and math.isfinite(h)):
                raise ValueError("box corners must be finite")
            if l > h:
                raise ValueError(f"empty box: lo {l!r} > hi {h!r}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dims(self) -> int:
        return len(self.lo)

    def contains(self, v: Vector) -> bool:
        return all(l <= c <= h for l, c, h in zip(self.lo, v, self.hi))


@dataclass
class Counters:
    """Cumulative work counters, in ordered-container operation units."""

    container_inserts: int = 0
    container_erases: int = 0
    entries_scanned: int = 0
    entries_filtered: int = 0
    cells_visited: int = 0
    searches: int = 0
    inserts: int = 0
    erases: int = 0
    degenerate_skips: int = 0

    def container_ops(self) -> int:
        return self.container_inserts + self.container_erases

    def as_dict(self) -> dict[str, int]:
        return dict(self.__dict__)


@dataclass
class IndexStats:
    """Read-only snapshot of structure shape and counters."""

    n: int
    dims: int
    sort_dim: int
    slab_counts: list[int]
    cell_count: int
    slab_loads: list[list[int]]
    counters: dict[str, int]


class GridLayout:
    """Per-axis strictly increasing boundaries; axis sort_dim has none.

    A value's slab on axis d is the count of boundaries <= value, i.e.
    slabs are half-open [b_i, b_{i+1}) with unbounded outer slabs, so every
    finite real maps to exactly one slab.
    """

    __slots__ = ("boundaries", "sort_dim", "dims")

    def __init__(self, boundaries: Sequence[Sequence[float]], sort_dim: int) -> None:
        self.boundaries = [list(map(float, b)) for b in boundaries]
        self.dims = len(self.boundaries)
        self.sort_dim = sort_dim
        if self.dims < 2:
            raise ValueError("index needs at least 2 dimensions")
        if not 0 <= sort_dim < self.dims:
            raise ValueError(f"sort_dim {sort_dim} out of range")
        if self.boundaries[sort_dim]:
            raise ValueError("sort axis must not be partitioned")
        for d, b in enumerate(self.boundaries):
            for x, y in zip(b, b[1:]):
                if not x < y:
                    raise ValueError(f"axis {d} boundaries not strictly increasing")
            if any(not math.isfinite(x) for x in b):
                raise ValueError(f"axis {d} has non-finite boundary")

    def slab_count(self, d: int) -> int:
        return len(self.boundaries[d]) + 1

    @property
    def slab_counts(self) -> list[int]:
        return [len(b) + 1 for b in self.boundaries]

    @property
    def cell_count(self) -> int:
        return math.prod(self.slab_counts)

    def slab_of(self, d: int, value: float) -> int:
        return bisect_right(self.boundaries[d], value)

    def locate(self, v: Vector) -> CellCoords:
        return tuple(bisect_right(b, v[d]) for d, b in enumerate(self.boundaries))


class CellTable:
    """Dense mixed-radix array of cells addressed by per-axis slab indices."""

    __slots__ = ("shape", "strides", "cells")

    def __init__(self, shape: Sequence[int], cells: list[list[Vector]] | None = None) -> None:
        self.shape = list(shape)
        self.strides = self._strides(self.shape)
        size = math.prod(self.shape)
        self.cells = cells if cells is not None else [[] for _ in range(size)]
        if len(self.cells) != size:
            raise ValueError("cell list does not match shape")

    @staticmethod
    def _strides(shape: Sequence[int]) -> list[int]:
        strides = [1] * len(shape)
        for d in range(len(shape) - 2, -1, -1):
            strides[d] = strides[d + 1] * shape[d + 1]
        return strides

    def __len__(self) -> int:
        return len(self.cells)

    def flat(self, coords: Sequence[int]) -> int:
        return sum(c * s for c, s in zip(coords, self.strides))

    def cell(self, coords: Sequence[int]) -> list[Vector]:
        return self.cells[self.flat(coords)]

    def iter_coords(self) -> Iterator[tuple[int, ...]]:
        return product(*(range(x) for x in self.shape))

    def slab_flats(self, axis: int, slab: int) -> Iterator[int]:
        """Flat indices of every cell whose axis-th coordinate is slab."""
        ranges = [range(x) for x in self.shape]
        ranges[axis] = range(slab, slab + 1)
        for coords in product(*ranges):
            yield self.flat(coords)


class GridIndex:
    """The grid index: build, locate, insert, erase, orthogonal range search.

    Mutations require exclusive access (single writer, no internal locks);
    any number of readers may share the index while no writer is active.
    """

    def __init__(self, layout: GridLayout, table: CellTable,
                 counters: Counters | None = None) -> None:
        self.layout = layout
        self.table = table
        self.counters = counters if counters is not None else Counters()
        self.n = 0
        self.slab_loads: list[list[int]] = [[0] * layout.slab_count(d)
                                            for d in range(layout.dims)]
        self.op_serial = 0  # ordinal of the last applied update
        self.update_hook: Callable[[Vector], object] | None = None
        self._sort_key = itemgetter(layout.sort_dim)

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------

    @classmethod
    def build(cls, data: Iterable[Sequence[float]], spec: PartitionSpec,
              counters: Counters | None = None) -> "GridIndex":
        """Bulk-load deduplicated data under equal-depth slab boundaries.

        Each non-sort axis gets spec.counts[d] slabs with boundaries at
        quantile gaps of that axis's coordinates; ties may reduce the
        effective slab count.
        """
        vecs = list(dict.fromkeys(as_vector(v) for v in data))
        dims = spec.dims
        for v in vecs:
            if len(v) != dims:
                raise ValueError(f"vector of dimensionality {len(v)}, expected {dims}")
        boundaries: list[list[float]] = []
        for d in range(dims):
            if d == spec.sort_dim or spec.counts[d] == 1:
                boundaries.append([])
            else:
                col = [v[d] for v in vecs]
                boundaries.append(equal_depth_boundaries(col, spec.counts[d]).boundaries)
        return cls.with_boundaries(boundaries, spec.sort_dim, vecs, counters=counters)

    @classmethod
    def with_boundaries(cls, boundaries: Sequence[Sequence[float]], sort_dim: int,
                        data: Iterable[Sequence[float]] = (),
                        counters: Counters | None = None) -> "GridIndex":
        """Construct from explicit boundaries and fill with deduplicated data."""
        layout = GridLayout(boundaries, sort_dim)
        idx = cls(layout, CellTable(layout.slab_counts), counters=counters)
        idx._bulk_fill(dict.fromkeys(as_vector(v) for v in data))
        return idx

    def _bulk_fill(self, vecs: Iterable[Vector]) -> None:
        lay, table = self.layout, self.table
        s = lay.sort_dim
        loads = self.slab_loads
        count = 0
        for v in vecs:
            if len(v) != lay.dims:
                raise ValueError(f"vector of dimensionality {len(v)}, expected {lay.dims}")
            coords = lay.locate(v)
            table.cells[table.flat(coords)].append(v)
            for d, i in enumerate(coords):
                loads[d][i] += 1
            count += 1
        for cell in table.cells:
            cell.sort(key=lambda t: (t[s], t))
        self.n += count
        self.counters.container_inserts += count

    # ------------------------------------------------------------------
    # point operations
    # ------------------------------------------------------------------

    def _check_vector(self, v: Sequence[float]) -> Vector:
        vt = v if type(v) is tuple else tuple(float(c) for c in v)
        if len(vt) != self.layout.dims:
            raise ValueError(f"vector of dimensionality {len(vt)}, expected {self.layout.dims}")
        for c in vt:
            if not math.isfinite(c):
                raise ValueError(f"non-finite coordinate {c!r}")
        return vt

    def locate(self, v: Sequence[float]) -> CellCoords:
        """Per-axis slab indices of v (binary search per axis)."""
        return self.layout.locate(self._check_vector(v))

    @staticmethod
    def _cell_find(cell: list[Vector], v: Vector, s: int) -> tuple[int, bool]:
        """Position of v in a cell ordered by (v[s], v); (index, present)."""
        vs = v[s]
        lo, hi = 0, len(cell)
        while lo < hi:
            mid = (lo + hi) >> 1
            t = cell[mid]
            ts = t[s]
            if ts < vs or (ts == vs and t < v):
                lo = mid + 1
            else:
                hi = mid
        return lo, lo < len(cell) and cell[lo] == v

    def insert(self, v: Sequence[float]) -> bool:
        """Store v if absent. True = inserted, False = already present."""
        vt = self._check_vector(v)
        coords = self.layout.locate(vt)
        cell = self.table.cells[self.table.flat(coords)]
        pos, present = self._cell_find(cell, vt, self.layout.sort_dim)
        if present:
            return False
        cell.insert(pos, vt)
        self.n += 1
        for d, i in enumerate(coords):
            self.slab_loads[d][i] += 1
        c = self.counters
        c.container_inserts += 1
        c.inserts += 1
        self.op_serial += 1
        if self.update_hook is not None:
            self.update_hook(vt)
        return True

    def erase(self, v: Sequence[float]) -> bool:
        """Remove v if present. True = erased, False = absent."""
        vt = self._check_vector(v)
        coords = self.layout.locate(vt)
        cell = self.table.cells[self.table.flat(coords)]
        pos, present = self._cell_find(cell, vt, self.layout.sort_dim)
        if not present:
            return False
        cell.pop(pos)
        self.n -= 1
        for d, i in enumerate(coords):
            self.slab_loads[d][i] -= 1
        c = self.counters
        c.container_erases += 1
        c.erases += 1
        self.op_serial += 1
        if self.update_hook is not None:
            self.update_hook(vt)
        return True

    def __contains__(self, v: Sequence[float]) -> bool:
        vt = self._check_vector(v)
        cell = self.table.cells[self.table.flat(self.layout.locate(vt))]
        return self._cell_find(cell, vt, self.layout.sort_dim)[1]

    def __len__(self) -> int:
        return self.n

    # ------------------------------------------------------------------
    # range search
    # ------------------------------------------------------------------

    def range_search(self, box: QueryBox) -> tuple[list[Vector], int]:
        """All stored vectors inside the closed box, plus the result count.

        Per non-sort axis only the slabs intersecting [lo, hi] are visited;
        within a cell only the sort-dim slice is scanned, and coordinate
        filters apply only on axes where the cell is a boundary slab of the
        query.
        """
        lay = self.layout
        if box.dims != lay.dims:
            raise ValueError(f"box dimensionality {box.dims}, expected {lay.dims}")
        c = self.counters
        c.searches += 1
        out: list[Vector] = []
        if self.n == 0:
            return out, 0
        lo, hi = box.lo, box.hi
        s = lay.sort_dim
        key_s = self._sort_key
        los, his = lo[s], hi[s]
        # per non-sort axis: flat-index offset plus the filter bounds for
        # boundary slabs (interior slabs need no coordinate check)
        strides = self.table.strides
        axis_steps: list[list[tuple[int, tuple[int, float, float] | None]]] = []
        for d, b in enumerate(lay.boundaries):
            if d == s:
                continue
            a = bisect_right(b, lo[d])
            z = bisect_right(b, hi[d])
            st = strides[d]
            flt = (d, lo[d], hi[d])
            axis_steps.append([(j * st, flt if (j == a or j == z) else None)
                               for j in range(a, z + 1)])
        cells = self.table.cells
        visited = scanned = filtered = 0
        for combo in product(*axis_steps):
            visited += 1
            flat = 0
            filters = []
            for off, flt in combo:
                flat += off
                if flt is not None:
                    filters.append(flt)
            cell = cells[flat]
            if not cell:
                continue
            i0 = bisect_left(cell, los, key=key_s)
            i1 = bisect_right(cell, his, key=key_s)
            if i1 <= i0:
                continue
            scanned += i1 - i0
            if filters:
                filtered += i1 - i0
                for t in cell[i0:i1]:
                    for d, fl, fh in filters:
                        td = t[d]
                        if td < fl or td > fh:
                            break
                    else:
                        out.append(t)
            else:
                out.extend(cell[i0:i1])
        c.cells_visited += visited
        c.entries_scanned += scanned
        c.entries_filtered += filtered
        return out, len(out)

    # ------------------------------------------------------------------
    # introspection
    # ------------------------------------------------------------------

    def iter_entries(self) -> Iterator[Vector]:
        for cell in self.table.cells:
            yield from cell

    def stats(self) -> IndexStats:
        return IndexStats(
            n=self.n,
            dims=self.layout.dims,
            sort_dim=self.layout.sort_dim,
            slab_counts=self.layout.slab_counts,
            cell_count=len(self.table),
            slab_loads=[list(row) for row in self.slab_loads],
            counters=self.counters.as_dict(),
        )

    def check_consistency(self) -> None:
        """Raise AssertionError on any structural invariant violation.

        Verifies counter/load/total consistency and that every stored
        vector locates to the cell that holds it. O(N + X); for tests.
        """
        lay, table = self.layout, self.table
        assert len(table) == lay.cell_count, "cell table size != prod slab counts"
        assert table.shape == lay.slab_counts, "table shape != layout slab counts"
        for d, b in enumerate(lay.boundaries):
            for x, y in zip(b, b[1:]):
                assert x < y, f"axis {d} boundaries not strictly increasing"
        total = 0
        loads = [[0] * lay.slab_count(d) for d in range(lay.dims)]
        s = lay.sort_dim
        for coords in table.iter_coords():
            cell = table.cells[table.flat(coords)]
            prev = None
            for t in cell:
                assert lay.locate(t) == coords, f"{t} stored in wrong cell {coords}"
                key = (t[s], t)
                assert prev is None or prev < key, "cell ordering violated"
                prev = key
                for d, i in enumerate(coords):
                    loads[d][i] += 1
            total += len(cell)
        assert total == self.n, f"sum of cell sizes {total} != n {self.n}"
        assert loads == self.slab_loads, "slab load counters inconsistent"
