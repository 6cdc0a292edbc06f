"""Slab re-partitioning: split, merge, and equalize under load thresholds.

After every update the maintenance hook inspects, on each partitioned axis,
the slab the updated vector landed in plus one round-robin slab (the latter
catches slabs that drift below the merge threshold purely because the total
N grew around them). A slab whose load strays outside the configured band
around N/x_d is repaired with exactly one action per check:

* load > alpha * N/x_d        -> split the slab at its weighted median
* load < beta  * N/x_d, light neighbor (< gamma * N/x_d) -> merge with it
* load < beta  * N/x_d, heavy neighbor                   -> equalize with it

Boundary placement always snaps to a gap between distinct coordinate
values, so resulting loads can deviate from an even split by at most the
largest run of tied coordinates; a slab with no gap at all cannot be split
(counted as a degenerate skip) and an un-splittable equalize falls back to
a merge.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import GridIndex, CellTable, Vector

SPLIT = "split"
MERGE = "merge"
EQUALIZE = "equalize"


@dataclass(frozen=True)
class Thresholds:
    """Load-band coefficients relative to the target slab load N/x_d."""

    alpha: float = 2.0          # split when load exceeds alpha * N/x_d
    beta: float = 1.0 / 3.0     # repair when load drops below beta * N/x_d
    gamma: float | None = None  # merge/equalize switch; default midway

    def __post_init__(self) -> None:
        if self.gamma is None:
            object.__setattr__(self, "gamma", (self.alpha + self.beta) / 2.0)
        if not 0.0 < self.beta < 1.0 < self.alpha:
            raise ValueError(f"need 0 < beta < 1 < alpha, got beta={self.beta} alpha={self.alpha}")
        if not self.beta < self.gamma < self.alpha:
            raise ValueError(f"gamma {self.gamma} must lie strictly between beta and alpha")

    def to_json(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma}

    @classmethod
    def from_json(cls, obj: dict) -> "Thresholds":
        return cls(float(obj.get("alpha", 2.0)), float(obj.get("beta", 1.0 / 3.0)),
                   None if obj.get("gamma") is None else float(obj["gamma"]))


@dataclass
class RepartitionEvent:
    """One executed re-partition action, for the audit log."""

    kind: str                    # split | merge | equalize
    axis: int
    slab: int                    # slab whose check triggered the action
    moved: int                   # vectors re-homed to a different cell
    container_ops: int           # ordered-container ops charged (2 * moved)
    timestamp: int               # update-operation ordinal at emission
    produced: tuple[int, ...]    # loads of the slabs the action produced
    tie_run: int = 1             # largest equal-coordinate run in the slab(s)
    neighbor: int | None = None  # partner slab for merge/equalize
    degenerate: bool = False     # equalize that fell back to merge

    def as_dict(self) -> dict:
        return {
            "kind": self.kind, "axis": self.axis, "slab": self.slab,
            "moved": self.moved, "container_ops": self.container_ops,
            "timestamp": self.timestamp, "produced": list(self.produced),
            "tie_run": self.tie_run, "neighbor": self.neighbor,
            "degenerate": self.degenerate,
        }


def _median_gap(arr: np.ndarray) -> tuple[int, float, int] | None:
    """Split position for sorted coords: (left_count, boundary, max_tie_run).

    Picks the gap between distinct values nearest to an even split (odd
    totals leave the extra point on the low side); None when every value is
    identical. The boundary lies strictly above the last left value.
    """
    c = arr.size
    gaps = np.flatnonzero(arr[1:] > arr[:-1]) + 1
    if gaps.size == 0:
        return None
    target = (c + 1) // 2
    j = int(np.searchsorted(gaps, target))
    if j == 0:
        g = int(gaps[0])
    elif j == len(gaps):
        g = int(gaps[-1])
    else:
        lo, hi = int(gaps[j - 1]), int(gaps[j])
        g = lo if target - lo <= hi - target else hi
    left, right = float(arr[g - 1]), float(arr[g])
    b = left + (right - left) / 2.0
    if not left < b <= right:  # adjacent doubles: midpoint collapses
        b = right
    tie_run = int(np.diff(np.concatenate(([0], gaps, [c]))).max())
    return g, b, tie_run


class Repartitioner:
    """Binds threshold checks and repair actions to one GridIndex.

    attach() installs the maintenance hook on the index so every successful
    insert/erase triggers the checks. All actions run inside the caller's
    exclusive-writer section. Axes with a single slab (the sort axis, or a
    non-sort axis merged down to one) are exempt.
    """

    def __init__(self, index: GridIndex, thresholds: Thresholds | None = None,
                 freeze_denominators: bool = False,
                 on_event: Callable[[GridIndex, RepartitionEvent], None] | None = None) -> None:
        self.index = index
        self.thresholds = thresholds if thresholds is not None else Thresholds()
        self.on_event = on_event
        self.events: list[RepartitionEvent] = []
        # threshold denominators may be frozen at the build-time slab counts
        self.freeze_denominators = freeze_denominators
        self._x0 = index.layout.slab_counts
        self._cursors = [0] * index.layout.dims

    def attach(self) -> "Repartitioner":
        self.index.update_hook = self.after_update
        return self

    # ------------------------------------------------------------------
    # trigger logic
    # ------------------------------------------------------------------

    def _denominator(self, d: int) -> int:
        return self._x0[d] if self.freeze_denominators else self.index.layout.slab_count(d)

    def check_slab(self, d: int, i: int) -> RepartitionEvent | None:
        """Evaluate slab (d, i) against the thresholds; run at most one action."""
        idx = self.index
        cur_x = idx.layout.slab_count(d)
        if cur_x <= 1 or idx.n == 0:
            return None
        base = idx.n / self._denominator(d)
        load = idx.slab_loads[d][i]
        t = self.thresholds
        if load > t.alpha * base:
            return self.split_slab(d, i)
        if load < t.beta * base:
            j = self.choose_neighbor(d, i)
            if idx.slab_loads[d][j] < t.gamma * base:
                return self.merge_slabs(d, i, j)
            return self.equalize_slabs(d, i, j)
        return None

    def choose_neighbor(self, d: int, i: int) -> int:
        """Adjacent slab with the smaller load (ties -> lower index)."""
        loads = self.index.slab_loads[d]
        if i == 0:
            return 1
        if i == len(loads) - 1:
            return i - 1
        return i - 1 if loads[i - 1] <= loads[i + 1] else i + 1

    def after_update(self, v: Vector) -> list[RepartitionEvent]:
        """Maintenance hook: check the touched slab and one round-robin slab
        per partitioned axis."""
        idx = self.index
        lay = idx.layout
        out: list[RepartitionEvent] = []
        for d in range(lay.dims):
            if d == lay.sort_dim:
                continue
            if lay.slab_count(d) <= 1:
                continue
            ev = self.check_slab(d, lay.slab_of(d, v[d]))
            if ev is not None:
                out.append(ev)
            x = lay.slab_count(d)
            if x > 1:
                slab = self._cursors[d] % x
                self._cursors[d] = (slab + 1) % x
                ev = self.check_slab(d, slab)
                if ev is not None:
                    out.append(ev)
        return out

    # ------------------------------------------------------------------
    # actions
    # ------------------------------------------------------------------

    def _emit(self, ev: RepartitionEvent) -> RepartitionEvent:
        self.events.append(ev)
        if self.on_event is not None:
            self.on_event(self.index, ev)
        return ev

    def _slab_coords(self, d: int, slabs: Sequence[int]) -> np.ndarray:
        idx = self.index
        vals: list[float] = []
        for i in slabs:
            for flat in idx.table.slab_flats(d, i):
                vals.extend(t[d] for t in idx.table.cells[flat])
        arr = np.asarray(vals, dtype=float)
        arr.sort()
        return arr

    def split_slab(self, d: int, i: int) -> RepartitionEvent | None:
        """Insert a boundary at the slab's weighted median; grow axis d by one.

        Returns None (and counts a degenerate skip) when every vector in
        the slab shares one d-coordinate, leaving no realizable boundary.
        """
        idx = self.index
        lay = idx.layout
        if d == lay.sort_dim:
            raise ValueError("cannot split the sort axis")
        arr = self._slab_coords(d, [i])
        split = _median_gap(arr)
        if split is None:
            idx.counters.degenerate_skips += 1
            return None
        g, b, tie_run = split
        old = idx.table
        shape = list(old.shape)
        shape[d] += 1
        new = CellTable(shape)
        moved = 0
        for coords in old.iter_coords():
            cell = old.cells[old.flat(coords)]
            ci = coords[d]
            if ci < i:
                new.cells[new.flat(coords)] = cell
            elif ci > i:
                up = coords[:d] + (ci + 1,) + coords[d + 1:]
                new.cells[new.flat(up)] = cell
            else:
                left = [t for t in cell if t[d] < b]
                right = [t for t in cell if t[d] >= b]
                new.cells[new.flat(coords)] = left
                up = coords[:d] + (ci + 1,) + coords[d + 1:]
                new.cells[new.flat(up)] = right
                moved += len(right)
        lay.boundaries[d].insert(i, b)
        idx.table = new
        loads = idx.slab_loads[d]
        total = loads[i]
        loads[i] = total - moved
        loads.insert(i + 1, moved)
        idx.counters.container_inserts += moved
        idx.counters.container_erases += moved
        return self._emit(RepartitionEvent(
            SPLIT, d, i, moved, 2 * moved, idx.op_serial,
            (total - moved, moved), tie_run))

    def merge_slabs(self, d: int, i: int, j: int, *,
                    degenerate: bool = False) -> RepartitionEvent:
        """Remove the boundary between adjacent slabs i and j; shrink axis d."""
        idx = self.index
        lay = idx.layout
        lo, hi = (i, j) if i < j else (j, i)
        if hi != lo + 1:
            raise ValueError(f"slabs {i} and {j} are not adjacent")
        if lay.slab_count(d) < 2:
            raise ValueError("nothing to merge on a single-slab axis")
        s = lay.sort_dim
        key = lambda t: (t[s], t)
        old = idx.table
        shape = list(old.shape)
        shape[d] -= 1
        new = CellTable(shape)
        for coords in old.iter_coords():
            cell = old.cells[old.flat(coords)]
            ci = coords[d]
            if ci < lo:
                new.cells[new.flat(coords)] = cell
            elif ci == lo:
                continue  # handled with its partner below
            elif ci == hi:
                down = coords[:d] + (lo,) + coords[d + 1:]
                partner = old.cells[old.flat(down)]
                new.cells[new.flat(down)] = sorted(partner + cell, key=key)
            else:
                down = coords[:d] + (ci - 1,) + coords[d + 1:]
                new.cells[new.flat(down)] = cell
        lay.boundaries[d].pop(lo)
        idx.table = new
        loads = idx.slab_loads[d]
        moved = min(loads[i], loads[j])
        loads[lo] = loads[lo] + loads[hi]
        del loads[hi]
        idx.counters.container_inserts += moved
        idx.counters.container_erases += moved
        return self._emit(RepartitionEvent(
            MERGE, d, i, moved, 2 * moved, idx.op_serial,
            (loads[lo],), neighbor=j, degenerate=degenerate))

    def equalize_slabs(self, d: int, i: int, j: int) -> RepartitionEvent:
        """Move the shared boundary to the union's weighted median.

        Vectors crossing the moved boundary are re-homed; odd union totals
        leave the extra vector on the lower-index slab. Falls back to a
        merge when the union has a single distinct d-coordinate.
        """
        idx = self.index
        lay = idx.layout
        lo, hi = (i, j) if i < j else (j, i)
        if hi != lo + 1:
            raise ValueError(f"slabs {i} and {j} are not adjacent")
        arr = self._slab_coords(d, [lo, hi])
        split = _median_gap(arr)
        if split is None:
            return self.merge_slabs(d, i, j, degenerate=True)
        g, b, tie_run = split
        s = lay.sort_dim
        key = lambda t: (t[s], t)
        table = idx.table
        moved = 0
        for flat_lo in table.slab_flats(d, lo):
            flat_hi = flat_lo + table.strides[d]  # partner cell in slab hi
            cl, ch = table.cells[flat_lo], table.cells[flat_hi]
            up = [t for t in cl if t[d] >= b]
            stay_l = [t for t in cl if t[d] < b]
            down = [t for t in ch if t[d] < b]
            stay_h = [t for t in ch if t[d] >= b]
            if up or down:
                moved += len(up) + len(down)
                table.cells[flat_lo] = sorted(stay_l + down, key=key) if down else stay_l
                table.cells[flat_hi] = sorted(stay_h + up, key=key) if up else stay_h
        lay.boundaries[d][lo] = b
        loads = idx.slab_loads[d]
        total = loads[lo] + loads[hi]
        loads[lo], loads[hi] = g, total - g
        idx.counters.container_inserts += moved
        idx.counters.container_erases += moved
        return self._emit(RepartitionEvent(
            EQUALIZE, d, i, moved, 2 * moved, idx.op_serial,
            (g, total - g), tie_run, neighbor=j))
