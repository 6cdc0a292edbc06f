"""Initial partition selection and equal-depth boundary computation.

The grid's layout parameters (which axis stays unpartitioned for sorting,
how many slabs per remaining axis) are chosen here, either by a cheap
closed-form heuristic or by coordinate descent over a simulated scan cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

DEFAULT_CELL_LOAD = 256


@dataclass(frozen=True)
class PartitionSpec:
    """Slab counts per axis plus the designated sort axis (count 1)."""

    sort_dim: int
    counts: tuple[int, ...]
    source: str = "user"

    def __post_init__(self) -> None:
        if not self.counts:
            raise ValueError("counts must be non-empty")
        if not 0 <= self.sort_dim < len(self.counts):
            raise ValueError(f"sort_dim {self.sort_dim} out of range for {len(self.counts)} axes")
        if any(c < 1 for c in self.counts):
            raise ValueError(f"slab counts must be >= 1, got {self.counts}")
        if self.counts[self.sort_dim] != 1:
            raise ValueError("sort axis must have exactly one slab")
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))

    @property
    def dims(self) -> int:
        return len(self.counts)

    def to_json(self) -> dict:
        return {"sort_dim": self.sort_dim, "counts": list(self.counts), "source": self.source}

    @classmethod
    def from_json(cls, obj: dict) -> "PartitionSpec":
        return cls(int(obj["sort_dim"]), tuple(obj["counts"]), obj.get("source", "user"))


class EqualDepthResult(NamedTuple):
    boundaries: list[float]
    reduced: bool  # True when too few distinct values allowed fewer slabs


def _nearest_gap(gaps: np.ndarray, target: int) -> int:
    """Index into sorted gap positions closest to target (ties -> lower)."""
    j = int(np.searchsorted(gaps, target))
    if j == 0:
        return int(gaps[0])
    if j == len(gaps):
        return int(gaps[-1])
    lo, hi = int(gaps[j - 1]), int(gaps[j])
    return lo if target - lo <= hi - target else hi


def _gap_boundary(arr: np.ndarray, g: int) -> float:
    """Boundary value separating arr[:g] from arr[g:], strictly above arr[g-1]."""
    left, right = float(arr[g - 1]), float(arr[g])
    mid = left + (right - left) / 2.0
    if not left < mid <= right:  # adjacent doubles: midpoint collapses
        mid = right
    return mid


def equal_depth_boundaries(values: Sequence[float], parts: int) -> EqualDepthResult:
    """Place parts-1 boundaries at quantile gaps between distinct values.

    Each resulting slab receives ~len(values)/parts points; ties shift a
    boundary to the nearest gap between distinct values, so loads deviate
    only by tie-run lengths. Returns fewer boundaries (reduced=True) when
    the data has too few distinct values.
    """
    if parts < 1:
        raise ValueError(f"parts must be >= 1, got {parts}")
    arr = np.sort(np.asarray(values, dtype=float))
    n = arr.size
    if n and not np.isfinite(arr).all():
        raise ValueError("values must be finite")
    if parts == 1 or n == 0:
        return EqualDepthResult([], parts > 1 and n == 0)
    gaps = np.flatnonzero(arr[1:] > arr[:-1]) + 1
    if gaps.size == 0:
        return EqualDepthResult([], True)
    bounds: list[float] = []
    for k in range(1, parts):
        target = int(k * n / parts + 0.5)
        g = _nearest_gap(gaps, target)
        b = _gap_boundary(arr, g)
        if not bounds or b > bounds[-1]:
            bounds.append(b)
    return EqualDepthResult(bounds, len(bounds) < parts - 1)


def heuristic_spec(
    data_sample: Sequence[tuple[float, ...]],
    dims: int | None = None,
    target_cell_load: int = DEFAULT_CELL_LOAD,
) -> PartitionSpec:
    """Closed-form layout choice from a data sample.

    The sort axis is the one with the most distinct values (ties go to the
    highest index); every other axis gets the same slab count, sized so the
    expected cell load is near target_cell_load.
    """
    if not data_sample:
        raise ValueError("data sample must be non-empty")
    if target_cell_load < 1:
        raise ValueError("target_cell_load must be >= 1")
    sample = np.asarray(data_sample, dtype=float)
    n, d = sample.shape
    if dims is not None and dims != d:
        raise ValueError(f"sample dimensionality {d} != requested {dims}")
    if d < 2:
        raise ValueError("need at least 2 dimensions")
    distinct = [np.unique(sample[:, ax]).size for ax in range(d)]
    best = max(distinct)
    sort_dim = max(ax for ax in range(d) if distinct[ax] == best)
    per_axis = max(1, round((n / target_cell_load) ** (1.0 / (d - 1))))
    counts = [per_axis] * d
    counts[sort_dim] = 1
    return PartitionSpec(sort_dim, tuple(counts), source="heuristic")


def assumption_holds(counts: Sequence[int], n: int, dims: int) -> bool:
    """Whether prod(x_d) * sum(x_d) <= D * n * log2(n)."""
    if n < 2:
        return False
    lhs = math.prod(counts) * sum(counts)
    return lhs <= dims * n * math.log2(n)


@dataclass
class CostSample:
    spec: PartitionSpec
    estimated_cost: float

    def __post_init__(self) -> None:
        if self.estimated_cost < 0:
            raise ValueError("estimated_cost must be >= 0")


def _simulated_cost(spec: PartitionSpec, data, queries) -> tuple[float, PartitionSpec]:
    """Mean per-query (cells visited + entries scanned + entries filtered)
    on a throwaway build of the sample; also returns the spec with the
    effective slab counts the build realized."""
    from .core import GridIndex

    idx = GridIndex.build(data, spec)
    base = idx.counters
    before = (base.cells_visited, base.entries_scanned, base.entries_filtered)
    for q in queries:
        idx.range_search(q)
    after = (base.cells_visited, base.entries_scanned, base.entries_filtered)
    cost = sum(after) - sum(before)
    effective = PartitionSpec(spec.sort_dim, tuple(idx.layout.slab_counts), source="cost_model")
    return cost / len(queries), effective


def _candidate_specs(spec: PartitionSpec) -> list[PartitionSpec]:
    out: list[PartitionSpec] = []
    counts = list(spec.counts)
    for ax in range(len(counts)):
        if ax == spec.sort_dim:
            continue
        for new in (counts[ax] * 2, max(1, counts[ax] // 2), counts[ax] + 1, counts[ax] - 1):
            if new >= 1 and new != counts[ax]:
                c = counts.copy()
                c[ax] = new
                out.append(PartitionSpec(spec.sort_dim, tuple(c), source="cost_model"))
    for ax in range(len(counts)):
        if ax == spec.sort_dim:
            continue
        c = counts.copy()
        c[spec.sort_dim], c[ax] = c[ax], 1
        out.append(PartitionSpec(ax, tuple(c), source="cost_model"))
    return out


def cost_model_refine(
    spec0: PartitionSpec,
    data_sample: Sequence[tuple[float, ...]],
    query_sample: Sequence,
    budget: int,
) -> PartitionSpec:
    """Coordinate descent over slab counts and sort axis.

    Each candidate is scored by replaying query_sample against a throwaway
    build of data_sample; exploration stops when budget evaluations are
    spent or a full round brings no improvement. Candidates that break the
    prod*sum <= D*N*log2(N) guard at sample scale are never returned.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if not data_sample:
        raise ValueError("data sample must be non-empty")
    if not query_sample:
        return spec0
    n, dims = len(data_sample), spec0.dims
    budget -= 1  # spec0 itself
    if budget == 0:
        return spec0
    best_cost, best = _simulated_cost(spec0, data_sample, query_sample)
    seen = {(best.sort_dim, best.counts)}
    improved = True
    while budget > 0 and improved:
        improved = False
        for cand in _candidate_specs(best):
            if budget <= 0:
                break
            key = (cand.sort_dim, cand.counts)
            if key in seen or not assumption_holds(cand.counts, n, dims):
                continue
            seen.add(key)
            budget -= 1
            cost, effective = _simulated_cost(cand, data_sample, query_sample)
            if cost < best_cost:
                best_cost, best = cost, effective
                improved = True
    return best
