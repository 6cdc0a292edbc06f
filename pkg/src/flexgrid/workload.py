"""Workload generation, trace files, CSV ingestion, and timed replay.

The synthetic workload draws initial data from an isotropic normal
distribution, then alternates blocks of update queries (fair coin between a
drifting-normal insert and an erase of a random live vector) with blocks of
box searches placed uniformly inside a fixed domain. Everything is
deterministic under the spec's seed.
"""

from __future__ import annotations

import csv
import math
import random
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import QueryBox, Vector

# trace ops are plain tuples for replay speed:
#   ("S", lo, hi) | ("I", coords) | ("E",)
TraceOp = tuple


class TraceFormatError(ValueError):
    pass


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class WorkloadSpec:
    """Parameters of the drifting-normal workload (defaults: full scale)."""

    dims: int = 3
    n0: int = 100_000                 # initial data count
    q: int = 2_000_000                # total queries
    block: int = 10_000               # update/search alternation block
    mu0: float = 3e8                  # initial per-axis mean
    sigma: float = 1e8                # per-axis standard deviation
    drift_total: float = 4e8          # mean shift accumulated by query Q
    domain_lo: float = 0.0            # query placement box, per axis
    domain_hi: float = 1e9
    max_side: float = 3e8             # query side length upper bound
    sel_target: float | None = None   # target selectivity; overrides max_side
    read_only: bool = False           # emit searches only
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dims < 2:
            raise ValueError("dims must be >= 2")
        if self.n0 < 0 or self.q < 0 or self.block < 1:
            raise ValueError("need n0 >= 0, q >= 0, block >= 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        if not self.domain_lo < self.domain_hi:
            raise ValueError("domain_lo must be < domain_hi")
        if not 0 < self.max_side <= self.domain_hi - self.domain_lo:
            raise ValueError("max_side must be in (0, domain width]")
        if self.sel_target is not None and not 0 < self.sel_target < 1:
            raise ValueError("sel_target must be in (0, 1)")

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_json(cls, obj: dict) -> "WorkloadSpec":
        known = {k: obj[k] for k in cls.__dataclass_fields__ if k in obj}
        return cls(**known)


def is_update(spec: WorkloadSpec, i: int) -> bool:
    """Query i is an update iff floor(i / block) is even."""
    return (i // spec.block) % 2 == 0


def insert_mean(spec: WorkloadSpec, i: int) -> float:
    """Per-axis mean of the i-th insert: mu0 plus the accumulated drift."""
    return spec.mu0 + spec.drift_total * (i / spec.q)


def gen_initial(spec: WorkloadSpec) -> list[Vector]:
    """n0 vectors with i.i.d. Normal(mu0, sigma) coordinates, deduplicated."""
    rng = np.random.default_rng([spec.seed, 0])
    arr = rng.normal(spec.mu0, spec.sigma, size=(spec.n0, spec.dims))
    return list(dict.fromkeys(tuple(row) for row in arr.tolist()))


def calibrate_side(sample: Sequence[Vector], spec: WorkloadSpec,
                   trials: int = 200) -> float:
    """Fixed query side length hitting ~sel_target mean selectivity.

    Bisects the side length against the empirical fraction of the sample
    covered by randomly placed boxes (the workload's own placement rule).
    """
    if spec.sel_target is None:
        return spec.max_side
    pts = np.asarray(sample, dtype=float)
    if pts.size == 0:
        return spec.max_side
    if len(pts) > 4000:
        pts = pts[np.random.default_rng([spec.seed, 3]).choice(len(pts), 4000, replace=False)]
    rng = np.random.default_rng([spec.seed, 2])
    width = spec.domain_hi - spec.domain_lo
    place = rng.random((trials, spec.dims))

    def selectivity(side: float) -> float:
        lo = spec.domain_lo + place * (width - side)
        inside = ((pts[None, :, :] >= lo[:, None, :]) &
                  (pts[None, :, :] <= (lo + side)[:, None, :])).all(axis=2)
        return float(inside.mean())

    lo_s, hi_s = 0.0, width
    for _ in range(40):
        mid = (lo_s + hi_s) / 2
        if selectivity(mid) < spec.sel_target:
            lo_s = mid
        else:
            hi_s = mid
    return hi_s


def gen_trace(spec: WorkloadSpec, sample: Sequence[Vector] | None = None) -> list[TraceOp]:
    """Materialize the full operation sequence for a workload spec."""
    rng = np.random.default_rng([spec.seed, 1])
    side_cap = spec.max_side
    fixed_side = None
    if spec.sel_target is not None:
        fixed_side = calibrate_side(sample if sample is not None else gen_initial(spec), spec)
    d = spec.dims
    width = spec.domain_hi - spec.domain_lo
    ops: list[TraceOp] = []
    for i in range(spec.q):
        if not spec.read_only and is_update(spec, i):
            if rng.random() < 0.5:
                mu = insert_mean(spec, i)
                ops.append(("I", tuple(rng.normal(mu, spec.sigma, d).tolist())))
            else:
                ops.append(("E",))
        else:
            if fixed_side is not None:
                sides = np.full(d, min(fixed_side, width))
            else:
                sides = rng.uniform(0.0, side_cap, d)
            los = spec.domain_lo + rng.random(d) * (width - sides)
            his = los + sides
            ops.append(("S", tuple(los.tolist()), tuple(his.tolist())))
    return ops


# ----------------------------------------------------------------------
# trace files: one op per line, locale-independent decimal text
#   S lo1 .. loD hi1 .. hiD  |  I c1 .. cD  |  E
# ----------------------------------------------------------------------

def write_trace(ops: Iterable[TraceOp], path: str | Path) -> None:
    with open(path, "w") as f:
        for op in ops:
            if op[0] == "S":
                f.write("S " + " ".join(map(repr, op[1] + op[2])) + "\n")
            elif op[0] == "I":
                f.write("I " + " ".join(map(repr, op[1])) + "\n")
            else:
                f.write("E\n")


def read_trace(path: str | Path, dims: int) -> list[TraceOp]:
    ops: list[TraceOp] = []
    with open(path) as f:
        for ln, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            tag = parts[0]
            try:
                if tag == "S":
                    if len(parts) != 1 + 2 * dims:
                        raise ValueError(f"expected {2 * dims} coordinates")
                    nums = [float(x) for x in parts[1:]]
                    ops.append(("S", tuple(nums[:dims]), tuple(nums[dims:])))
                elif tag == "I":
                    if len(parts) != 1 + dims:
                        raise ValueError(f"expected {dims} coordinates")
                    ops.append(("I", tuple(float(x) for x in parts[1:])))
                elif tag == "E":
                    if len(parts) != 1:
                        raise ValueError("trailing fields")
                    ops.append(("E",))
                else:
                    raise ValueError(f"unknown op tag {tag!r}")
            except ValueError as exc:
                raise TraceFormatError(f"{path}:{ln}: {exc}") from exc
    return ops


# ----------------------------------------------------------------------
# CSV ingestion
# ----------------------------------------------------------------------

@dataclass
class IngestReport:
    rows: int = 0
    vectors: int = 0          # after dedup
    rejected_nonfinite: int = 0
    axis_min: list[float] = field(default_factory=list)
    axis_max: list[float] = field(default_factory=list)


def ingest_csv(path: str | Path, dims: int,
               has_header: bool = False) -> tuple[list[Vector], IngestReport]:
    """Parse the first dims numeric fields of each row; deduplicate.

    A row with fewer than dims numeric fields raises IngestError with its
    line number; a row containing a non-finite numeric value is dropped and
    counted.
    """
    report = IngestReport()
    seen: dict[Vector, None] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        for ln, row in enumerate(reader, 1):
            if has_header and ln == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            report.rows += 1
            coords: list[float] = []
            finite = True
            for field_ in row:
                try:
                    x = float(field_)
                except ValueError:
                    continue
                if not math.isfinite(x):
                    finite = False
                coords.append(x)
                if len(coords) == dims:
                    break
            if len(coords) < dims:
                raise IngestError(f"{path}:{ln}: fewer than {dims} numeric fields")
            if not finite:
                report.rejected_nonfinite += 1
                continue
            seen[tuple(coords)] = None
    vecs = list(seen)
    report.vectors = len(vecs)
    if vecs:
        arr = np.asarray(vecs, dtype=float)
        report.axis_min = [float(x) for x in arr.min(axis=0)]
        report.axis_max = [float(x) for x in arr.max(axis=0)]
    return vecs, report


# ----------------------------------------------------------------------
# replay
# ----------------------------------------------------------------------

class LiveSet:
    """Uniform O(1) sampling over the live vectors via swap-removal."""

    def __init__(self, data: Iterable[Vector] = ()) -> None:
        self.items: list[Vector] = []
        self.pos: dict[Vector, int] = {}
        for v in data:
            self.add(v)

    def add(self, v: Vector) -> None:
        if v not in self.pos:
            self.pos[v] = len(self.items)
            self.items.append(v)

    def remove(self, v: Vector) -> None:
        i = self.pos.pop(v)
        last = self.items.pop()
        if i < len(self.items):
            self.items[i] = last
            self.pos[last] = i

    def sample(self, rng: random.Random) -> Vector:
        return self.items[rng.randrange(len(self.items))]

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, v: Vector) -> bool:
        return v in self.pos


@dataclass
class BlockSample:
    """Cumulative state sampled at one alternation-block boundary."""

    end: int                  # trace ordinal after this block (1-based)
    cum_search_s: float
    cum_update_s: float
    cum_updates: int
    cum_container_ops: int
    live_n: int


@dataclass
class ReplayResult:
    """Timing, counters, and audit inputs from one variant's replay."""

    variant: str
    blocks: list[BlockSample]
    total_search_s: float
    total_update_s: float
    n_searches: int
    n_inserts: int
    n_erases: int
    n_skipped_erases: int
    search_checksum: int
    updates: int              # variant calls that were updates
    sum_live_n: int           # summed after each update, for time-avg N
    sum_slab_counts: list[float]  # per axis, summed after each update
    container_ops_start: int  # counter baseline before the first timed op

    @property
    def mean_live_n(self) -> float:
        return self.sum_live_n / self.updates if self.updates else 0.0

    def mean_slab_counts(self) -> list[float]:
        if not self.updates:
            return [0.0] * len(self.sum_slab_counts)
        return [s / self.updates for s in self.sum_slab_counts]


_CHECKSUM_MOD = 1 << 64
_CHECKSUM_MUL = 1099511628211  # FNV-1a prime


def fold_checksum(acc: int, count: int) -> int:
    return (acc * _CHECKSUM_MUL + count + 1) % _CHECKSUM_MOD


def replay(trace: Sequence[TraceOp], variant, initial_live: Iterable[Vector],
           *, seed: int, block: int, warmup_searches: int = 100) -> ReplayResult:
    """Apply a trace to a variant, timing each op with a monotonic clock.

    Erase markers draw uniformly from the live set (skipped and counted when
    it is empty); the draw sequence is deterministic under seed. The first
    warmup_searches search ops are executed once untimed before the run.
    """
    rng = random.Random(seed)
    live = LiveSet(initial_live)
    perf = time.perf_counter

    done = 0
    for op in trace:
        if done >= warmup_searches:
            break
        if op[0] == "S":
            variant.search(QueryBox(op[1], op[2]))
            done += 1

    blocks: list[BlockSample] = []
    cum_s = cum_u = 0.0
    n_search = n_ins = n_era = n_skip = 0
    checksum = 0
    updates = 0
    sum_live = 0
    dims = variant.index.layout.dims
    sum_x = [0.0] * dims
    ops_start = variant.container_ops()

    def snapshot(end: int) -> None:
        blocks.append(BlockSample(end, cum_s, cum_u, updates,
                                  variant.container_ops(), len(live)))

    for i, op in enumerate(trace):
        kind = op[0]
        if kind == "S":
            box = QueryBox(op[1], op[2])
            t0 = perf()
            res = variant.search(box)
            cum_s += perf() - t0
            checksum = fold_checksum(checksum, len(res))
            n_search += 1
        elif kind == "I":
            v = op[1]
            t0 = perf()
            added = variant.insert(v)
            cum_u += perf() - t0
            if added:
                live.add(v)
            n_ins += 1
            updates += 1
            sum_live += len(live)
            for d, x in enumerate(variant.index.layout.slab_counts):
                sum_x[d] += x
        else:  # erase a random live vector
            if not len(live):
                n_skip += 1
            else:
                v = live.sample(rng)
                t0 = perf()
                removed = variant.erase(v)
                cum_u += perf() - t0
                if removed:
                    live.remove(v)
                n_era += 1
                updates += 1
                sum_live += len(live)
                for d, x in enumerate(variant.index.layout.slab_counts):
                    sum_x[d] += x
        if (i + 1) % block == 0:
            snapshot(i + 1)
    if trace and len(trace) % block != 0:
        snapshot(len(trace))

    return ReplayResult(
        variant=variant.name, blocks=blocks,
        total_search_s=cum_s, total_update_s=cum_u,
        n_searches=n_search, n_inserts=n_ins, n_erases=n_era,
        n_skipped_erases=n_skip, search_checksum=checksum,
        updates=updates, sum_live_n=sum_live, sum_slab_counts=sum_x,
        container_ops_start=ops_start,
    )
