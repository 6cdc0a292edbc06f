"""Index variants sharing the grid core.

Three behaviors over the same structure:

* ``flexflood``        - adaptive: the re-partitioning hook runs after every
                         successful update.
* ``updatable_flood``  - the non-adaptive baseline: same grid and cells, no
                         re-partitioning, so its layout decays under drift.
* ``delta_buffer``     - updates queue in a buffer; every K buffered updates
                         the whole structure is rebuilt from scratch with the
                         original partition parameters (no re-tuning).
                         Searches merge the buffer's pending effects.

All variants are observationally equivalent on membership and search
results; only the work they do differs.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

from .core import GridIndex, QueryBox, Vector, as_vector
from .repartition import RepartitionEvent, Repartitioner, Thresholds

FLEXFLOOD = "flexflood"
UPDATABLE_FLOOD = "updatable_flood"
DELTA_BUFFER = "delta_buffer"
VARIANT_KINDS = (FLEXFLOOD, UPDATABLE_FLOOD, DELTA_BUFFER)


class _GridVariant:
    """Common surface: insert/erase return True iff the structure changed."""

    def __init__(self, name: str, index: GridIndex) -> None:
        self.name = name
        self.index = index

    def insert(self, v) -> bool:
        return self.index.insert(v)

    def erase(self, v) -> bool:
        return self.index.erase(v)

    def search(self, box: QueryBox) -> list[Vector]:
        return self.index.range_search(box)[0]

    @property
    def events(self) -> list[RepartitionEvent]:
        return []

    def container_ops(self) -> int:
        return self.index.counters.container_ops()

    def live_count(self) -> int:
        return self.index.n


class FlexVariant(_GridVariant):
    def __init__(self, index: GridIndex, repartitioner: Repartitioner) -> None:
        super().__init__(FLEXFLOOD, index)
        self.repartitioner = repartitioner

    @property
    def events(self) -> list[RepartitionEvent]:
        return self.repartitioner.events


class StaticVariant(_GridVariant):
    def __init__(self, index: GridIndex) -> None:
        super().__init__(UPDATABLE_FLOOD, index)


class DeltaBufferVariant(_GridVariant):
    """Buffer K updates, then rebuild boundaries with the original spec.

    Between rebuilds the main grid is untouched; membership questions and
    search results consult the pending buffer (last operation on a vector
    wins).
    """

    def __init__(self, index: GridIndex, spec, k: int) -> None:
        super().__init__(DELTA_BUFFER, index)
        if k < 1:
            raise ValueError("rebuild period k must be >= 1")
        self.spec = spec
        self.k = k
        self.buffer: list[tuple[str, Vector]] = []
        self._pending: dict[Vector, str] = {}
        self._live: set[Vector] = set(index.iter_entries())
        self.rebuilds = 0

    def insert(self, v) -> bool:
        vt = as_vector(v)
        changed = vt not in self._live
        if changed:
            self._live.add(vt)
        self._buffer_op("i", vt)
        return changed

    def erase(self, v) -> bool:
        vt = as_vector(v)
        changed = vt in self._live
        if changed:
            self._live.remove(vt)
        self._buffer_op("e", vt)
        return changed

    def _buffer_op(self, op: str, vt: Vector) -> None:
        self.buffer.append((op, vt))
        self._pending[vt] = op
        if len(self.buffer) >= self.k:
            self._rebuild()

    def _rebuild(self) -> None:
        # same counts and sort axis as at build time; boundaries recomputed
        # at equal depth over the current data; counters carry over
        self.index = GridIndex.build(self._live, self.spec,
                                     counters=self.index.counters)
        self.buffer.clear()
        self._pending.clear()
        self.rebuilds += 1

    def search(self, box: QueryBox) -> list[Vector]:
        base = self.index.range_search(box)[0]
        if not self._pending:
            return base
        seen = set(base)
        out = [t for t in base if self._pending.get(t) != "e"]
        for vt, op in self._pending.items():
            if op == "i" and vt not in seen and box.contains(vt):
                out.append(vt)
        return out

    def live_count(self) -> int:
        return len(self._live)


def make_variant(kind: str, data: Iterable[Sequence[float]], spec,
                 thresholds: Thresholds | None = None,
                 delta_k: int = 10_000,
                 freeze_denominators: bool = False,
                 on_event: Callable[[GridIndex, RepartitionEvent], None] | None = None):
    """Build a fresh index from data and wrap it in the requested variant."""
    index = GridIndex.build(data, spec)
    if kind == FLEXFLOOD:
        rep = Repartitioner(index, thresholds,
                            freeze_denominators=freeze_denominators,
                            on_event=on_event).attach()
        return FlexVariant(index, rep)
    if kind == UPDATABLE_FLOOD:
        return StaticVariant(index)
    if kind == DELTA_BUFFER:
        return DeltaBufferVariant(index, spec, delta_k)
    raise ValueError(f"unknown variant kind {kind!r}")
