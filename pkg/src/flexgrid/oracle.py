"""Brute-force reference store used by property tests and correctness gates.

Deliberately dumb: a hash set plus a linear scan, so its own correctness is
inspectable at a glance.
"""

from __future__ import annotations

from typing import Iterable

from .core import QueryBox, Vector, as_vector


class NaiveStore:
    """Exact set semantics; search is a full scan with the closed-box test."""

    name = "naive"

    def __init__(self, data: Iterable = ()) -> None:
        self.live: set[Vector] = set(as_vector(v) for v in data)

    def insert(self, v) -> bool:
        vt = as_vector(v)
        if vt in self.live:
            return False
        self.live.add(vt)
        return True

    def erase(self, v) -> bool:
        vt = as_vector(v)
        if vt not in self.live:
            return False
        self.live.remove(vt)
        return True

    def search(self, box: QueryBox) -> list[Vector]:
        lo, hi = box.lo, box.hi
        return [v for v in self.live
                if all(l <= c <= h for l, c, h in zip(lo, v, hi))]

    def __len__(self) -> int:
        return len(self.live)

    def __contains__(self, v) -> bool:
        return as_vector(v) in self.live
