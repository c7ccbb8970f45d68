"""Finite unions of closed intervals.

An :class:`IntervalSet` is stored as two sorted float arrays ``lo`` and
``hi``.  The canonical form has no degenerate components and any two
components are separated by a gap larger than :data:`MERGE_TOL`.
Endpoints shared between a set and its complement belong to both; they
are null sets for every integral computed downstream.
"""

from __future__ import annotations

import json
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ValidationError

MERGE_TOL = 1e-14


class Interval(NamedTuple):
    lo: float
    hi: float

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


def _check_interval(lo: float, hi: float) -> None:
    if not (lo <= hi):
        raise ValidationError(f"interval endpoints out of order: [{lo}, {hi}]")


class IntervalSet:
    """Immutable canonical union of closed intervals."""

    __slots__ = ("_lo", "_hi")

    def __init__(self, intervals: Iterable = (), *, tol: float = MERGE_TOL):
        pairs = [tuple(map(float, iv)) for iv in intervals]
        if pairs:
            arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
            lo, hi = arr[:, 0], arr[:, 1]
        else:
            lo = hi = np.empty(0)
        self._lo, self._hi = _canonical(lo, hi, tol)

    @classmethod
    def from_arrays(cls, lo, hi, *, tol: float = MERGE_TOL) -> "IntervalSet":
        out = cls.__new__(cls)
        out._lo, out._hi = _canonical(np.asarray(lo, float), np.asarray(hi, float), tol)
        return out

    @classmethod
    def _raw(cls, lo: np.ndarray, hi: np.ndarray) -> "IntervalSet":
        out = cls.__new__(cls)
        lo.flags.writeable = False
        hi.flags.writeable = False
        out._lo, out._hi = lo, hi
        return out

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls()

    @classmethod
    def single(cls, lo: float, hi: float) -> "IntervalSet":
        _check_interval(lo, hi)
        return cls([(lo, hi)])

    @property
    def lo(self) -> np.ndarray:
        return self._lo

    @property
    def hi(self) -> np.ndarray:
        return self._hi

    @property
    def intervals(self) -> list[Interval]:
        return [Interval(float(a), float(b)) for a, b in zip(self._lo, self._hi)]

    def __len__(self) -> int:
        return len(self._lo)

    def __iter__(self):
        return iter(self.intervals)

    def __bool__(self) -> bool:
        return len(self._lo) > 0

    def __eq__(self, other) -> bool:
        if not isinstance(other, IntervalSet):
            return NotImplemented
        return np.array_equal(self._lo, other._lo) and np.array_equal(self._hi, other._hi)

    def __hash__(self):
        return hash((self._lo.tobytes(), self._hi.tobytes()))

    def __repr__(self) -> str:
        inner = ", ".join(f"[{a:.17g}, {b:.17g}]" for a, b in zip(self._lo, self._hi))
        return f"IntervalSet({{{inner}}})"

    def measure(self) -> float:
        """Lebesgue measure: the sum of component lengths."""
        return float(np.sum(self._hi - self._lo))

    def contains(self, x):
        """Closed membership test; vectorized over ``x``."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self._lo, x, side="right") - 1
        ok = idx >= 0
        safe = np.where(ok, idx, 0)
        if len(self._lo) == 0:
            return np.zeros(x.shape, dtype=bool)
        return ok & (x <= self._hi[safe])

    def bounds(self) -> Interval:
        if not self:
            raise ValueError("empty set has no bounds")
        return Interval(float(self._lo[0]), float(self._hi[-1]))

    def endpoints(self) -> np.ndarray:
        return np.concatenate([self._lo, self._hi])

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        return intersect(self, other)

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return union(self, other)

    def complement(self, within: Interval) -> "IntervalSet":
        return complement(self, within)

    def subset_of(self, other: "IntervalSet", tol: float = MERGE_TOL) -> bool:
        """True when ``self`` minus ``other`` is a null set (up to ``tol``)."""
        return self.measure() - intersect(self, other).measure() <= tol

    def to_json(self) -> str:
        return json.dumps(self.to_list())

    def to_list(self) -> list[list[float]]:
        return [[float(a), float(b)] for a, b in zip(self._lo, self._hi)]

    @classmethod
    def from_json(cls, text: str) -> "IntervalSet":
        return cls(json.loads(text))


def _canonical(lo: np.ndarray, hi: np.ndarray, tol: float):
    if lo.shape != hi.shape:
        raise ValidationError("lo and hi must have equal length")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValidationError("interval endpoints must be finite")
    if np.any(lo > hi):
        bad = int(np.argmax(lo > hi))
        raise ValidationError(f"interval endpoints out of order: [{lo[bad]}, {hi[bad]}]")
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    if lo.size == 0:
        return _frozen(np.empty(0)), _frozen(np.empty(0))
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    reach = np.maximum.accumulate(hi)
    start = np.ones(lo.size, dtype=bool)
    start[1:] = lo[1:] > reach[:-1] + tol
    starts = np.flatnonzero(start)
    ends = np.append(starts[1:], lo.size) - 1
    return _frozen(lo[starts].copy()), _frozen(reach[ends].copy())


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _sweep(sets: list[IntervalSet], need: int) -> IntervalSet:
    """Points covered by at least ``need`` of the (internally disjoint) sets."""
    lo = np.concatenate([s.lo for s in sets])
    hi = np.concatenate([s.hi for s in sets])
    if lo.size == 0:
        return IntervalSet()
    pos = np.concatenate([lo, hi])
    delta = np.concatenate([np.ones(lo.size, int), -np.ones(hi.size, int)])
    # ends sort before starts at ties so touching components give null overlaps
    order = np.lexsort((delta, pos))
    pos, delta = pos[order], delta[order]
    depth = np.cumsum(delta)
    before = np.concatenate([[0], depth[:-1]])
    opens = pos[(before < need) & (depth >= need)]
    closes = pos[(before >= need) & (depth < need)]
    return IntervalSet.from_arrays(opens, closes)


def intersect(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    if not a or not b:
        return IntervalSet()
    return _sweep([a, b], 2)


def union(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    return IntervalSet.from_arrays(np.concatenate([a.lo, b.lo]), np.concatenate([a.hi, b.hi]))


def complement(a: IntervalSet, within: Interval) -> IntervalSet:
    """Closure of ``within`` minus ``a``."""
    lo0, hi0 = float(within[0]), float(within[1])
    _check_interval(lo0, hi0)
    a = intersect(a, IntervalSet([(lo0, hi0)])) if a else a
    starts = np.concatenate([[lo0], a.hi])
    stops = np.concatenate([a.lo, [hi0]])
    return IntervalSet.from_arrays(starts, stops)


def measure(a: IntervalSet) -> float:
    return a.measure()
