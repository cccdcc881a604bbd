"""Monotone-subsequence combinatorics of planar point sets.

Longest increasing/decreasing subset sizes (patience method), the
Robinson-Schensted shape with its Greene prefix-sum meaning, and the
integer-valued doubly increasing staircase surface that counts, at every
(x, y), the largest increasing subset dominated by that corner.
"""
from __future__ import annotations

import json
from bisect import bisect_left, insort
from dataclasses import dataclass

import numpy as np

from .geometry import PointSet


def _lis_of_sequence(seq: np.ndarray) -> int:
    """Length of the longest strictly increasing subsequence (patience piles)."""
    tails: list[float] = []
    for v in seq:
        pos = bisect_left(tails, v)
        if pos == len(tails):
            tails.append(v)
        else:
            tails[pos] = v
    return len(tails)


def _lis_indices(seq: np.ndarray) -> list[int]:
    """Indices of one longest strictly increasing subsequence."""
    tails: list[float] = []
    tails_idx: list[int] = []
    prev = np.full(len(seq), -1, dtype=np.int64)
    for i, v in enumerate(seq):
        pos = bisect_left(tails, v)
        if pos == len(tails):
            tails.append(v)
            tails_idx.append(i)
        else:
            tails[pos] = v
            tails_idx[pos] = i
        if pos > 0:
            prev[i] = tails_idx[pos - 1]
    if not tails_idx:
        return []
    out = []
    cur = tails_idx[-1]
    while cur >= 0:
        out.append(cur)
        cur = prev[cur]
    out.reverse()
    return out


def _y_in_x_order(ps: PointSet) -> np.ndarray:
    return ps.ys[np.argsort(ps.xs, kind="stable")]


def lis_length(ps: PointSet) -> int:
    """Maximum cardinality of an increasing subset."""
    return _lis_of_sequence(_y_in_x_order(ps))


def lds_length(ps: PointSet) -> int:
    """Maximum cardinality of a decreasing subset."""
    return _lis_of_sequence(-_y_in_x_order(ps))


@dataclass(frozen=True)
class YoungShape:
    """Weakly decreasing positive row lengths lambda_1 >= lambda_2 >= ..."""

    rows: tuple[int, ...]

    def __post_init__(self):
        if any(r <= 0 for r in self.rows):
            raise ValueError("row lengths must be positive")
        if any(a < b for a, b in zip(self.rows, self.rows[1:])):
            raise ValueError("row lengths must be weakly decreasing")

    @property
    def n(self) -> int:
        return sum(self.rows)


def rsk_shape(ps: PointSet) -> YoungShape:
    """Shape of the insertion tableau of the permutation reading of `ps`.

    By Greene's theorem the prefix sums lambda_1+...+lambda_k give the maximum
    size of a union of k increasing subsets, and sum_i min(lambda_i, k) gives
    the maximum size of a union of k decreasing subsets.
    """
    seq = _y_in_x_order(ps)
    rows: list[list[float]] = []
    for v in seq:
        for row in rows:
            pos = bisect_left(row, v)
            if pos == len(row):
                row.append(v)
                break
            row[pos], v = v, row[pos]
        else:
            rows.append([v])
    return YoungShape(tuple(len(r) for r in rows))


def greene_k_decreasing_size(shape: YoungShape, k: int) -> int:
    """Maximum size of a k-decreasing subset, from the shape: sum_i min(lambda_i, k)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    return sum(min(r, k) for r in shape.rows)


class _FenwickMax:
    """Prefix-maximum tree over 0..n-1 (values start at 0)."""

    def __init__(self, n: int):
        self.n = n
        self.tree = [0] * (n + 1)

    def update(self, i: int, value: int) -> None:
        i += 1
        while i <= self.n:
            if self.tree[i] < value:
                self.tree[i] = value
            i += i & (-i)

    def prefix(self, i: int) -> int:
        """Max over positions 0..i (0 if i < 0)."""
        best = 0
        i += 1
        while i > 0:
            if self.tree[i] > best:
                best = self.tree[i]
            i -= i & (-i)
        return best


def _chain_end_lengths(ps: PointSet) -> tuple[np.ndarray, np.ndarray]:
    """For each point (in x-sorted order) the length of the longest increasing
    chain ending there, via a Fenwick prefix-maximum sweep over y-ranks."""
    order = np.argsort(ps.xs, kind="stable")
    ys = ps.ys[order]
    yrank = np.empty(len(ps), dtype=np.int64)
    yrank[np.argsort(ys, kind="stable")] = np.arange(len(ps))
    fen = _FenwickMax(len(ps))
    lengths = np.zeros(len(ps), dtype=np.int64)
    for i in range(len(ps)):
        l = 1 + fen.prefix(yrank[i] - 1)
        lengths[i] = l
        fen.update(yrank[i], l)
    return order, lengths


class StaircaseFunction:
    """Integer-valued doubly increasing step function stored by level frontiers.

    Level l holds the Pareto-minimal points whose presence forces the value to
    be at least l; the level-(l+1) region is contained in the level-l region,
    so evaluation is a binary search over nested staircases.
    """

    __slots__ = ("levels",)

    def __init__(self, levels: list[np.ndarray]):
        self.levels = []
        for lv in levels:
            arr = np.array(lv, dtype=float).reshape(-1, 2)
            arr = arr[np.argsort(arr[:, 0], kind="stable")]
            if np.any(np.diff(arr[:, 1]) >= 0) and arr.shape[0] > 1:
                raise ValueError("level frontier must be a strict antichain")
            arr.setflags(write=False)
            self.levels.append(arr)

    @property
    def max_level(self) -> int:
        return len(self.levels)

    def _level_reached(self, l: int, x: float, y: float) -> bool:
        arr = self.levels[l - 1]
        idx = np.searchsorted(arr[:, 0], x, side="right") - 1
        return idx >= 0 and arr[idx, 1] <= y

    def eval(self, x: float, y: float) -> int:
        lo, hi = 0, self.max_level
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self._level_reached(mid, x, y):
                lo = mid
            else:
                hi = mid - 1
        return lo

    def to_json(self) -> str:
        return json.dumps(
            {"levels": [[[float(x), float(y)] for x, y in lv]
                        for lv in self.levels]}
        )

    @classmethod
    def from_json(cls, text: str) -> "StaircaseFunction":
        data = json.loads(text)
        return cls([np.array(lv, dtype=float).reshape(-1, 2)
                    for lv in data["levels"]])


def kappa_surface(ps: PointSet) -> StaircaseFunction:
    """Staircase surface counting the largest increasing subset dominated by
    each plane point.

    The level-l frontier is exactly the set of points whose longest chain
    ending there has length l: such points form an antichain and are the
    Pareto minima of all points with chain-ending length >= l.
    """
    if len(ps) == 0:
        return StaircaseFunction([])
    order, lengths = _chain_end_lengths(ps)
    xy = ps.xy[order]
    levels = []
    for l in range(1, int(lengths.max()) + 1):
        levels.append(xy[lengths == l])
    return StaircaseFunction(levels)


def eval_kappa(s: StaircaseFunction, x: float, y: float) -> int:
    """Value of the staircase surface at (x, y)."""
    return s.eval(x, y)
