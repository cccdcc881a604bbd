"""Exact extraction of maximal k-decreasing subsets (geodesic watermelons).

Flipping y -> -y turns decreasing sequences into chains of the strict
dominance order, so a maximum k-decreasing subset is a maximum union of k
vertex-disjoint chains, solved exactly by min-cost flow.  Every result at or
below the exact-size cap is certified against the Greene shape invariant
sum_i min(lambda_i, k).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _mcmf
from .geometry import PointSet
from .tableau import _lis_indices, greene_k_decreasing_size, lis_length, rsk_shape

#: Largest instance the exact flow method accepts.
EXACT_CAP = 5000


class CapExceededError(ValueError):
    """Instance too large for the exact method."""


@dataclass
class WatermelonResult:
    """A maximal k-decreasing subset with its chain decomposition.

    `sequences` holds min(k, n) decreasing point lists (trailing ones may be
    empty); their disjoint union is `subset` and `size` is its cardinality.
    `certified` records that `size` matched the Greene shape certificate.
    """

    subset: PointSet
    sequences: list[np.ndarray]
    size: int
    certified: bool

    def to_json(self) -> str:
        return json.dumps({
            "subset": [[float(x), float(y)] for x, y in self.subset.xy],
            "sequences": [[[float(x), float(y)] for x, y in seq]
                          for seq in self.sequences],
            "size": int(self.size),
            "certified": bool(self.certified),
        })


def _flow_caps(ps: PointSet, k_eff: int):
    """Run the flow and return (profile, caps, network arrays, x-order)."""
    order = np.argsort(ps.xs, kind="stable")
    xs = ps.xs[order]
    yy = -ps.ys[order]  # flip: decreasing sequences become dominance chains
    net = _mcmf.build_network(xs, yy, k_eff)
    n_nodes, tail, head, cap, cost, adj, adj_start, split_arcs = net
    profile = _mcmf._ssp_profile(
        n_nodes, tail, head, cap, cost, adj, adj_start, k_eff
    )
    return profile, cap, net, order


def coverage_profile(ps: PointSet, k_max: int, cap: int = EXACT_CAP) -> np.ndarray:
    """Maximal j-decreasing subset sizes for every j in 1..k_max, from a
    single incremental flow run (each augmentation is optimal for its value)."""
    if k_max < 0:
        raise ValueError("k must be nonnegative")
    if len(ps) > cap:
        raise CapExceededError(
            f"instance has {len(ps)} points, exact-method cap is {cap}"
        )
    if k_max == 0 or len(ps) == 0:
        return np.zeros(k_max, dtype=np.int64)
    k_eff = min(k_max, len(ps))
    profile, _, _, _ = _flow_caps(ps, k_eff)
    if k_max > k_eff:
        profile = np.concatenate([
            profile, np.full(k_max - k_eff, profile[-1], dtype=np.int64)
        ])
    return profile


def max_k_decreasing(ps: PointSet, k: int, cap: int = EXACT_CAP) -> WatermelonResult:
    """Maximum-cardinality k-decreasing subset with a certified size.

    The flow decomposition yields at most k chains; ties in the decomposition
    are broken by smallest point index in x-order, so the result is
    deterministic.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if len(ps) > cap:
        raise CapExceededError(
            f"instance has {len(ps)} points, exact-method cap is {cap}"
        )
    n = len(ps)
    if k == 0 or n == 0:
        return WatermelonResult(PointSet(np.empty((0, 2))), [], 0, True)

    k_eff = min(k, n)
    profile, caps, net, order = _flow_caps(ps, k_eff)
    n_nodes, tail, head, cap_arr, cost, adj, adj_start, split_arcs = net
    xy = ps.xy[order]

    covered = np.nonzero(caps[split_arcs] == 0)[0]  # x-order indices

    # successor of i = the dominance arc out of out_i carrying flow
    # (dominance arcs are the zero-cost forward arcs out_i -> in_j)
    succ = np.full(n, -1, dtype=np.int64)
    has_pred = np.zeros(n, dtype=bool)
    fwd = np.arange(0, tail.shape[0], 2)
    te, he = tail[fwd], head[fwd]
    dom = ((cost[fwd] == 0) & (caps[fwd] == 0)
           & (te >= 3) & (te % 2 == 1) & (he >= 2) & (he % 2 == 0))
    i_arr = (te[dom] - 3) // 2
    j_arr = (he[dom] - 2) // 2
    succ[i_arr] = j_arr
    has_pred[j_arr] = True

    sequences: list[np.ndarray] = []
    for i in sorted(covered):
        if has_pred[i]:
            continue
        chain = []
        cur = i
        while cur >= 0:
            chain.append(xy[cur])
            cur = succ[cur]
        sequences.append(np.array(chain))
    sequences.sort(key=lambda c: c[0, 0])
    sequences += [np.empty((0, 2))] * (k_eff - len(sequences))

    subset = PointSet(xy[np.sort(covered)])
    size = int(profile[-1])
    certificate = greene_k_decreasing_size(rsk_shape(ps), k)
    result = WatermelonResult(subset, sequences, size, size == certificate)
    return result


def verify(result: WatermelonResult, ps: PointSet, k: int) -> bool:
    """Re-derive every invariant of a result against its source instance."""
    seqs = result.sequences
    if len(seqs) > max(k, 0):
        return False
    seen = set()
    for seq in seqs:
        for a, b in zip(seq[:-1], seq[1:]):
            if not (b[0] > a[0] and b[1] < a[1]):
                return False
        for x, y in seq:
            if (x, y) in seen:
                return False
            seen.add((x, y))
    subset_pts = {(x, y) for x, y in result.subset.xy}
    if seen != subset_pts:
        return False
    source = {(x, y) for x, y in ps.xy}
    if not subset_pts <= source:
        return False
    if result.size != len(result.subset):
        return False
    if len(result.subset) and lis_length(result.subset) > k:
        return False
    return result.size == greene_k_decreasing_size(rsk_shape(ps), k)


def peel_heuristic(ps: PointSet, k: int) -> WatermelonResult:
    """Uncertified greedy alternative for instances above the exact cap:
    repeatedly peel a longest decreasing subsequence.  Always labeled
    certified=False."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    order = np.argsort(ps.xs, kind="stable")
    xy = ps.xy[order]
    remaining = np.arange(xy.shape[0])
    sequences = []
    for _ in range(min(k, len(ps))):
        if remaining.size == 0:
            sequences.append(np.empty((0, 2)))
            continue
        idx = _lis_indices(-xy[remaining, 1])
        take = remaining[idx]
        sequences.append(xy[take])
        mask = np.ones(remaining.size, dtype=bool)
        mask[idx] = False
        remaining = remaining[mask]
    covered = np.setdiff1d(np.arange(xy.shape[0]), remaining)
    subset = PointSet(xy[covered]) if covered.size else PointSet(np.empty((0, 2)))
    return WatermelonResult(subset, sequences, len(subset), False)


def to_svg(result: WatermelonResult, ps: PointSet | None = None,
           width: int = 480, height: int = 480) -> str:
    """Dot-and-polyline rendering of the chains (y axis flipped)."""
    from .svg import scatter_with_chains

    return scatter_with_chains(result, ps, width=width, height=height)
