"""Successive-shortest-path min-cost flow on the dominance DAG.

The network extracts a maximum union of k chains from a strict dominance
order: every point is split into an in/out node pair joined by a unit arc of
cost -1, the source feeds every in-node, every out-node reaches the sink,
dominance pairs get zero-cost arcs, and a direct source->sink bypass of
capacity k makes a flow of value exactly k always feasible.

Kernels are plain loops over flat CSR arrays so numba can compile them; if
numba is missing they run interpreted (correct, just slow).
"""
from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap

INF = np.inf


@njit(cache=False)
def _ssp_profile(n_nodes, tail, head, cap, cost, adj, adj_start, k):
    """Push up to k units from node 0 to node 1, one per shortest path.

    Returns the coverage profile: profile[j] = number of covered points after
    j+1 augmentations (coverage = minus the accumulated arc cost).  Arc
    residuals in `cap` are updated in place.  Arcs must be listed so that one
    pass in index order relaxes a DAG (tails in topological order), which
    lets the initial Bellman-Ford settle in two passes.
    """
    source = 0
    sink = 1
    n_arcs = tail.shape[0]

    # Bellman-Ford for initial potentials (graph has negative arcs).
    pot = np.full(n_nodes, INF)
    pot[source] = 0.0
    for _ in range(n_nodes):
        changed = False
        for e in range(n_arcs):
            if cap[e] > 0 and pot[tail[e]] + cost[e] < pot[head[e]]:
                pot[head[e]] = pot[tail[e]] + cost[e]
                changed = True
        if not changed:
            break

    dist = np.empty(n_nodes)
    parent = np.empty(n_nodes, dtype=np.int64)
    # binary heap (lazy deletion)
    heap_cap = n_arcs + n_nodes + 2
    heap_d = np.empty(heap_cap)
    heap_v = np.empty(heap_cap, dtype=np.int32)

    profile = np.zeros(k, dtype=np.int64)
    covered = 0

    for aug in range(k):
        # Dijkstra with reduced costs, stopping when the sink settles.
        dist[:] = INF
        parent[:] = -1
        dist[source] = 0.0
        hn = 0
        heap_d[0] = 0.0
        heap_v[0] = source
        hn = 1
        sink_done = False
        while hn > 0 and not sink_done:
            # pop min
            d = heap_d[0]
            u = heap_v[0]
            hn -= 1
            heap_d[0] = heap_d[hn]
            heap_v[0] = heap_v[hn]
            pos = 0
            while True:
                lc = 2 * pos + 1
                rc = lc + 1
                small = pos
                if lc < hn and heap_d[lc] < heap_d[small]:
                    small = lc
                if rc < hn and heap_d[rc] < heap_d[small]:
                    small = rc
                if small == pos:
                    break
                heap_d[pos], heap_d[small] = heap_d[small], heap_d[pos]
                heap_v[pos], heap_v[small] = heap_v[small], heap_v[pos]
                pos = small
            if d > dist[u]:
                continue
            if u == sink:
                sink_done = True
                break
            for ii in range(adj_start[u], adj_start[u + 1]):
                e = adj[ii]
                if cap[e] <= 0:
                    continue
                v = head[e]
                nd = d + cost[e] + pot[u] - pot[v]
                if nd < dist[v]:
                    dist[v] = nd
                    parent[v] = e
                    # push
                    pos = hn
                    heap_d[pos] = nd
                    heap_v[pos] = v
                    hn += 1
                    while pos > 0:
                        par = (pos - 1) // 2
                        if heap_d[par] <= heap_d[pos]:
                            break
                        heap_d[pos], heap_d[par] = heap_d[par], heap_d[pos]
                        heap_v[pos], heap_v[par] = heap_v[par], heap_v[pos]
                        pos = par
        # sink is always reachable through the bypass arc
        # update potentials
        dsink = dist[sink]
        for v in range(n_nodes):
            if dist[v] < dsink:
                pot[v] += dist[v]
            else:
                pot[v] += dsink
        # walk parents: real path cost and augmentation by one unit
        path_cost = 0
        v = sink
        while v != source:
            e = parent[v]
            path_cost += cost[e]
            cap[e] -= 1
            cap[e ^ 1] += 1
            v = tail[e]
        if path_cost >= 0:
            # shortest-path costs are nondecreasing: coverage has saturated
            for jj in range(aug, k):
                profile[jj] = covered
            # roll back the useless unit (keeps caps meaningful for extraction)
            v = sink
            while v != source:
                e = parent[v]
                cap[e] += 1
                cap[e ^ 1] -= 1
                v = tail[e]
            break
        covered += -path_cost
        profile[aug] = covered
    return profile


def build_network(xs: np.ndarray, ys: np.ndarray, k: int):
    """CSR arc arrays for the chain-cover network on points sorted by x.

    `xs` must be strictly increasing; a pair i<j is a dominance arc when
    ys[i] < ys[j].  Returns (n_nodes, tail, head, cap, cost, adj, adj_start,
    split_arc_ids, first_dom_arc) with arcs emitted in topological tail
    order and reverse arcs at odd indices (pair of arc e is e^1).
    """
    n = xs.shape[0]
    if np.any(np.diff(xs) <= 0):
        raise ValueError("xs must be strictly increasing")
    # node ids: source 0, sink 1, in_i = 2+2i, out_i = 3+2i
    n_nodes = 2 * n + 2

    dom_i, dom_j = np.nonzero(ys[:, None] < ys[None, :])
    keep = dom_i < dom_j
    dom_i = dom_i[keep].astype(np.int64)
    dom_j = dom_j[keep].astype(np.int64)

    # logical arcs in topological tail order:
    #   source block: S->in_i for all i, S->T bypass
    #   per point i: in_i->out_i, out_i->T, out_i->in_j (dominance)
    idx = np.arange(n, dtype=np.int64)
    order = np.argsort(dom_i, kind="stable")
    dom_i = dom_i[order]
    dom_j = dom_j[order]

    t_parts = [np.zeros(n, dtype=np.int64), np.zeros(1, dtype=np.int64)]
    h_parts = [2 + 2 * idx, np.ones(1, dtype=np.int64)]
    cap_parts = [np.ones(n, dtype=np.int64),
                 np.array([k], dtype=np.int64)]
    cost_parts = [np.zeros(n, dtype=np.int64), np.zeros(1, dtype=np.int64)]

    # per-point blocks interleaved by numpy concatenation in tail order:
    # split arcs (tail in_i), then out_i->T, then dominance arcs sorted by i.
    t_parts.append(2 + 2 * idx)          # in_i
    h_parts.append(3 + 2 * idx)          # out_i
    cap_parts.append(np.ones(n, dtype=np.int64))
    cost_parts.append(np.full(n, -1, dtype=np.int64))

    t_parts.append(3 + 2 * idx)          # out_i -> T
    h_parts.append(np.ones(n, dtype=np.int64))
    cap_parts.append(np.ones(n, dtype=np.int64))
    cost_parts.append(np.zeros(n, dtype=np.int64))

    t_parts.append(3 + 2 * dom_i)        # out_i -> in_j
    h_parts.append(2 + 2 * dom_j)
    cap_parts.append(np.ones(dom_i.size, dtype=np.int64))
    cost_parts.append(np.zeros(dom_i.size, dtype=np.int64))

    tail_f = np.concatenate(t_parts)
    head_f = np.concatenate(h_parts)
    cap_f = np.concatenate(cap_parts)
    cost_f = np.concatenate(cost_parts)

    # tails are already grouped: sort stably by tail id to get exact
    # topological order (node ids are topological: S < in_0 < out_0 < ...,
    # except T=1; route T last by sorting on a rank that sends T to the end)
    rank = np.where(tail_f == 1, np.iinfo(np.int64).max, tail_f)
    order = np.argsort(rank, kind="stable")
    tail_f = tail_f[order]
    head_f = head_f[order]
    cap_f = cap_f[order]
    cost_f = cost_f[order]

    split_pos = np.nonzero(cost_f == -1)[0]  # in x-order because sort is stable

    # interleave forward arcs with zero-capacity reverses: arc pair e ^ 1
    m = tail_f.size
    tail = np.empty(2 * m, dtype=np.int32)
    head = np.empty(2 * m, dtype=np.int32)
    cap = np.empty(2 * m, dtype=np.int32)
    cost = np.empty(2 * m, dtype=np.int32)
    tail[0::2] = tail_f
    head[0::2] = head_f
    cap[0::2] = cap_f
    cost[0::2] = cost_f
    tail[1::2] = head_f
    head[1::2] = tail_f
    cap[1::2] = 0
    cost[1::2] = -cost_f

    adj = np.argsort(tail, kind="stable").astype(np.int32)
    adj_start = np.searchsorted(tail[adj], np.arange(n_nodes + 1)).astype(np.int64)

    split_arcs = (2 * split_pos).astype(np.int64)
    return n_nodes, tail, head, cap, cost, adj, adj_start, split_arcs
