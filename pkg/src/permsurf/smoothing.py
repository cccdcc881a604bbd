"""Continuity smoothing of monotone functions.

The 1D operator replaces an increasing function by the highest function
below it whose slope is a wherever the two differ.  The 2D operator works on
a doubly increasing grid that vanishes on its west and south boundary lines:
for every node and every height z below the node value, it finds the highest
plane with slope product a through the node that stays below the z-sublevel
region south-west of the node, and takes the infimum over z.  Choosing
a = 4C makes the slope product of the output at least C wherever it moved,
while never raising values, never breaking monotonicity, and never
increasing the value range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import GridDomain, MonotoneGrid

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


class BoundaryError(ValueError):
    """Grid does not vanish on its west and south boundary lines."""


@dataclass(frozen=True)
class SmoothingParams:
    """Target derivative product C (the slope product used is a = 4C),
    the number of quantized heights, and the tolerance used by the
    derivative-product diagnostic."""

    C: float
    z_levels: int = 64
    product_tol: float = 0.2

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.z_levels < 1:
            raise ValueError("z_levels must be positive")

    @property
    def a(self) -> float:
        return 4.0 * self.C


def smooth_1d(xs, us, a: float) -> np.ndarray:
    """Highest function below `us` with slope exactly `a` where they differ.

    Computed as a*x_i plus the prefix minimum of u_j - a*x_j, which is the
    discrete infimal convolution with the line of slope a.  Requires sorted
    xs with xs[0] = 0, nondecreasing us with us[0] = 0.
    """
    xs = np.asarray(xs, dtype=float)
    us = np.asarray(us, dtype=float)
    if xs.ndim != 1 or xs.shape != us.shape:
        raise ValueError("xs and us must be 1-D arrays of equal length")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("xs must be strictly increasing")
    if np.any(np.diff(us) < 0):
        raise ValueError("us must be nondecreasing")
    if xs[0] != 0.0 or us[0] != 0.0:
        raise ValueError("the boundary condition xs[0] = us[0] = 0 is required")
    if a <= 0:
        raise ValueError("a must be positive")
    return a * xs + np.minimum.accumulate(us - a * xs)


def z_levels(values: np.ndarray, count: int) -> np.ndarray:
    """Quantized height set: `count` quantiles of the value distribution,
    deduplicated and sorted.  Shared by the operator and its oracle."""
    qs = np.quantile(np.asarray(values, dtype=float).ravel(),
                     np.linspace(0.0, 1.0, count))
    return np.unique(qs)


@dataclass(frozen=True)
class CeilingFrontier:
    """Pareto-maximal corners of a sublevel region south-west of a node.

    Offsets (dx, dy) are measured from the query node, dx strictly
    increasing and dy strictly decreasing; the zero boundary guarantees one
    corner with dx = 0 and one with dy = 0 (they coincide in (0, 0) when the
    node value is at most z).
    """

    dx: np.ndarray
    dy: np.ndarray

    def __post_init__(self):
        dx = np.asarray(self.dx, dtype=float)
        dy = np.asarray(self.dy, dtype=float)
        if dx.size == 0:
            raise ValueError("frontier must be nonempty")
        if np.any(dx < 0) or np.any(dy < 0):
            raise ValueError("offsets must be nonnegative")
        if dx.size > 1 and (np.any(np.diff(dx) <= 0) or np.any(np.diff(dy) >= 0)):
            raise ValueError("corners must form a strict staircase")
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "dy", dy)

    def __len__(self) -> int:
        return self.dx.size


def _require_zero_boundary(u: MonotoneGrid) -> None:
    v = u.values
    if np.any(v[0, :] != 0.0) or np.any(v[:, 0] != 0.0):
        raise BoundaryError(
            "grid must vanish on its west and south boundary lines "
            "(extend and shift first)"
        )


def _column_tops(values: np.ndarray, i: int, j: int, z: float) -> np.ndarray:
    """For columns 0..i: largest row index <= j whose value is <= z."""
    tops = np.empty(i + 1, dtype=np.int64)
    for i2 in range(i + 1):
        tops[i2] = np.searchsorted(values[i2, :j + 1], z, side="right") - 1
    return tops


def ceiling_frontier(u: MonotoneGrid, node: tuple[int, int], z: float) -> CeilingFrontier:
    """Pareto-maximal grid corners of {(x', y') <= node : u(x', y') <= z},
    as coordinate offsets from the node."""
    if z < 0:
        raise ValueError("z must be nonnegative")
    _require_zero_boundary(u)
    i, j = node
    nx, ny = u.values.shape
    if not (0 <= i < nx and 0 <= j < ny):
        raise IndexError(f"node {node} outside grid {nx}x{ny}")
    tops = _column_tops(u.values, i, j, z)
    xs, ys = u.domain.xs, u.domain.ys
    dx, dy = [], []
    prev = -1
    for i2 in range(i, -1, -1):
        t = tops[i2]
        if i2 == i or t > prev:
            dx.append(xs[i] - xs[i2])
            dy.append(ys[j] - ys[t])
            prev = t
            if t == j:
                break
    return CeilingFrontier(np.array(dx), np.array(dy))


def _candidate_ps(dx: np.ndarray, dy: np.ndarray, a: float) -> np.ndarray:
    """The exact candidate slope set: per-corner stationary points plus all
    pairwise crossings of the corner curves p*dx + (a/p)*dy."""
    cands = []
    both = (dx > 0) & (dy > 0)
    if both.any():
        cands.append(np.sqrt(a * dy[both] / dx[both]))
    if dx.size > 1:
        num = dy[:, None] - dy[None, :]
        den = dx[None, :] - dx[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            rad = a * num / den
        good = np.isfinite(rad) & (rad > 0)
        if good.any():
            cands.append(np.sqrt(rad[good]))
    if not cands:
        return np.empty(0)
    return np.concatenate(cands)


def best_plane(frontier: CeilingFrontier, a: float, z: float) -> tuple[float, float]:
    """Highest plane with slope product `a` through the node that stays below
    the frontier at height z.

    Returns (p_star, h_star) where h_star = max over p > 0 of
    z + min over corners of (p*dx + (a/p)*dy), computed exactly over the
    finite candidate set of stationary points and pairwise crossings.
    """
    if a <= 0:
        raise ValueError("a must be positive")
    dx, dy = frontier.dx, frontier.dy
    ps = _candidate_ps(dx, dy, a)
    if ps.size == 0:
        # single corner; with the zero boundary this is (0, 0) and the
        # envelope is flat at z
        return math.sqrt(a), float(z)
    heights = z + np.min(ps[:, None] * dx[None, :]
                         + (a / ps)[:, None] * dy[None, :], axis=1)
    best = int(np.argmax(heights))
    if heights[best] <= z:
        return math.sqrt(a), float(z)
    return float(ps[best]), float(heights[best])


@njit(cache=False)
def _smooth_kernel(u, xs, ys, Q, TOP, a):
    """Per-node infimum over quantized heights of the best-plane height.

    TOP[qi, i2] is the largest row index whose value in column i2 is at most
    Q[qi].  For each (node, z) the clipped column tops give the frontier
    staircase; the envelope maximum over the plane slope is attained at a
    crossing of two corners adjacent on the lower convex hull, so only those
    crossings are evaluated.
    """
    nx, ny = u.shape
    nq = Q.shape[0]
    out = np.empty((nx, ny))
    cdx = np.empty(nx + 2)
    cdy = np.empty(nx + 2)
    hxs = np.empty(nx + 2)
    hys = np.empty(nx + 2)
    for i in range(nx):
        for j in range(ny):
            un = u[i, j]
            best = un  # z = u(node) forces the plane height z
            for qi in range(nq):
                z = Q[qi]
                if z >= best:
                    break  # heights are >= z: larger z cannot improve
                m = 0
                prev = -1
                for i2 in range(i, -1, -1):
                    t = TOP[qi, i2]
                    if t > j:
                        t = j
                    if m == 0 or t > prev:
                        cdx[m] = xs[i] - xs[i2]
                        cdy[m] = ys[j] - ys[t]
                        m += 1
                        prev = t
                        if t == j:
                            break
                # lower convex hull of the staircase corners
                hn = 0
                for c in range(m):
                    x1 = cdx[c]
                    y1 = cdy[c]
                    while hn >= 2:
                        cr = ((hxs[hn - 1] - hxs[hn - 2]) * (y1 - hys[hn - 2])
                              - (hys[hn - 1] - hys[hn - 2]) * (x1 - hxs[hn - 2]))
                        if cr <= 0.0:
                            hn -= 1
                        else:
                            break
                    hxs[hn] = x1
                    hys[hn] = y1
                    hn += 1
                hbest = z
                for e in range(hn - 1):
                    ddx = hxs[e + 1] - hxs[e]
                    ddy = hys[e] - hys[e + 1]
                    p = math.sqrt(a * ddy / ddx)
                    val = z + p * hxs[e] + (a / p) * hys[e]
                    if val > hbest:
                        hbest = val
                if hbest < best:
                    best = hbest
            out[i, j] = best
    return out


def smooth_2d(u: MonotoneGrid, params: SmoothingParams) -> MonotoneGrid:
    """Continuity smoothing of a doubly increasing grid with zero west and
    south boundaries.

    At each node the result is the minimum over the quantized height set
    (quantiles of the value distribution capped at the node value, plus the
    node value itself) of the best-plane height for that z.  The output
    satisfies 0 <= smoothed <= u and is doubly increasing.
    """
    _require_zero_boundary(u)
    v = u.values
    Q = z_levels(v, params.z_levels)
    nx = v.shape[0]
    TOP = np.empty((Q.size, nx), dtype=np.int64)
    for i2 in range(nx):
        TOP[:, i2] = np.searchsorted(v[i2], Q, side="right") - 1
    out = _smooth_kernel(v, u.domain.xs, u.domain.ys, Q, TOP, params.a)
    out = np.minimum(out, v)
    out = np.maximum.accumulate(np.maximum.accumulate(out, axis=0), axis=1)
    return MonotoneGrid(u.domain, out)


def smooth_at_node(u: MonotoneGrid, node: tuple[int, int],
                   params: SmoothingParams) -> float:
    """Reference path for one node through the public frontier/plane API
    (used to monitor quantization and cross-check the kernel)."""
    un = float(u.values[node])
    Q = z_levels(u.values, params.z_levels)
    best = un
    for z in Q:
        if z >= best:
            break
        _, h = best_plane(ceiling_frontier(u, node, float(z)), params.a, float(z))
        best = min(best, h)
    return best


def quantization_report(u: MonotoneGrid, params: SmoothingParams,
                        sample: int = 64, seed: int = 0) -> dict:
    """Max change of the smoothed values at sampled nodes when the height
    quantization is doubled (the documented refinement monitor)."""
    rng = np.random.default_rng(seed)
    nx, ny = u.values.shape
    nodes = set()
    for _ in range(sample):
        nodes.add((int(rng.integers(nx)), int(rng.integers(ny))))
    doubled = SmoothingParams(params.C, 2 * params.z_levels, params.product_tol)
    worst = 0.0
    for node in sorted(nodes):
        a = smooth_at_node(u, node, params)
        b = smooth_at_node(u, node, doubled)
        worst = max(worst, abs(a - b))
    return {"nodes_checked": len(nodes), "max_change": worst,
            "z_levels": params.z_levels}


def pad_zero_boundary(u: MonotoneGrid) -> tuple[MonotoneGrid, float]:
    """Embed a grid into one extra zero row and column after shifting its
    minimum to zero; returns the padded grid and the subtracted offset."""
    v = u.values
    offset = float(v[0, 0])
    d = u.domain
    padded = np.zeros((d.nx + 1, d.ny + 1))
    padded[1:, 1:] = v - offset
    dom = GridDomain(d.x0 - d.hx, d.y0 - d.hy, d.hx, d.hy, d.nx + 1, d.ny + 1)
    return MonotoneGrid(dom, padded), offset


def strip_padding(u: MonotoneGrid, offset: float) -> MonotoneGrid:
    """Inverse of pad_zero_boundary (up to the smoothing applied between)."""
    d = u.domain
    dom = GridDomain(d.x0 + d.hx, d.y0 + d.hy, d.hx, d.hy, d.nx - 1, d.ny - 1)
    return MonotoneGrid(dom, u.values[1:, 1:] + offset)


def modulus_violations(u: MonotoneGrid, ut: MonotoneGrid, a: float,
                       pairs: int = 1000, seed: int = 0,
                       slack: float = 1e-9) -> dict:
    """Check the continuity modulus on random ordered node pairs.

    For (x', y') <= (x, y), with coordinates measured from the zero
    boundary lines, the smoothed increase may not exceed
    sqrt(a * (y*(x-x') + x*(y-y'))) plus `slack`.
    """
    rng = np.random.default_rng(seed)
    nx, ny = ut.values.shape
    X = ut.domain.xs - ut.domain.xs[0]
    Y = ut.domain.ys - ut.domain.ys[0]
    worst = -np.inf
    violations = 0
    for _ in range(pairs):
        i1, i2 = np.sort(rng.integers(0, nx, 2))
        j1, j2 = np.sort(rng.integers(0, ny, 2))
        bound = math.sqrt(a * (Y[j2] * (X[i2] - X[i1]) + X[i2] * (Y[j2] - Y[j1])))
        excess = (ut.values[i2, j2] - ut.values[i1, j1]) - bound
        worst = max(worst, excess)
        if excess > slack:
            violations += 1
    return {"pairs": pairs, "violations": violations, "max_excess": worst}


def derivative_product_stats(u: MonotoneGrid, ut: MonotoneGrid, C: float,
                             gap_frac: float = 0.05,
                             jump_frac: float = 0.2) -> dict:
    """Central-difference slope products of the smoothed grid at interior
    nodes that genuinely moved.

    A node qualifies when u - ut exceeds gap_frac times the value range of u
    and no adjacent u-difference exceeds jump_frac times that range (finite
    differences straddling a near-jump of u carry no derivative meaning).
    Reports the fraction of qualifying nodes whose product reaches 0.5*C.
    """
    uu, tt = u.values, ut.values
    d = u.domain
    rng_u = float(uu[-1, -1] - uu[0, 0])
    if rng_u <= 0:
        return {"checked": 0, "frac_half_C": 1.0, "min_product": np.inf}
    gap = (uu - tt) > gap_frac * rng_u
    jump = np.zeros_like(gap)
    jx = np.abs(np.diff(uu, axis=0)) > jump_frac * rng_u
    jy = np.abs(np.diff(uu, axis=1)) > jump_frac * rng_u
    jump[:-1, :] |= jx
    jump[1:, :] |= jx
    jump[:, :-1] |= jy
    jump[:, 1:] |= jy
    interior = np.zeros_like(gap)
    interior[1:-1, 1:-1] = True
    sel = gap & ~jump & interior
    idx = np.argwhere(sel)
    if idx.size == 0:
        return {"checked": 0, "frac_half_C": 1.0, "min_product": np.inf}
    i, j = idx[:, 0], idx[:, 1]
    px = (tt[i + 1, j] - tt[i - 1, j]) / (2 * d.hx)
    py = (tt[i, j + 1] - tt[i, j - 1]) / (2 * d.hy)
    prod = px * py
    return {
        "checked": int(idx.shape[0]),
        "frac_half_C": float(np.mean(prod >= 0.5 * C)),
        "min_product": float(prod.min()),
        "median_product": float(np.median(prod)),
    }


def smoothing_report(u: MonotoneGrid, ut: MonotoneGrid,
                     params: SmoothingParams, seed: int = 0) -> dict:
    """Invariant statistics of a smoothing run (for the CLI JSON report)."""
    uu, tt = u.values, ut.values
    return {
        "max_above_u": float((tt - uu).max()),
        "min_value": float(tt.min()),
        "monotone_x_min_step": float(np.diff(tt, axis=0).min()),
        "monotone_y_min_step": float(np.diff(tt, axis=1).min()),
        "modulus": modulus_violations(u, ut, params.a, seed=seed),
        "product": derivative_product_stats(u, ut, params.C),
    }
