"""Doubly increasing functions sampled on rectangular grids.

Values are stored as v[i, j] with i indexing x-nodes and j indexing y-nodes;
a valid grid is nondecreasing along both index axes.  The module provides
the monotone extension of values given on a subset of nodes, forward
difference products, least-squares projection onto the diameter-constrained
monotone cone (Dykstra's alternating projections), and L1 comparison
between grids.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

try:
    from scipy.optimize import isotonic_regression as _scipy_isotonic
except ImportError:  # pragma: no cover
    _scipy_isotonic = None

try:
    from numba import njit as _njit

    @_njit(cache=False)
    def _pav_lines(mat):
        """In-place least-squares nondecreasing fit along axis 1, each row
        independently (pool-adjacent-violators with a block stack)."""
        nrows, n = mat.shape
        sums = np.empty(n)
        cnts = np.empty(n)
        for rix in range(nrows):
            nb = 0
            for i in range(n):
                s = mat[rix, i]
                c = 1.0
                while nb > 0 and sums[nb - 1] * c >= s * cnts[nb - 1]:
                    s += sums[nb - 1]
                    c += cnts[nb - 1]
                    nb -= 1
                sums[nb] = s
                cnts[nb] = c
                nb += 1
            pos = 0
            for b in range(nb):
                mean = sums[b] / cnts[b]
                for _ in range(int(cnts[b])):
                    mat[rix, pos] = mean
                    pos += 1
        return mat

    _HAVE_PAV_KERNEL = True
except ImportError:  # pragma: no cover
    _HAVE_PAV_KERNEL = False


class DomainMismatchError(ValueError):
    """Two grids do not share a domain."""


class MonotonicityError(ValueError):
    """Values violate the doubly increasing invariant."""


class ProjectionConvergenceError(RuntimeError):
    """Dykstra projection failed to converge; carries the last residual."""

    def __init__(self, residual: float, sweeps: int):
        super().__init__(
            f"projection did not converge in {sweeps} sweeps "
            f"(residual {residual:.3e})"
        )
        self.residual = residual


@dataclass(frozen=True)
class GridDomain:
    """Rectangular node lattice: lower-left corner, spacings, node counts."""

    x0: float
    y0: float
    hx: float
    hy: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.hx > 0 and self.hy > 0):
            raise ValueError("grid spacings must be positive")
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grids need at least 2 nodes per axis")

    @classmethod
    def over(cls, x0, x1, y0, y1, nx, ny) -> "GridDomain":
        """Domain spanning [x0,x1] x [y0,y1] with nx x ny nodes."""
        return cls(x0, y0, (x1 - x0) / (nx - 1), (y1 - y0) / (ny - 1), nx, ny)

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + self.hx * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.y0 + self.hy * np.arange(self.ny)

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    def to_json(self) -> str:
        return json.dumps({
            "x0": self.x0, "y0": self.y0, "hx": self.hx, "hy": self.hy,
            "nx": self.nx, "ny": self.ny,
        })

    @classmethod
    def from_json(cls, text: str) -> "GridDomain":
        d = json.loads(text)
        return cls(d["x0"], d["y0"], d["hx"], d["hy"], d["nx"], d["ny"])


def _is_monotone(v: np.ndarray) -> bool:
    return (np.all(np.diff(v, axis=0) >= 0)
            and np.all(np.diff(v, axis=1) >= 0))


class MonotoneGrid:
    """Doubly increasing real values on a GridDomain (immutable)."""

    __slots__ = ("domain", "values")

    def __init__(self, domain: GridDomain, values):
        v = np.array(values, dtype=float)
        if v.shape != (domain.nx, domain.ny):
            raise ValueError(
                f"values shape {v.shape} does not match domain "
                f"({domain.nx}, {domain.ny})"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("grid values must be finite")
        if not _is_monotone(v):
            raise MonotonicityError("values must be nondecreasing in i and j")
        v.setflags(write=False)
        self.domain = domain
        self.values = v

    def __eq__(self, other) -> bool:
        return (isinstance(other, MonotoneGrid)
                and self.domain == other.domain
                and np.array_equal(self.values, other.values))

    def __repr__(self) -> str:
        return f"MonotoneGrid({self.domain.nx}x{self.domain.ny})"


def diam(g: MonotoneGrid) -> float:
    """sup minus inf of the grid values (corner difference by monotonicity)."""
    return float(g.values[-1, -1] - g.values[0, 0])


def extend_monotone(known: np.ndarray, domain: GridDomain) -> MonotoneGrid:
    """Monotone extension of values given on a subset of nodes.

    `known` has shape (nx, ny) with NaN at missing nodes.  The extension sets
    each node to the supremum of the known values it dominates, and to the
    infimum of all known values where it dominates none; the restriction to
    the known nodes reproduces them exactly and the value range is unchanged.
    Non-monotone input is rejected.
    """
    known = np.asarray(known, dtype=float)
    if known.shape != (domain.nx, domain.ny):
        raise ValueError("known-values array must match the domain shape")
    mask = ~np.isnan(known)
    if not mask.any():
        raise ValueError("at least one known value is required")
    filled = np.where(mask, known, -np.inf)
    sup = np.maximum.accumulate(np.maximum.accumulate(filled, axis=0), axis=1)
    w = np.where(np.isneginf(sup), known[mask].min(), sup)
    if not np.array_equal(w[mask], known[mask]):
        raise MonotonicityError("input values are not doubly increasing")
    return MonotoneGrid(domain, w)


def forward_products(g: MonotoneGrid) -> np.ndarray:
    """Cell values of the forward-difference slope product.

    theta[i, j] = (v[i+1,j]-v[i,j]) * (v[i,j+1]-v[i,j]) / (hx*hy), which is
    nonnegative on a monotone grid.
    """
    v = g.values
    dx = v[1:, :-1] - v[:-1, :-1]
    dy = v[:-1, 1:] - v[:-1, :-1]
    return dx * dy / (g.domain.hx * g.domain.hy)


def _pav(y: np.ndarray) -> np.ndarray:
    """Least-squares nondecreasing fit of a 1-D array."""
    if _scipy_isotonic is not None:
        return _scipy_isotonic(y).x
    # classic pool-adjacent-violators
    out = np.empty(y.size)
    blocks: list[tuple[float, float]] = []  # (sum, count)
    for v in y:
        cur = (float(v), 1.0)
        while blocks and blocks[-1][0] / blocks[-1][1] >= cur[0] / cur[1]:
            prev = blocks.pop()
            cur = (prev[0] + cur[0], prev[1] + cur[1])
        blocks.append(cur)
    pos = 0
    for s, c in blocks:
        out[pos:pos + int(c)] = s / c
        pos += int(c)
    return out


def _project_rows(v: np.ndarray) -> np.ndarray:
    """Nearest grid nondecreasing along the x axis (PAV per y-line)."""
    if _HAVE_PAV_KERNEL:
        return _pav_lines(np.ascontiguousarray(v.T)).T
    out = np.empty_like(v)
    for j in range(v.shape[1]):
        out[:, j] = _pav(v[:, j])
    return out


def _project_cols(v: np.ndarray) -> np.ndarray:
    """Nearest grid nondecreasing along the y axis (PAV per x-line)."""
    if _HAVE_PAV_KERNEL:
        return _pav_lines(v.copy())
    out = np.empty_like(v)
    for i in range(v.shape[0]):
        out[i] = _pav(v[i])
    return out


def _project_band(v: np.ndarray, r: float) -> np.ndarray:
    """Nearest point with max - min <= r: clip into [c, c+r] with the offset c
    chosen to minimize the squared movement (piecewise-linear root find)."""
    flat = v.ravel()
    if flat.max() - flat.min() <= r:
        return v
    s = np.sort(flat)
    # g(c) = sum max(c - v, 0) - sum max(v - r - c, 0) is increasing in c
    cs = np.unique(np.concatenate([s, s - r]))
    csum = np.concatenate([[0.0], np.cumsum(s)])
    total = csum[-1]
    n = s.size

    below = np.searchsorted(s, cs, side="right")
    above = n - np.searchsorted(s, cs + r, side="right")
    gs = (cs * below - csum[below]) - ((total - csum[n - above]) - (cs + r) * above)

    pos = int(np.searchsorted(gs, 0.0))
    if pos == 0:
        c_star = cs[0]
    elif pos >= cs.size:
        c_star = cs[-1]
    else:
        # g is linear on [cs[pos-1], cs[pos]] with slope = below + above there
        slope = below[pos - 1] + above[pos - 1]
        c_star = cs[pos - 1] - gs[pos - 1] / slope if slope > 0 else cs[pos - 1]
    return np.clip(v, c_star, c_star + r).reshape(v.shape)


def project_U_r(values, domain: GridDomain, r: float, tol: float = 1e-8,
                max_sweeps: int = 10_000) -> MonotoneGrid:
    """Least-squares projection onto {doubly increasing, diameter <= r}.

    Dykstra's algorithm cycling three convex sets: monotone along the x axis
    (PAV per y-line), monotone along the y axis (PAV per x-line), and the
    diameter band.  Stops when the change over a full cycle drops below
    `tol`; raises ProjectionConvergenceError with the residual otherwise.
    """
    if r < 0:
        raise ValueError("r must be nonnegative")
    x = np.array(values, dtype=float)
    if x.shape != (domain.nx, domain.ny):
        raise ValueError("values shape does not match domain")
    projections = (_project_rows, _project_cols,
                   lambda w: _project_band(w, r))
    increments = [np.zeros_like(x) for _ in projections]
    residual = np.inf
    for _ in range(max_sweeps):
        prev = x.copy()
        for s, proj in enumerate(projections):
            y = x + increments[s]
            x = proj(y)
            increments[s] = y - x
        residual = float(np.max(np.abs(x - prev)))
        if residual < tol:
            break
    else:
        raise ProjectionConvergenceError(residual, max_sweeps)
    # exact cleanup: enforce the invariants bit-exactly
    x = np.maximum.accumulate(np.maximum.accumulate(x, axis=0), axis=1)
    if x[-1, -1] - x[0, 0] > r:
        x = np.minimum(x, x[0, 0] + r)
    return MonotoneGrid(domain, x)


def _compatible(g1: MonotoneGrid, g2) -> None:
    if g1.domain != g2.domain:
        raise DomainMismatchError(
            f"domains differ: {g1.domain} vs {g2.domain}"
        )


def _node_weights(domain: GridDomain) -> np.ndarray:
    """Quadrature weight of each node: cell area times the fraction of
    adjacent cells (1 interior, 1/2 edges, 1/4 corners)."""
    wx = np.full(domain.nx, 1.0)
    wx[0] = wx[-1] = 0.5
    wy = np.full(domain.ny, 1.0)
    wy[0] = wy[-1] = 0.5
    return np.outer(wx, wy) * domain.cell_area


def l1_distance(g1: MonotoneGrid, g2: MonotoneGrid) -> float:
    """L1 integral of |g1 - g2|, cell quadrature averaging the four corners."""
    _compatible(g1, g2)
    return float(np.sum(np.abs(g1.values - g2.values) * _node_weights(g1.domain)))


def shift_minimized_l1(g1: MonotoneGrid, g2: MonotoneGrid):
    """(raw distance, distance minimized over an additive shift of g2, shift).

    The optimal shift of the piecewise-linear objective is the weighted
    median of the node differences under the quadrature weights.
    """
    _compatible(g1, g2)
    d = (g1.values - g2.values).ravel()
    w = _node_weights(g1.domain).ravel()
    order = np.argsort(d, kind="stable")
    cum = np.cumsum(w[order])
    shift = float(d[order][np.searchsorted(cum, 0.5 * cum[-1])])
    raw = float(np.sum(np.abs(d) * w))
    best = float(np.sum(np.abs(d - shift) * w))
    return raw, best, shift


def from_kappa(s, scale: float, domain: GridDomain) -> MonotoneGrid:
    """Sample scale * kappa at the grid nodes (doubly increasing because the
    staircase surface is)."""
    xs, ys = domain.xs, domain.ys
    v = np.empty((domain.nx, domain.ny))
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            v[i, j] = s.eval(float(x), float(y))
    return MonotoneGrid(domain, scale * v)


def write_grid_csv(g: MonotoneGrid, path) -> None:
    """Row-major CSV of values (rows = x index) plus a JSON domain sidecar."""
    from .geometry import atomic_write_text

    lines = [",".join(f"{v:.17g}" for v in row) for row in g.values]
    atomic_write_text(path, "\n".join(lines) + "\n")
    atomic_write_text(str(path) + ".json", g.domain.to_json() + "\n")


def read_grid_csv(path) -> MonotoneGrid:
    with open(str(path) + ".json", "r", encoding="ascii") as fh:
        domain = GridDomain.from_json(fh.read())
    values = np.loadtxt(path, delimiter=",", ndmin=2)
    return MonotoneGrid(domain, values)
