"""Planar point configurations and their random generation.

A finite point set in general position (pairwise distinct x's and pairwise
distinct y's) is read as a permutation by the rule that the i-th point from
the left is the sigma(i)-th point from below.  Random configurations come
either from n i.i.d. draws of a bounded planar density or from a homogeneous
Poisson process on a sloped rectangle.

All sampling is driven by numpy Generators.  Derived streams for parallel
work follow one documented rule: the sub-seed for task ``i`` under master
seed ``s`` is ``SeedSequence((s, i))`` (see :func:`subseed`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SQRT2 = math.sqrt(2.0)

#: How many rounds of re-drawing colliding coordinates are attempted before
#: giving up.  Collisions have probability zero in exact arithmetic, so more
#: than one round essentially never happens.
RESAMPLE_LIMIT = 100


class GeneralPositionError(ValueError):
    """Two points share an x- or y-coordinate."""


class InvalidModelError(ValueError):
    """A density model violates its contract (bound, normalization...)."""


def subseed(seed: int, index: int) -> np.random.SeedSequence:
    """Sub-seed for task `index` derived from a master seed.

    The rule is fixed so that experiment manifests reproduce exactly:
    task i uses ``SeedSequence((seed, i))``.
    """
    return np.random.SeedSequence((int(seed), int(index)))


def as_generator(seed) -> np.random.Generator:
    """Accept an int, SeedSequence or Generator and return a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class PlanarPoint:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y})")


class PointSet:
    """Ordered finite set of planar points in general position.

    The coordinate array is held read-only; all x-coordinates are pairwise
    distinct and so are all y-coordinates.
    """

    __slots__ = ("xy",)

    def __init__(self, xy):
        arr = np.array(xy, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(arr)):
            raise ValueError("point coordinates must be finite")
        n = arr.shape[0]
        if np.unique(arr[:, 0]).size != n or np.unique(arr[:, 1]).size != n:
            raise GeneralPositionError(
                "points must have pairwise distinct x- and y-coordinates"
            )
        arr.setflags(write=False)
        self.xy = arr

    @classmethod
    def from_permutation(cls, sigma) -> "PointSet":
        """Embed a permutation of 1..n (or 0..n-1) as the points (i, sigma(i))."""
        sigma = np.asarray(sigma, dtype=float)
        return cls(np.column_stack([np.arange(1.0, sigma.size + 1.0), sigma]))

    @property
    def xs(self) -> np.ndarray:
        return self.xy[:, 0]

    @property
    def ys(self) -> np.ndarray:
        return self.xy[:, 1]

    @property
    def points(self) -> list[PlanarPoint]:
        return [PlanarPoint(float(x), float(y)) for x, y in self.xy]

    def __len__(self) -> int:
        return self.xy.shape[0]

    def __iter__(self):
        return iter(self.points)

    def __eq__(self, other) -> bool:
        return isinstance(other, PointSet) and np.array_equal(self.xy, other.xy)

    def __repr__(self) -> str:
        return f"PointSet(n={len(self)})"


@dataclass(frozen=True)
class DensityModel:
    """Bounded probability density on an axis-aligned support rectangle.

    kind is one of ``uniform-square``, ``uniform-diamond`` or ``table``.
    Table densities hold cell-sampled values on the support; they must be
    nonnegative, bounded by `bound` and integrate to 1 within 1e-6.
    """

    kind: str
    support: tuple[float, float, float, float]  # x0, x1, y0, y1
    table: np.ndarray | None = None
    bound: float = 1.0

    def __post_init__(self):
        x0, x1, y0, y1 = self.support
        if not (x1 > x0 and y1 > y0):
            raise InvalidModelError("support rectangle is degenerate")
        if self.bound <= 0:
            raise InvalidModelError("density bound must be positive")
        if self.kind == "table":
            t = np.asarray(self.table, dtype=float)
            if t.ndim != 2 or np.any(t < 0) or np.any(t > self.bound + 1e-12):
                raise InvalidModelError("table values must lie in [0, bound]")
            cell = (x1 - x0) / t.shape[0] * (y1 - y0) / t.shape[1]
            total = float(t.sum() * cell)
            if abs(total - 1.0) > 1e-6:
                raise InvalidModelError(
                    f"table density integrates to {total}, not 1"
                )
            object.__setattr__(self, "table", t)
        elif self.kind not in ("uniform-square", "uniform-diamond"):
            raise InvalidModelError(f"unknown density kind {self.kind!r}")

    @classmethod
    def uniform_square(cls) -> "DensityModel":
        return cls("uniform-square", (0.0, 1.0, 0.0, 1.0), bound=1.0)

    @classmethod
    def uniform_diamond(cls) -> "DensityModel":
        """Uniform density on the open diamond |x|+|y| < 1/sqrt(2) (area 1)."""
        h = 1.0 / SQRT2
        return cls("uniform-diamond", (-h, h, -h, h), bound=1.0)

    @classmethod
    def from_table(cls, values, support) -> "DensityModel":
        """Build a table density, normalizing the values to integrate to 1."""
        t = np.asarray(values, dtype=float)
        if np.any(t < 0):
            raise InvalidModelError("table values must be nonnegative")
        x0, x1, y0, y1 = support
        cell = (x1 - x0) / t.shape[0] * (y1 - y0) / t.shape[1]
        total = t.sum() * cell
        if total <= 0:
            raise InvalidModelError("table density has zero mass")
        t = t / total
        return cls("table", tuple(map(float, support)), table=t,
                   bound=float(t.max()))

    def density(self, x, y):
        """Evaluate the density at (arrays of) points."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x0, x1, y0, y1 = self.support
        inside = (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
        if self.kind == "uniform-square":
            return np.where(inside, 1.0, 0.0)
        if self.kind == "uniform-diamond":
            return np.where(np.abs(x) + np.abs(y) < 1.0 / SQRT2, 1.0, 0.0)
        mx, my = self.table.shape
        ix = np.clip(((x - x0) / (x1 - x0) * mx).astype(int), 0, mx - 1)
        iy = np.clip(((y - y0) / (y1 - y0) * my).astype(int), 0, my - 1)
        return np.where(inside, self.table[ix, iy], 0.0)


@dataclass(frozen=True)
class RectangleSpec:
    """Sloped rectangle 0 < (x+y)/sqrt2 < 1, 0 < (y-x)/sqrt2 < beta with
    Poisson intensity gamma."""

    beta: float
    gamma: float

    def __post_init__(self):
        if not (self.beta > 0 and self.gamma > 0):
            raise InvalidModelError("beta and gamma must be positive")


def _collision_indices(xy: np.ndarray) -> np.ndarray:
    """Indices of points participating in an x- or y-coordinate collision,
    keeping the first occurrence of each colliding value."""
    bad = np.zeros(xy.shape[0], dtype=bool)
    for col in (0, 1):
        vals = xy[:, col]
        order = np.argsort(vals, kind="stable")
        dup = np.zeros_like(bad)
        dup[order[1:]] = vals[order[1:]] == vals[order[:-1]]
        bad |= dup
    return np.nonzero(bad)[0]


def _fix_general_position(xy: np.ndarray, redraw) -> np.ndarray:
    """Resample colliding points via `redraw(count)` until none remain."""
    for _ in range(RESAMPLE_LIMIT):
        bad = _collision_indices(xy)
        if bad.size == 0:
            return xy
        xy[bad] = redraw(bad.size)
    raise GeneralPositionError(
        f"could not resolve coordinate collisions in {RESAMPLE_LIMIT} rounds"
    )


def sample_iid(density: DensityModel, n: int, seed) -> PointSet:
    """n i.i.d. points from a bounded density, by rejection sampling.

    The proposal is uniform on the support rectangle times the density bound.
    Coordinate collisions (possible in floating point) are resolved by
    redrawing the offending points, which does not change the law.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if density.bound <= 0:
        raise InvalidModelError("density bound must be positive")
    rng = as_generator(seed)
    x0, x1, y0, y1 = density.support

    def draw(count: int) -> np.ndarray:
        out = np.empty((count, 2))
        got = 0
        while got < count:
            m = max(64, 2 * (count - got))
            xs = rng.uniform(x0, x1, m)
            ys = rng.uniform(y0, y1, m)
            u = rng.uniform(0.0, density.bound, m)
            acc = u < density.density(xs, ys)
            take = min(int(acc.sum()), count - got)
            idx = np.nonzero(acc)[0][:take]
            out[got:got + take, 0] = xs[idx]
            out[got:got + take, 1] = ys[idx]
            got += take
        return out

    if n == 0:
        return PointSet(np.empty((0, 2)))
    return PointSet(_fix_general_position(draw(n), draw))


def sample_poisson_rectangle(spec: RectangleSpec, seed) -> PointSet:
    """Poisson(gamma*beta)-many uniform points in the sloped rectangle.

    Points are drawn in rotated coordinates s=(x+y)/sqrt2 in (0,1),
    t=(y-x)/sqrt2 in (0,beta) and mapped back by x=(s-t)/sqrt2,
    y=(s+t)/sqrt2.
    """
    rng = as_generator(seed)
    n = int(rng.poisson(spec.gamma * spec.beta))

    def draw(count: int) -> np.ndarray:
        s = rng.uniform(0.0, 1.0, count)
        t = rng.uniform(0.0, spec.beta, count)
        return np.column_stack([(s - t) / SQRT2, (s + t) / SQRT2])

    if n == 0:
        return PointSet(np.empty((0, 2)))
    return PointSet(_fix_general_position(draw(n), draw))


def as_permutation(ps: PointSet) -> np.ndarray:
    """Read a point set as a permutation: sigma(i)=j when the i-th point from
    the left is the j-th point from below.  Returns 1-based ranks."""
    order = np.argsort(ps.xs, kind="stable")
    yrank = np.empty(len(ps), dtype=np.int64)
    yrank[np.argsort(ps.ys, kind="stable")] = np.arange(1, len(ps) + 1)
    return yrank[order]


def atomic_write_text(path, data: str) -> None:
    """Write a text file via a temp name and rename, so interrupted runs
    never leave partial artifacts."""
    import os
    import tempfile

    d = os.path.dirname(os.path.abspath(str(path)))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="\n") as fh:
            fh.write(data)
        os.replace(tmp, str(path))
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_points_csv(ps: PointSet, path) -> None:
    """CSV with header ``x,y`` and 17-significant-digit floats."""
    lines = ["x,y"]
    lines += [f"{x:.17g},{y:.17g}" for x, y in ps.xy]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_points_csv(path) -> PointSet:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != "x,y":
            raise ValueError(f"unexpected header {header!r}")
        rows = [line.split(",") for line in fh.read().split()]
    if not rows:
        return PointSet(np.empty((0, 2)))
    return PointSet(np.array(rows, dtype=float))
