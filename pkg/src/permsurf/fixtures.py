"""Analytic test fixtures.

`jump_surface_eval` is a bounded doubly increasing surface whose single
discontinuity at the origin cannot be removed without lowering the slope
product somewhere: its level rays fan out of the origin, so an order-one
jump survives any competitor with pointwise-larger slope product.
`diamond_instance` is the uniform density on the open diamond
|x|+|y| < 1/sqrt(2) inside its sloped bounding rectangle, whose unique
diameter-sqrt(2) maximizer restricts to x + y on the diamond.
"""
from __future__ import annotations

import math

import numpy as np

from .geometry import SQRT2, PointSet
from .grids import GridDomain, MonotoneGrid


def jump_surface_eval(x, y):
    """Three-branch doubly increasing surface with values in [-1, 1]:
    (x+y)/|x-y| on the quadrants where x*y <= 0, the sign of x+y where
    x*y > 0, and 0 at the origin."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    scalar = x.ndim == 0 and y.ndim == 0
    x, y = np.atleast_1d(x), np.atleast_1d(y)
    out = np.empty(np.broadcast(x, y).shape)
    xs, ys = np.broadcast_arrays(x, y)
    mixed = xs * ys <= 0
    origin = (xs == 0) & (ys == 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        fan = (xs + ys) / np.abs(xs - ys)
    out = np.where(mixed, fan, np.sign(xs + ys))
    out = np.where(origin, 0.0, out)
    return float(out[()]) if scalar else out


def kappa_demo_points() -> PointSet:
    """Six-point configuration whose staircase surface takes the values
    0, 1, 2, 3 at (1,2), (3,5), (5,5), (7,6)."""
    return PointSet([(1, 4), (3, 1), (2, 6), (4, 3), (5, 2), (6, 5)])


def jump_surface_grid(m: int) -> MonotoneGrid:
    """The jump surface sampled into the smoothing operator's domain.

    The square [-1, 1]^2 around the discontinuity is shifted to [0, 2]^2 and
    the values floored at 0; because the raw surface is nonpositive whenever
    either original coordinate is nonpositive, the floored grid vanishes on
    its west and south boundary lines, as the smoothing operator requires.
    With odd m the discontinuity sits exactly at the center node (1, 1).
    """
    if m < 3:
        raise ValueError("m must be at least 3")
    domain = GridDomain.over(0.0, 2.0, 0.0, 2.0, m, m)
    gx = domain.xs - 1.0
    gy = domain.ys - 1.0
    vals = np.maximum(jump_surface_eval(gx[:, None], gy[None, :]), 0.0)
    return MonotoneGrid(domain, vals)


def diamond_bounding_box() -> tuple[float, float]:
    """The sloped rectangle -sqrt2 < x+y < 1/sqrt2, |x-y| < 1/sqrt2 has
    axis-aligned bounding box [lo, hi]^2 with lo = -3/(2*sqrt2), hi = 1/sqrt2."""
    return -3.0 / (2.0 * SQRT2), 1.0 / SQRT2


def diamond_density(x, y):
    """Indicator of the open diamond |x|+|y| < 1/sqrt(2) (area exactly 1)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.where(np.abs(x) + np.abs(y) < 1.0 / SQRT2, 1.0, 0.0)


def diamond_instance(m: int):
    """Cell-rasterized diamond density on the sloped rectangle's bounding
    box, renormalized to integrate to exactly 1.

    Returns (DensityGrid, GridDomain) with an m x m node grid; the density
    vanishes on the padding between the diamond and the box, which keeps the
    functional insensitive to the padding.
    """
    from .variational import DensityGrid

    if m < 3:
        raise ValueError("m must be at least 3")
    lo, hi = diamond_bounding_box()
    domain = GridDomain.over(lo, hi, lo, hi, m, m)
    cx = domain.xs[:-1] + domain.hx / 2.0
    cy = domain.ys[:-1] + domain.hy / 2.0
    cells = diamond_density(cx[:, None], cy[None, :])
    total = cells.sum() * domain.cell_area
    if total <= 0:
        raise ValueError("grid too coarse: no cell center inside the diamond")
    cells = cells / total
    return DensityGrid(domain, cells), domain


def linear_ramp(domain: GridDomain) -> MonotoneGrid:
    """The surface x + y sampled on a domain (the diamond maximizer's shape
    on the diamond itself)."""
    return MonotoneGrid(
        domain, domain.xs[:, None] + domain.ys[None, :]
    )
