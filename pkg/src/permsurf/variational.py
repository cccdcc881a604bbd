"""The scaled-coverage curve, the local integrand L, the functional F, and
its numerical maximization over diameter-constrained monotone grids.

F integrates L(rho, du/dx * du/dy) over the domain, where L(eta, theta) =
eta * Phi(sqrt(2*theta/eta)) and Phi is the limiting scaled size of a
maximal decreasing-union in a long unit rectangle: proven equal to 1 from
sqrt(2) on, conjectured quadratic below.  Maximization is projected gradient
ascent with multi-start, followed by the continuity-smoothing post-pass
with C = sup rho, which cannot lower the functional.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    SQRT2,
    DensityModel,
    PointSet,
    RectangleSpec,
    as_generator,
    sample_iid,
    sample_poisson_rectangle,
    subseed,
)
from .grids import (
    GridDomain,
    MonotoneGrid,
    DomainMismatchError,
    forward_products,
    from_kappa,
    l1_distance,
    project_U_r,
    shift_minimized_l1,
)
from .smoothing import SmoothingParams, pad_zero_boundary, smooth_2d, strip_padding
from .tableau import kappa_surface
from .watermelon import EXACT_CAP, CapExceededError, coverage_profile, max_k_decreasing


@dataclass(frozen=True)
class PhiModel:
    """The scaled-coverage curve: nondecreasing, 0 at 0, and exactly 1 from
    sqrt(2) on.

    The default closed form integrates the conjectured slope sqrt(2) - r to
    Phi(r) = sqrt(2)*r - r^2/2 on [0, sqrt(2)]; a table kind interpolates
    sampled (r, Phi) pairs linearly instead.
    """

    kind: str = "conjectured"
    rs: np.ndarray | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "conjectured":
            return
        if self.kind != "table":
            raise ValueError(f"unknown Phi kind {self.kind!r}")
        rs = np.asarray(self.rs, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if rs.ndim != 1 or rs.shape != vals.shape or rs.size < 2:
            raise ValueError("table Phi needs matching 1-D sample arrays")
        if np.any(np.diff(rs) <= 0):
            raise ValueError("table r-values must be strictly increasing")
        if np.any(np.diff(vals) < 0):
            raise ValueError("Phi must be nondecreasing")
        if rs[0] != 0.0 or vals[0] != 0.0:
            raise ValueError("Phi(0) = 0 is required")
        if rs[-1] < SQRT2 or abs(vals[-1] - 1.0) > 1e-12:
            raise ValueError("Phi must reach 1 at sqrt(2)")
        object.__setattr__(self, "rs", rs)
        object.__setattr__(self, "values", vals)

    def phi(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "conjectured":
            return np.where(r >= SQRT2, 1.0, SQRT2 * r - 0.5 * r * r)
        return np.interp(r, self.rs, self.values, left=0.0, right=1.0)


@dataclass(frozen=True)
class DensityGrid:
    """Bounded probability density sampled at the cell centers of a grid."""

    domain: GridDomain
    cells: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.cells, dtype=float)
        if c.shape != (self.domain.nx - 1, self.domain.ny - 1):
            raise ValueError("cells must have shape (nx-1, ny-1)")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ValueError("density cells must be finite and nonnegative")
        total = float(c.sum() * self.domain.cell_area)
        if abs(total - 1.0) > 1e-3:
            raise ValueError(f"density integrates to {total}, not 1")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "cells", c)

    @property
    def bound(self) -> float:
        return float(self.cells.max())


def write_density_csv(dg: DensityGrid, path) -> None:
    """Row-major CSV of cell values plus a JSON sidecar for the node domain."""
    from .geometry import atomic_write_text

    lines = [",".join(f"{v:.17g}" for v in row) for row in dg.cells]
    atomic_write_text(path, "\n".join(lines) + "\n")
    atomic_write_text(str(path) + ".json", dg.domain.to_json() + "\n")


def read_density_csv(path) -> DensityGrid:
    with open(str(path) + ".json", "r", encoding="ascii") as fh:
        domain = GridDomain.from_json(fh.read())
    cells = np.loadtxt(path, delimiter=",", ndmin=2)
    return DensityGrid(domain, cells)


def rasterize(model: DensityModel, m: int) -> DensityGrid:
    """Cell-sample a density model on an m x m node grid over its support,
    renormalized to integrate to exactly 1."""
    x0, x1, y0, y1 = model.support
    domain = GridDomain.over(x0, x1, y0, y1, m, m)
    cx = domain.xs[:-1] + domain.hx / 2.0
    cy = domain.ys[:-1] + domain.hy / 2.0
    cells = model.density(cx[:, None], cy[None, :])
    total = cells.sum() * domain.cell_area
    if total <= 0:
        raise ValueError("density vanishes on every cell center")
    return DensityGrid(domain, cells / total)


def sample_from_grid(dg: DensityGrid, n: int, seed) -> PointSet:
    """n i.i.d. points from a cell density: pick cells by mass, uniform
    within the cell."""
    rng = as_generator(seed)
    flat = (dg.cells * dg.domain.cell_area).ravel()
    p = flat / flat.sum()
    ncy = dg.cells.shape[1]

    def draw(count: int) -> np.ndarray:
        idx = rng.choice(flat.size, size=count, p=p)
        ci, cj = idx // ncy, idx % ncy
        x = dg.domain.xs[ci] + rng.uniform(0, dg.domain.hx, count)
        y = dg.domain.ys[cj] + rng.uniform(0, dg.domain.hy, count)
        return np.column_stack([x, y])

    from .geometry import _fix_general_position

    if n == 0:
        return PointSet(np.empty((0, 2)))
    return PointSet(_fix_general_position(draw(n), draw))


def L_value(eta, theta, phi: PhiModel):
    """The local integrand eta * Phi(sqrt(2*theta/eta)), and 0 when eta = 0."""
    eta = np.asarray(eta, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(eta < 0) or np.any(theta < 0):
        raise ValueError("eta and theta must be nonnegative")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.sqrt(2.0 * theta / np.where(eta > 0, eta, 1.0))
    out = np.where(eta > 0, eta * phi.phi(ratio), 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def F_rho(u: MonotoneGrid, rho: DensityGrid, phi: PhiModel) -> float:
    """Cell-quadrature value of the functional: sum of L(rho, theta) times
    the cell area, with theta the forward-difference slope product."""
    if u.domain != rho.domain:
        raise DomainMismatchError("grid and density live on different domains")
    theta = forward_products(u)
    return float(np.sum(L_value(rho.cells, theta, phi)) * u.domain.cell_area)


def _dL_dtheta(eta: np.ndarray, theta_hat: np.ndarray, phi: PhiModel) -> np.ndarray:
    if phi.kind == "conjectured":
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.sqrt(np.where(theta_hat > 0, eta / theta_hat, 0.0)) - 1.0
        return np.maximum(g, 0.0)
    h = 1e-7 * np.maximum(theta_hat, 1.0)
    up = L_value(eta, theta_hat + h, phi)
    dn = L_value(eta, np.maximum(theta_hat - h, 0.0), phi)
    return (up - dn) / (2.0 * h)


def f_gradient(u: MonotoneGrid, rho: DensityGrid, phi: PhiModel,
               theta_floor: float = 1e-12) -> np.ndarray:
    """Analytic gradient of the discretized functional with respect to the
    node values (chain rule through the forward differences; theta is
    floored at `theta_floor` in the derivative only, never in the value)."""
    if u.domain != rho.domain:
        raise DomainMismatchError("grid and density live on different domains")
    v = u.values
    dx = v[1:, :-1] - v[:-1, :-1]
    dy = v[:-1, 1:] - v[:-1, :-1]
    area = u.domain.cell_area
    theta = dx * dy / area
    # cell weight (area) cancels against d(theta)/d(dx*dy) = 1/area
    lt = _dL_dtheta(rho.cells, np.maximum(theta, theta_floor), phi)
    grad = np.zeros_like(v)
    grad[:-1, :-1] += lt * (-dy - dx)
    grad[1:, :-1] += lt * dy
    grad[:-1, 1:] += lt * dx
    return grad


@dataclass
class MaximizeOptions:
    max_iters: int = 250
    rel_tol: float = 1e-7
    proj_tol: float = 1e-6
    proj_max_sweeps: int = 5000
    step0: float | None = None
    min_step: float = 1e-12
    starts: tuple[str, ...] = ("ramp", "constant", "pilot")
    pilot_n: int = 2000
    pilot_seed: int = 1
    smoothing_z_levels: int = 64
    theta_floor: float = 1e-12
    watermelon_cap: int = EXACT_CAP


@dataclass
class MaximizerReport:
    """Outcome of a maximization run: the best iterate, its value, and the
    value after the continuity-smoothing post-pass (which must not drop by
    more than quadrature noise)."""

    u_star: MonotoneGrid
    value: float
    iterations: int
    converged: bool
    smoothing_applied: bool
    value_after_smoothing: float
    u_smoothed: MonotoneGrid | None = None
    start: str = ""
    trace: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "value": self.value,
            "iterations": self.iterations,
            "converged": self.converged,
            "smoothing_applied": self.smoothing_applied,
            "value_after_smoothing": self.value_after_smoothing,
            "start": self.start,
        }


def _ramp_start(domain: GridDomain, r: float) -> np.ndarray:
    sx = (domain.xs - domain.xs[0]) / (domain.xs[-1] - domain.xs[0])
    sy = (domain.ys - domain.ys[0]) / (domain.ys[-1] - domain.ys[0])
    return 0.5 * r * (sx[:, None] + sy[None, :])


def _pilot_start(rho: DensityGrid, r: float, opts: MaximizeOptions) -> np.ndarray:
    """Scaled staircase surface of a watermelon from a pilot simulation.

    The raw staircase is continuity-smoothed before use: its treads have
    zero slope product, where the ascent gradient saturates, so risers left
    in the start would never be flattened by the ascent."""
    n = opts.pilot_n
    ps = sample_from_grid(rho, n, subseed(opts.pilot_seed, 0))
    k = int(math.floor(r * math.sqrt(n)))
    res = max_k_decreasing(ps, k, cap=max(opts.watermelon_cap, n))
    if len(res.subset) == 0:
        return np.zeros((rho.domain.nx, rho.domain.ny))
    surf = kappa_surface(res.subset)
    stair = from_kappa(surf, 1.0 / math.sqrt(n), rho.domain)
    padded, offset = pad_zero_boundary(stair)
    params = SmoothingParams(C=max(rho.bound, 1e-12),
                             z_levels=opts.smoothing_z_levels)
    return strip_padding(smooth_2d(padded, params), offset).values


def maximize(rho: DensityGrid, r: float, phi: PhiModel | None = None,
             opts: MaximizeOptions | None = None) -> MaximizerReport:
    """Projected gradient ascent of the discretized functional over the
    diameter-r monotone grids, then the continuity-smoothing post-pass.

    Multi-start (affine ramp, constant, pilot-simulation staircase); each
    ascent step uses backtracking line search and Dykstra projection; stops
    at relative improvement below rel_tol.
    """
    if r < 0:
        raise ValueError("r must be nonnegative")
    phi = phi or PhiModel()
    opts = opts or MaximizeOptions()
    domain = rho.domain

    starts: list[tuple[str, np.ndarray]] = []
    for name in opts.starts:
        if name == "ramp":
            starts.append((name, _ramp_start(domain, r)))
        elif name == "constant":
            starts.append((name, np.zeros((domain.nx, domain.ny))))
        elif name == "pilot":
            try:
                starts.append((name, _pilot_start(rho, r, opts)))
            except CapExceededError:
                pass
        else:
            raise ValueError(f"unknown start {name!r}")

    best = None
    for name, v0 in starts:
        g = project_U_r(v0, domain, r, tol=opts.proj_tol,
                        max_sweeps=opts.proj_max_sweeps)
        v = g.values.copy()
        f = F_rho(MonotoneGrid(domain, v), rho, phi)
        trace = [(0, f, 0.0, math.inf)]
        # step is measured in value units: the ascent direction is the
        # gradient normalized to unit sup-norm (the theta floor can make raw
        # gradient entries huge on flat cells)
        step = opts.step0 if opts.step0 is not None else 0.5 * max(r, 1e-3)
        converged = False
        it = 0
        for it in range(1, opts.max_iters + 1):
            grad = f_gradient(MonotoneGrid(domain, v), rho, phi,
                              opts.theta_floor)
            gmax = float(np.abs(grad).max())
            if gmax == 0.0:
                converged = True
                break
            direction = grad / gmax
            improved = False
            while step >= opts.min_step:
                w = project_U_r(v + step * direction, domain, r,
                                tol=opts.proj_tol,
                                max_sweeps=opts.proj_max_sweeps).values
                fw = F_rho(MonotoneGrid(domain, w), rho, phi)
                if fw > f:
                    improved = True
                    break
                step *= 0.5
            if not improved:
                converged = True
                break
            rel = (fw - f) / max(abs(f), 1e-12)
            v, f = w, fw
            trace.append((it, f, step, rel))
            if rel < opts.rel_tol:
                converged = True
                break
            step *= 1.3
        if best is None or f > best[1]:
            best = (MonotoneGrid(domain, v), f, it, converged, name, trace)

    u_star, value, iters, converged, start, trace = best

    C = rho.bound
    padded, offset = pad_zero_boundary(u_star)
    smoothed = strip_padding(
        smooth_2d(padded, SmoothingParams(C=C, z_levels=opts.smoothing_z_levels)),
        offset,
    )
    value_after = F_rho(smoothed, rho, phi)
    return MaximizerReport(
        u_star=u_star, value=value, iterations=iters, converged=converged,
        smoothing_applied=True, value_after_smoothing=value_after,
        u_smoothed=smoothed, start=start, trace=trace,
    )


@dataclass(frozen=True)
class PhiEstimate:
    r: float
    k: int
    mean: float
    half_width: float
    samples: tuple[float, ...]


def phi_curve(rs, spec: RectangleSpec, reps: int, seed: int,
              cap: int = EXACT_CAP) -> list[PhiEstimate]:
    """Monte Carlo estimates of the scaled coverage at several r values on
    matched samples.

    Each rep draws one Poisson configuration and reads the maximal
    floor(r*sqrt(gamma))-decreasing subset sizes for every r from a single
    incremental flow run, so estimates are coupled across r and thus
    nondecreasing in r rep by rep.
    """
    rs = [float(r) for r in rs]
    if any(r < 0 for r in rs):
        raise ValueError("r must be nonnegative")
    if reps < 1:
        raise ValueError("reps must be positive")
    ks = [int(math.floor(r * math.sqrt(spec.gamma))) for r in rs]
    kmax = max(ks)
    mass = spec.beta * spec.gamma
    samples = np.zeros((reps, len(rs)))
    for rep in range(reps):
        ps = sample_poisson_rectangle(spec, subseed(seed, rep))
        if len(ps) > cap:
            raise CapExceededError(
                f"Poisson draw has {len(ps)} points, exact-method cap is {cap}"
            )
        if kmax >= 1 and len(ps) > 0:
            prof = coverage_profile(ps, kmax, cap=cap)
        else:
            prof = np.zeros(max(kmax, 1), dtype=np.int64)
        for ri, k in enumerate(ks):
            lam = int(prof[k - 1]) if k >= 1 else 0
            samples[rep, ri] = lam / mass
    out = []
    for ri, (r, k) in enumerate(zip(rs, ks)):
        col = samples[:, ri]
        hw = 1.96 * float(col.std(ddof=1)) / math.sqrt(reps) if reps > 1 else 0.0
        out.append(PhiEstimate(r, k, float(col.mean()), hw, tuple(col)))
    return out


def phi_estimate(r: float, spec: RectangleSpec, reps: int, seed: int,
                 cap: int = EXACT_CAP) -> PhiEstimate:
    """Mean and 95% half-width of the scaled maximal coverage at one r."""
    return phi_curve([r], spec, reps, seed, cap=cap)[0]


@dataclass
class LimitCheckResult:
    n: int
    k: int
    distance_raw: float
    distance: float
    shift: float
    report: MaximizerReport


def limit_check(model: DensityModel, n: int, r: float, seed: int,
                grid_m: int = 33, phi: PhiModel | None = None,
                opts: MaximizeOptions | None = None,
                maximizer: MaximizerReport | None = None,
                cap: int = EXACT_CAP) -> LimitCheckResult:
    """L1 distance between the scaled watermelon staircase of one sample and
    the computed maximizer.

    Samples n points from the model, extracts a maximal
    floor(r*sqrt(n))-decreasing subset, scales its staircase surface by
    1/sqrt(n), and reports the L1 distance to the maximizer both raw and
    minimized over an additive shift (no normalization is canonical).
    """
    phi = phi or PhiModel()
    if n > cap:
        raise CapExceededError(f"n={n} exceeds the exact-method cap {cap}")
    rho = rasterize(model, grid_m)
    rep = maximizer if maximizer is not None else maximize(rho, r, phi, opts)
    ps = sample_iid(model, n, seed)
    k = int(math.floor(r * math.sqrt(n)))
    res = max_k_decreasing(ps, k, cap=cap)
    surf = kappa_surface(res.subset)
    scale = 1.0 / math.sqrt(n) if n > 0 else 0.0
    kg = from_kappa(surf, scale, rho.domain)
    raw, best, shift = shift_minimized_l1(kg, rep.u_star)
    return LimitCheckResult(n, k, raw, best, shift, rep)


def limit_trend(model: DensityModel, ns, r: float, seeds, grid_m: int = 33,
                phi: PhiModel | None = None,
                opts: MaximizeOptions | None = None,
                cap: int = EXACT_CAP) -> dict[int, list[LimitCheckResult]]:
    """limit_check over several n and seeds against one shared maximizer."""
    phi = phi or PhiModel()
    rho = rasterize(model, grid_m)
    rep = maximize(rho, r, phi, opts)
    return {
        int(n): [limit_check(model, int(n), r, int(s), grid_m, phi, opts,
                             maximizer=rep, cap=cap)
                 for s in seeds]
        for n in ns
    }
