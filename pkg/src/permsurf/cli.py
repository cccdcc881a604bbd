"""Experiment harness: one subcommand per operation, flat key=value config
files with flag overrides, atomic CSV/JSON/SVG artifacts, and a manifest
that reproduces every run from its master seed.

Exit codes: 0 success, 2 validation error, 3 invariant-check failure.
Outputs are written atomically (temp file + rename) and contain no
timestamps, so a rerun with the same seed is byte-identical; wall-clock
timing goes to `run.log`, which is excluded from that contract.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__, fixtures, svg
from .geometry import (
    SQRT2,
    DensityModel,
    PointSet,
    RectangleSpec,
    read_points_csv,
    sample_iid,
    sample_poisson_rectangle,
    write_points_csv,
)
from .grids import MonotoneGrid, diam, read_grid_csv, write_grid_csv
from .smoothing import SmoothingParams, smooth_2d, smoothing_report
from .tableau import kappa_surface, lds_length, lis_length
from .variational import (
    F_rho,
    MaximizeOptions,
    PhiModel,
    limit_check,
    limit_trend,
    maximize,
    phi_curve,
    rasterize,
    read_density_csv,
    write_density_csv,
)
from .watermelon import max_k_decreasing, verify


class ValidationFailure(ValueError):
    """Bad configuration or inputs (exit code 2)."""


class InvariantFailure(RuntimeError):
    """A computed artifact violated a checked invariant (exit code 3)."""


def atomic_write(path: str, data: str) -> None:
    """Write via a temp file in the same directory and rename into place."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="\n") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def load_config_file(path: str) -> dict[str, str]:
    """Flat key=value lines; blank lines and # comments ignored."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="ascii") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationFailure(f"{path}:{ln}: expected key=value")
            key, val = line.split("=", 1)
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _merge_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> dict:
    """File values fill in only the flags the user left at their defaults."""
    cfg = vars(args).copy()
    cfg.pop("func", None)
    path = cfg.pop("config", None)
    if path:
        file_vals = load_config_file(path)
        defaults = {a.dest: a.default for a in parser._actions}
        for key, raw in file_vals.items():
            if key not in cfg:
                raise ValidationFailure(f"unknown config key {key!r}")
            if cfg[key] == defaults.get(key):
                default = defaults.get(key)
                if isinstance(default, bool):
                    cfg[key] = raw.lower() in ("1", "true", "yes")
                elif isinstance(default, int):
                    cfg[key] = int(raw)
                elif isinstance(default, float):
                    cfg[key] = float(raw)
                else:
                    cfg[key] = raw
    return cfg


def _out_dir(cfg: dict) -> str:
    return cfg.get("out") or os.environ.get("PERMSURF_OUT") or "out"


def _density_model(name: str) -> DensityModel:
    if name == "uniform-square":
        return DensityModel.uniform_square()
    if name == "uniform-diamond":
        return DensityModel.uniform_diamond()
    raise ValidationFailure(f"unknown density {name!r}")


def _write_manifest(outdir: str, command: str, cfg: dict, results: dict,
                    invariants: dict | None = None) -> None:
    manifest = {
        "command": command,
        "config": {k: v for k, v in sorted(cfg.items()) if k != "func"},
        "versions": {
            "permsurf": __version__,
            "python": ".".join(map(str, sys.version_info[:3])),
            "numpy": np.__version__,
        },
        "master_seed": cfg.get("seed"),
        "results": results,
        "invariant_checks": invariants or {},
    }
    atomic_write(os.path.join(outdir, "manifest.json"), _json_dumps(manifest))


def cmd_sample(cfg: dict) -> int:
    outdir = _out_dir(cfg)
    if cfg.get("gamma") is not None or cfg.get("beta") is not None:
        if cfg.get("gamma") is None or cfg.get("beta") is None:
            raise ValidationFailure("--gamma and --beta must be given together")
        spec = RectangleSpec(beta=cfg["beta"], gamma=cfg["gamma"])
        ps = sample_poisson_rectangle(spec, cfg["seed"])
        atomic_write(os.path.join(outdir, "rectangle.svg"),
                     svg.rectangle_diagram_svg(spec.beta, ps))
        results = {"n": len(ps), "mode": "poisson"}
    else:
        model = _density_model(cfg["density"])
        ps = sample_iid(model, cfg["n"], cfg["seed"])
        results = {"n": len(ps), "mode": "iid",
                   "lds_length": lds_length(ps) if len(ps) else 0}
    tmp = os.path.join(outdir, "points.csv")
    os.makedirs(outdir, exist_ok=True)
    write_points_csv(ps, tmp + ".part")
    os.replace(tmp + ".part", tmp)
    checks = {"general_position": True}  # enforced by PointSet construction
    _write_manifest(outdir, "sample", cfg, results, checks)
    return 0


def cmd_watermelon(cfg: dict) -> int:
    outdir = _out_dir(cfg)
    if cfg.get("infile"):
        ps = read_points_csv(cfg["infile"])
    else:
        ps = sample_iid(_density_model(cfg["density"]), cfg["n"], cfg["seed"])
    res = max_k_decreasing(ps, cfg["k"], cap=cfg["cap"])
    ok = verify(res, ps, cfg["k"])
    os.makedirs(outdir, exist_ok=True)
    write_points_csv(ps, os.path.join(outdir, "points.csv"))
    atomic_write(os.path.join(outdir, "watermelon.json"), res.to_json() + "\n")
    atomic_write(os.path.join(outdir, "watermelon.svg"),
                 svg.scatter_with_chains(res, ps))
    _write_manifest(outdir, "watermelon", cfg,
                    {"size": res.size, "certified": res.certified},
                    {"greene_certificate": ok})
    if not ok:
        raise InvariantFailure("watermelon result failed verification")
    return 0


def _parse_probes(raw: list[str]) -> list[tuple[float, float]]:
    out = []
    for item in raw or []:
        parts = item.split(",")
        if len(parts) != 2:
            raise ValidationFailure(f"bad probe {item!r}; expected x,y")
        out.append((float(parts[0]), float(parts[1])))
    return out


def cmd_kappa(cfg: dict) -> int:
    outdir = _out_dir(cfg)
    if cfg.get("infile"):
        ps = read_points_csv(cfg["infile"])
    elif cfg.get("demo"):
        ps = fixtures.kappa_demo_points()
    else:
        ps = sample_iid(_density_model(cfg["density"]), cfg["n"], cfg["seed"])
    surf = kappa_surface(ps)
    probes = _parse_probes(cfg.get("probe"))
    atomic_write(os.path.join(outdir, "staircase.json"), surf.to_json() + "\n")
    atomic_write(os.path.join(outdir, "kappa.svg"),
                 svg.staircase_svg(surf, ps, probes))
    results = {
        "max_level": surf.max_level,
        "probes": {f"{x},{y}": surf.eval(x, y) for x, y in probes},
    }
    checks = {"max_level_equals_lis": surf.max_level == lis_length(ps)}
    _write_manifest(outdir, "kappa", cfg, results, checks)
    if not checks["max_level_equals_lis"]:
        raise InvariantFailure("staircase level count disagrees with LIS")
    return 0


def cmd_smooth(cfg: dict) -> int:
    outdir = _out_dir(cfg)
    if cfg.get("infile"):
        g = read_grid_csv(cfg["infile"])
    else:
        g = fixtures.jump_surface_grid(cfg["grid"])
    params = SmoothingParams(C=cfg["c"], z_levels=cfg["z_levels"])
    ut = smooth_2d(g, params)
    report = smoothing_report(g, ut, params, seed=cfg["seed"])
    os.makedirs(outdir, exist_ok=True)
    write_grid_csv(ut, os.path.join(outdir, "smoothed.csv"))
    atomic_write(os.path.join(outdir, "report.json"), _json_dumps(report))
    atomic_write(os.path.join(outdir, "smoothed.svg"), svg.grid_level_svg(ut))
    ok = (report["max_above_u"] <= 0.0 and report["min_value"] >= 0.0
          and report["monotone_x_min_step"] >= 0.0
          and report["monotone_y_min_step"] >= 0.0
          and report["modulus"]["violations"] == 0)
    _write_manifest(outdir, "smooth", cfg,
                    {"diam_before": diam(g), "diam_after": diam(ut)},
                    {"smoothing_invariants": ok})
    if not ok:
        raise InvariantFailure("smoothing invariants violated; see report.json")
    return 0


def cmd_ffunc(cfg: dict) -> int:
    outdir = _out_dir(cfg)
    phi = PhiModel()
    if cfg.get("infile"):
        u = read_grid_csv(cfg["infile"])
        if not cfg.get("rho_in"):
            raise ValidationFailure("--rho-in is required with --in")
        rho = read_density_csv(cfg["rho_in"])
    else:
        rho, dom = fixtures.diamond_instance(cfg["grid"])
        u = fixtures.linear_ramp(dom)
    value = F_rho(u, rho, phi)
    atomic_write(os.path.join(outdir, "ffunc.json"),
                 _json_dumps({"value": value}))
    checks = {"normalization_bound": value <= 1.0 + 1e-9}
    _write_manifest(outdir, "ffunc", cfg, {"value": value}, checks)
    if not checks["normalization_bound"]:
        raise InvariantFailure("functional exceeded the normalization bound")
    return 0


def cmd_maximize(cfg: dict) -> int:
    outdir = _out_dir(cfg)
    phi = PhiModel()
    if cfg["density"] == "diamond":
        rho, _ = fixtures.diamond_instance(cfg["grid"])
    else:
        rho = rasterize(_density_model(cfg["density"]), cfg["grid"])
    opts = MaximizeOptions(pilot_seed=cfg["seed"],
                           smoothing_z_levels=cfg["z_levels"])
    rep = maximize(rho, cfg["r"], phi, opts)
    os.makedirs(outdir, exist_ok=True)
    write_grid_csv(rep.u_star, os.path.join(outdir, "ustar.csv"))
    write_grid_csv(rep.u_smoothed, os.path.join(outdir, "smoothed.csv"))
    trace = "iteration,value,step,residual\n" + "\n".join(
        f"{it},{val:.17g},{st:.17g},{res:.17g}" for it, val, st, res in rep.trace
    ) + "\n"
    atomic_write(os.path.join(outdir, "trace.csv"), trace)
    atomic_write(os.path.join(outdir, "report.json"),
                 _json_dumps(rep.to_json_dict()))
    checks = {
        "value_bound": rep.value <= 1.0 + 1e-9,
        "diam_not_increased":
            diam(rep.u_smoothed) <= diam(rep.u_star) + 1e-12,
    }
    _write_manifest(outdir, "maximize", cfg, rep.to_json_dict(), checks)
    if not all(checks.values()):
        raise InvariantFailure(f"maximizer invariants violated: {checks}")
    return 0


def cmd_phi(cfg: dict) -> int:
    outdir = _out_dir(cfg)
    rs = [float(t) for t in cfg["r_list"].split(",")] if cfg.get("r_list") \
        else [cfg["r"]]
    spec = RectangleSpec(beta=cfg["beta"], gamma=cfg["gamma"])
    ests = phi_curve(rs, spec, cfg["reps"], cfg["seed"], cap=cfg["cap"])
    phi = PhiModel()
    rows = [{
        "r": e.r, "k": e.k, "mean": e.mean, "half_width": e.half_width,
        "conjectured_phi": float(phi.phi(e.r)),
        "conjecture_dependent": True,
    } for e in ests]
    atomic_write(os.path.join(outdir, "phi.json"), _json_dumps({"estimates": rows}))
    mono = all(a.mean <= b.mean + 1e-12 for a, b in zip(ests, ests[1:]))
    _write_manifest(outdir, "phi", cfg,
                    {"estimates": rows}, {"nondecreasing_in_r": mono})
    if not mono:
        raise InvariantFailure("matched-seed estimates decreased in r")
    return 0


def cmd_limitcheck(cfg: dict) -> int:
    outdir = _out_dir(cfg)
    model = _density_model(cfg["density"])
    seeds = list(range(cfg["seed"], cfg["seed"] + cfg["reps"]))
    if cfg["reps"] == 1:
        res = [limit_check(model, cfg["n"], cfg["r"], cfg["seed"],
                           grid_m=cfg["grid"])]
    else:
        res = limit_trend(model, [cfg["n"]], cfg["r"], seeds,
                          grid_m=cfg["grid"])[cfg["n"]]
    rows = [{"n": r.n, "k": r.k, "seed": s, "distance_raw": r.distance_raw,
             "distance": r.distance, "shift": r.shift}
            for s, r in zip(seeds, res)]
    atomic_write(os.path.join(outdir, "limitcheck.json"),
                 _json_dumps({"runs": rows,
                              "median_distance": float(np.median([r.distance for r in res]))}))
    checks = {"maximizer_value_bound": res[0].report.value <= 1.0 + 1e-9}
    _write_manifest(outdir, "limitcheck", cfg,
                    {"median_distance": float(np.median([r.distance for r in res]))},
                    checks)
    if not all(checks.values()):
        raise InvariantFailure("limit check invariants violated")
    return 0


def cmd_counterexample(cfg: dict) -> int:
    outdir = _out_dir(cfg)
    g = fixtures.jump_surface_grid(cfg["grid"])
    os.makedirs(outdir, exist_ok=True)
    write_grid_csv(g, os.path.join(outdir, "counterexample.csv"))
    atomic_write(os.path.join(outdir, "counterexample.svg"),
                 svg.grid_level_svg(g))
    checks = {"monotone": True}  # enforced by MonotoneGrid construction
    _write_manifest(outdir, "counterexample", cfg,
                    {"diam": diam(g)}, checks)
    return 0


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="permsurf",
        description="Monotone-subsequence surfaces of locally uniform "
                    "random permutations",
    )
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", type=str, default=None,
                       help="output directory (default $PERMSURF_OUT or ./out)")
        p.add_argument("--config", type=str, default=None,
                       help="flat key=value config file; flags override it")

    p = sub.add_parser("sample", help="draw a random point configuration")
    common(p)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--density", default="uniform-square")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("watermelon", help="maximal k-decreasing subset")
    common(p)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--density", default="uniform-square")
    p.add_argument("--in", dest="infile", type=str, default=None)
    p.add_argument("--cap", type=int, default=5000)
    p.set_defaults(func=cmd_watermelon)

    p = sub.add_parser("kappa", help="staircase surface of a configuration")
    common(p)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--density", default="uniform-square")
    p.add_argument("--in", dest="infile", type=str, default=None)
    p.add_argument("--demo", action="store_true",
                   help="use the built-in six-point demo configuration")
    p.add_argument("--probe", action="append", default=None,
                   metavar="X,Y", help="label the surface value at a point")
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("smooth", help="continuity-smooth a monotone grid")
    common(p)
    p.add_argument("--in", dest="infile", type=str, default=None)
    p.add_argument("--grid", type=int, default=201)
    p.add_argument("--C", dest="c", type=float, default=1.0)
    p.add_argument("--z-levels", type=int, default=64)
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("ffunc", help="evaluate the variational functional")
    common(p)
    p.add_argument("--in", dest="infile", type=str, default=None)
    p.add_argument("--rho-in", dest="rho_in", type=str, default=None)
    p.add_argument("--grid", type=int, default=100)
    p.set_defaults(func=cmd_ffunc)

    p = sub.add_parser("maximize", help="maximize the functional over U_r")
    common(p)
    p.add_argument("--density", default="diamond",
                   help="diamond, uniform-square or uniform-diamond")
    p.add_argument("--grid", type=int, default=80)
    p.add_argument("--r", type=float, default=SQRT2)
    p.add_argument("--z-levels", type=int, default=64)
    p.set_defaults(func=cmd_maximize)

    p = sub.add_parser("phi", help="Monte Carlo scaled-coverage estimates")
    common(p)
    p.add_argument("--r", type=float, default=SQRT2)
    p.add_argument("--r-list", type=str, default=None,
                   help="comma-separated r values on matched seeds")
    p.add_argument("--gamma", type=float, default=400.0)
    p.add_argument("--beta", type=float, default=10.0)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--cap", type=int, default=5000)
    p.set_defaults(func=cmd_phi)

    p = sub.add_parser("limitcheck",
                       help="distance between a scaled staircase and the maximizer")
    common(p)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--r", type=float, default=SQRT2)
    p.add_argument("--density", default="uniform-square")
    p.add_argument("--grid", type=int, default=33)
    p.add_argument("--reps", type=int, default=1)
    p.set_defaults(func=cmd_limitcheck)

    p = sub.add_parser("counterexample",
                       help="emit the jump-surface fixture grid and level plot")
    common(p)
    p.add_argument("--grid", type=int, default=201)
    p.set_defaults(func=cmd_counterexample)

    return top


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.time()
    try:
        cfg = _merge_config(args, parser)
        sub = cfg.pop("subcommand")
        rc = args.func(cfg)
    except (ValidationFailure, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InvariantFailure as exc:
        print(f"invariant check failed: {exc}", file=sys.stderr)
        return 3
    outdir = _out_dir(cfg)
    with open(os.path.join(outdir, "run.log"), "w", encoding="ascii") as fh:
        fh.write(f"{sub}: wall-clock {time.time() - t0:.3f} s\n")
    return rc


if __name__ == "__main__":
    sys.exit(main())
