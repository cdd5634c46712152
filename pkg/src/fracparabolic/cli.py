"""Command line entry point: ``fracparabolic <mode> --config file.toml``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, presets
from .config import MODES, load
from .errors import (
    ConfigError,
    HypothesisViolation,
    InsufficientResolution,
    StabilityError,
    SweepAborted,
)
from .fractional_time import (
    History,
    TimeGrid,
    caputo_eval_series,
    caputo_power_exact,
    solve_fode_explicit,
    solve_fode_l1,
)
from .special import mittag_leffler, mittag_leffler_deriv
from .nonlocal_spatial import Ellipticity, SpaceGrid
from .pde_solver import Field, ProblemSpec, SpaceTimeGrid, save_checkpoint, solve
from .regularity import alpha_sweep, check_hypotheses, fit_holder

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
# the grid or data asked for cannot support the run
_CONFIG_ERRORS = (ConfigError, StabilityError, InsufficientResolution, HypothesisViolation)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, allow_nan=False)
        fh.write("\n")


def _ellipticity(cfg):
    m = cfg["model"]
    return Ellipticity(m["lambda"], m["Lambda"], m["sigma"])


def _problem(cfg, seed):
    m, g, d = cfg["model"], cfg["grid"], cfg["data"]
    params = {
        "constant": {"value": d["value"]},
        "bump": {"amplitude": d["amplitude"], "width": d["width"]},
        "half_negative": {"amplitude": d["amplitude"], "width": d["width"]},
        "planted_exponent": {"kappa": d["kappa"]},
    }[d["preset"]]
    pre = presets.get(d["preset"], **params)
    space = SpaceGrid(g["x_min"], g["x_max"], g["n_points"], pre.exterior)
    initial = pre.initial
    if d["noise"] > 0.0:
        noise = d["noise"] * np.random.default_rng(seed).uniform(-1.0, 1.0, space.n_points)
        base = pre.initial(space.points) + noise

        def initial(x, _base=base):
            return _base

    forcing_value = d["forcing"]

    def forcing(x, t):
        return np.full(np.shape(x), forcing_value)

    spec = ProblemSpec(
        _ellipticity(cfg),
        m["alpha"],
        m["operator"],
        forcing=forcing,
        initial=initial,
    )
    return spec, space


def _grid(cfg, spec, space):
    g = cfg["grid"]
    if g["n_steps"] > 0:
        time_grid = TimeGrid.spanning(g["t_start"], g["t_end"], g["n_steps"])
        return SpaceTimeGrid(space, time_grid, spec.alpha, spec.ell.sigma)
    return SpaceTimeGrid.stable(space, g["t_start"], g["t_end"], spec.alpha, spec.ell, g["c_stab"])


def run_ml(cfg, out, seed):
    a = cfg["model"]["alpha"]
    p = cfg["ml"]
    t = np.linspace(p["t_min"], p["t_max"], p["n_points"])
    rows = [(float(v), mittag_leffler(a, v), mittag_leffler_deriv(a, v)) for v in t]
    _write_csv(out / "ml.csv", ["t", "E", "E_prime"], rows)
    return ["ml.csv"]


def run_caputo(cfg, out, seed):
    a = cfg["model"]["alpha"]
    p = cfg["caputo"]
    grid = TimeGrid.spanning(0.0, p["t_end"], p["n_steps"])
    h = History.from_function(grid, lambda t: t ** p["beta"])
    approx = caputo_eval_series(h, a)
    exact = caputo_power_exact(grid.points, 0.0, p["beta"], a)
    rows = [(t, v, e, abs(v - e)) for t, v, e in zip(grid.points, approx, exact)]
    _write_csv(out / "caputo.csv", ["t", "l1", "exact", "abs_error"], rows)
    return ["caputo.csv"]


def run_fode(cfg, out, seed):
    a, c1 = cfg["model"]["alpha"], cfg["model"]["C1"]
    p = cfg["fode"]
    grid = TimeGrid.spanning(0.0, p["t_end"], p["n_steps"])
    f = History.from_function(grid, lambda t: np.full(t.shape, p["forcing"]))
    ex = solve_fode_explicit(a, c1, f)
    l1 = solve_fode_l1(a, c1, f)
    diff = np.abs(ex.values - l1.values)
    rows = zip(grid.points, ex.values, l1.values, diff)
    _write_csv(out / "fode.csv", ["t", "explicit", "l1", "abs_diff"], rows)
    _write_json(out / "fode.json", {"max_abs_diff": float(diff.max())})
    return ["fode.csv", "fode.json"]


def run_solve(cfg, out, seed):
    spec, space = _problem(cfg, seed)
    grid = _grid(cfg, spec, space)
    u = solve(spec, grid, cfg["grid"]["c_stab"])
    save_checkpoint(u, out / "field.bin")
    _write_csv(out / "final.csv", ["x", "u"], zip(u.x, u.values[-1]))
    m = cfg["model"]
    summary = {
        "n_steps": grid.time.n_steps,
        "dt": grid.time.dt,
        "min": float(u.values.min()),
        "max": float(u.values.max()),
        "hypothesis_violations": check_hypotheses(spec, grid, m["epsilon0"], m["nu"]),
    }
    _write_json(out / "solve.json", summary)
    return ["field.bin", "final.csv", "solve.json"]


def _planted_field(cfg):
    g, h = cfg["grid"], cfg["holder"]
    m = cfg["model"]
    space = SpaceGrid(g["x_min"], g["x_max"], g["n_points"])
    n_steps = g["n_steps"] or 1024
    grid = SpaceTimeGrid(space, TimeGrid.spanning(g["t_start"], g["t_end"], n_steps), m["alpha"], m["sigma"])
    x = space.points[None, :]
    t = grid.time.points[:, None]
    if h["time_kappa"] > 0.0:
        values = np.abs(t - h["t0"]) ** h["time_kappa"] + 0.0 * x
    else:
        values = np.abs(x - h["x0"]) ** cfg["data"]["kappa"] + 0.0 * t
    return Field(grid, values)


def run_holder(cfg, out, seed):
    h = cfg["holder"]
    if h["source"] == "planted":
        u = _planted_field(cfg)
    else:
        spec, space = _problem(cfg, seed)
        u = solve(spec, _grid(cfg, spec, space), cfg["grid"]["c_stab"])
    report = fit_holder(u, (h["x0"], h["t0"]), h["r"], h["depth"], h["ratio"])
    _write_json(out / "report.json", asdict(report))
    (out / "report.csv").write_text(report.to_csv(), encoding="utf-8", newline="")
    return ["report.json", "report.csv"]


def _report_name(a):
    return f"report_alpha_{a!r}.json"


def run_sweep(cfg, out, seed):
    h = cfg["holder"]
    spec, space = _problem(cfg, seed)
    g = cfg["grid"]
    window = SpaceTimeGrid(space, TimeGrid.spanning(g["t_start"], g["t_end"], 1), spec.alpha, spec.ell.sigma)
    alphas = cfg["sweep"]["alphas"]
    try:
        result = alpha_sweep(spec, alphas, window, (h["x0"], h["t0"]), h["r"], h["depth"], h["ratio"], g["c_stab"])
    except SweepAborted as exc:
        files = []
        for rep in exc.partial:
            _write_json(out / _report_name(rep.alpha), asdict(rep))
            files.append(_report_name(rep.alpha))
        exc.files = files
        raise
    files = []
    for rep in result.reports:
        _write_json(out / _report_name(rep.alpha), asdict(rep))
        files.append(_report_name(rep.alpha))
    _write_json(out / "summary.json", result.summary)
    return files + ["summary.json"]


RUNNERS = {
    "ml": run_ml,
    "caputo": run_caputo,
    "fode": run_fode,
    "solve": run_solve,
    "holder": run_holder,
    "sweep": run_sweep,
}


def _fail(code, kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.exit(_fail(EXIT_CONFIG, "usage", message))


def main(argv=None):
    parser = _Parser(prog="fracparabolic", description=__doc__)
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True, type=Path)
    parser.add_argument("--out", type=Path, default=Path("."))
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        cfg = load(args.config)
        if cfg["mode"] is not None and cfg["mode"] != args.mode:
            raise ConfigError(f"config declares mode {cfg['mode']!r} but {args.mode!r} was requested")
        seed = cfg["seed"] if args.seed is None else args.seed
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        # the echoed config must reproduce the run on its own
        cfg["seed"] = seed
        cfg["mode"] = args.mode
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))

    args.out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    status = EXIT_OK
    error = None
    try:
        files = RUNNERS[args.mode](cfg, args.out, seed)
    except _CONFIG_ERRORS as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except SweepAborted as exc:
        files = getattr(exc, "files", [])
        error = str(exc)
        status = EXIT_CONFIG if isinstance(exc.cause, _CONFIG_ERRORS) else EXIT_NUMERICAL
    except (ArithmeticError, OverflowError) as exc:
        return _fail(EXIT_NUMERICAL, "numerical", f"{type(exc).__name__}: {exc}")

    manifest = {
        "mode": args.mode,
        "version": __version__,
        "seed": seed,
        "config": _json_safe(cfg),
        "files": files,
        "wall_time_s": time.perf_counter() - start,
    }
    if error is not None:
        manifest["error"] = error
    _write_json(args.out / "manifest.json", manifest)
    if status != EXIT_OK:
        return _fail(status, "config" if status == EXIT_CONFIG else "numerical", error)
    return EXIT_OK


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


if __name__ == "__main__":
    sys.exit(main())
