"""Batch command-line front end.

Every subcommand reads a JSON configuration, runs one task, and writes its
results, a plot-data CSV and ``manifest.json`` into the output directory.
Artifacts are assembled in memory and written only after the task
succeeds, so a failed run leaves no partial output.

Exit codes: 0 success, 2 validation error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import (
    AsymptoticFit,
    CornerPolicy,
    corner_constant,
    sweep_alpha,
    sweep_beta,
    transfer_check,
)
from .cache import IoError, MatrixCache, cache_gc, default_cache_dir, using_cache
from .config import SUBCOMMANDS, ExperimentConfig, Task
from .errors import ConfigInvalid, ObliqueError, SolverFailed
from .spectral_solver import (
    EigenResult,
    SolverOptions,
    solve_dirac,
    solve_h_alpha,
    solve_q_beta,
)
from .variational import Chart, TrialProfile, c_theta, rayleigh_quotient

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3


def _csv(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue().encode()


def _json(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode()


def _r(x) -> str:
    return repr(float(x))


def _options(cfg: ExperimentConfig) -> SolverOptions:
    return SolverOptions(bracket_rel=cfg.params.bracket_rel, residual_tol=cfg.params.residual_tol)


# ---------------------------------------------------------------------------
# tasks; each returns {file name: bytes}


def _task_eig(cfg, threads):
    p, mesh, opts = cfg.params, cfg.build_mesh(), _options(cfg)
    if p.operator == "ObliqueH":
        res = solve_h_alpha(mesh, p.alpha, p.n, opts, density=True)
    elif p.operator == "DeltaQ":
        res = solve_q_beta(mesh, p.beta, p.n, opts, density=True)
    else:
        res = solve_dirac(mesh, p.alpha, p.c, p.n, opts)
    files = {"eig.csv": _csv(EigenResult.CSV_HEADER, [res.csv_row()]),
             "eig.json": _json(res.to_dict(include_density=False))}
    if res.density is not None:
        s = np.cumsum(mesh.weights) - 0.5 * mesh.weights
        files["plot_density.csv"] = _csv(("x", "y"), [[_r(a), _r(b)] for a, b in zip(s, res.density)])
    return files


def _fit_files(fit: AsymptoticFit, kind: str):
    rows = fit.csv_rows()
    x = [_r(1.0 / (c * c) if kind == "beta" else c * c) for c in fit.grid]
    return {
        f"sweep_{kind}.csv": _csv(AsymptoticFit.CSV_HEADER, rows),
        f"fit_{kind}.json": _json(fit.report()),
        f"plot_sweep_{kind}.csv": _csv(("x", "y"), [[a, r[2]] for a, r in zip(x, rows)]),
    }


def _task_sweep_alpha(cfg, threads):
    fit = sweep_alpha(cfg.build_mesh(), cfg.params.n, cfg.params.alpha_grid, _options(cfg), threads)
    return _fit_files(fit, "alpha")


def _task_sweep_beta(cfg, threads):
    fit = sweep_beta(cfg.build_mesh(), cfg.params.n, cfg.params.beta_grid, _options(cfg), threads)
    return _fit_files(fit, "beta")


def _task_corner(cfg, threads):
    p = cfg.params
    kw = {"tol": p.corner_tol}
    if p.lengths is not None:
        kw["lengths"] = tuple(float(v) for v in p.lengths)
    cc = corner_constant(p.theta, CornerPolicy(**kw), _options(cfg))
    rows = [[_r(L), N, _r(b)] for L, N, b in cc.table]
    return {
        "corner.csv": _csv(("L", "N", "b"), rows),
        "corner.json": _json(cc.to_dict()),
        "plot_corner.csv": _csv(("x", "y"), [[r[0], r[2]] for r in rows]),
    }


def _task_dirac(cfg, threads):
    p, mesh, opts = cfg.params, cfg.build_mesh(), _options(cfg)
    ref = solve_h_alpha(mesh, p.alpha, p.n, opts).eigenvalue
    rows, gaps = [], []
    for c in p.c_grid:
        lam = solve_dirac(mesh, p.alpha, c, p.n, opts).eigenvalue
        gap = abs(lam - ref)
        ratio = gaps[-1] / gap if gaps else float("nan")
        gaps.append(gap)
        rows.append([_r(c), _r(lam), _r(ref), _r(gap), _r(ratio)])
    return {
        "dirac.csv": _csv(("c", "shifted_eigenvalue", "h_alpha_eigenvalue", "gap", "ratio"), rows),
        "plot_dirac.csv": _csv(("x", "y"), [[_r(1.0 / c), r[3]] for c, r in zip(p.c_grid, rows)]),
    }


def _task_variational(cfg, threads):
    p = cfg.params
    if p.chart == "circle":
        chart = Chart.circle(cfg.curve.radius, p.bump_A, p.bump_B)
    else:
        chart = Chart.flat(p.bump_A, p.bump_B)
    rng = np.random.default_rng(cfg.seed)
    profiles = [TrialProfile(p.bump_A, p.bump_B, p.theta_scale, chart)]
    for _ in range(p.random_draws):
        th = float(rng.uniform(max(1.0 / abs(p.beta), 1e-3), 1.0 - 1e-3))
        profiles.append(TrialProfile(p.bump_A, p.bump_B, th, chart))
    rows = []
    for prof in profiles:
        q = rayleigh_quotient(prof, p.beta)
        ct = c_theta(prof)
        bound = ct.value * p.beta ** 2
        rows.append([_r(prof.theta_scale), _r(p.beta), _r(q), _r(ct.value), _r(bound),
                     _r(ct.theta_star), int(q <= bound)])
    header = ("theta_scale", "beta", "rayleigh_quotient", "c_theta", "c_theta_beta2",
              "theta_star", "bound_holds")
    return {
        "variational.csv": _csv(header, rows),
        "plot_variational.csv": _csv(("x", "y"), [[r[0], r[2]] for r in rows]),
    }


def _task_transfer(cfg, threads):
    p = cfg.params
    rep = transfer_check(cfg.build_mesh(), p.n, p.a, p.b, p.alpha_grid, _options(cfg), threads)
    header = ("alpha", "eigenvalue", "lower", "upper", "margin_lower", "margin_upper", "holds")
    rows = [[_r(r.alpha), _r(r.eigenvalue), _r(r.lower), _r(r.upper), _r(r.margin_lower),
             _r(r.margin_upper), int(r.holds)] for r in rep.rows]
    return {
        "transfer.csv": _csv(header, rows),
        "transfer.json": _json(rep.to_dict()),
        "plot_transfer.csv": _csv(("x", "y"), [[r[0], r[1]] for r in rows]),
    }


TASKS = {
    Task.EIG: _task_eig,
    Task.SWEEP_ALPHA: _task_sweep_alpha,
    Task.SWEEP_BETA: _task_sweep_beta,
    Task.CORNER_CONSTANT: _task_corner,
    Task.DIRAC_LIMIT: _task_dirac,
    Task.VARIATIONAL: _task_variational,
    Task.TRANSFER_CHECK: _task_transfer,
}


def _filter_formats(files: dict, formats) -> dict:
    keep = {}
    for name, data in files.items():
        ext = name.rsplit(".", 1)[-1]
        if ext in formats or name.startswith("plot_"):
            keep[name] = data
    return keep


def run(cfg: ExperimentConfig, out_dir=None, threads: int = 1, use_cache: bool | None = None,
        command: str = "") -> Path:
    """Run one configured task and write its artifacts.

    Raises
    ------
    ConfigInvalid
        Before any output is written.
    SolverFailed
        Wrapping the numerical error; nothing is written.
    """
    cfg.validate()
    out = Path(out_dir or cfg.output.directory)
    cache_on = cfg.output.cache if use_cache is None else use_cache
    start = time.perf_counter()
    try:
        cache = MatrixCache(default_cache_dir()) if cache_on else None
        with using_cache(cache):
            files = TASKS[cfg.task](cfg, threads)
    except ConfigInvalid:
        raise
    except (ObliqueError, np.linalg.LinAlgError, ArithmeticError) as exc:
        raise SolverFailed(exc) from exc
    wall = time.perf_counter() - start
    files = _filter_formats(files, cfg.output.formats)
    files["config.json"] = (cfg.to_json() + "\n").encode()
    manifest = {
        "library": "oblique",
        "version": __version__,
        "task": cfg.task.value,
        "command": command,
        "config_sha256": cfg.sha256(),
        "seed": cfg.seed,
        "wall_time_s": wall,
        "files": {
            name: {"sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)}
            for name, data in sorted(files.items())
        },
    }
    files["manifest.json"] = _json(manifest)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, data in files.items():
            tmp = out / f".{name}.tmp"
            tmp.write_bytes(data)
            os.replace(tmp, out / name)
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return out


# ---------------------------------------------------------------------------
# argument parsing


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oblique", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"oblique {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=f"run a {SUBCOMMANDS[name].value} experiment")
        sp.add_argument("--config", required=True, help="JSON experiment configuration")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--no-cache", action="store_true", help="disable the matrix cache")
    gc = sub.add_parser("cache-gc", help="evict least-recently-used cache entries")
    gc.add_argument("--dir", help="cache directory (default: $OBLIQUE_CACHE_DIR or ~/.cache/oblique)")
    gc.add_argument("--max-bytes", type=int, required=True, help="size budget in bytes")
    return ap


def _error(kind: str, exc: Exception) -> None:
    payload = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    cause = getattr(exc, "cause", None)
    if cause is not None:
        payload["cause"] = {"type": type(cause).__name__, "message": str(cause)}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    if args.command == "cache-gc":
        try:
            freed = cache_gc(args.dir or default_cache_dir(), args.max_bytes)
        except IoError as exc:
            _error("io", exc)
            return EXIT_INVALID
        print(json.dumps({"freed_bytes": freed}))
        return EXIT_OK
    try:
        if args.threads < 1:
            raise ConfigInvalid("--threads must be >= 1")
        cfg = ExperimentConfig.load(args.config)
        if cfg.task is not SUBCOMMANDS[args.command]:
            raise ConfigInvalid(
                f"config task {cfg.task.value} does not match subcommand {args.command}"
            )
        if args.seed is not None:
            cfg.seed = args.seed
        cfg.validate()
    except ConfigInvalid as exc:
        _error("validation", exc)
        return EXIT_INVALID
    try:
        out = run(cfg, args.out, args.threads, False if args.no_cache else None, args.command)
    except SolverFailed as exc:
        _error("solver", exc)
        return EXIT_SOLVER
    except IoError as exc:
        _error("io", exc)
        return EXIT_SOLVER
    print(json.dumps({"output": str(out)}))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
