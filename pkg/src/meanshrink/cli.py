"""Command-line entry point.

Exit codes: 0 on success, 1 when a run fails, 2 for configuration or input
validation errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import estimators as est_mod
from . import io as mio
from .model import ErrorDist
from .quadform import estimate_q_from_sample, make_q
from .risk import SWEEP_RANGES, Design, _prepare, rho_sweep, run_epr, run_monte_carlo
from .ustats import POLICIES

log = logging.getLogger("meanshrink")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

DESIGN_KEYS = {
    "p", "n", "sigma", "rho", "sigma_path", "shuffle_sigma", "mu", "tau", "c", "mu_path",
    "redraw_mu", "errors", "df", "loss_q", "q_input",
}
SIMULATE_KEYS = {"design", "cells", "estimators", "replications", "seed", "workers", "policy", "output"}
SWEEP_KEYS = SIMULATE_KEYS - {"cells"} | {"sweep"}


class ConfigError(ValueError):
    """Invalid configuration or command-line input."""


# ---------------------------------------------------------------------------
# config parsing


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _check_keys(block, allowed, where):
    unknown = sorted(set(block) - allowed)
    if unknown:
        raise ConfigError(f"unknown field(s) in {where}: {', '.join(unknown)}")


def _int(value, name, lo=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if lo is not None and value < lo:
        raise ConfigError(f"{name} must be >= {lo}, got {value}")
    return value


def _resolve(base, path):
    p = Path(path)
    return p if p.is_absolute() else Path(base) / p


def _load_vector(path):
    try:
        return np.loadtxt(path, delimiter=",", comments="#", ndmin=1).reshape(-1)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read vector from {path}: {exc}") from None


def _load_matrix(path):
    try:
        return np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read matrix from {path}: {exc}") from None


def parse_design(block, base_dir=".", where="design"):
    """Turn a flat JSON design block into a validated :class:`Design`."""
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be an object")
    _check_keys(block, DESIGN_KEYS, where)
    for key in ("p", "n"):
        if key not in block:
            raise ConfigError(f"{where}.{key} is required")
    kw = {
        "p": _int(block["p"], f"{where}.p", 1),
        "n": _int(block["n"], f"{where}.n", 1),
    }
    try:
        kw["errors"] = ErrorDist(block.get("errors", "normal"), block.get("df"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}.errors: {exc}") from None
    for key in ("sigma", "rho", "mu", "tau", "c", "loss_q", "q_input", "redraw_mu", "shuffle_sigma"):
        if key in block:
            kw[key] = block[key]
    if "sigma_path" in block:
        kw["sigma"] = "custom"
        kw["sigma_matrix"] = _load_matrix(_resolve(base_dir, block["sigma_path"]))
    if "mu_path" in block:
        kw["mu"] = "custom"
        kw["mu_values"] = _load_vector(_resolve(base_dir, block["mu_path"]))
    try:
        design = Design(**kw)
        # build once so covariance/mean errors surface as config errors
        _prepare(design, [], 0, "raw")
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    return design


def _common(cfg, args, keys):
    _check_keys(cfg, keys, "config")
    names = cfg.get("estimators", list(est_mod.DEFAULT_ORDER))
    if not isinstance(names, list):
        raise ConfigError("estimators must be a list of names")
    try:
        for name in names:
            est_mod.get(name)
    except ValueError as exc:
        raise ConfigError(f"estimators: {exc}") from None
    if "replications" not in cfg:
        raise ConfigError("replications is required")
    R = _int(cfg["replications"], "replications", 1)
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if seed is None:
        raise ConfigError("seed is required (config 'seed' or --seed)")
    seed = _int(seed, "seed", 0)
    if seed >= 2**64:
        raise ConfigError("seed must fit in 64 bits")
    workers = args.workers if args.workers is not None else cfg.get("workers", 1)
    workers = _int(workers, "workers", 1)
    policy = cfg.get("policy", "raw")
    if policy not in POLICIES:
        raise ConfigError(f"policy must be one of {POLICIES}, got {policy!r}")
    out = cfg.get("output", {}) or {}
    if not isinstance(out, dict):
        raise ConfigError("output must be an object with 'path' and/or 'format'")
    _check_keys(out, {"path", "format"}, "output")
    path = args.output or out.get("path")
    fmt = args.format or out.get("format", "csv")
    if fmt not in ("csv", "text"):
        raise ConfigError(f"output.format must be 'csv' or 'text', got {fmt!r}")
    return names, R, seed, workers, policy, path, fmt


def parse_grid(spec):
    if isinstance(spec, list):
        return [float(g) for g in spec]
    if isinstance(spec, dict) and {"start", "stop", "step"} <= set(spec):
        start, stop, step = (float(spec[k]) for k in ("start", "stop", "step"))
        if step <= 0:
            raise ConfigError("sweep.grid.step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(max(count, 0))]
    raise ConfigError("sweep.grid must be a list or {start, stop, step}")


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        log.info("wrote %s", path)


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args):
    cfg = load_config(args.config)
    base = Path(args.config).parent
    names, R, seed, workers, policy, path, fmt = _common(cfg, args, SIMULATE_KEYS)
    if "design" not in cfg:
        raise ConfigError("design block is required")
    cells = cfg.get("cells") or [{}]
    if not isinstance(cells, list):
        raise ConfigError("cells must be a list of design overrides")
    designs = [
        parse_design({**cfg["design"], **cell}, base, f"cells[{i}]" if cfg.get("cells") else "design")
        for i, cell in enumerate(cells)
    ]
    reports = []
    for i, design in enumerate(designs):
        log.info("cell %d/%d: %s", i + 1, len(designs), design.descriptor())
        reports.append(run_monte_carlo(design, names, R, seed, workers, policy))
    _emit(mio.render_report(reports, fmt), path)
    return EXIT_OK


def cmd_sweep(args):
    cfg = load_config(args.config)
    base = Path(args.config).parent
    names, R, seed, workers, policy, path, fmt = _common(cfg, args, SWEEP_KEYS)
    sweep = cfg.get("sweep")
    if not isinstance(sweep, dict):
        raise ConfigError("sweep block with 'family' and 'grid' is required")
    _check_keys(sweep, {"family", "grid"}, "sweep")
    family = sweep.get("family")
    if family not in SWEEP_RANGES:
        raise ConfigError(f"sweep.family must be one of {tuple(SWEEP_RANGES)}, got {family!r}")
    grid = parse_grid(sweep.get("grid"))
    if not grid:
        raise ConfigError("sweep.grid is empty")
    lo, hi = SWEEP_RANGES[family]
    bad = [g for g in grid if not lo - 1e-12 <= g <= hi + 1e-12]
    if bad:
        raise ConfigError(f"sweep.grid values {bad} outside [{lo:g}, {hi:g}] for {family}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("sweep.grid must be strictly increasing")
    block = dict(cfg.get("design") or {})
    block.setdefault("sigma", family)
    block.setdefault("rho", grid[0])
    design = parse_design(block, base)
    report = rho_sweep(design, family, grid, names, R, seed, workers, policy)
    _emit(mio.render_report(report, fmt), path)
    return EXIT_OK


def _read_dataset(args):
    try:
        return mio.read_matrix_csv(args.data, delimiter=args.delimiter, header=not args.no_header,
                                   label_column=not args.no_labels, orientation=args.orientation)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.data}: {exc.strerror}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _parse_q(spec, ds):
    kind, _, path = spec.partition(":")
    if kind == "identity" and not path:
        return make_q("identity", ds.p)
    if kind == "estimated-diag" and not path:
        return "estimated"
    if kind in ("diagonal", "dense") and path:
        values = _load_vector(path) if kind == "diagonal" else _load_matrix(path)
        try:
            return make_q(kind, ds.p, values)
        except ValueError as exc:
            raise ConfigError(f"--q: {exc}") from None
    raise ConfigError(f"--q must be identity, estimated-diag, diagonal:<csv> or dense:<csv>; got {spec!r}")


def cmd_estimate(args):
    ds = _read_dataset(args)
    try:
        est = est_mod.get(args.estimator)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if est.needs_truth:
        raise ConfigError(f"estimator {est.name!r} needs the true mean and cannot run on data")
    Q = _parse_q(args.q, ds)
    if Q == "estimated":
        # estimator precondition: needs n >= 2 and positive variances
        Q = estimate_q_from_sample(ds.values)
    out = est_mod.run(est.name, ds.values, Q, policy=args.policy)
    meta = {"estimator": est.name, "q": args.q, "n": ds.n, "p": ds.p, "seed": args.seed,
            "source": ds.source}
    if out.coefficients is not None:
        c = out.coefficients
        meta.update(alpha=repr(c.alpha), beta=repr(c.beta), policy=c.policy, degenerate=c.degenerate)
    for k, v in out.diagnostics.items():
        if k != "degenerate" or out.coefficients is None:
            meta[k] = repr(v) if isinstance(v, float) else v
    _emit(mio.render_estimate(ds.col_labels, out.estimate, meta), args.output)
    return EXIT_OK


def _int_list(text, name):
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{name} must be a comma-separated list of integers, got {text!r}") from None
    if not vals:
        raise ConfigError(f"{name} is empty")
    return vals


def cmd_epr(args):
    ds = _read_dataset(args)
    sizes = _int_list(args.train_sizes, "--train-sizes")
    names = [s.strip() for s in args.estimators.split(",") if s.strip()]
    try:
        for name in names:
            est_mod.get(name)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.reps < 1:
        raise ConfigError(f"--reps must be >= 1, got {args.reps}")
    bad = [s for s in sizes if not 1 <= s < ds.n]
    if bad:
        raise ConfigError(f"--train-sizes {bad} must lie in [1, {ds.n - 1}] for {ds.n} samples")
    try:
        if args.genes is not None:
            ds = mio.select_genes(ds, args.genes)
        if not args.no_standardize:
            ds = mio.standardize_arrays(ds)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    report = run_epr(ds.values, sizes, names, args.reps, args.seed, args.workers, args.policy)
    report.meta.update(source=ds.source, transforms=" | ".join(ds.transforms))
    _emit(mio.render_report(report, args.format), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_run_flags(sp, seed_required=False):
    sp.add_argument("--seed", type=int, default=None, required=seed_required,
                    help="master seed (overrides the config)")
    sp.add_argument("--workers", type=int, default=None, help="worker processes (default 1)")
    sp.add_argument("--output", "-o", default=None, help="output path ('-' for stdout)")
    sp.add_argument("--format", choices=("csv", "text"), default=None)


def _add_data_flags(sp):
    sp.add_argument("data", help="CSV matrix")
    sp.add_argument("--delimiter", default=",")
    sp.add_argument("--no-header", action="store_true", help="file has no header row")
    sp.add_argument("--no-labels", action="store_true", help="file has no row-label column")
    sp.add_argument("--orientation", choices=mio.ORIENTATIONS, default="samples-by-genes")
    sp.add_argument("--policy", choices=POLICIES, default="raw")


def build_parser():
    p = argparse.ArgumentParser(prog="meanshrink", description="Shrinkage estimation of a high-dimensional mean: simulations, sweeps, estimates and EPR.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("simulate", help="Monte Carlo risk table from a JSON config")
    sp.add_argument("config")
    _add_run_flags(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="risk versus correlation for sigma2/sigma3")
    sp.add_argument("config")
    _add_run_flags(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("estimate", help="apply one estimator to a data matrix")
    _add_data_flags(sp)
    sp.add_argument("--q", default="identity",
                    help="identity | estimated-diag | diagonal:<csv> | dense:<csv>")
    sp.add_argument("--estimator", required=True)
    sp.add_argument("--seed", type=int, default=0, help="recorded in the output; the estimate is deterministic")
    sp.add_argument("--workers", type=int, default=1, help="accepted for symmetry; unused")
    sp.add_argument("--output", "-o", default=None)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("epr", help="empirical partial risk over random train/test splits")
    _add_data_flags(sp)
    sp.add_argument("--train-sizes", required=True, help="comma-separated training sizes")
    sp.add_argument("--genes", type=int, default=None, help="use the first k gene columns")
    sp.add_argument("--reps", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--estimators", default="mean,js,bb,tong,proposed")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--output", "-o", default=None)
    sp.add_argument("--format", choices=("csv", "text"), default="csv")
    sp.add_argument("--no-standardize", action="store_true")
    sp.set_defaults(func=cmd_epr)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"meanshrink {args.cmd}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"meanshrink {args.cmd}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
