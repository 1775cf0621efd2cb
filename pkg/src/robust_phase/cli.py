"""``robust-phase`` command line: generate | run | sweep | landscape | verify.

Exit codes: 0 success, 1 failed check, 2 usage or config error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import verify
from .altmin import run_altmin, write_run_log
from .config import ConfigError, eval_int_rule, load_config, resolve_parallelism
from .datagen import digest, dump_dataset, load_dataset
from .experiment import build_dataset, run_oracle_only, run_sweep, solver_rng
from .metrics import relative_error, summarize, write_records, write_summary
from .objective import critical_points, landscape_grid, landscape_panel, write_landscape
from .oracle import OracleDivergence

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("robust_phase")


class UsageError(Exception):
    pass


def _seed_list(s):
    try:
        return [int(t) for t in s.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}")


def _common(p):
    p.add_argument("--config", metavar="PATH", help="key=value config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    p.add_argument("--out", metavar="DIR", default=".", help="output directory (default: .)")
    p.add_argument("--seed", type=_seed_list, metavar="LIST", help="comma-separated seeds")
    p.add_argument("--parallelism", type=int, metavar="INT",
                   help="sweep worker count (env ROBUST_PHASE_THREADS otherwise)")
    p.add_argument("--quiet", action="store_true", help="only print result lines")


def build_parser():
    parser = argparse.ArgumentParser(prog="robust-phase",
                                     description="Robust phase retrieval experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    _common(p)

    p = sub.add_parser("run", help="alternating minimisation on one dataset")
    _common(p)
    p.add_argument("--data", metavar="FILE", help="dataset file (default: generate from config)")

    p = sub.add_parser("sweep", help="all (d, regime, seed) cells to trials.csv and summary.csv")
    _common(p)

    p = sub.add_parser("landscape", help="expected-loss grid for a 2-D example")
    _common(p)
    p.add_argument("--eta-bar", type=float, required=True)
    p.add_argument("--eta-sq-mean", type=float, help="mean squared corruption (default eta_bar^2)")
    p.add_argument("--box", default="-2,2,-2,2", metavar="X0,X1,Y0,Y1")
    p.add_argument("--resolution", type=int, default=201)
    p.add_argument("--dim", type=int, default=2, help="only 2 is supported")

    p = sub.add_parser("verify", help="run the numerical self-checks")
    _common(p)
    p.add_argument("--only", metavar="NAMES", help="comma-separated subset of checks")
    return parser


def _config(args):
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append("seeds=" + ",".join(str(s) for s in args.seed))
    return load_config(args.config, overrides)


def _outdir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}")
    return out


def _single_dataset(cfg):
    d = cfg.d[0]
    n = eval_int_rule(cfg.n_rule, d=d)
    k = eval_int_rule(cfg.k_rule, n=n, d=d)
    if k > n:
        raise UsageError("k exceeds n")
    if n < 1 or k < 0:
        raise UsageError(f"need n >= 1 and k >= 0 (n={n}, k={k})")
    return build_dataset(d, n, k, cfg.corruption, cfg.seeds[0])


def cmd_generate(args) -> int:
    cfg = _config(args)
    data = _single_dataset(cfg)
    out = _outdir(args)
    path = out / "dataset.txt"
    dump_dataset(data, path, [f"seed={cfg.seeds[0]}"] + cfg.echo())
    print(digest(data))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    if args.data is not None:
        try:
            data = load_dataset(args.data)
        except OSError as exc:
            raise UsageError(f"cannot read dataset {args.data}: {exc}")
        except ValueError as exc:
            raise UsageError(f"cannot parse dataset {args.data}: {exc}")
    else:
        data = _single_dataset(cfg)
    seed = cfg.seeds[0]

    def err_of(theta):
        return math.nan if data.theta_star is None else relative_error(theta, data.theta_star)

    if cfg.mode == "oracle":
        res, exc = run_oracle_only(data, cfg, seed)
        if exc is not None:
            print(f"oracle diverged at iteration {exc.iteration}: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"rel_error={err_of(res.theta):.6g}, oracle_iters={res.iters_run}, "
              f"kappa_sq={res.kappa_sq:.6g}, branch={res.branch}")
        return EXIT_OK

    solver = cfg.solver(data.k, data.n, data.d)
    res = run_altmin(data, solver, solver_rng(data.d, data.n, seed))
    out = _outdir(args)
    write_run_log(out / "runlog.csv", res.run_log)
    if res.termination == "oracle_error":
        print(f"oracle diverged at iteration {res.error_iteration} "
              f"(outer iteration {res.outer_iters}): {res.error}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"rel_error={err_of(res.theta_hat):.6g}, outer_iters={res.outer_iters}, "
          f"termination={res.termination}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if not cfg.regimes:
        raise UsageError("regimes list is empty")
    if cfg.mode != "altmin":
        raise UsageError("sweep runs alternating minimisation; use 'run' for mode=oracle")
    cfg.cells()  # validates 2k < n before any work starts
    workers = resolve_parallelism(args.parallelism, cfg)
    out = _outdir(args)
    log.info("sweep: %d cells x %d seeds, %d workers",
             len(cfg.cells()), len(cfg.seeds), workers)
    records = [rec for rec, _ in run_sweep(cfg, workers)]
    header = cfg.echo()
    write_records(out / "trials.csv", records, header)
    failed = [r for r in records if r.termination.startswith("error")]
    for r in failed:
        print(f"cell failed: regime={r.regime_label} d={r.d} seed={r.seed}: {r.termination}",
              file=sys.stderr)
    if len(failed) == len(records):
        return EXIT_NUMERIC
    rows = summarize(records)
    write_summary(out / "summary.csv", rows, header)
    if not args.quiet:
        for r in rows:
            print(f"{r.regime} d={r.d} n={r.n} k={r.k}: rel_error "
                  f"{r.mean_rel_error:.4g} +- {r.std_rel_error:.4g} ({r.trials} trials)")
    return EXIT_OK


def _parse_box(s):
    try:
        box = tuple(float(t) for t in s.split(","))
    except ValueError:
        raise UsageError(f"bad --box {s!r}")
    if len(box) != 4 or not (box[0] < box[1] and box[2] < box[3]):
        raise UsageError("--box needs X0,X1,Y0,Y1 with X0 < X1 and Y0 < Y1")
    return box


def cmd_landscape(args) -> int:
    if args.dim != 2:
        raise UsageError("landscape grids are 2-D only (--dim 2)")
    box = _parse_box(args.box)
    if args.resolution < 2:
        raise UsageError("--resolution must be at least 2")
    eta_bar = args.eta_bar
    eta_sq = eta_bar * eta_bar if args.eta_sq_mean is None else args.eta_sq_mean
    out = _outdir(args)
    write_landscape(out / "landscape.txt", eta_bar, eta_sq, box, args.resolution)
    t1, t2, F = landscape_grid(eta_bar, eta_sq, box, args.resolution)
    fmin = F.min()
    at = np.argwhere(F <= fmin + 1e-12 * max(1.0, abs(fmin)))
    where = " ".join(f"({t1[i, j]:.4g},{t2[i, j]:.4g})" for i, j in at)
    print(f"panel={landscape_panel(eta_bar)} grid_min={fmin:.6g} at {where}")
    if not args.quiet:
        cps = critical_points(eta_bar, 2)
        print("critical points: " + ", ".join(f"{k}={v}" for k, v in cps.items()))
    return EXIT_OK


def cmd_verify(args, registry=None) -> int:
    registry = verify.CHECKS if registry is None else registry
    if args.only:
        names = [t.strip() for t in args.only.split(",") if t.strip()]
        unknown = [n for n in names if n not in registry]
        if unknown:
            raise UsageError(f"unknown checks: {', '.join(unknown)}")
        registry = {n: registry[n] for n in names}
    if not registry:
        raise UsageError("no checks registered")
    reports = verify.run_checks(registry)
    for r in reports:
        print(r.to_json())
    failed = [r for r in reports if not r.passed]
    for r in failed:
        print(f"FAILED {r.name}: observed {r.observed:.4g} > {r.threshold:.4g} {r.detail}",
              file=sys.stderr)
    return EXIT_CHECK if failed else EXIT_OK


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "sweep": cmd_sweep,
            "landscape": cmd_landscape, "verify": cmd_verify}


def main(argv=None, registry=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify":
            return cmd_verify(args, registry)
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OracleDivergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
