"""Trial construction and the regime sweep behind the CLI."""
from __future__ import annotations

import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import List, Tuple

import numpy as np

from .altmin import AltMinResult, preprocess, run_altmin
from .config import ExperimentConfig, parse_corruption
from .core import MeasurementSet, RegimeParams
from .datagen import (RngSeed, apply_corruption, generate_clean, random_unit_vector,
                      strong_adversary_signflip)
from .metrics import TrialRecord, error_bound, relative_error
from .oracle import OracleDivergence, run_oracle

# stream ids; a cell's streams depend only on (d, n, label), never on scheduling
_THETA, _DESIGN, _CORRUPT, _SOLVER = 0, 1, 2, 3


def _label_key(label: str) -> int:
    return zlib.crc32(label.encode())


def build_dataset(d: int, n: int, k: int, corruption: str, seed: int,
                  label: str = "") -> MeasurementSet:
    """Unit-norm random ``theta*``, Gaussian design, then ``k`` corrupted responses."""
    base = RngSeed(seed, (d, n))
    theta_star = random_unit_vector(d, base.child(_THETA))
    clean = generate_clean(d, n, theta_star, base.child(_DESIGN))
    if k > n:
        raise ValueError("k exceeds n")
    plan = parse_corruption(corruption)
    if plan == "signflip":
        return strong_adversary_signflip(clean, k)
    return apply_corruption(clean, plan(k), base.child(_CORRUPT, _label_key(label)))


def solver_rng(d: int, n: int, seed: int, label: str = "") -> RngSeed:
    return RngSeed(seed, (d, n, _SOLVER, _label_key(label)))


def _bound_for(data: MeasurementSet, k: int) -> float:
    if data.eta is None or not 0 <= k < data.n:
        return math.nan
    kept = preprocess(data, k)
    eta_max = float(np.max(np.abs(data.eta[kept]))) if kept.size else 0.0
    try:
        return error_bound(RegimeParams(k, data.n), eta_max)
    except ValueError:
        return math.nan


def run_trial(cfg: ExperimentConfig, d: int, n: int, k: int, label: str,
              seed: int) -> Tuple[TrialRecord, AltMinResult]:
    """One sweep cell.  Failures come back as a record with ``termination="error: ..."``."""
    t0 = time.monotonic_ns()
    result = None
    try:
        data = build_dataset(d, n, k, cfg.corruption, seed, label)
        solver = cfg.solver(k, n, d)
        result = run_altmin(data, solver, solver_rng(d, n, seed, label))
        err = relative_error(result.theta_hat, data.theta_star)
        rec = TrialRecord(seed, d, n, k, label, err, result.outer_iters,
                          result.oracle_iters_total, 0, result.termination,
                          _bound_for(data, solver.k))
    except (ValueError, ArithmeticError) as exc:
        rec = TrialRecord(seed, d, n, k, label, math.nan, 0, 0, 0, f"error: {exc}")
    wall_ms = (time.monotonic_ns() - t0) // 1_000_000
    return replace(rec, wall_ms=int(wall_ms)), result


def _cell_job(args):
    cfg, d, n, k, label, seed = args
    return run_trial(cfg, d, n, k, label, seed)


def run_sweep(cfg: ExperimentConfig, parallelism: int = 1) -> List[Tuple[TrialRecord, AltMinResult]]:
    """Run every ``(d, regime, seed)`` cell; output is sorted, so scheduling cannot reorder it."""
    jobs = [(cfg, d, n, k, label, seed)
            for d, n, k, label in cfg.cells() for seed in cfg.seeds]
    if parallelism > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_cell_job, jobs))
    else:
        results = [_cell_job(j) for j in jobs]
    return sorted(results, key=lambda rr: (rr[0].regime_label, rr[0].d, rr[0].n, rr[0].seed))


def run_oracle_only(data: MeasurementSet, cfg: ExperimentConfig, seed: int):
    """Single oracle call on every measurement (no trimming)."""
    ocfg = cfg.solver(0, data.n, data.d).oracle_cfg
    try:
        return run_oracle(data, data.all_indices(), ocfg, RngSeed(seed, (_SOLVER,))), None
    except OracleDivergence as exc:
        return None, exc
