"""Trial records, relative error and per-regime summaries."""
from __future__ import annotations

import csv
import math
import statistics
from dataclasses import astuple, dataclass, fields
from itertools import groupby
from typing import Iterable, List

import numpy as np

from .core import DEFAULT_CONSTANTS, RegimeParams, psi_diagnostic, sign_invariant_distance

PRESET_REGIMES = ("sqrt_n", "n_2_3", "const_0.25")


@dataclass(frozen=True)
class TrialRecord:
    seed: int
    d: int
    n: int
    k: int
    regime_label: str
    rel_error: float
    outer_iters: int
    oracle_iters_total: int
    wall_ms: int
    termination: str
    error_bound: float = math.nan


TRIAL_HEADER = tuple(f.name for f in fields(TrialRecord))
TIMING_COLUMNS = ("wall_ms",)


@dataclass(frozen=True)
class SummaryRow:
    regime: str
    d: int
    n: int
    k: int
    mean_rel_error: float
    std_rel_error: float
    mean_wall_ms: float
    std_wall_ms: float
    trials: int


SUMMARY_HEADER = tuple(f.name for f in fields(SummaryRow))


def relative_error(theta_hat, theta_star) -> float:
    nrm = float(np.linalg.norm(theta_star))
    if nrm == 0:
        raise ValueError("theta_star must be nonzero")
    return sign_invariant_distance(theta_hat, theta_star) / nrm


def bound_from_psi(psi: float, epsilon: float) -> float:
    return 1.2 * max(math.sqrt(psi), psi) * math.sqrt(epsilon)


def error_bound(regime: RegimeParams, eta_max: float, constants=DEFAULT_CONSTANTS) -> float:
    """``1.2 * max(sqrt(psi), psi) * sqrt(eps)``; reported next to observed errors."""
    return bound_from_psi(psi_diagnostic(regime, eta_max, constants), regime.epsilon)


def _std(values):
    return statistics.stdev(values) if len(values) > 1 else 0.0


def summarize(records: Iterable[TrialRecord]) -> List[SummaryRow]:
    """Mean and sample standard deviation per ``(regime, d, n)``, sorted by that key.

    Failed trials (NaN error) are excluded from the error statistics.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to summarize")
    key = lambda r: (r.regime_label, r.d, r.n)  # noqa: E731
    rows = []
    for (regime, d, n), grp in groupby(sorted(records, key=lambda r: key(r) + (r.seed,)), key):
        grp = list(grp)
        errs = sorted(r.rel_error for r in grp if not math.isnan(r.rel_error))
        walls = sorted(float(r.wall_ms) for r in grp)
        rows.append(SummaryRow(
            regime, d, n, grp[0].k,
            math.fsum(errs) / len(errs) if errs else math.nan,
            _std(errs) if errs else math.nan,
            math.fsum(walls) / len(walls), _std(walls), len(grp)))
    return rows


def _cell(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_records(path, records, comments=(), exclude=()) -> None:
    cols = [c for c in TRIAL_HEADER if c not in exclude]
    pos = [TRIAL_HEADER.index(c) for c in cols]
    with open(path, "w", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            row = astuple(r)
            w.writerow([_cell(row[i]) for i in pos])


def write_summary(path, rows, comments=()) -> None:
    with open(path, "w", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for r in rows:
            w.writerow([_cell(v) for v in astuple(r)])


def read_records(path) -> List[TrialRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(ln for ln in fh if not ln.startswith("#"))
        out = []
        for row in reader:
            out.append(TrialRecord(
                int(row["seed"]), int(row["d"]), int(row["n"]), int(row["k"]),
                row["regime_label"], float(row["rel_error"]), int(row["outer_iters"]),
                int(row["oracle_iters_total"]), int(row.get("wall_ms", 0) or 0),
                row["termination"], float(row.get("error_bound", "nan"))))
        return out
