"""Alternating minimisation with residual trimming around the phase oracle.

Preprocessing drops negative responses and then the largest ones, leaving
``n - k`` candidates.  Each round keeps the ``n - 2k`` candidates that the
current estimate fits best, refits with the oracle on that subset, and stops
once the average per-sample decrease on the subset drops below ``beta``.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .core import MeasurementSet, index_set, sign_invariant_distance
from .datagen import as_generator
from .objective import gradient, sample_residuals
from .oracle import OracleConfig, OracleDivergence, run_oracle

logger = logging.getLogger(__name__)

BETA_FLOOR = 1e-12


@dataclass(frozen=True)
class AltMinConfig:
    k: int
    beta: Optional[float] = None  # None -> (k/n)^2, or BETA_FLOOR when k == 0
    max_outer_iters: Optional[int] = None  # None -> iteration_bound
    oracle_cfg: OracleConfig = field(default_factory=OracleConfig)

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be non-negative")
        if self.beta is not None and not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.max_outer_iters is not None and self.max_outer_iters < 0:
            raise ValueError("max_outer_iters must be non-negative")

    def check(self, n: int) -> None:
        if not 2 * self.k < n:
            raise ValueError(f"need 2k < n (k={self.k}, n={n})")

    def beta_for(self, n: int) -> float:
        if self.beta is not None:
            return self.beta
        if self.k == 0:
            return BETA_FLOOR
        return (self.k / n) ** 2


@dataclass
class RunLogRow:
    outer_iter: int
    subset_loss: float
    decrease: float
    dist_to_truth: float


@dataclass
class AltMinResult:
    theta_hat: np.ndarray
    u_hat: np.ndarray
    outer_iters: int
    termination: str  # "beta_stop" | "iter_cap" | "oracle_error"
    loss_history: List[float]
    beta: float
    iteration_bound: int
    oracle_iters_total: int = 0
    negatives_exceed_k: bool = False
    error: Optional[str] = None
    error_iteration: Optional[int] = None
    run_log: List[RunLogRow] = field(default_factory=list, repr=False)


def preprocess(data: MeasurementSet, k: int) -> np.ndarray:
    """Drop negative responses, then the largest ones, keeping ``n - k`` indices.

    If more than ``k`` responses are negative, all of them are still dropped and
    the returned set is smaller than ``n - k``.
    """
    n = data.n
    if not 0 <= k < n:
        raise ValueError(f"need 0 <= k < n (k={k}, n={n})")
    y = data.y
    keep = np.flatnonzero(y >= 0)
    budget = k - (n - keep.size)
    if budget > 0:
        # ascending y, ties by index; the tail holds the largest responses
        order = keep[np.lexsort((keep, y[keep]))]
        keep = order[:keep.size - budget]
    return index_set(keep, n)


def count_negatives(data: MeasurementSet) -> int:
    return int(np.count_nonzero(data.y < 0))


def select_subset(data: MeasurementSet, s_tilde, theta, k: int) -> np.ndarray:
    """The ``n - 2k`` indices of ``s_tilde`` with the smallest ``(y_i - <x_i,theta>^2)^2``.

    The subset objective is separable, so sorting realises the exact argmin.
    Ties go to the smaller index.
    """
    return _select_smallest(data, s_tilde, theta, data.n - 2 * k)


def _select_smallest(data: MeasurementSet, s_tilde, theta, size: int) -> np.ndarray:
    s_tilde = np.asarray(s_tilde, dtype=np.int64)
    if size <= 0 or s_tilde.size < size:
        raise ValueError(f"cannot select {size} indices from {s_tilde.size}")
    res = sample_residuals(data, s_tilde, theta)
    order = np.lexsort((s_tilde, res))
    return index_set(s_tilde[order[:size]])


def iteration_bound(data: MeasurementSet, cfg: AltMinConfig) -> int:
    """``ceil(sum_i y_i^2 / (4 (n - 2k) beta))`` over all ``n`` responses."""
    cfg.check(data.n)
    beta = cfg.beta_for(data.n)
    total = math.fsum(float(v) * float(v) for v in data.y)
    return int(math.ceil(total / (4.0 * (data.n - 2 * cfg.k) * beta)))


def _subset_loss(f: np.ndarray) -> float:
    return math.fsum(f) / (4.0 * f.size)


def run_altmin(data: MeasurementSet, cfg: AltMinConfig, rng=0) -> AltMinResult:
    """Alternate residual-based selection and oracle refits from ``theta = 0``.

    Never raises for valid input: an oracle failure ends the run with
    ``termination="oracle_error"`` and the last accepted iterate.
    """
    cfg.check(data.n)
    gen = as_generator(rng)
    n, k = data.n, cfg.k
    beta = cfg.beta_for(n)
    bound = iteration_bound(data, cfg)
    cap = bound if cfg.max_outer_iters is None else cfg.max_outer_iters
    ts = data.theta_star

    s_tilde = preprocess(data, k)
    neg_flag = count_negatives(data) > k
    if neg_flag:
        logger.warning("%d negative responses exceed k=%d; keeping %d candidates",
                       count_negatives(data), k, s_tilde.size)
    # with too many negatives the candidate pool can fall below n - 2k
    size = min(n - 2 * k, s_tilde.size)
    if size == 0:
        raise ValueError("no non-negative responses left after preprocessing")

    theta = np.zeros(data.d)
    u = _select_smallest(data, s_tilde, theta, size)
    history: List[float] = []
    log: List[RunLogRow] = []
    oracle_iters = 0
    termination = "iter_cap"
    error = None
    error_iter = None
    t = 0
    while t < cap:
        t += 1
        f_old = sample_residuals(data, u, theta)
        loss_old = _subset_loss(f_old)
        history.append(loss_old)
        try:
            res = run_oracle(data, u, cfg.oracle_cfg, gen)
        except OracleDivergence as exc:
            termination = "oracle_error"
            error = str(exc)
            error_iter = exc.iteration
            dist = math.nan if ts is None else sign_invariant_distance(theta, ts)
            log.append(RunLogRow(t, loss_old, math.nan, dist))
            break
        oracle_iters += res.iters_run
        f_new = sample_residuals(data, u, res.theta)
        decrease = math.fsum(f_old - f_new) / (4.0 * u.size)
        dist = math.nan if ts is None else sign_invariant_distance(theta, ts)
        log.append(RunLogRow(t, loss_old, decrease, dist))
        if not decrease >= beta:
            termination = "beta_stop"
            break
        theta = res.theta
        u = _select_smallest(data, s_tilde, theta, size)
    return AltMinResult(theta, u, t, termination, history, beta, bound,
                        oracle_iters, neg_flag, error, error_iter, log)


def stationarity_gap(data: MeasurementSet, u_hat, theta_hat, theta_star) -> float:
    """``<grad f_U(theta_hat), e> / ||e||`` with ``e = theta_hat - (+-theta*)``.

    The sign of ``theta*`` is the one closer to ``theta_hat``; returns 0 when
    ``theta_hat`` equals it.
    """
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    theta_star = np.asarray(theta_star, dtype=np.float64)
    e_plus = theta_hat - theta_star
    e_minus = theta_hat + theta_star
    e = e_plus if np.linalg.norm(e_plus) <= np.linalg.norm(e_minus) else e_minus
    nrm = np.linalg.norm(e)
    if nrm == 0:
        return 0.0
    return float(gradient(data, u_hat, theta_hat) @ e / nrm)


def stationarity_bound(theta_hat, theta_star, dlt: float, eta_max: float, epsilon: float,
                       constants=(1.0, 1.0, 1.0)) -> float:
    """``2 sqrt(L) epsilon`` with the smoothness proxy

    ``L = ((C1 + D) e^2 + (C2 + D) e + (C3 + D) + eta_max (1 + D)) / 2``,
    ``e = d(theta_hat, theta*)`` and ``D`` the regime quantity ``delta``.
    """
    c1, c2, c3 = constants
    e = sign_invariant_distance(theta_hat, theta_star)
    L = 0.5 * ((c1 + dlt) * e * e + (c2 + dlt) * e + (c3 + dlt) + eta_max * (1.0 + dlt))
    return 2.0 * math.sqrt(L) * epsilon


RUN_LOG_HEADER = ("outer_iter", "subset_loss", "decrease", "dist_to_truth")


def write_run_log(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_LOG_HEADER)
        for r in rows:
            w.writerow([r.outer_iter, repr(r.subset_loss), repr(r.decrease),
                        "" if math.isnan(r.dist_to_truth) else repr(r.dist_to_truth)])
