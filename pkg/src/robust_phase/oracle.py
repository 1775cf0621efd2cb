"""Least-squares phase oracle: randomly initialised fixed-step gradient descent.

The oracle estimates ``kappa_sq`` (the squared norm of the displaced minimiser)
from the responses.  A non-positive estimate means the average corruption makes
the landscape convex with its minimum at the origin, so the zero vector is
returned.  Otherwise gradient descent starts from a uniform point on the sphere
of radius ``sqrt(kappa_sq)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from . import _kernels
from .core import MeasurementSet
from .datagen import as_generator, random_unit_vector
from .objective import gather

KAPPA_ESTIMATORS = ("moments", "trace")


class OracleDivergence(FloatingPointError):
    """Gradient descent produced a non-finite loss."""

    def __init__(self, iteration: int):
        super().__init__(f"step size too large: non-finite loss at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class OracleConfig:
    step_scale_c: float = 0.1
    max_iters_T: Optional[int] = None  # None -> ceil(40 ln max(d, 2))
    grad_tol: float = 1e-10
    kappa_estimator: str = "moments"
    record_trajectory: bool = False

    def __post_init__(self):
        if not self.step_scale_c > 0:
            raise ValueError("step_scale_c must be positive")
        if self.max_iters_T is not None and self.max_iters_T < 1:
            raise ValueError("max_iters_T must be >= 1")
        if self.grad_tol < 0:
            raise ValueError("grad_tol must be non-negative")
        if self.kappa_estimator not in KAPPA_ESTIMATORS:
            raise ValueError(f"kappa_estimator must be one of {KAPPA_ESTIMATORS}")

    def iterations(self, d: int) -> int:
        if self.max_iters_T is not None:
            return self.max_iters_T
        return int(math.ceil(40.0 * math.log(max(d, 2))))


class TrajectoryPoint(NamedTuple):
    iter: int
    a_t: float
    b_t: float
    loss: float
    grad_norm: float
    dist: float  # d(theta_t, kappa * theta*), nan without ground truth


@dataclass
class OracleResult:
    theta: np.ndarray
    kappa_sq: float
    branch: str  # "convex_zero" | "gd"
    iters_run: int
    step_size: float = 0.0
    trajectory: Optional[List[TrajectoryPoint]] = field(default=None, repr=False)


def kappa_sq_moments(data: MeasurementSet, subset) -> float:
    """``(sqrt(2) * std(y_U) + mean(y_U)) / 3`` with the variance clamped at zero."""
    y = data.y[np.asarray(subset, dtype=np.int64)]
    m = y.size
    if m < 2:
        raise ValueError("kappa_sq_moments needs at least 2 measurements")
    mean = np.sum(y) / m
    var = max(np.sum(y * y) / m - mean * mean, 0.0)
    return float((math.sqrt(2.0) * math.sqrt(var) + mean) / 3.0)


def kappa_sq_trace(data: MeasurementSet, subset) -> float:
    """``1/(3|U|) * sum_i (y_i ||x_i||^2 - (d - 1) y_i)``."""
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size == 0:
        raise ValueError("subset must be nonempty")
    X, y = gather(data, subset)
    z = np.einsum("ij,ij->i", X, X)
    return float(np.sum(y * (z - (data.d - 1))) / (3.0 * subset.size))


def signal_orthogonal_split(theta, theta_star, kappa: float):
    """Signal and orthogonal components of ``theta`` relative to ``kappa * theta*``.

    ``a = |<theta, kappa theta*>|`` and
    ``b = || theta - (<theta, kappa theta*> / ||theta*||) theta* ||``.
    """
    theta = np.asarray(theta, dtype=np.float64)
    theta_star = np.asarray(theta_star, dtype=np.float64)
    nrm = np.linalg.norm(theta_star)
    if nrm == 0:
        raise ValueError("theta_star must be nonzero")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    ip = kappa * float(theta @ theta_star)
    return abs(ip), float(np.linalg.norm(theta - (ip / nrm) * theta_star))


def step_size(y_subset: np.ndarray, c: float) -> float:
    """``c / max(mean of positive responses, 1e-8)``, a stand-in for ``c / ||theta*||^2``."""
    pos = y_subset[y_subset > 0]
    scale = float(np.mean(pos)) if pos.size else 0.0
    return c / max(scale, 1e-8)


def gradient_descent(X, y, theta0, mu: float, T: int, grad_tol: float = 0.0,
                     record=None):
    """Fixed-step descent on the gathered subset ``(X, y)``.

    Stops after ``T`` steps or once ``||grad|| <= grad_tol``.  ``record`` is
    called as ``record(t, theta, loss, grad)`` at every visited iterate.
    Returns ``(theta, steps_taken)``.
    """
    kern = _kernels.backend
    theta = np.array(theta0, dtype=np.float64)
    steps = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while True:
            val, g = kern.loss_grad(X, y, theta)
            if not (math.isfinite(val) and np.all(np.isfinite(g))):
                raise OracleDivergence(steps)
            if record is not None:
                record(steps, theta, val, g)
            if steps >= T or np.linalg.norm(g) <= grad_tol:
                return theta, steps
            theta = theta - mu * g
            steps += 1


def run_oracle(data: MeasurementSet, subset, cfg: OracleConfig = OracleConfig(), rng=0,
               theta_star=None, kappa: Optional[float] = None) -> OracleResult:
    """Minimise ``f_U`` by gradient descent from a random point on the kappa-sphere.

    ``theta_star``/``kappa`` only feed the optional trajectory diagnostics
    (defaults: ``data.theta_star`` and ``sqrt(kappa_sq)``).  Raises
    :class:`OracleDivergence` when the loss becomes non-finite.
    """
    subset = np.asarray(subset, dtype=np.int64)
    X, y = gather(data, subset)
    if cfg.kappa_estimator == "moments":
        ksq = kappa_sq_moments(data, subset)
    else:
        ksq = kappa_sq_trace(data, subset)
    if ksq <= 0:
        return OracleResult(np.zeros(data.d), ksq, "convex_zero", 0,
                            trajectory=[] if cfg.record_trajectory else None)

    theta0 = math.sqrt(ksq) * random_unit_vector(data.d, as_generator(rng))
    mu = step_size(y, cfg.step_scale_c)

    traj = None
    record = None
    if cfg.record_trajectory:
        traj = []
        ts = data.theta_star if theta_star is None else np.asarray(theta_star, float)
        kap = math.sqrt(ksq) if kappa is None else kappa

        def _record(t, th, val, g):
            if ts is None:
                a = b = dist = math.nan
            else:
                a, b = signal_orthogonal_split(th, ts, kap)
                tgt = kap * ts
                dist = float(min(np.linalg.norm(th - tgt), np.linalg.norm(th + tgt)))
            traj.append(TrajectoryPoint(t, a, b, float(val), float(np.linalg.norm(g)), dist))
        record = _record

    theta, iters = gradient_descent(X, y, theta0, mu, cfg.iterations(data.d),
                                    cfg.grad_tol, record)
    return OracleResult(theta, ksq, "gd", iters, mu, traj)


TRAJECTORY_HEADER = ("iter", "a_t", "b_t", "loss", "grad_norm")


def write_trajectory(path, trajectory) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for p in trajectory:
            w.writerow([p.iter, repr(p.a_t), repr(p.b_t), repr(p.loss), repr(p.grad_norm)])
