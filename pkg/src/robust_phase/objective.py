"""Quartic least-squares objective on a measurement subset.

``f_U(theta) = 1/(4|U|) * sum_{i in U} (<x_i, theta>^2 - y_i)^2``

The expected-landscape functions work in the frame ``theta* = e_1`` (unit
norm); callers rotate and rescale before calling them.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels
from .core import MeasurementSet


@dataclass(frozen=True)
class LossEval:
    value: float
    gradient: Optional[np.ndarray]
    subset_size: int


def gather(data: MeasurementSet, subset):
    """Contiguous ``(X_U, y_U)`` copies for the kernels."""
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size == 0:
        raise ValueError("subset must be nonempty")
    return np.ascontiguousarray(data.X[subset]), np.ascontiguousarray(data.y[subset])


def _theta(theta, d):
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    if theta.shape != (d,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({d},)")
    return theta


def loss(data: MeasurementSet, subset, theta) -> float:
    X, y = gather(data, subset)
    return float(_kernels.backend.loss(X, y, _theta(theta, data.d)))


def gradient(data: MeasurementSet, subset, theta) -> np.ndarray:
    """``1/|U| * sum (<x_i, theta>^2 - y_i) x_i x_i^T theta``."""
    X, y = gather(data, subset)
    return _kernels.backend.loss_grad(X, y, _theta(theta, data.d))[1]


def evaluate(data: MeasurementSet, subset, theta, with_gradient=True) -> LossEval:
    X, y = gather(data, subset)
    theta = _theta(theta, data.d)
    if with_gradient:
        val, g = _kernels.backend.loss_grad(X, y, theta)
        return LossEval(float(val), g, X.shape[0])
    return LossEval(float(_kernels.backend.loss(X, y, theta)), None, X.shape[0])


def sample_residuals(data: MeasurementSet, subset, theta) -> np.ndarray:
    """Per-sample ``f_i(theta) = (y_i - <x_i, theta>^2)^2`` over ``subset``."""
    X, y = gather(data, subset)
    return _kernels.backend.sample_residuals(X, y, _theta(theta, data.d))


def hessian_quadratic_form(data: MeasurementSet, subset, theta, v) -> float:
    """``v^T H v`` with ``H = 1/|U| * sum (3<x_i, theta>^2 - y_i) x_i x_i^T``.

    The d x d Hessian is never formed.
    """
    X, y = gather(data, subset)
    return float(_kernels.backend.hess_qform(X, y, _theta(theta, data.d),
                                             _theta(v, data.d)))


# -- expected landscape (theta* = e_1) --------------------------------------------

def expected_loss(theta, eta_bar: float, eta_sq_mean: float) -> float:
    theta = np.asarray(theta, dtype=np.float64)
    sq = float(theta @ theta)
    t1 = float(theta[0])
    return 0.25 * (3.0 * sq * sq + 3.0 - 4.0 * t1 * t1 - 2.0 * sq
                   - 2.0 * sq * eta_bar + 2.0 * eta_bar + eta_sq_mean)


def expected_gradient(theta, eta_bar: float) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    g = (3.0 * float(theta @ theta) - 1.0 - eta_bar) * theta
    g[0] -= 2.0 * theta[0]
    return g


def expected_hessian_quadratic_form(theta, v, eta_bar: float) -> float:
    """Second derivative of :func:`expected_loss` along ``v``.

    ``6<theta, v>^2 + (3||theta||^2 - 1 - eta_bar)||v||^2 - 2 v_1^2``, obtained by
    differentiating :func:`expected_gradient`.
    """
    theta = np.asarray(theta, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    tv = float(theta @ v)
    return (6.0 * tv * tv + (3.0 * float(theta @ theta) - 1.0 - eta_bar) * float(v @ v)
            - 2.0 * float(v[0]) ** 2)


def critical_points(eta_bar: float, d: int = 2) -> dict:
    """Critical sets of the expected loss for a given average corruption.

    Returns ``{"origin": True, "orthogonal_radius": r or None,
    "minimizers": [+a e_1, -a e_1] or []}``; the orthogonal set is the sphere
    of radius ``r`` inside ``e_1``'s complement.
    """
    out = {"origin": True, "orthogonal_radius": None, "minimizers": []}
    if eta_bar >= -1.0 and d >= 2:
        out["orthogonal_radius"] = float(np.sqrt((1.0 + eta_bar) / 3.0))
    if eta_bar > -3.0:
        a = float(np.sqrt(1.0 + eta_bar / 3.0))
        e1 = np.zeros(d)
        e1[0] = a
        out["minimizers"] = [e1, -e1]
    return out


def landscape_panel(eta_bar: float) -> str:
    """Which qualitative landscape ``eta_bar`` produces: a (clean), b (convex) or c."""
    if eta_bar == 0.0:
        return "a"
    if eta_bar <= -3.0:
        return "b"
    return "c"


def landscape_grid(eta_bar: float, eta_sq_mean: float, box, resolution: int):
    """Expected loss on a ``resolution x resolution`` grid over ``box``.

    ``box = (x_min, x_max, y_min, y_max)``.  Returns ``(t1, t2, F)`` as 2-D arrays
    (``indexing="ij"``).
    """
    x0, x1, y0, y1 = box
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    g1, g2 = np.meshgrid(np.linspace(x0, x1, resolution),
                         np.linspace(y0, y1, resolution), indexing="ij")
    sq = g1 * g1 + g2 * g2
    F = 0.25 * (3.0 * sq * sq + 3.0 - 4.0 * g1 * g1 - 2.0 * sq
                - 2.0 * sq * eta_bar + 2.0 * eta_bar + eta_sq_mean)
    return g1, g2, F


def write_landscape(path, eta_bar: float, eta_sq_mean: float, box, resolution: int,
                    comments=()) -> None:
    """Text grid with ``theta1 theta2 F`` rows under a ``#`` header."""
    g1, g2, F = landscape_grid(eta_bar, eta_sq_mean, box, resolution)
    lines = [f"# eta_bar={eta_bar!r} eta_sq_mean={eta_sq_mean!r} "
             f"panel={landscape_panel(eta_bar)}"]
    lines.extend(f"# {c}" for c in comments)
    lines.append("theta1 theta2 F")
    for a, b, f in zip(g1.ravel(), g2.ravel(), F.ravel()):
        lines.append(f"{a:.17g} {b:.17g} {f:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")
