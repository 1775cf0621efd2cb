"""Per-sample loss kernels for the quartic least-squares objective.

Two interchangeable backends compute the same quantities on gathered arrays
``X`` (m, d) and ``y`` (m,):

* ``numba``: fused single pass per sample, Neumaier-compensated accumulators.
* ``numpy``: vectorised; reductions run along contiguous axes so numpy's
  pairwise summation applies.

``ROBUST_PHASE_BACKEND=numpy`` forces the fallback.  The numba path is also
skipped when numba cannot be imported.
"""
import logging
import os
from types import SimpleNamespace

import numpy as np

logger = logging.getLogger(__name__)


# -- numpy fallback ----------------------------------------------------------

def _np_loss(X, y, theta):
    p = X @ theta
    r = p * p - y
    return np.sum(r * r) / (4.0 * X.shape[0])


def _np_loss_grad(X, y, theta):
    m = X.shape[0]
    p = X @ theta
    r = p * p - y
    w = r * p
    # (d, m) C-ordered so the row sums are pairwise
    g = np.multiply(X.T, w, order="C").sum(axis=1) / m
    return np.sum(r * r) / (4.0 * m), g


def _np_sample_residuals(X, y, theta):
    p = X @ theta
    r = y - p * p
    return r * r


def _np_hess_qform(X, y, theta, v):
    p = X @ theta
    q = X @ v
    return np.sum((3.0 * p * p - y) * (q * q)) / X.shape[0]


numpy_backend = SimpleNamespace(
    name="numpy",
    loss=_np_loss,
    loss_grad=_np_loss_grad,
    sample_residuals=_np_sample_residuals,
    hess_qform=_np_hess_qform,
)


# -- numba -------------------------------------------------------------------

def _build_numba_backend():
    from numba import njit

    @njit(cache=True, inline="always")
    def _neumaier_add(s, c, x):
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        return t, c

    @njit(cache=True)
    def loss(X, y, theta):
        m, d = X.shape
        s = 0.0
        c = 0.0
        for i in range(m):
            p = 0.0
            for j in range(d):
                p += X[i, j] * theta[j]
            r = p * p - y[i]
            s, c = _neumaier_add(s, c, r * r)
        return (s + c) / (4.0 * m)

    @njit(cache=True)
    def loss_grad(X, y, theta):
        m, d = X.shape
        s = 0.0
        c = 0.0
        gs = np.zeros(d)
        gc = np.zeros(d)
        for i in range(m):
            p = 0.0
            for j in range(d):
                p += X[i, j] * theta[j]
            r = p * p - y[i]
            s, c = _neumaier_add(s, c, r * r)
            w = r * p
            for j in range(d):
                gs[j], gc[j] = _neumaier_add(gs[j], gc[j], w * X[i, j])
        return (s + c) / (4.0 * m), (gs + gc) / m

    @njit(cache=True)
    def sample_residuals(X, y, theta):
        m, d = X.shape
        out = np.empty(m)
        for i in range(m):
            p = 0.0
            for j in range(d):
                p += X[i, j] * theta[j]
            r = y[i] - p * p
            out[i] = r * r
        return out

    @njit(cache=True)
    def hess_qform(X, y, theta, v):
        m, d = X.shape
        s = 0.0
        c = 0.0
        for i in range(m):
            p = 0.0
            q = 0.0
            for j in range(d):
                p += X[i, j] * theta[j]
                q += X[i, j] * v[j]
            s, c = _neumaier_add(s, c, (3.0 * p * p - y[i]) * q * q)
        return (s + c) / m

    return SimpleNamespace(
        name="numba",
        loss=loss,
        loss_grad=loss_grad,
        sample_residuals=sample_residuals,
        hess_qform=hess_qform,
    )


try:
    numba_backend = _build_numba_backend()
except ImportError:  # pragma: no cover - depends on the environment
    numba_backend = None


def get_backend(name=None):
    """Return the kernel namespace for ``name`` (``"numba"`` or ``"numpy"``).

    With ``name=None`` the choice comes from ``ROBUST_PHASE_BACKEND``, defaulting
    to numba when it is importable.
    """
    if name is None:
        name = os.environ.get("ROBUST_PHASE_BACKEND", "numba").strip().lower()
    if name == "numpy":
        return numpy_backend
    if name != "numba":
        raise ValueError(f"unknown kernel backend {name!r}")
    if numba_backend is None:
        logger.warning("numba unavailable, falling back to numpy kernels")
        return numpy_backend
    return numba_backend


backend = get_backend()
