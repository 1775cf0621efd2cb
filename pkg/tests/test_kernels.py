import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_phase import _kernels

needs_numba = pytest.mark.skipif(_kernels.numba_backend is None, reason="numba not installed")


def _arrays(seed, m, d):
    gen = np.random.default_rng(seed)
    X = gen.standard_normal((m, d))
    return X, gen.standard_normal(m) ** 2, gen.standard_normal(d), gen.standard_normal(d)


@needs_numba
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 300), st.integers(1, 12))
def test_backends_agree(seed, m, d):
    X, y, th, v = _arrays(seed, m, d)
    a, b = _kernels.numpy_backend, _kernels.numba_backend
    assert a.loss(X, y, th) == pytest.approx(b.loss(X, y, th), rel=1e-12)
    la, ga = a.loss_grad(X, y, th)
    lb, gb = b.loss_grad(X, y, th)
    assert la == pytest.approx(lb, rel=1e-12)
    np.testing.assert_allclose(ga, gb, rtol=1e-11, atol=1e-13 * np.abs(ga).max())
    # y_i - p_i^2 can cancel, so the error scale is the size of the terms, not the result
    scale = (np.abs(y) + (X @ th) ** 2) ** 2
    np.testing.assert_array_less(np.abs(a.sample_residuals(X, y, th) - b.sample_residuals(X, y, th)),
                                 1e-12 * scale + 1e-300)
    p, q = X @ th, X @ v
    h_scale = np.mean(np.abs(3 * p * p - y) * q * q)
    assert abs(a.hess_qform(X, y, th, v) - b.hess_qform(X, y, th, v)) <= 1e-12 * h_scale + 1e-300


def test_backend_selection(monkeypatch):
    assert _kernels.get_backend("numpy").name == "numpy"
    monkeypatch.setenv("ROBUST_PHASE_BACKEND", "numpy")
    assert _kernels.get_backend() is _kernels.numpy_backend
    with pytest.raises(ValueError):
        _kernels.get_backend("fortran")


@needs_numba
def test_numba_default(monkeypatch):
    monkeypatch.delenv("ROBUST_PHASE_BACKEND", raising=False)
    assert _kernels.get_backend().name == "numba"


def test_loss_grad_consistent(backend):
    X, y, th, _ = _arrays(1, 50, 4)
    val, _ = backend.loss_grad(X, y, th)
    assert val == pytest.approx(backend.loss(X, y, th), rel=1e-13)
