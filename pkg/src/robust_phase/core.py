"""Shared domain types and regime quantities.

Signals are plain float64 numpy arrays validated by :func:`as_signal`; index
sets are sorted unique int64 arrays built with :func:`index_set`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


def as_signal(values, d: Optional[int] = None) -> np.ndarray:
    """Return ``values`` as a finite 1-D float64 array (copy, read-only)."""
    arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    if arr.size < 1:
        raise ValueError("signal must have dimension >= 1")
    if not np.all(np.isfinite(arr)):
        raise ValueError("signal entries must be finite")
    if d is not None and arr.size != d:
        raise ValueError(f"signal has dimension {arr.size}, expected {d}")
    arr.flags.writeable = False
    return arr


def index_set(indices, n: Optional[int] = None) -> np.ndarray:
    """Sorted unique int64 index array, checked against ``[0, n)`` when given."""
    idx = np.unique(np.asarray(indices, dtype=np.int64).reshape(-1))
    if n is not None and idx.size and (idx[0] < 0 or idx[-1] >= n):
        raise ValueError(f"indices must lie in [0, {n})")
    idx.flags.writeable = False
    return idx


@dataclass(frozen=True)
class Measurement:
    index: int
    covariate: np.ndarray
    response: float
    true_corruption: float = 0.0


@dataclass(frozen=True)
class MeasurementSet:
    """``n`` measurements ``(x_i, y_i)`` with optional synthetic ground truth.

    ``eta`` and ``theta_star`` are only known for synthetic data; ``corrupted``
    holds the indices the adversary selected (possibly with zero corruption).
    """

    X: np.ndarray
    y: np.ndarray
    eta: Optional[np.ndarray] = None
    corrupted: np.ndarray = field(default_factory=lambda: index_set([]))
    theta_star: Optional[np.ndarray] = None

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] < 1:
            raise ValueError("covariates must form an (n, d) array with d >= 1")
        y = np.ascontiguousarray(self.y, dtype=np.float64).reshape(-1)
        if y.shape[0] != X.shape[0]:
            raise ValueError("number of responses does not match covariates")
        eta = None
        if self.eta is not None:
            eta = np.ascontiguousarray(self.eta, dtype=np.float64).reshape(-1)
            if eta.shape != y.shape:
                raise ValueError("eta must have one entry per measurement")
            eta.flags.writeable = False
        corrupted = index_set(self.corrupted, X.shape[0])
        theta_star = None
        if self.theta_star is not None:
            theta_star = as_signal(self.theta_star, X.shape[1])
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "corrupted", corrupted)
        object.__setattr__(self, "theta_star", theta_star)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def k(self) -> int:
        return int(self.corrupted.size)

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> Measurement:
        i = int(i)
        eta = 0.0 if self.eta is None else float(self.eta[i])
        return Measurement(i, self.X[i], float(self.y[i]), eta)

    def all_indices(self) -> np.ndarray:
        return index_set(np.arange(self.n))


@dataclass(frozen=True)
class RegimeParams:
    k: int
    n: int

    def __post_init__(self):
        if not 0 <= self.k < self.n:
            raise ValueError(f"need 0 <= k < n, got k={self.k}, n={self.n}")

    @property
    def epsilon(self) -> float:
        return self.k / self.n


def sign_invariant_distance(a, b) -> float:
    """``min(||a - b||, ||a + b||)``; the sign of a phase-retrieval signal is unidentifiable."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(min(np.linalg.norm(a - b), np.linalg.norm(a + b)))


def delta(regime: RegimeParams) -> float:
    """``eps * sqrt(ln(1/eps)) * ln(eps*n)^2`` with ``eps = k/n``; zero when ``k = 0``."""
    if regime.k == 0:
        return 0.0
    eps = regime.epsilon
    return eps * math.sqrt(math.log(1.0 / eps)) * math.log(eps * regime.n) ** 2


def in_favorable_regime(sequence_probe: Sequence[RegimeParams]) -> bool:
    """Finite-sample surrogate for membership of ``{k_n}`` in the favorable regime.

    True iff every probe point has ``k/n < 1/2`` and ``delta`` does not increase
    over the last half of the probe.  A heuristic only: the real condition is a
    limit as ``n -> infinity``.
    """
    probe = list(sequence_probe)
    if not probe:
        raise ValueError("regime probe must be nonempty")
    ns = [r.n for r in probe]
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("probe sample sizes must be strictly increasing")
    if any(r.epsilon >= 0.5 for r in probe):
        return False
    tail = [delta(r) for r in probe[len(probe) // 2:]]
    return all(b <= a for a, b in zip(tail, tail[1:]))


DEFAULT_CONSTANTS = (1.0, 1.0, 1.0)


def psi_diagnostic(regime: RegimeParams, eta_max: float,
                   constants=DEFAULT_CONSTANTS) -> float:
    """Error-bound factor ``psi(k, n, eta)`` with caller-supplied absolute constants.

    Reported for diagnostics only.  Raises ``ValueError`` when the denominator is
    not positive, i.e. the regime is outside the range where the bound applies.
    """
    if eta_max < 0:
        raise ValueError("eta_max must be non-negative")
    c1, c2, c3 = constants
    dlt = delta(regime)
    eps = regime.epsilon
    denom = (1.0 - 3.0 * eps) * (c2 - dlt) - c3 * dlt
    if denom <= 0:
        raise ValueError("regime outside the error bound's applicability")
    return math.sqrt((c1 + eta_max) * (1.0 + dlt)) / denom


def iteration_bounds(sum_y2: float, regime: RegimeParams, beta: float) -> dict:
    """Both published outer-iteration bounds for a given ``beta``.

    ``"n_minus_k"`` uses the denominator ``4 (n - k) beta`` and ``"n_minus_2k"``
    uses ``4 (n - 2k) beta``; ``"looser"`` is the larger of the two.
    """
    n, k = regime.n, regime.k
    out = {"n_minus_k": sum_y2 / (4.0 * (n - k) * beta)}
    out["n_minus_2k"] = (sum_y2 / (4.0 * (n - 2 * k) * beta)
                         if n - 2 * k > 0 else math.inf)
    out["looser"] = max(out["n_minus_k"], out["n_minus_2k"])
    return out
