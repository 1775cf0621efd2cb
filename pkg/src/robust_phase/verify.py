"""Independent oracles and Monte Carlo checks.

Nothing here reuses the analytic derivative or sorting code paths it is meant
to check: derivatives come from central differences of the loss, subset
selection from exhaustive enumeration, and Gaussian moment constants from
Gauss-Hermite quadrature.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass
from typing import Callable, Dict

import numpy as np

from . import objective
from .core import MeasurementSet
from .datagen import RngSeed, as_generator, generate_clean, random_unit_vector

BRUTE_FORCE_LIMIT = 10 ** 6


@dataclass(frozen=True)
class CheckReport:
    name: str
    passed: bool
    observed: float
    threshold: float
    detail: str = ""

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(self, "observed", float(self.observed))
        object.__setattr__(self, "threshold", float(self.threshold))

    def to_json(self) -> str:
        rec = asdict(self)
        rec.pop("detail")
        return json.dumps(rec)


def finite_diff_gradient(data: MeasurementSet, subset, theta, h: float = 1e-5) -> np.ndarray:
    """Central differences of :func:`objective.loss`, one coordinate at a time."""
    if not h > 0:
        raise ValueError("h must be positive")
    theta = np.asarray(theta, dtype=np.float64)
    g = np.empty_like(theta)
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = h
        g[j] = (objective.loss(data, subset, theta + e)
                - objective.loss(data, subset, theta - e)) / (2.0 * h)
    return g


def finite_diff_hessian_qform(data: MeasurementSet, subset, theta, v, h: float = 1e-4) -> float:
    """``(f(theta + h v) - 2 f(theta) + f(theta - h v)) / h^2``."""
    theta = np.asarray(theta, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    f0 = objective.loss(data, subset, theta)
    fp = objective.loss(data, subset, theta + h * v)
    fm = objective.loss(data, subset, theta - h * v)
    return (fp - 2.0 * f0 + fm) / (h * h)


def brute_force_select(data: MeasurementSet, s_tilde, theta, size: int) -> np.ndarray:
    """Exhaustive minimiser of ``sum_{i in U} (y_i - <x_i,theta>^2)^2`` over ``|U| = size``.

    Ties resolve to the lexicographically smallest index list.
    """
    s_tilde = np.sort(np.asarray(s_tilde, dtype=np.int64))
    if not 0 < size <= s_tilde.size:
        raise ValueError(f"size must be in [1, {s_tilde.size}]")
    if math.comb(s_tilde.size, size) > BRUTE_FORCE_LIMIT:
        raise ValueError("brute force guard exceeded: too many subsets")
    theta = np.asarray(theta, dtype=np.float64)
    f = {int(i): (float(data.y[i]) - float(data.X[i] @ theta) ** 2) ** 2 for i in s_tilde}
    best = None
    best_val = math.inf
    for combo in itertools.combinations(s_tilde.tolist(), size):
        val = math.fsum(f[i] for i in combo)
        if val < best_val:
            best, best_val = combo, val
    return np.array(best, dtype=np.int64)


def max_chisq_tail_check(n: int, trials: int, rng, factor: float = 8.0) -> CheckReport:
    """Monte Carlo estimate of ``P[max_i g_i^2 >= factor * ln n]`` against ``2/n``.

    Passes if the estimate is at most ``2/n`` plus three binomial standard errors
    (computed at ``p = min(2/n, 1)``).
    """
    if n < 2 or trials < 100:
        raise ValueError("need n >= 2 and trials >= 100")
    gen = as_generator(rng)
    level = factor * math.log(n)
    hits = 0
    chunk = max(1, 2_000_000 // n)
    done = 0
    while done < trials:
        b = min(chunk, trials - done)
        g = gen.standard_normal((b, n))
        hits += int(np.count_nonzero(np.max(g * g, axis=1) >= level))
        done += b
    p_hat = hits / trials
    p0 = min(2.0 / n, 1.0)
    thr = p0 + 3.0 * math.sqrt(p0 * (1.0 - p0) / trials)
    return CheckReport(f"max_chisq_tail[n={n},factor={factor:g}]", p_hat <= thr, p_hat, thr,
                       f"{hits}/{trials} trials reached {level:.4g}")


_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite_e.hermegauss(20)
_GH_WEIGHTS = _GH_WEIGHTS / math.sqrt(2.0 * math.pi)


def gaussian_moment_constant(p: int, q: int, z1: float) -> float:
    """``E[<x, z>^p x_1^q]`` for ``x ~ N(0, I)`` and unit ``z`` with first entry ``z1``.

    Writing ``<x, z> = z1 g + r h`` with ``r = sqrt(1 - z1^2)`` and ``g, h``
    independent standard normals reduces this to a 2-D Gauss-Hermite sum, exact
    for these polynomial degrees.
    """
    r = math.sqrt(max(1.0 - z1 * z1, 0.0))
    g = _GH_NODES[:, None]
    h = _GH_NODES[None, :]
    w = _GH_WEIGHTS[:, None] * _GH_WEIGHTS[None, :]
    return float(np.sum(w * (z1 * g + r * h) ** p * g ** q))


# (p, q, z1) -> C_pq; regenerate with gaussian_moment_constant(p, q, z1), which
# test_verify.py cross-checks against this table.
MOMENT_TABLE = {
    (4, 0, 1.0): 3.0,  # E g^4
    (2, 2, 0.0): 1.0,  # E h^2 g^2, independent coordinates
    (3, 1, 0.0): 0.0,  # E h^3 g, odd
    (2, 2, 1.0): 3.0,
    (3, 1, 1.0): 3.0,
}


def concentration_probe(d: int, n: int, p: int, q: int, trials: int, rng,
                        z=None) -> CheckReport:
    """Compare the sample average of ``<x_i, z>^p x_{i1}^q`` with its Gaussian value.

    ``z`` defaults to ``e_2`` (``e_1`` when ``d = 1``).  The band is three Monte
    Carlo standard errors of the pooled ``n * trials`` samples.
    """
    if p + q != 4 or p not in (2, 3, 4):
        raise ValueError("need p + q = 4 with p in {2, 3, 4}")
    if z is None:
        z = np.zeros(d)
        z[1 if d > 1 else 0] = 1.0
    z = np.asarray(z, dtype=np.float64)
    z = z / np.linalg.norm(z)
    gen = as_generator(rng)
    cpq = gaussian_moment_constant(p, q, float(z[0]))
    total = 0.0
    total_sq = 0.0
    for _ in range(trials):
        X = gen.standard_normal((n, d))
        s = (X @ z) ** p * X[:, 0] ** q
        total += math.fsum(s)
        total_sq += math.fsum(s * s)
    m = n * trials
    est = total / m
    var = max(total_sq / m - est * est, 0.0)
    band = 3.0 * math.sqrt(var / m)
    dev = abs(est - cpq)
    return CheckReport(f"concentration[p={p},q={q},z1={z[0]:g}]", dev <= band, dev, band,
                       f"estimate {est:.5g} vs C_pq {cpq:.5g}")


# -- check registry -------------------------------------------------------------------

def _random_instance(gen, d_max=8, n_max=32):
    d = int(gen.integers(1, d_max + 1))
    n = int(gen.integers(2, n_max + 1))
    ts = random_unit_vector(d, gen) * gen.uniform(0.5, 2.0)
    data = generate_clean(d, n, ts, gen)
    y = data.y + gen.uniform(-1.0, 1.0, size=n) * (gen.random(n) < 0.3)
    data = MeasurementSet(data.X, y)
    theta = gen.standard_normal(d)
    return data, theta


def check_gradient(instances: int = 100, seed: int = 11) -> CheckReport:
    """Analytic gradient vs central differences, norm-wise relative error <= 1e-6."""
    gen = RngSeed(seed).generator()
    worst = 0.0
    for _ in range(instances):
        data, theta = _random_instance(gen)
        idx = data.all_indices()
        g = objective.gradient(data, idx, theta)
        h = 1e-5 * (1.0 + np.linalg.norm(theta))
        fd = finite_diff_gradient(data, idx, theta, h)
        worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-300))
    return CheckReport("gradient_vs_finite_differences", worst <= 1e-6, worst, 1e-6)


def check_hessian(instances: int = 100, seed: int = 12) -> CheckReport:
    """``v^T H v`` vs second differences of the loss, relative error <= 1e-4.

    Relative to ``1/|U| sum |3<x,theta>^2 - y| <x,v>^2`` so instances where
    the terms cancel do not divide by ~0.
    """
    gen = RngSeed(seed).generator()
    worst = 0.0
    for _ in range(instances):
        data, theta = _random_instance(gen)
        v = gen.standard_normal(data.d)
        idx = data.all_indices()
        qf = objective.hessian_quadratic_form(data, idx, theta, v)
        fd = finite_diff_hessian_qform(data, idx, theta, v, 1e-4)
        p = data.X @ theta
        q = data.X @ v
        scale = np.mean(np.abs(3.0 * p * p - data.y) * q * q)
        worst = max(worst, abs(qf - fd) / scale)
    return CheckReport("hessian_qform_vs_second_differences", worst <= 1e-4, worst, 1e-4)


def check_selection(instances: int = 200, seed: int = 13) -> CheckReport:
    """Sorting-based selection equals exhaustive search on ``|S~| <= 12``."""
    from .altmin import select_subset

    gen = RngSeed(seed).generator()
    mismatches = 0
    for _ in range(instances):
        n = int(gen.integers(3, 13))
        k = int(gen.integers(0, (n - 1) // 2 + 1))
        d = int(gen.integers(1, 5))
        data = generate_clean(d, n, random_unit_vector(d, gen), gen)
        data = MeasurementSet(data.X, data.y + gen.uniform(-2, 2, size=n))
        s_tilde = np.arange(n)
        theta = gen.standard_normal(d)
        fast = select_subset(data, s_tilde, theta, k)
        slow = brute_force_select(data, s_tilde, theta, n - 2 * k)
        mismatches += int(not np.array_equal(fast, slow))
    return CheckReport("selection_vs_brute_force", mismatches == 0, mismatches, 0)


def _tail_checks():
    out = []
    for i, n in enumerate((100, 1000, 10000)):
        out.append(max_chisq_tail_check(n, 1000, RngSeed(21, (i,))))
    return out


def _moment_checks():
    return [
        concentration_probe(4, 100_000, 4, 0, 1, RngSeed(31), z=np.eye(4)[0]),
        concentration_probe(4, 100_000, 2, 2, 1, RngSeed(32)),
        concentration_probe(4, 100_000, 3, 1, 1, RngSeed(33)),
    ]


CHECKS: Dict[str, Callable] = {
    "gradient": check_gradient,
    "hessian": check_hessian,
    "selection": check_selection,
    "chisq_tail": _tail_checks,
    "moments": _moment_checks,
}


def run_checks(registry=None):
    """Run every registered check; each entry returns a report or a list of them."""
    registry = CHECKS if registry is None else registry
    reports = []
    for fn in registry.values():
        out = fn()
        reports.extend(out if isinstance(out, list) else [out])
    return reports
