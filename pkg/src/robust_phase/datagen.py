"""Synthetic Gaussian-design measurements and corruption adversaries.

Randomness comes from numpy's ``PCG64`` bit generator keyed by
``SeedSequence(seed, spawn_key=stream)``; Gaussian draws use numpy's ziggurat
sampler (``Generator.standard_normal``).  The same ``(seed, stream)`` reproduces
a dataset bit for bit on one build.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np

from .core import MeasurementSet, as_signal


@dataclass(frozen=True)
class RngSeed:
    seed: int
    stream: Tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "stream", tuple(int(s) for s in self.stream))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *stream) -> "RngSeed":
        return RngSeed(self.seed, self.stream + tuple(stream))


def as_generator(rng) -> np.random.Generator:
    """Accept a :class:`RngSeed`, a ``Generator`` or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngSeed):
        return rng.generator()
    return RngSeed(int(rng)).generator()


def random_unit_vector(d: int, rng) -> np.ndarray:
    """Uniform draw from the unit sphere in R^d (normalised Gaussian)."""
    gen = as_generator(rng)
    while True:
        u = gen.standard_normal(d)
        nrm = np.linalg.norm(u)
        if nrm > 0:
            return u / nrm


# -- corruption plans ----------------------------------------------------------

# sampler(k, generator) -> eta values; never sees the covariates
Sampler = Callable[[int, np.random.Generator], np.ndarray]
# rule(X, y, k, generator) -> (indices, eta)
AdaptiveRule = Callable[[np.ndarray, np.ndarray, int, np.random.Generator],
                        Tuple[np.ndarray, np.ndarray]]

INDEPENDENT_KINDS = ("independent_uniform", "independent_constant", "independent_custom")


@dataclass(frozen=True)
class CorruptionPlan:
    """How many responses the adversary touches and how.

    Independent kinds pick ``k`` indices uniformly at random and draw ``eta`` with
    no access to the covariates.  ``strong_adaptive`` hands the whole dataset to a
    rule that chooses both the indices and the corruption values.
    """

    kind: str = "none"
    k: int = 0
    params: Tuple[float, ...] = ()
    sampler: Optional[Sampler] = field(default=None, compare=False)
    rule: Optional[AdaptiveRule] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("none", "strong_adaptive") + INDEPENDENT_KINDS:
            raise ValueError(f"unknown corruption kind {self.kind!r}")
        if self.k < 0:
            raise ValueError("k must be non-negative")
        if self.kind == "none" and self.k != 0:
            raise ValueError("plan 'none' corrupts nothing; use k=0")
        if self.kind == "independent_custom" and self.sampler is None:
            raise ValueError("independent_custom needs a sampler")
        if self.kind == "strong_adaptive" and self.rule is None:
            raise ValueError("strong_adaptive needs a rule")

    @property
    def selection(self) -> str:
        return "adversarial_rule" if self.kind == "strong_adaptive" else "random_uniform"

    @classmethod
    def none(cls):
        return cls()

    @classmethod
    def uniform(cls, lo: float, hi: float, k: int):
        return cls("independent_uniform", k, (float(lo), float(hi)))

    @classmethod
    def constant(cls, c: float, k: int):
        return cls("independent_constant", k, (float(c),))

    @classmethod
    def custom(cls, sampler: Sampler, k: int):
        return cls("independent_custom", k, sampler=sampler)

    @classmethod
    def adaptive(cls, rule: AdaptiveRule, k: int):
        return cls("strong_adaptive", k, rule=rule)

    def draw(self, k: int, gen: np.random.Generator) -> np.ndarray:
        if self.kind == "independent_uniform":
            lo, hi = self.params
            return gen.uniform(lo, hi, size=k)
        if self.kind == "independent_constant":
            return np.full(k, self.params[0])
        if self.kind == "independent_custom":
            eta = np.asarray(self.sampler(k, gen), dtype=np.float64).reshape(-1)
            if eta.shape != (k,):
                raise ValueError(f"sampler returned {eta.shape[0]} values, expected {k}")
            return eta
        raise ValueError(f"plan {self.kind!r} has no independent sampler")


# -- generation ------------------------------------------------------------------

def generate_clean(d: int, n: int, theta_star, rng) -> MeasurementSet:
    """Gaussian design ``x_i ~ N(0, I_d)`` with responses ``<x_i, theta*>^2``."""
    if d < 1 or n < 1:
        raise ValueError("need d >= 1 and n >= 1")
    theta_star = as_signal(theta_star, d)
    X = as_generator(rng).standard_normal((n, d))
    y = (X @ theta_star) ** 2
    return MeasurementSet(X, y, eta=np.zeros(n), theta_star=theta_star)


def _with_corruption(clean: MeasurementSet, idx, eta_vals) -> MeasurementSet:
    idx = np.asarray(idx, dtype=np.int64)
    eta = np.zeros(clean.n) if clean.eta is None else clean.eta.copy()
    y = clean.y.copy()
    eta[idx] += eta_vals
    y[idx] += eta_vals
    corrupted = np.union1d(clean.corrupted, idx)
    return MeasurementSet(clean.X, y, eta=eta, corrupted=corrupted,
                          theta_star=clean.theta_star)


def apply_corruption(clean: MeasurementSet, plan: CorruptionPlan, rng) -> MeasurementSet:
    """Corrupt exactly ``plan.k`` responses; covariates are never touched."""
    if plan.k > clean.n:
        raise ValueError("k exceeds n")
    if plan.k == 0 or plan.kind == "none":
        return clean
    gen = as_generator(rng)
    if plan.kind == "strong_adaptive":
        idx, eta_vals = plan.rule(clean.X, clean.y, plan.k, gen)
        idx = np.asarray(idx, dtype=np.int64)
        if np.unique(idx).size != plan.k:
            raise ValueError("adaptive rule must select exactly k distinct indices")
        return _with_corruption(clean, idx, np.asarray(eta_vals, dtype=np.float64))
    idx = np.sort(gen.choice(clean.n, size=plan.k, replace=False))
    return _with_corruption(clean, idx, plan.draw(plan.k, gen))


def _signflip_rule(X, y, k, gen=None):
    # largest responses first; ties by ascending index
    order = np.lexsort((np.arange(y.size), -y))
    idx = np.sort(order[:k])
    return idx, -y[idx]


def strong_adversary_signflip(clean: MeasurementSet, k: int) -> MeasurementSet:
    """Zero out the ``k`` largest responses (``eta_i = -y_i``)."""
    if k > clean.n:
        raise ValueError("k exceeds n")
    if k == 0:
        return clean
    return apply_corruption(clean, CorruptionPlan.adaptive(_signflip_rule, k), 0)


# -- columnar text format ---------------------------------------------------------

def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def dump_dataset(data: MeasurementSet, path, comments=()) -> None:
    """Write ``data`` as text: header ``d n k`` then ``index y eta x_1 .. x_d`` rows.

    ``#`` lines after the header carry ``theta_star`` (when known) and any extra
    ``comments``; readers skip lines starting with ``#`` other than those.
    """
    eta = np.zeros(data.n) if data.eta is None else data.eta
    lines = [f"{data.d} {data.n} {data.k}"]
    if data.theta_star is not None:
        lines.append("# theta_star " + " ".join(_fmt(v) for v in data.theta_star))
    if data.k:
        lines.append("# corrupted " + " ".join(str(i) for i in data.corrupted))
    lines.extend(f"# {c}" for c in comments)
    for i in range(data.n):
        row = [str(i), _fmt(data.y[i]), _fmt(eta[i])]
        row.extend(_fmt(v) for v in data.X[i])
        lines.append(" ".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_dataset(path) -> MeasurementSet:
    text = Path(path).read_text().splitlines()
    rows = [ln for ln in text if ln.strip()]
    if not rows:
        raise ValueError(f"{path}: empty dataset file")
    try:
        d, n, k = (int(t) for t in rows[0].split())
    except ValueError as exc:
        raise ValueError(f"{path}: bad header {rows[0]!r}") from exc
    theta_star = None
    corrupted = None
    body = []
    for ln in rows[1:]:
        if ln.startswith("#"):
            tok = ln[1:].split()
            if tok and tok[0] == "theta_star":
                theta_star = np.array([float(t) for t in tok[1:]])
            elif tok and tok[0] == "corrupted":
                corrupted = [int(t) for t in tok[1:]]
            continue
        body.append(ln.split())
    if len(body) != n or any(len(r) != d + 3 for r in body):
        raise ValueError(f"{path}: expected {n} rows of {d + 3} columns")
    table = np.array(body, dtype=np.float64)
    order = np.argsort(table[:, 0], kind="stable")
    table = table[order]
    if not np.array_equal(table[:, 0], np.arange(n)):
        raise ValueError(f"{path}: measurement indices must be 0..n-1")
    eta = table[:, 2]
    if corrupted is None:
        corrupted = np.flatnonzero(eta)
    if len(corrupted) != k:
        raise ValueError(f"{path}: header k={k} but {len(corrupted)} corrupted rows")
    return MeasurementSet(table[:, 3:], table[:, 1], eta=eta, corrupted=corrupted,
                          theta_star=theta_star)


def digest(data: MeasurementSet) -> str:
    y = data.y
    return (f"n={data.n} d={data.d} k={data.k} "
            f"y_min={y.min():.6g} y_max={y.max():.6g}")
