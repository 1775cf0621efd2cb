import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_phase import oracle
from robust_phase.core import MeasurementSet, sign_invariant_distance
from robust_phase.datagen import (CorruptionPlan, RngSeed, apply_corruption, generate_clean,
                                  random_unit_vector)
from robust_phase.oracle import (OracleConfig, OracleDivergence, gradient_descent, kappa_sq_moments,
                                 kappa_sq_trace, run_oracle, signal_orthogonal_split, step_size)


def clean_set(d, n, seed):
    base = RngSeed(seed)
    return generate_clean(d, n, random_unit_vector(d, base.child(0)), base.child(1))


def shifted(data, c, seed):
    return apply_corruption(data, CorruptionPlan.constant(c, data.n), RngSeed(seed, (7,)))


class TestKappaMoments:
    def test_constant_responses(self):
        data = MeasurementSet(np.ones((4, 2)), np.ones(4))
        assert kappa_sq_moments(data, np.arange(4)) == pytest.approx(1 / 3)

    def test_clean(self):
        data = clean_set(5, 100_000, 0)
        assert kappa_sq_moments(data, data.all_indices()) == pytest.approx(1.0, abs=0.05)

    def test_negative_shift(self):
        data = shifted(clean_set(5, 100_000, 1), -3.6, 1)
        assert kappa_sq_moments(data, data.all_indices()) <= 0

    def test_needs_two(self):
        data = MeasurementSet([[1.0]], [1.0])
        with pytest.raises(ValueError):
            kappa_sq_moments(data, [0])


class TestKappaTrace:
    def test_d1(self):
        data = clean_set(1, 100_000, 2)
        assert kappa_sq_trace(data, data.all_indices()) == pytest.approx(1.0, abs=0.05)

    def test_d10(self):
        data = clean_set(10, 100_000, 3)
        assert kappa_sq_trace(data, data.all_indices()) == pytest.approx(1.0, abs=0.05)

    def test_shift(self):
        data = shifted(clean_set(10, 100_000, 4), 1.5, 4)
        assert kappa_sq_trace(data, data.all_indices()) == pytest.approx(1.5, abs=0.1)


class TestSplit:
    @pytest.mark.parametrize("kappa", [0.5, 1.0, 2.0])
    def test_scaled_truth(self, kappa):
        ts = np.array([0.6, 0.8])
        a, b = signal_orthogonal_split(kappa * ts, ts, kappa)
        assert a == pytest.approx(kappa ** 2)
        # literal display: theta - <theta, kappa ts> ts with ||ts|| = 1
        assert b == pytest.approx(kappa * abs(1 - kappa), abs=1e-15)

    def test_orthogonal(self):
        a, b = signal_orthogonal_split([0.0, 3.0], [1.0, 0.0], 1.3)
        assert a == 0 and b == pytest.approx(3.0)

    def test_truth(self):
        assert signal_orthogonal_split([1.0, 0.0], [1.0, 0.0], 1.0) == (1.0, 0.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            signal_orthogonal_split([1.0], [0.0], 1.0)
        with pytest.raises(ValueError):
            signal_orthogonal_split([1.0], [1.0], 0.0)


def test_scalar_trace_converges_to_two(backend):
    theta, _ = gradient_descent(np.array([[1.0]]), np.array([4.0]), np.array([1.0]), 0.1, 200)
    assert theta[0] == pytest.approx(2.0, abs=1e-12)


def test_step_size():
    assert step_size(np.array([2.0, 4.0, -1.0]), 0.3) == pytest.approx(0.1)
    assert step_size(np.array([-1.0, 0.0]), 0.1) == pytest.approx(0.1 / 1e-8)


def test_config_validation():
    assert OracleConfig().iterations(10) == math.ceil(40 * math.log(10))
    assert OracleConfig().iterations(1) == math.ceil(40 * math.log(2))
    assert OracleConfig(max_iters_T=7).iterations(10) == 7
    for kw in [dict(step_scale_c=0), dict(max_iters_T=0), dict(grad_tol=-1),
               dict(kappa_estimator="median")]:
        with pytest.raises(ValueError):
            OracleConfig(**kw)


def test_convex_branch(backend):
    data = shifted(clean_set(4, 2000, 5), -3.6, 5)
    res = run_oracle(data, data.all_indices(), OracleConfig(), RngSeed(0))
    assert res.kappa_sq <= 0
    assert res.branch == "convex_zero" and np.all(res.theta == 0) and res.iters_run == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(-4.0, 2.0))
def test_branch_dichotomy(seed, c):
    data = shifted(clean_set(3, 200, seed), c, seed)
    res = run_oracle(data, data.all_indices(), OracleConfig(max_iters_T=30), RngSeed(seed, (3,)))
    is_zero = bool(np.all(res.theta == 0))
    assert is_zero == (res.kappa_sq <= 0)


def test_initialization_norm(monkeypatch):
    seen = {}
    real = oracle.gradient_descent

    def spy(X, y, theta0, *a, **kw):
        seen["theta0"] = np.array(theta0)
        return real(X, y, theta0, *a, **kw)

    monkeypatch.setattr(oracle, "gradient_descent", spy)
    data = clean_set(6, 500, 6)
    res = run_oracle(data, data.all_indices(), OracleConfig(max_iters_T=3), RngSeed(1))
    assert np.linalg.norm(seen["theta0"]) == pytest.approx(math.sqrt(res.kappa_sq), rel=1e-14)


def test_clean_convergence(backend):
    hits = 0
    for seed in range(20):
        data = clean_set(10, 2000, seed)
        res = run_oracle(data, data.all_indices(), OracleConfig(max_iters_T=400),
                         RngSeed(seed, (2,)))
        hits += sign_invariant_distance(res.theta, data.theta_star) <= 1e-3
    assert hits >= 20


def _trajectories(seeds, T=400):
    out = []
    for seed in seeds:
        data = clean_set(10, 2000, seed)
        res = run_oracle(data, data.all_indices(),
                         OracleConfig(max_iters_T=T, record_trajectory=True, grad_tol=0.0),
                         RngSeed(seed, (2,)), kappa=1.0)
        out.append(res.trajectory)
    return out


@pytest.fixture(scope="module")
def trajectories():
    return _trajectories(range(20))


def test_signal_ratio_eventually_non_decreasing(trajectories):
    ok = 0
    for traj in trajectories:
        ratio = np.array([p.a_t / p.b_t if p.b_t > 0 else np.inf for p in traj])
        # from the first step the orthogonal part is below 1e-6 the ratio is noise-level
        live = ratio[: next((i for i, p in enumerate(traj) if p.b_t < 1e-6), len(traj))]
        diffs = np.diff(live)
        # some t0 after which the ratio never decreases
        t0 = max((i + 1 for i, dlt in enumerate(diffs) if dlt < 0), default=0)
        ok += t0 <= 50 and len(live) - t0 >= 20
    assert ok >= 18


def test_linear_convergence_after_burn_in(trajectories):
    ok = 0
    for traj in trajectories:
        dist = np.array([p.dist for p in traj])
        live = dist[dist > 1e-9]
        ratios = live[1:] / live[:-1]
        bad = np.flatnonzero(ratios >= 1)
        t_burn = 0 if bad.size == 0 else bad[-1] + 1
        ok += t_burn <= 200 and ratios[t_burn:].size > 0 and ratios[t_burn:].max() < 1
    assert ok >= 18


def test_displaced_minimum_under_constant_shift():
    hits = 0
    for seed in range(5):
        data = shifted(clean_set(10, 10_000, seed), 1.5, seed)
        res = run_oracle(data, data.all_indices(), OracleConfig(max_iters_T=1000),
                         RngSeed(seed, (2,)))
        assert res.iters_run < 1000
        hits += sign_invariant_distance(res.theta, math.sqrt(1.5) * data.theta_star) <= 0.05
    assert hits >= 4


def test_divergence_reports_iteration(backend):
    data = clean_set(3, 50, 8)
    with pytest.raises(OracleDivergence) as info:
        run_oracle(data, data.all_indices(), OracleConfig(step_scale_c=1e6), RngSeed(0))
    assert info.value.iteration >= 1
    assert f"iteration {info.value.iteration}" in str(info.value)


def test_trajectory_file(tmp_path):
    data = clean_set(3, 100, 9)
    res = run_oracle(data, data.all_indices(),
                     OracleConfig(max_iters_T=5, grad_tol=0, record_trajectory=True), RngSeed(0))
    assert [p.iter for p in res.trajectory] == list(range(6))
    path = tmp_path / "traj.csv"
    oracle.write_trajectory(path, res.trajectory)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(oracle.TRAJECTORY_HEADER) and len(lines) == 7
