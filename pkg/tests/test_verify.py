import json
import math

import numpy as np
import pytest

from robust_phase import verify
from robust_phase.altmin import select_subset
from robust_phase.core import MeasurementSet
from robust_phase.datagen import RngSeed, generate_clean
from robust_phase.verify import (CheckReport, brute_force_select, concentration_probe,
                                 finite_diff_gradient, finite_diff_hessian_qform,
                                 gaussian_moment_constant, max_chisq_tail_check)


def test_fd_gradient_scalar_quartic():
    data = MeasurementSet([[1.0]], [0.0])
    assert finite_diff_gradient(data, [0], [2.0], 1e-5)[0] == pytest.approx(8.0, abs=1e-6)
    assert abs(finite_diff_gradient(data, [0], [0.0], 1e-5)[0]) <= 1e-9


def test_fd_hessian_scalar_quartic():
    # f = theta^4 / 4, f'' = 3 theta^2
    data = MeasurementSet([[1.0]], [0.0])
    assert finite_diff_hessian_qform(data, [0], [2.0], [1.0]) == pytest.approx(12.0, rel=1e-6)


def test_fd_gradient_rejects_bad_step():
    with pytest.raises(ValueError):
        finite_diff_gradient(MeasurementSet([[1.0]], [0.0]), [0], [1.0], 0.0)


class TestBruteForce:
    data = generate_clean(2, 8, [1.0, -0.5], RngSeed(3))

    def test_full_size_is_identity(self):
        s = np.array([0, 2, 3, 5, 7])
        np.testing.assert_array_equal(brute_force_select(self.data, s, [0.3, 0.1], 5), s)

    def test_size_one(self):
        s = np.arange(8)
        th = np.array([0.3, 0.1])
        res = (self.data.y - (self.data.X @ th) ** 2) ** 2
        np.testing.assert_array_equal(brute_force_select(self.data, s, th, 1), [np.argmin(res)])

    def test_matches_sorting(self):
        gen = RngSeed(4).generator()
        noisy = MeasurementSet(self.data.X, self.data.y + gen.uniform(-1, 1, 8))
        th = gen.standard_normal(2)
        np.testing.assert_array_equal(brute_force_select(noisy, np.arange(8), th, 4),
                                      select_subset(noisy, np.arange(8), th, 2))

    def test_guards(self):
        with pytest.raises(ValueError):
            brute_force_select(self.data, np.arange(8), [0.0, 0.0], 0)
        big = generate_clean(1, 40, [1.0], RngSeed(0))
        with pytest.raises(ValueError, match="guard"):
            brute_force_select(big, np.arange(40), [0.0], 20)


class TestChiSqTail:
    def test_large_n_passes(self):
        rep = max_chisq_tail_check(10_000, 1000, RngSeed(1))
        assert rep.passed and rep.observed < 0.01

    def test_vacuous_at_two(self):
        assert max_chisq_tail_check(2, 200, RngSeed(2)).passed

    def test_has_power(self):
        # at factor 2 the maximum of n squared Gaussians sits above 2 ln n most of the time
        rep = max_chisq_tail_check(1000, 200, RngSeed(3), factor=2.0)
        assert not rep.passed

    def test_validation(self):
        with pytest.raises(ValueError):
            max_chisq_tail_check(1, 200, RngSeed(0))
        with pytest.raises(ValueError):
            max_chisq_tail_check(10, 10, RngSeed(0))


class TestMoments:
    @pytest.mark.parametrize("key", sorted(verify.MOMENT_TABLE))
    def test_table_matches_quadrature(self, key):
        assert gaussian_moment_constant(*key) == pytest.approx(verify.MOMENT_TABLE[key], abs=1e-12)

    def test_quadrature_known_values(self):
        # E g^8 = 105, and for z1 = 1/sqrt(2), E <x,z>^2 x1^2 = z1^2 * 3 + (1 - z1^2) = 2
        assert gaussian_moment_constant(8, 0, 1.0) == pytest.approx(105.0)
        assert gaussian_moment_constant(2, 2, 1 / math.sqrt(2)) == pytest.approx(2.0)

    @pytest.mark.parametrize("p,q,z,target,tol", [
        (4, 0, np.eye(4)[0], 3.0, 0.15),
        (2, 2, None, 1.0, 0.1),
        (3, 1, None, 0.0, 0.1),
    ])
    def test_probe_examples(self, p, q, z, target, tol):
        rep = concentration_probe(4, 100_000, p, q, 1, RngSeed(p * 10 + q), z=z)
        assert rep.passed
        assert rep.observed <= tol
        assert gaussian_moment_constant(p, q, 1.0 if z is not None else 0.0) == pytest.approx(target)

    def test_probe_validation(self):
        with pytest.raises(ValueError):
            concentration_probe(3, 100, 1, 3, 1, RngSeed(0))


def test_report_json():
    rep = CheckReport("x", np.bool_(True), np.float64(0.5), 1, "detail")
    rec = json.loads(rep.to_json())
    assert rec == {"name": "x", "passed": True, "observed": 0.5, "threshold": 1.0}


def test_run_checks_flattens_lists():
    reg = {"one": lambda: CheckReport("a", True, 0, 1),
           "many": lambda: [CheckReport("b", True, 0, 1), CheckReport("c", False, 2, 1)]}
    assert [r.name for r in verify.run_checks(reg)] == ["a", "b", "c"]


def test_registry_names():
    assert set(verify.CHECKS) == {"gradient", "hessian", "selection", "chisq_tail", "moments"}


def test_gradient_check_catches_wrong_gradient(monkeypatch):
    from robust_phase import objective
    real = objective.gradient
    monkeypatch.setattr(objective, "gradient", lambda d, s, t: 1.01 * real(d, s, t))
    assert not verify.check_gradient(instances=5).passed
