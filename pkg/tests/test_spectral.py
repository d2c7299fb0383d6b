import math

import numpy as np
import pytest

from galu._rng import derive_seed
from galu.checks import check_min_eig_concentration
from galu.datagen import gen_gaussian, gen_sphere
from galu.errors import NotDiverseError
from galu.features import FeatureMatrix, build_feature_matrix
from galu.model import GateBank, LabeledSet
from galu.spectral import (
    chernoff_width,
    khatri_rao_bound,
    lambda_exact,
    lambda_mc,
    lambda_min_gram,
    numerical_rank,
    sigma_min,
    spectral_norm_sq,
    spectral_report,
)


def pair(cos):
    x = np.array([1.0, 0.0])
    y = np.array([cos, math.sqrt(1 - cos**2)])
    return LabeledSet(np.vstack([x, y]), np.zeros(2), unit_norm=True)


class TestLambdaExact:
    def test_single_unit(self):
        assert lambda_exact(LabeledSet(np.array([[0.0, 1.0]]), np.zeros(1))) == pytest.approx(0.5)

    def test_antipodal(self):
        assert lambda_exact(pair(-1.0)) == pytest.approx(0.5, abs=1e-12)

    def test_sixty_degrees(self):
        # eigenvalues of [[1/2, 1/6], [1/6, 1/2]]
        assert lambda_exact(pair(0.5)) == pytest.approx(1 / 3, abs=1e-12)


class TestLambdaMC:
    def test_single_point(self):
        data = LabeledSet(np.array([[0.6, 0.8]]), np.zeros(1))
        est, se = lambda_mc(data, 10, 400, seed=0)
        assert abs(est - 0.5) <= 3 * se

    def test_agrees_with_exact(self):
        data = gen_sphere(5, 3, 1)
        est, se = lambda_mc(data, 20, 400, seed=2)
        assert abs(est - lambda_exact(data)) <= 3 * se

    def test_deterministic(self):
        data = gen_sphere(4, 3, 3)
        assert lambda_mc(data, 5, 2, seed=9) == lambda_mc(data, 5, 2, seed=9)

    def test_needs_two_trials(self):
        with pytest.raises(ValueError):
            lambda_mc(gen_sphere(2, 2, 0), 5, 1, 0)

    def test_error_decays_like_inverse_sqrt(self):
        data = gen_sphere(5, 3, 4)
        exact = lambda_exact(data)
        levels = (100, 400, 1600)
        med = []
        for trials in levels:
            errs = [abs(lambda_mc(data, 4, trials, derive_seed(5, trials, r))[0] - exact) for r in range(20)]
            med.append(np.median(errs))
        for a, b in zip(med, med[1:]):
            assert 1 / 3 <= b / a <= 3 / 4


class TestKhatriRao:
    def test_single_unit(self):
        data = LabeledSet(np.array([[1.0, 0.0, 0.0]]), np.zeros(1))
        assert khatri_rao_bound(data) == pytest.approx(1 / (2 * math.pi))
        assert khatri_rao_bound(data) <= lambda_exact(data)

    def test_duplicated_rows(self):
        x = gen_sphere(1, 3, 0).xs
        assert khatri_rao_bound(LabeledSet(np.vstack([x, x]), np.zeros(2))) == 0.0

    @pytest.mark.parametrize("seed", range(10))
    def test_lower_bounds_lambda(self, seed):
        data = gen_sphere(4, 3, seed)
        assert khatri_rao_bound(data) <= lambda_exact(data) + 1e-12


class TestChernoffWidth:
    def test_hand_value(self):
        data = LabeledSet(np.array([[1.0, 0.0]]), np.zeros(1))
        assert chernoff_width(data, 1 / math.e) == 16

    def test_not_diverse(self):
        x = gen_sphere(1, 3, 0).xs
        with pytest.raises(NotDiverseError):
            chernoff_width(LabeledSet(np.vstack([x, x]), np.zeros(2)), 0.1)

    def test_delta_range(self):
        with pytest.raises(ValueError):
            chernoff_width(gen_sphere(2, 2, 0), 1.5)

    def test_concentration_event_frequency(self):
        res = check_min_eig_concentration(m=50, d=25, delta=0.1, trials=200, seed=0)
        assert res.passed, res.line()


class TestSigmaMin:
    def test_zero_row(self):
        xs = np.vstack([np.eye(3), np.zeros((1, 3))])
        fm = build_feature_matrix(LabeledSet(xs, np.zeros(4)), GateBank(np.ones((3, 2))))
        assert sigma_min(fm) == 0.0

    def test_identity(self):
        fm = build_feature_matrix(LabeledSet(np.eye(4), np.zeros(4)), GateBank(np.ones((4, 1))))
        assert sigma_min(fm) == pytest.approx(1.0)

    def test_more_rows_than_columns(self):
        fm = FeatureMatrix(np.ones((5, 2)), np.ones((5, 1)))
        assert sigma_min(fm) == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_gram_eigenvalue(self, seed):
        data = gen_gaussian(10, 4, seed)
        fm = build_feature_matrix(data, GateBank.draw(4, 6, seed))
        assert sigma_min(fm) ** 2 == pytest.approx(lambda_min_gram(fm), rel=1e-6)


class TestReport:
    def test_invariants(self):
        data = gen_sphere(8, 5, 0)
        gates = GateBank.draw(5, 40, 1)
        rep = spectral_report(data, gates, trials=50, seed=2, delta=0.1)
        assert rep.lambda_min_H == pytest.approx(rep.sigma_min_xbar**2, rel=1e-6)
        assert rep.khatri_rao_bound <= rep.lambda_X_exact + 1e-6
        assert rep.chernoff_k == chernoff_width(data, 0.1)
        assert rep.lambda_X_mc_stderr >= 0

    def test_spectral_norm(self):
        xs = np.diag([3.0, 1.0])
        assert spectral_norm_sq(xs) == pytest.approx(9.0)

    def test_numerical_rank(self):
        data = gen_gaussian(30, 4, 0)
        assert numerical_rank(build_feature_matrix(data, GateBank.draw(4, 3, 0))) == 12
        assert numerical_rank(build_feature_matrix(data, GateBank.draw(4, 10, 0))) == 30
