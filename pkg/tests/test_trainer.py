import math

import numpy as np
import pytest

from galu._rng import make_rng
from galu.checks import check_perturbation, check_gd_bound, check_hinge_gradients
from galu.datagen import gen_gaussian, gen_sphere
from galu.errors import PreconditionError, ShapeError
from galu.features import build_feature_matrix
from galu.model import GateBank, LabeledSet, NaturalParams, galu_predict, relu_predict
from galu.solver import min_norm_solve
from galu.trainer import (
    OptimizerConfig,
    TrainTrace,
    finite_diff_check,
    gate_perturbation_gap,
    gd_convex,
    hinge_grad_equality,
    perturbation_bound,
    perturbation_width,
    gd_iterations,
    gd_step_size,
    train_natural,
    train_relu,
)


def instance(m, d, k, seed, normalized=False):
    data = gen_sphere(m, d, seed)
    gates = GateBank.draw(d, k, seed + 1)
    return data, gates, build_feature_matrix(data, gates, normalized=normalized)


class TestGdConvex:
    def test_zero_labels_stay_at_zero(self):
        _, _, fm = instance(10, 3, 6, 0)
        trace = gd_convex(fm, np.zeros(10), 5)
        np.testing.assert_array_equal(trace.objectives, 0.0)
        np.testing.assert_array_equal(trace.info["w_final"], 0.0)

    def test_scalar_one_step(self):
        # d = m = k = 1 with an open gate: eta = 1 and one step lands on y
        data = LabeledSet(np.array([[1.0]]), np.array([0.7]))
        fm = build_feature_matrix(data, GateBank(np.array([[2.0]])))
        trace = gd_convex(fm, data.ys, 1)
        assert trace.info["eta"] == pytest.approx(1.0)
        assert trace.records[0].objective == pytest.approx(0.5 * 0.49)
        assert trace.final_objective == pytest.approx(0.0, abs=1e-30)
        np.testing.assert_allclose(trace.info["w_final"], [0.7])

    def test_bound_and_monotone_decrease(self):
        data, _, fm = instance(30, 6, 20, 2)
        y = make_rng(3).standard_normal(30)
        trace = gd_convex(fm, y, 300)
        assert trace.info["full_rank"]
        obj = trace.objectives
        assert np.all(np.diff(obj) <= 1e-15)
        bound = trace.column("gd_bound")
        assert np.all(obj <= bound * (1 + 1e-9))
        np.testing.assert_array_equal(np.diff(trace.column("dist_to_opt")) <= 1e-12, True)

    def test_converges_to_min_norm_solution(self):
        _, _, fm = instance(15, 4, 10, 4)
        y = make_rng(5).standard_normal(15)
        trace = gd_convex(fm, y, 20000, log_every=1000)
        np.testing.assert_allclose(trace.info["w_final"], min_norm_solve(fm, y).w_star, atol=1e-6)

    def test_rank_deficient_has_no_distance(self):
        _, _, fm = instance(40, 3, 2, 6)
        trace = gd_convex(fm, make_rng(7).standard_normal(40), 3)
        assert not trace.info["full_rank"]
        assert trace.records[-1].dist_to_opt is None

    def test_step_size(self):
        _, _, fm = instance(10, 3, 4, 8)
        R = np.linalg.norm(fm.xs, 2) ** 2
        assert gd_step_size(fm) == pytest.approx(10 / (4 * R))

    def test_iteration_count(self):
        assert gd_iterations(0.1, 2.0, 5, 10, 1.0, 10.0) == 0
        t = gd_iterations(0.1, 2.0, 5, 10, 1.0, 1e-6)
        assert math.exp(-t * 0.1 / 4.0) * 1.0 * 1.0 <= 1e-6 * (1 + 1e-9)

    def test_shape_error(self):
        _, _, fm = instance(5, 2, 2, 0)
        with pytest.raises(ShapeError):
            gd_convex(fm, np.ones(4), 1)

    def test_gd_bound_check(self):
        res = check_gd_bound(n_instances=3, m=60, d=10, seed=0)
        assert res.passed, res.line()


class TestTrainNatural:
    def test_reparametrization_matches_convex_path(self):
        data, gates, fm = instance(12, 3, 5, 9, normalized=True)
        y = make_rng(10).standard_normal(12)
        data = data.with_labels(y)
        eta = 0.3
        init = NaturalParams(np.zeros((3, 5)), np.ones(5))
        cfg = OptimizerConfig(method="gd", step_size=eta, iterations=50)
        params, _ = train_natural(data, gates, init, cfg, train_alpha=False)
        ref = gd_convex(fm, y, 50, step_size=eta)
        np.testing.assert_allclose(params.stack(), ref.info["w_final"], atol=1e-12)

    def test_zero_iterations(self):
        data, gates, _ = instance(8, 3, 4, 11)
        init = NaturalParams(make_rng(12).standard_normal((3, 4)), np.ones(4))
        params, trace = train_natural(data, gates, init, OptimizerConfig(iterations=0))
        np.testing.assert_array_equal(params.W, init.W)
        assert len(trace.records) == 1

    def test_overparametrized_adam_fits(self):
        data = gen_gaussian(100, 10, 13)
        gates = GateBank.draw(10, 40, 14)
        rng = make_rng(15)
        init = NaturalParams(rng.standard_normal((10, 40)) / math.sqrt(10), rng.standard_normal(40))
        cfg = OptimizerConfig(method="adam", step_size=1e-2, batch_size=100, iterations=10000, seed=1)
        params, _ = train_natural(data, gates, init, cfg)
        pred = galu_predict(data.xs, params, gates)
        assert np.mean((pred - data.ys) ** 2) < 0.01

    def test_sgd_deterministic(self):
        data, gates, _ = instance(30, 3, 4, 16)
        init = NaturalParams(np.ones((3, 4)), np.ones(4))
        cfg = OptimizerConfig(method="sgd", step_size=0.05, batch_size=7, iterations=40, seed=3)
        a, _ = train_natural(data, gates, init, cfg)
        b, _ = train_natural(data, gates, init, cfg)
        np.testing.assert_array_equal(a.W, b.W)


class TestTrainRelu:
    def test_zero_labels_zero_alpha(self):
        data = gen_sphere(10, 3, 0).with_labels(np.zeros(10))
        U, alpha, trace = train_relu(data, GateBank.draw(3, 4, 1), np.zeros(4), OptimizerConfig(iterations=20))
        np.testing.assert_array_equal(alpha, 0.0)
        assert trace.final_objective == 0.0

    def test_single_neuron_positive_data(self):
        rng = make_rng(2)
        xs = np.abs(rng.standard_normal((20, 1))) + 0.1
        data = LabeledSet(xs, 2.0 * xs[:, 0])
        cfg = OptimizerConfig(method="gd", step_size=0.1, iterations=2000)
        U, alpha, _ = train_relu(data, GateBank(np.array([[1.0]])), np.array([1.0]), cfg)
        assert np.mean((relu_predict(xs, U, alpha) - data.ys) ** 2) < 1e-4

    def test_alpha_shape(self):
        data = gen_sphere(4, 2, 0)
        with pytest.raises(ShapeError):
            train_relu(data, GateBank.draw(2, 3, 0), np.ones(2), OptimizerConfig(iterations=1))


class TestTrace:
    def test_plateau(self):
        tr = TrainTrace()
        for t, v in enumerate([10.0, 5.0, 1.0, 1.0, 1.0]):
            tr.append(t, v, 0.0)
        assert tr.plateaued()
        tr = TrainTrace()
        for t, v in enumerate(np.linspace(10, 1, 20)):
            tr.append(t, v, 0.0)
        assert not tr.plateaued()


class TestOptimizerConfig:
    @pytest.mark.parametrize("kwargs", [
        {"method": "lbfgs"}, {"step_size": 0.0}, {"batch_size": 0},
        {"iterations": -1}, {"adam_beta1": 1.0}, {"adam_eps": 0.0},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            OptimizerConfig(**kwargs)


class TestHingeGradients:
    def test_zero_labels(self):
        data = gen_sphere(10, 4, 0).with_labels(np.zeros(10))
        gates = GateBank.draw(4, 6, 1)
        res = hinge_grad_equality(data, gates, gates.gates, np.full(6, 0.1))
        assert res.max_abs_diff == 0.0

    def test_zero_alpha(self):
        data = gen_sphere(10, 4, 2).with_labels(np.sign(make_rng(3).standard_normal(10)))
        gates = GateBank.draw(4, 6, 4)
        res = hinge_grad_equality(data, gates, make_rng(5).standard_normal((4, 6)), np.zeros(6))
        assert res.galu_grad_norm == 0.0 and res.relu_grad_norm == 0.0

    def test_equal_at_w_equal_u(self):
        data = gen_sphere(20, 5, 6).with_labels(np.sign(make_rng(7).standard_normal(20)))
        gates = GateBank.draw(5, 8, 8).to_sphere()
        res = hinge_grad_equality(data, gates, gates.gates, make_rng(9).uniform(-0.3, 0.3, 8))
        assert res.max_abs_diff <= 1e-12
        assert res.galu_grad_norm > 0

    def test_precondition(self):
        data = gen_sphere(5, 3, 0).with_labels(np.ones(5))
        gates = GateBank.draw(3, 2, 1).to_sphere()
        with pytest.raises(PreconditionError):
            hinge_grad_equality(data, gates, gates.gates, np.full(2, 100.0))

    def test_check_and_canary(self):
        assert check_hinge_gradients(n_instances=10).passed
        assert not check_hinge_gradients(n_instances=10, negate_indicator=True).passed


class TestPerturbation:
    def test_zero_epsilon(self):
        gates = GateBank.draw(20, 10, 0, source="sphere")
        assert gate_perturbation_gap(gates, 0.0, 100, 1).empirical_sup == 0.0

    def test_far_probe_unaffected(self):
        # a probe aligned with every gate stays open under a small shift
        d, k = 20, 5
        e1 = np.eye(d)[0]
        gates = GateBank(np.tile(e1[:, None], (1, k)), source="sphere")
        res = gate_perturbation_gap(gates, 0.01, 0, 2, probes=e1[None, :])
        assert res.empirical_sup == 0.0

    def test_bound_value(self):
        assert perturbation_bound(50, 0.05) == pytest.approx(
            math.sqrt(5 * math.sqrt(150) * 0.05 / math.sqrt(2 * math.pi)))
        assert perturbation_bound(50, 0.05) > 1.0
        assert perturbation_width(50, 0.05, 0.01) == 2155

    def test_precondition(self):
        with pytest.raises(PreconditionError):
            gate_perturbation_gap(GateBank.draw(2, 100, 0), 0.1, 10, 0)

    def test_check(self):
        res = check_perturbation(n_repeats=10, seed=0)
        assert res.measured >= 10


class TestFiniteDiff:
    def setup_method(self):
        self.data = gen_gaussian(8, 3, 0)
        self.gates = GateBank.draw(3, 4, 1)
        rng = make_rng(2)
        self.params = NaturalParams(rng.standard_normal((3, 4)), rng.standard_normal(4))

    def test_linear_loss(self):
        assert finite_diff_check(self.data, self.gates, self.params, loss="linear") <= 1e-9

    @pytest.mark.parametrize("activation", ["galu", "relu"])
    def test_mse(self, activation):
        assert finite_diff_check(self.data, self.gates, self.params, "mse", activation) <= 1e-5

    def test_all_gates_closed(self):
        xs = np.abs(make_rng(3).standard_normal((5, 2))) + 0.1
        data = LabeledSet(xs, np.ones(5))
        gates = GateBank(-np.ones((2, 3)))
        assert finite_diff_check(data, gates, NaturalParams(np.ones((2, 3)), np.ones(3))) == 0.0


class TestUnderparametrizedRelu:
    def test_relu_between_lower_bound_and_galu(self):
        # m = 400, d = 20, k = 10: kd/m = 1/2, so 1 - 2kd/m = 0
        m, d, k = 400, 20, 10
        data = gen_gaussian(m, d, 20)
        gates = GateBank.draw(d, k, 21)
        galu_mse = min_norm_solve(build_feature_matrix(data, gates), data.ys).train_mse
        rng = make_rng(22)
        W0 = rng.standard_normal((d, k)) / math.sqrt(d)
        cfg = OptimizerConfig(method="adam", step_size=1e-3, batch_size=128, iterations=20000, seed=23)
        U, alpha, _ = train_relu(data, GateBank(W0), rng.standard_normal(k), cfg)
        relu_mse = float(np.mean((relu_predict(data.xs, U, alpha) - data.ys) ** 2))
        assert 1 - 2 * k * d / m - 0.02 <= relu_mse <= galu_mse
