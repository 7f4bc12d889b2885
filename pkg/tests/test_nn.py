import math

import numpy as np
import pytest

from telegraph.errors import ShapeError, TrainingError
from telegraph.nn import (
    LSTM,
    Affine,
    OptimizerState,
    Param,
    ParamSet,
    assign_params,
    bce_with_logits,
    grad_check,
    glorot_uniform,
    learning_rate,
    load_params,
    optimizer_step,
    save_params,
)


class TestAffine:
    def test_identity(self):
        params = ParamSet()
        layer = Affine(params, "fc", 3, 3)
        layer.weight.value[...] = np.eye(3)
        x = np.arange(6.0).reshape(2, 3)
        y, _ = layer.forward(x)
        np.testing.assert_array_equal(y, x)

    def test_hand_product(self):
        # y = 1*3 + 2*4 + 1 = 12
        params = ParamSet()
        layer = Affine(params, "fc", 2, 1)
        layer.weight.value[...] = np.array([[3.0], [4.0]])
        layer.bias.value[...] = np.array([[1.0]])
        y, _ = layer.forward(np.array([[1.0, 2.0]]))
        assert y[0, 0] == 12.0

    def test_shape_error_names_both_shapes(self):
        params = ParamSet()
        layer = Affine(params, "fc", 2, 1)
        with pytest.raises(ShapeError) as err:
            layer.forward(np.ones((1, 3)))
        assert "(1, 3)" in str(err.value)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(0)
        params = ParamSet()
        layer = Affine(params, "fc", 3, 2, rng=rng)
        x_param = params.add("x", rng.standard_normal((4, 3)))
        target = rng.standard_normal((4, 2))

        def fn():
            params.zero_grads()
            y, ctx = layer.forward(x_param.value)
            diff = y - target
            x_param.grad += layer.backward(ctx, diff)
            return 0.5 * float(np.sum(diff**2))

        report = grad_check(fn, params, step=1e-5)
        assert report.passed(1e-6), report.per_param


class TestLSTM:
    def test_empty_sequence_returns_zero(self):
        params = ParamSet()
        cell = LSTM(params, "agg", 4, 3, rng=np.random.default_rng(1))
        h, _ = cell.aggregate(np.empty((0, 4)))
        np.testing.assert_array_equal(h, np.zeros(3))

    def test_zero_weights_single_step(self):
        # all gates sigmoid(0)=0.5, candidate tanh(0)=0 -> hidden is the zero vector
        params = ParamSet()
        cell = LSTM(params, "agg", 2, 3)
        h, _ = cell.aggregate(np.array([[1.0, -2.0]]))
        np.testing.assert_allclose(h, np.zeros(3), atol=1e-15)

    def test_shape_mismatch(self):
        params = ParamSet()
        cell = LSTM(params, "agg", 2, 3)
        with pytest.raises(ShapeError):
            cell.forward_batch(np.ones((1, 2, 5)))

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(2)
        params = ParamSet()
        cell = LSTM(params, "agg", 3, 4, rng=rng)
        x_param = params.add("x", rng.standard_normal((3, 3)))  # 3 steps
        weight = rng.standard_normal(4)

        def fn():
            params.zero_grads()
            h, ctx = cell.aggregate(x_param.value)
            loss = float(h @ weight)
            x_param.grad += cell.aggregate_backward(ctx, weight)
            return loss

        report = grad_check(fn, params, step=1e-5)
        assert report.passed(1e-4), report.per_param

    def test_batched_matches_sequential(self):
        rng = np.random.default_rng(3)
        params = ParamSet()
        cell = LSTM(params, "agg", 3, 5, rng=rng)
        batch = rng.standard_normal((6, 4, 3))
        together, _ = cell.forward_batch(batch)
        for row in range(6):
            alone, _ = cell.aggregate(batch[row])
            np.testing.assert_allclose(alone, together[row], atol=1e-12)

    def test_empty_sequence_backward_is_noop(self):
        params = ParamSet()
        cell = LSTM(params, "agg", 2, 3, rng=np.random.default_rng(4))
        h, ctx = cell.aggregate(np.empty((0, 2)))
        dx = cell.aggregate_backward(ctx, np.ones(3))
        assert dx.shape == (0, 2)
        assert np.all(cell.wx.grad == 0.0)


class TestBCE:
    def test_logit_zero(self):
        loss, grad = bce_with_logits(np.array([0.0]), np.array([1.0]))
        assert loss == pytest.approx(math.log(2.0), abs=1e-12)
        assert grad[0] == pytest.approx(-0.5, abs=1e-12)

    def test_large_positive_logit_stable(self):
        loss, _ = bce_with_logits(np.array([20.0]), np.array([1.0]))
        assert 0.0 <= loss <= 1e-8

    def test_large_negative_logit_stable(self):
        loss, _ = bce_with_logits(np.array([-40.0]), np.array([0.0]))
        assert 0.0 <= loss <= 1e-8
        loss_bad, _ = bce_with_logits(np.array([-40.0]), np.array([1.0]))
        assert loss_bad == pytest.approx(40.0, rel=1e-9)

    def test_empty_input(self):
        with pytest.raises(ValueError):
            bce_with_logits(np.array([]), np.array([]))

    def test_permutation_invariant(self):
        rng = np.random.default_rng(5)
        z = rng.standard_normal(10)
        y = rng.integers(0, 2, size=10).astype(float)
        perm = rng.permutation(10)
        a, _ = bce_with_logits(z, y)
        b, _ = bce_with_logits(z[perm], y[perm])
        assert a == pytest.approx(b, abs=1e-15)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(6)
        params = ParamSet()
        z_param = params.add("z", rng.standard_normal((1, 8)))
        labels = rng.integers(0, 2, size=8).astype(float)

        def fn():
            params.zero_grads()
            loss, grad = bce_with_logits(z_param.value.ravel(), labels)
            z_param.grad += grad.reshape(1, 8)
            return loss

        report = grad_check(fn, params, step=1e-5)
        assert report.passed(1e-6), report.per_param


class TestLearningRateSchedule:
    def test_endpoints_exact(self):
        assert learning_rate(0) == 1e-3
        assert learning_rate(100) == 1e-5
        assert learning_rate(1000) == 1e-5

    def test_monotone_non_increasing(self):
        values = [learning_rate(t) for t in range(0, 130)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_geometric_midpoint(self):
        assert learning_rate(50) == pytest.approx(1e-4, rel=1e-9)


class TestOptimizer:
    def test_zero_gradients_fixed_point(self):
        params = ParamSet()
        p = params.add("w", np.array([[1.0, -2.0]]))
        state = OptimizerState(weight_decay=0.0)
        before = p.value.copy()
        optimizer_step(state, params)
        np.testing.assert_array_equal(p.value, before)

    def test_hand_evaluated_single_step(self):
        params = ParamSet()
        p = params.add("w", np.array([[1.0]]))
        p.grad[...] = 1.0
        state = OptimizerState()
        optimizer_step(state, params)
        # defaults: lr(0)=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, wd=1e-5
        m = 0.1
        v = 0.001
        m_hat = m / (1 - 0.9)
        v_hat = v / (1 - 0.999)
        expected = 1.0 - 1e-3 * (m_hat / (math.sqrt(v_hat) + 1e-8) + 1e-5 * 1.0)
        assert p.value[0, 0] == pytest.approx(expected, abs=1e-12)

    def test_schedule_used_at_each_step(self):
        params = ParamSet()
        params.add("w", np.array([[1.0]]))
        state = OptimizerState()
        assert state.current_lr() == 1e-3
        for _ in range(100):
            optimizer_step(state, params)
        assert state.current_lr() == 1e-5

    def test_nonfinite_gradient_aborts(self):
        params = ParamSet()
        p = params.add("w", np.array([[1.0]]))
        p.grad[...] = np.nan
        state = OptimizerState()
        before = p.value.copy()
        with pytest.raises(TrainingError) as err:
            optimizer_step(state, params)
        assert "w" in str(err.value)
        np.testing.assert_array_equal(p.value, before)

    def test_weight_decay_shrinks_params(self):
        params = ParamSet()
        p = params.add("w", np.array([[10.0]]))
        state = OptimizerState(weight_decay=0.1)
        optimizer_step(state, params)
        assert p.value[0, 0] < 10.0


class TestGradCheckHarness:
    def test_detects_corrupted_gradient(self):
        params = ParamSet()
        p = params.add("w", np.array([[2.0]]))

        def fn():
            params.zero_grads()
            p.grad += 3.0 * p.value**2 + 1.0  # deliberately off by +1
            return float(p.value[0, 0] ** 3)

        report = grad_check(fn, params, step=1e-5)
        assert not report.passed(1e-4)

    def test_passes_on_correct_gradient(self):
        params = ParamSet()
        p = params.add("w", np.array([[2.0]]))

        def fn():
            params.zero_grads()
            p.grad += 3.0 * p.value**2
            return float(p.value[0, 0] ** 3)

        report = grad_check(fn, params, step=1e-5)
        assert report.passed(1e-6)

    def test_sampled_entries(self):
        rng = np.random.default_rng(8)
        params = ParamSet()
        p = params.add("w", rng.standard_normal((10, 10)))

        def fn():
            params.zero_grads()
            p.grad += 2.0 * p.value
            return float(np.sum(p.value**2))

        report = grad_check(fn, params, step=1e-5, max_entries_per_param=7, rng=rng)
        assert report.passed(1e-6)


class TestFiniteDifferenceProperty:
    """Backward passes match central differences over many random seeds."""

    @pytest.mark.parametrize("seed", range(20))
    def test_affine_bce_chain(self, seed):
        rng = np.random.default_rng(seed)
        params = ParamSet()
        layer = Affine(params, "fc", 4, 1, rng=rng)
        x = rng.standard_normal((5, 4))
        labels = rng.integers(0, 2, size=5).astype(float)

        def fn():
            params.zero_grads()
            z, ctx = layer.forward(x)
            loss, dz = bce_with_logits(z.ravel(), labels)
            layer.backward(ctx, dz.reshape(5, 1))
            return loss

        assert grad_check(fn, params, step=1e-5).passed(1e-6)

    @pytest.mark.parametrize("seed", range(20))
    def test_lstm_chain(self, seed):
        rng = np.random.default_rng(100 + seed)
        params = ParamSet()
        cell = LSTM(params, "agg", 3, 4, rng=rng)
        x = rng.standard_normal((1, 4, 3))
        weight = rng.standard_normal(4)

        def fn():
            params.zero_grads()
            h, ctx = cell.forward_batch(x)
            loss = float(h[0] @ weight)
            cell.backward_batch(ctx, weight[None, :])
            return loss

        assert grad_check(fn, params, step=1e-5).passed(1e-4)


class TestParamPlumbing:
    def test_param_must_be_2d(self):
        with pytest.raises(ShapeError):
            Param("w", np.ones(3))

    def test_duplicate_name_rejected(self):
        params = ParamSet()
        params.add("w", np.ones((1, 1)))
        with pytest.raises(ValueError):
            params.add("w", np.ones((1, 1)))

    def test_glorot_bounds(self):
        rng = np.random.default_rng(9)
        values = glorot_uniform(rng, 6, 6)
        limit = math.sqrt(6.0 / 12.0)
        assert np.all(np.abs(values) <= limit)

    def test_checkpoint_roundtrip(self, tmp_path):
        rng = np.random.default_rng(10)
        params = ParamSet()
        Affine(params, "fc", 3, 2, rng=rng)
        save_params(params, tmp_path / "ckpt.json", config={"hidden": 2})
        loaded, config = load_params(tmp_path / "ckpt.json")
        assert config == {"hidden": 2}
        fresh = ParamSet()
        Affine(fresh, "fc", 3, 2)
        assign_params(fresh, loaded)
        np.testing.assert_array_equal(fresh["fc.W"].value, params["fc.W"].value)

    def test_checkpoint_bytes_deterministic(self, tmp_path):
        rng = np.random.default_rng(11)
        params = ParamSet()
        Affine(params, "fc", 4, 4, rng=rng)
        save_params(params, tmp_path / "a.json")
        save_params(params, tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
