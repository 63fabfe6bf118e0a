"""Loss kernels against reference implementations and finite differences."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imle_mbrl.numkit import (
    ParameterSet,
    bound_logvar,
    finite_difference_grad,
    gaussian_nll_loss_and_grad,
    max_relative_error,
    mse_loss_and_grad,
    per_transition_quantile_loss,
    per_transition_quantile_loss_reference,
    quantile_midpoints,
    sigmoid,
    softplus,
)
from imle_mbrl.numkit.losses import LOGVAR_MAX, LOGVAR_MIN


def test_quantile_midpoints_worked_example():
    np.testing.assert_allclose(quantile_midpoints(4), [0.125, 0.375, 0.625, 0.875])
    np.testing.assert_allclose(quantile_midpoints(1), [0.5])


class TestQuantileHuber:
    def test_single_pair_worked_example(self):
        # one estimate at 0, one target at 0.5, median quantile:
        # loss = 0.5 * (0.5 * 0.5^2) = 0.0625, dloss/dpred = -0.25
        pred = np.array([0.0])
        target = np.array([0.5])
        taus = np.array([0.5])
        for fn in (per_transition_quantile_loss, per_transition_quantile_loss_reference):
            loss, grad = fn(pred, target, taus, kappa=1.0)
            np.testing.assert_allclose(loss, 0.0625, rtol=0, atol=1e-12)
            np.testing.assert_allclose(grad, [-0.25], rtol=0, atol=1e-12)

    def test_matches_reference_production_shape(self):
        rng = np.random.default_rng(21)
        pred = rng.normal(0, 5, size=(2, 16, 32))
        target = rng.normal(0, 5, size=(16, 24))
        taus = quantile_midpoints(32)
        loss, grad = per_transition_quantile_loss(pred, target, taus)
        ref_loss, ref_grad = per_transition_quantile_loss_reference(
            pred, np.broadcast_to(target, (2, 16, 24)), taus)
        assert loss.shape == (2, 16) and grad.shape == pred.shape
        np.testing.assert_allclose(loss, ref_loss, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(grad, ref_grad, rtol=1e-12, atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 9), st.integers(1, 9), st.integers(1, 5),
           st.sampled_from([0.25, 0.5, 1.0, 2.0]), st.integers(0, 2 ** 31))
    def test_matches_reference_random_shapes(self, n, nt, b, kappa, seed):
        rng = np.random.default_rng(seed)
        # half-integer lattice scaled by kappa lands values exactly on the
        # piecewise-region boundaries, exercising the tie handling
        pred = rng.integers(-4, 5, size=(b, n)) * (0.5 * kappa)
        target = rng.integers(-4, 5, size=(b, nt)) * (0.5 * kappa)
        taus = quantile_midpoints(n)
        loss, grad = per_transition_quantile_loss(pred, target, taus, kappa)
        ref_loss, ref_grad = per_transition_quantile_loss_reference(
            pred, target, taus, kappa)
        np.testing.assert_allclose(loss, ref_loss, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(grad, ref_grad, rtol=1e-9, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 4), st.integers(1, 6), st.integers(1, 6),
           st.integers(0, 2 ** 31))
    def test_shared_targets_equal_explicit_broadcast(self, k, n, b, seed):
        rng = np.random.default_rng(seed)
        pred = rng.normal(size=(k, b, n))
        target = rng.normal(size=(b, n))
        taus = quantile_midpoints(n)
        loss, grad = per_transition_quantile_loss(pred, target, taus)
        full_loss, full_grad = per_transition_quantile_loss(
            pred, np.broadcast_to(target, (k, b, n)).copy(), taus)
        np.testing.assert_array_equal(loss, full_loss)
        np.testing.assert_array_equal(grad, full_grad)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(22)
        ps = ParameterSet()
        ps.declare("p", (3, 7))
        ps.freeze()
        ps.view("p")[...] = rng.normal(0, 2, size=(3, 7))
        target = rng.normal(0, 2, size=(3, 5))
        taus = quantile_midpoints(7)

        def loss():
            rows, _ = per_transition_quantile_loss(ps.view("p").copy(), target, taus)
            return float(rows.sum())

        numeric = finite_difference_grad(loss, ps)
        _, grad = per_transition_quantile_loss(ps.view("p").copy(), target, taus)
        assert max_relative_error(grad, numeric.reshape(3, 7)) < 1e-8

    def test_mismatched_leading_shapes_rejected(self):
        with pytest.raises(ValueError):
            per_transition_quantile_loss(
                np.zeros((2, 3, 4)), np.zeros((5, 4)), quantile_midpoints(4))

    def test_weighted_sum_is_exactly_linear_in_weights(self):
        # halving every weight halves the weighted loss bitwise: scaling by a
        # power of two commutes with rounding
        rng = np.random.default_rng(23)
        pred = rng.normal(0, 3, size=(64, 16))
        target = rng.normal(0, 3, size=(64, 16))
        loss_rows, _ = per_transition_quantile_loss(pred, target, quantile_midpoints(16))
        w = rng.uniform(0.1, 1.0, size=64)
        full = np.dot(w, loss_rows)
        half = np.dot(0.5 * w, loss_rows)
        assert half == 0.5 * full


class TestMse:
    def test_worked_example(self):
        loss, grad = mse_loss_and_grad(np.array([[1.0, 2.0]]), np.zeros((1, 2)))
        assert loss == 5.0
        np.testing.assert_array_equal(grad, [[2.0, 4.0]])

    def test_stacked_shapes_and_finite_differences(self):
        rng = np.random.default_rng(24)
        target = rng.normal(size=(2, 4, 3))
        ps = ParameterSet()
        ps.declare("p", (2, 4, 3))
        ps.freeze()
        ps.view("p")[...] = rng.normal(size=(2, 4, 3))

        def loss():
            l, _ = mse_loss_and_grad(ps.view("p").copy(), target)
            return float(l.sum())

        l, grad = mse_loss_and_grad(ps.view("p").copy(), target)
        assert l.shape == (2,)
        numeric = finite_difference_grad(loss, ps)
        assert max_relative_error(grad, numeric.reshape(2, 4, 3)) < 1e-9


class TestStableScalars:
    def test_sigmoid_extremes(self):
        with np.errstate(over="raise"):
            out = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
        np.testing.assert_allclose(out, [0.0, 0.5, 1.0], atol=1e-15)

    def test_softplus_extremes(self):
        with np.errstate(over="raise"):
            out = softplus(np.array([-1000.0, 0.0, 1000.0]))
        np.testing.assert_allclose(out, [0.0, np.log(2.0), 1000.0], atol=1e-15)


class TestGaussianNll:
    def test_logvar_bounds_hold_at_extremes(self):
        raw = np.array([-1e6, -20.0, -3.0, 20.0, 1e6])
        v, dv = bound_logvar(raw)
        # the soft clamp may exceed the cap by log1p(exp(min - max)) ~ 1e-6
        assert np.all(v >= LOGVAR_MIN - 1e-5) and np.all(v <= LOGVAR_MAX + 1e-5)
        assert np.all(dv >= 0.0)
        # identity-like mid-band, where both softplus tails cancel
        np.testing.assert_allclose(v[2], -3.0, atol=1e-2)
        np.testing.assert_allclose(dv[2], 1.0, atol=1e-2)

    def test_logvar_derivative_matches_finite_differences(self):
        raw = np.linspace(-15.0, 8.0, 30)
        _, dv = bound_logvar(raw)
        h = 1e-6
        up, _ = bound_logvar(raw + h)
        down, _ = bound_logvar(raw - h)
        np.testing.assert_allclose(dv, (up - down) / (2 * h), rtol=1e-6, atol=1e-9)

    def test_zero_residual_closed_form(self):
        # with mean == target the density term drops out
        mean = np.zeros((4, 3))
        raw = np.full((4, 3), 1.5)
        lv, _ = bound_logvar(raw)
        loss, dmean, draw = gaussian_nll_loss_and_grad(mean, raw, mean.copy())
        expect = 0.5 * float(np.sum(lv[0] + np.log(2 * np.pi)))
        np.testing.assert_allclose(loss, expect, rtol=1e-12)
        np.testing.assert_array_equal(dmean, np.zeros_like(mean))

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(25)
        target = rng.normal(size=(5, 3))
        ps = ParameterSet()
        ps.declare("mean", (5, 3))
        ps.declare("raw", (5, 3))
        ps.freeze()
        ps.view("mean")[...] = rng.normal(size=(5, 3))
        ps.view("raw")[...] = rng.normal(size=(5, 3))

        def loss():
            l, _, _ = gaussian_nll_loss_and_grad(
                ps.view("mean").copy(), ps.view("raw").copy(), target)
            return float(l)

        _, dmean, draw = gaussian_nll_loss_and_grad(
            ps.view("mean").copy(), ps.view("raw").copy(), target)
        numeric = finite_difference_grad(loss, ps)
        analytic = np.concatenate([dmean.ravel(), draw.ravel()])
        assert max_relative_error(analytic, numeric) < 1e-8
