"""Layer forward/backward correctness against oracles and finite differences."""

import numpy as np
import pytest

from imle_mbrl.numkit import (
    EPS_NORM,
    Dense,
    L2Norm,
    ParameterSet,
    Relu,
    UsageError,
    build_mlp,
    build_residual_net,
    check_gradients,
    finite_difference_grad,
    max_relative_error,
)


def bound_dense(in_dim, out_dim, rng, stack=()):
    ps = ParameterSet(stack)
    layer = Dense("d", in_dim, out_dim)
    layer.declare(ps)
    ps.freeze()
    ps.flat[...] = rng.normal(size=ps.flat.shape)
    layer.bind(ps)
    return layer, ps


class TestDense:
    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(0)
        layer, ps = bound_dense(4, 3, rng)
        x = rng.normal(size=(5, 4))
        y = layer.forward(x)
        W, b = ps.view("d.W"), ps.view("d.b")
        expect = np.empty((5, 3))
        for i in range(5):
            for j in range(3):
                acc = b[j]
                for k in range(4):
                    acc += x[i, k] * W[k, j]
                expect[i, j] = acc
        np.testing.assert_allclose(y, expect, rtol=0, atol=1e-12)

    def test_identity_weights_pass_input_through(self):
        layer, ps = bound_dense(3, 3, np.random.default_rng(1))
        ps.view("d.W")[...] = np.eye(3)
        ps.view("d.b")[...] = 0.0
        x = np.random.default_rng(2).normal(size=(6, 3))
        np.testing.assert_array_equal(layer.forward(x), x)

    def test_stacked_forward_matches_per_member(self):
        rng = np.random.default_rng(3)
        layer, ps = bound_dense(4, 2, rng, stack=(3,))
        x = rng.normal(size=(3, 5, 4))
        y = layer.forward(x)
        for k in range(3):
            single = Dense("d", 4, 2)
            single.bind(ps.member(k))
            np.testing.assert_allclose(y[k], single.forward(x[k]), rtol=1e-13)

    def test_extra_batch_axes_roundtrip(self):
        rng = np.random.default_rng(4)
        layer, _ = bound_dense(4, 2, rng, stack=(2,))
        x = rng.normal(size=(2, 3, 5, 4))
        y = layer.forward(x)
        assert y.shape == (2, 3, 5, 2)
        flat = layer.forward(x.reshape(2, 15, 4))
        np.testing.assert_array_equal(y.reshape(2, 15, 2), flat)

    def test_backward_matches_least_squares_closed_form(self):
        # for L = ||xW + b - t||^2 summed, dW = 2 x^T (y - t), db = 2 sum(y - t)
        rng = np.random.default_rng(5)
        layer, ps = bound_dense(4, 3, rng)
        x = rng.normal(size=(7, 4))
        t = rng.normal(size=(7, 3))
        y = layer.forward(x)
        g = ps.zeros_like()
        dx = layer.backward(2.0 * (y - t), g)
        np.testing.assert_allclose(g.view("d.W"), 2.0 * x.T @ (y - t), rtol=1e-12)
        np.testing.assert_allclose(g.view("d.b"), 2.0 * (y - t).sum(0), rtol=1e-12)
        np.testing.assert_allclose(dx, 2.0 * (y - t) @ ps.view("d.W").T, rtol=1e-12)

    def test_backward_accumulates_into_grads(self):
        rng = np.random.default_rng(6)
        layer, ps = bound_dense(2, 2, rng)
        x = rng.normal(size=(3, 2))
        layer.forward(x)
        g = ps.zeros_like()
        dy = rng.normal(size=(3, 2))
        layer.backward(dy, g)
        first = g.flat.copy()
        layer.forward(x)
        layer.backward(dy, g)
        np.testing.assert_allclose(g.flat, 2.0 * first, rtol=1e-14)

    def test_wrong_feature_count_rejected(self):
        layer, _ = bound_dense(4, 3, np.random.default_rng(7))
        with pytest.raises(ValueError):
            layer.forward(np.zeros((5, 3)))

    def test_backward_before_forward_rejected(self):
        layer, ps = bound_dense(2, 2, np.random.default_rng(8))
        with pytest.raises(UsageError):
            layer.backward(np.zeros((1, 2)), ps.zeros_like())


class TestRelu:
    def test_forward_and_zero_subgradient_at_origin(self):
        r = Relu()
        x = np.array([-1.0, 0.0, 2.0])
        np.testing.assert_array_equal(r.forward(x), [0.0, 0.0, 2.0])
        # subgradient at exactly 0 is 0
        np.testing.assert_array_equal(r.backward(np.ones(3)), [0.0, 0.0, 1.0])


class TestL2Norm:
    def test_output_rows_unit_norm(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(6, 5)) * 10.0
        y = L2Norm().forward(x)
        np.testing.assert_allclose(np.linalg.norm(y, axis=-1), 1.0, rtol=1e-13)

    def test_tiny_rows_scale_linearly(self):
        n = L2Norm()
        x = np.array([[1e-12, 0.0, 0.0]])
        y = n.forward(x)
        np.testing.assert_allclose(y, x / EPS_NORM, rtol=1e-15)
        dy = np.array([[0.5, 1.0, -1.0]])
        np.testing.assert_allclose(n.backward(dy), dy / EPS_NORM, rtol=1e-15)

    def test_input_gradient_tangent_to_sphere(self):
        rng = np.random.default_rng(10)
        x = rng.normal(size=(4, 6))
        n = L2Norm()
        y = n.forward(x)
        dx = n.backward(rng.normal(size=(4, 6)))
        np.testing.assert_allclose(np.sum(y * dx, axis=-1), 0.0, atol=1e-14)

    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        ps = ParameterSet()
        ps.declare("x", (3, 4))
        ps.freeze()
        ps.view("x")[...] = rng.normal(size=(3, 4))
        dy = rng.normal(size=(3, 4))
        norm = L2Norm()

        def loss():
            return float(np.sum(norm.forward(ps.view("x").copy()) * dy))

        numeric = finite_difference_grad(loss, ps)
        norm.forward(ps.view("x").copy())
        analytic = norm.backward(dy)
        assert max_relative_error(analytic, numeric.reshape(3, 4)) < 1e-8


def net_loss_and_grad(net, x, dy_by_head):
    """Sum-of-products probe loss: L = sum_h <out_h, dy_h>."""
    def fn():
        out = net.forward(x)
        loss = sum(float(np.sum(out[h] * dy_by_head[h])) for h in dy_by_head)
        g = net.params.zeros_like()
        net.backward(dict(dy_by_head), g)
        return loss, g
    return fn


class TestNetworks:
    def test_residual_net_gradcheck(self):
        rng = np.random.default_rng(12)
        net = build_residual_net(3, 8, 2, {"a": 2, "b": 1}, rng)
        x = rng.normal(size=(4, 3))
        dy = {"a": rng.normal(size=(4, 2)), "b": rng.normal(size=(4, 1))}
        err = check_gradients(net_loss_and_grad(net, x, dy), net.params)
        assert err < 1e-7

    def test_mlp_gradcheck(self):
        rng = np.random.default_rng(13)
        net = build_mlp(3, (8, 8), {"out": 2}, rng)
        x = rng.normal(size=(5, 3))
        dy = {"out": rng.normal(size=(5, 2))}
        err = check_gradients(net_loss_and_grad(net, x, dy), net.params)
        assert err < 1e-7

    def test_omitted_head_means_zero_upstream(self):
        rng = np.random.default_rng(14)
        net = build_residual_net(3, 8, 1, {"a": 2, "b": 1}, rng)
        x = rng.normal(size=(4, 3))
        dya = rng.normal(size=(4, 2))
        net.forward(x)
        g1 = net.params.zeros_like()
        net.backward({"a": dya}, g1)
        net.forward(x)
        g2 = net.params.zeros_like()
        net.backward({"a": dya, "b": np.zeros((4, 1))}, g2)
        np.testing.assert_array_equal(g1.flat, g2.flat)

    def test_stacked_net_matches_singles(self):
        seqs = np.random.SeedSequence(15).spawn(3)
        rngs = [np.random.default_rng(s) for s in seqs]
        stacked = build_residual_net(3, 8, 2, {"y": 2}, rngs, stack_shape=(3,))
        x = np.random.default_rng(16).normal(size=(3, 5, 3))
        ys = stacked.forward(x)["y"]
        for k in range(3):
            single = build_residual_net(3, 8, 2, {"y": 2}, np.random.default_rng(0))
            single.params.flat[...] = stacked.params.flat[k]
            np.testing.assert_allclose(ys[k], single.forward(x[k])["y"], rtol=1e-12)

    def test_same_seed_same_init(self):
        a = build_mlp(4, (8,), {"o": 1}, np.random.default_rng(17))
        b = build_mlp(4, (8,), {"o": 1}, np.random.default_rng(17))
        np.testing.assert_array_equal(a.params.flat, b.params.flat)

    def test_pass_counter_counts_sample_rows(self):
        rng = np.random.default_rng(18)
        net = build_residual_net(3, 8, 1, {"y": 2}, [rng] * 4, stack_shape=(4,))
        net.forward(rng.normal(size=(4, 6, 3)))
        assert net.passes.forward == 24
        assert net.passes.backward == 0
        net.backward({"y": np.ones((4, 6, 2))}, None)
        assert net.passes.backward == 24
        net.passes.reset()
        assert net.passes.forward == 0 and net.passes.backward == 0

    def test_backward_before_forward_rejected(self):
        net = build_mlp(2, (4,), {"o": 1}, np.random.default_rng(19))
        with pytest.raises(UsageError):
            net.backward({"o": np.zeros((1, 1))}, net.params.zeros_like())

    def test_input_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(20)
        net = build_residual_net(3, 6, 1, {"y": 1}, rng)
        x0 = rng.normal(size=(2, 3))
        dy = {"y": rng.normal(size=(2, 1))}
        ps = ParameterSet()
        ps.declare("x", (2, 3))
        ps.freeze()
        ps.view("x")[...] = x0

        def loss():
            return float(np.sum(net.forward(ps.view("x").copy())["y"] * dy["y"]))

        numeric = finite_difference_grad(loss, ps)
        net.forward(x0)
        dx = net.backward(dy, None, need_input_grad=True)
        assert max_relative_error(dx, numeric.reshape(2, 3)) < 1e-7
