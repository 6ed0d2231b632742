"""Forward/backward checks for the tensor primitives.

Backward passes are verified against central finite differences; conv2d is
additionally checked against a direct nested-loop reference.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcsw.nn import (
    Tape,
    TapeError,
    Tensor,
    conv2d,
    dense,
    max_pool2,
    mean_,
    mse,
    relu,
    sum_,
    upsample_nearest2,
)


def central_diff(f, x, i, h=1e-6):
    flat = x.data.reshape(-1)
    keep = flat[i]
    flat[i] = keep + h
    fp = float(f().data)
    flat[i] = keep - h
    fm = float(f().data)
    flat[i] = keep
    return (fp - fm) / (2 * h)


def conv2d_loop(x, k, b, stride=1, padding="same"):
    """Direct nested-loop cross-correlation, the reference for conv2d."""
    n, h, w, cin = x.shape
    kk, _, _, cout = k.shape
    p = (kk - 1) // 2 if padding == "same" else 0
    xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
    ho = (h + 2 * p - kk) // stride + 1
    wo = (w + 2 * p - kk) // stride + 1
    y = np.zeros((n, ho, wo, cout))
    for nn_ in range(n):
        for i in range(ho):
            for j in range(wo):
                for o in range(cout):
                    acc = 0.0
                    for di in range(kk):
                        for dj in range(kk):
                            for c in range(cin):
                                acc += xp[nn_, i * stride + di, j * stride + dj, c] * k[di, dj, c, o]
                    y[nn_, i, j, o] = acc + b[o]
    return y


class TestDense:
    def test_identity(self):
        x = Tensor([[1.0, 0.0], [0.0, 1.0]])
        w = Tensor(np.eye(2))
        b = Tensor(np.zeros(2))
        y = dense(x, w, b)
        assert np.array_equal(y.data, np.eye(2))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            dense(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))), Tensor(np.zeros(2)))

    def test_bias_shape(self):
        with pytest.raises(ValueError):
            dense(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2))), Tensor(np.zeros(3)))


class TestConv2d:
    def test_identity_kernel(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(2, 6, 6, 3))
        k = np.zeros((3, 3, 3, 3))
        for c in range(3):
            k[1, 1, c, c] = 1.0
        y = conv2d(Tensor(x), Tensor(k), Tensor(np.zeros(3)))
        np.testing.assert_array_equal(y.data, x)

    def test_constant_field_all_ones_kernel(self):
        c = 2.5
        x = np.full((1, 5, 5, 1), c)
        k = np.ones((3, 3, 1, 1))
        y = conv2d(Tensor(x), Tensor(k), Tensor(np.zeros(1)))
        assert y.data[0, 2, 2, 0] == pytest.approx(9 * c)

    @pytest.mark.parametrize("stride,padding", [(1, "same"), (1, "valid"), (2, "same"), (2, "valid")])
    def test_against_loop_oracle(self, stride, padding):
        rng = np.random.default_rng(42)
        x = rng.normal(size=(2, 5, 5, 2))
        k = rng.normal(size=(3, 3, 2, 4))
        b = rng.normal(size=4)
        y = conv2d(Tensor(x), Tensor(k), Tensor(b), stride=stride, padding=padding)
        ref = conv2d_loop(x, k, b, stride=stride, padding=padding)
        np.testing.assert_allclose(y.data, ref, rtol=1e-13, atol=1e-13)

    def test_channel_mismatch(self):
        with pytest.raises(ValueError):
            conv2d(Tensor(np.ones((1, 4, 4, 2))), Tensor(np.ones((3, 3, 3, 1))))

    def test_even_kernel_rejected(self):
        with pytest.raises(ValueError):
            conv2d(Tensor(np.ones((1, 4, 4, 1))), Tensor(np.ones((2, 2, 1, 1))))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_identity_kernel_is_identity_for_any_input(self, seed):
        rng = np.random.default_rng(seed)
        h = int(rng.integers(1, 7))
        w = int(rng.integers(1, 7))
        c = int(rng.integers(1, 4))
        x = rng.normal(size=(1, h, w, c))
        k = np.zeros((3, 3, c, c))
        for ci in range(c):
            k[1, 1, ci, ci] = 1.0
        y = conv2d(Tensor(x), Tensor(k), Tensor(np.zeros(c)))
        np.testing.assert_array_equal(y.data, x)


class TestPoolingUpsample:
    def test_relu(self):
        y = relu(Tensor([-1.0, 0.0, 2.0]))
        np.testing.assert_array_equal(y.data, [0.0, 0.0, 2.0])

    def test_max_pool2_block(self):
        x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 2, 2, 1))
        y = max_pool2(x)
        assert y.data.reshape(()) == 4.0

    def test_max_pool2_odd_dims(self):
        with pytest.raises(ValueError):
            max_pool2(Tensor(np.ones((1, 3, 4, 1))))

    def test_upsample(self):
        y = upsample_nearest2(Tensor(np.array([[5.0]]).reshape(1, 1, 1, 1)))
        np.testing.assert_array_equal(y.data.reshape(2, 2), [[5.0, 5.0], [5.0, 5.0]])


class TestBackward:
    def test_sum_gradient_all_ones(self):
        x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        with Tape() as tape:
            loss = sum_(x)
        tape.backward(loss)
        np.testing.assert_array_equal(x.grad, np.ones((2, 3)))

    def test_sum_of_squares(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with Tape() as tape:
            loss = sum_(x * x)
        tape.backward(loss)
        np.testing.assert_allclose(x.grad, [2.0, 4.0])

    def test_non_scalar_loss_rejected(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with Tape() as tape:
            y = x * x
            with pytest.raises(ValueError):
                tape.backward(y)

    def test_backward_twice_is_error(self):
        x = Tensor([1.0], requires_grad=True)
        with Tape() as tape:
            loss = sum_(x * x)
        tape.backward(loss)
        with pytest.raises(TapeError):
            tape.backward(loss)

    def test_composite_dense_relu_mse_matches_central_differences(self):
        rng = np.random.default_rng(3)
        x = Tensor(rng.normal(size=(4, 3)))
        w1 = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
        b1 = Tensor(rng.normal(size=5), requires_grad=True)
        w2 = Tensor(rng.normal(size=(5, 2)), requires_grad=True)
        b2 = Tensor(rng.normal(size=2), requires_grad=True)
        target = rng.normal(size=(4, 2))

        def forward():
            return mse(dense(relu(dense(x, w1, b1)), w2, b2), target)

        with Tape() as tape:
            loss = forward()
        tape.backward(loss)

        for p in (w1, b1, w2, b2):
            analytic = p.grad.copy()
            for i in range(p.size):
                num = central_diff(forward, p, i)
                a = analytic.reshape(-1)[i]
                assert abs(a - num) / max(abs(a), abs(num), 1e-4) < 1e-6

    def test_conv_chain_gradients(self):
        rng = np.random.default_rng(7)
        x = Tensor(rng.normal(size=(2, 4, 4, 2)))
        k = Tensor(rng.normal(size=(3, 3, 2, 3)), requires_grad=True)
        b = Tensor(rng.normal(size=3), requires_grad=True)
        target = rng.normal(size=(2, 2, 2, 3))

        def forward():
            return mse(max_pool2(relu(conv2d(x, k, b))), target)

        with Tape() as tape:
            loss = forward()
        tape.backward(loss)
        for p in (k, b):
            analytic = p.grad.copy()
            for i in range(p.size):
                num = central_diff(forward, p, i)
                a = analytic.reshape(-1)[i]
                assert abs(a - num) / max(abs(a), abs(num), 1e-4) < 1e-5

    def test_conv_input_gradient_with_stride(self):
        rng = np.random.default_rng(11)
        x = Tensor(rng.normal(size=(1, 5, 5, 2)), requires_grad=True)
        k = Tensor(rng.normal(size=(3, 3, 2, 2)))
        target = rng.normal(size=(1, 3, 3, 2))

        def forward():
            return mse(conv2d(x, k, stride=2, padding="same"), target)

        with Tape() as tape:
            loss = forward()
        tape.backward(loss)
        analytic = x.grad.copy()
        for i in range(0, x.size, 3):
            num = central_diff(forward, x, i)
            a = analytic.reshape(-1)[i]
            assert abs(a - num) / max(abs(a), abs(num), 1e-4) < 1e-6

    def test_upsample_mean_gradients(self):
        rng = np.random.default_rng(13)
        x = Tensor(rng.normal(size=(1, 2, 2, 3)), requires_grad=True)

        def forward():
            return mean_(upsample_nearest2(x) * upsample_nearest2(x))

        with Tape() as tape:
            loss = forward()
        tape.backward(loss)
        analytic = x.grad.copy()
        for i in range(x.size):
            num = central_diff(forward, x, i)
            a = analytic.reshape(-1)[i]
            assert abs(a - num) / max(abs(a), abs(num), 1e-4) < 1e-6

    def test_forward_deterministic(self):
        rng = np.random.default_rng(5)
        x = Tensor(rng.normal(size=(1, 8, 8, 1)))
        k = Tensor(rng.normal(size=(3, 3, 1, 4)))
        y1 = conv2d(x, k).data
        y2 = conv2d(x, k).data
        assert np.array_equal(y1, y2)
