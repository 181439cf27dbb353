"""Primitive op tests: examples, oracles, shape errors, determinism."""

import math

import numpy as np
import pytest

from conftest import naive_conv2d, rand_tensor
from lowrankcnn import ops
from lowrankcnn.errors import ShapeError
from lowrankcnn.ops import ConvWeights
from lowrankcnn.rng import Rng


def conv_w(arr, bias=None):
    arr = np.asarray(arr, dtype=np.float64)
    if bias is None:
        bias = np.zeros(arr.shape[0])
    return ConvWeights(arr, np.asarray(bias, dtype=np.float64))


class TestConvForward:
    def test_hand_example_2x2(self, any_backend):
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)
        w = conv_w(np.array([[1.0, 0.0], [0.0, 1.0]]).reshape(1, 1, 2, 2))
        out = ops.conv2d_forward(x, w)
        assert out.shape == (1, 1, 1, 1)
        assert out[0, 0, 0, 0] == 5.0

    def test_zero_weights_give_zero_output(self, any_backend):
        x = rand_tensor(3, (2, 3, 5, 6))
        w = conv_w(np.zeros((4, 3, 3, 3)))
        out = ops.conv2d_forward(x, w, pad=(1, 1))
        assert out.shape == (2, 4, 5, 6)
        assert not out.any()

    def test_identity_1x1_kernel(self, any_backend):
        x = rand_tensor(4, (2, 1, 4, 5))
        w = conv_w(np.ones((1, 1, 1, 1)))
        assert np.array_equal(ops.conv2d_forward(x, w), x)

    def test_bias_added_per_channel(self, any_backend):
        x = np.zeros((1, 1, 2, 2))
        w = conv_w(np.zeros((3, 1, 1, 1)), bias=[1.0, -2.0, 0.5])
        out = ops.conv2d_forward(x, w)
        assert np.array_equal(out[0, :, 0, 0], [1.0, -2.0, 0.5])

    def test_output_shape_formula(self, any_backend):
        x = rand_tensor(5, (1, 2, 9, 11))
        w = conv_w(rand_tensor(6, (3, 2, 3, 5)))
        out = ops.conv2d_forward(x, w, stride=(2, 3), pad=(1, 2))
        assert out.shape == (1, 3, (9 + 2 - 3) // 2 + 1, (11 + 4 - 5) // 3 + 1)

    def test_channel_mismatch_names_dimension(self):
        x = rand_tensor(7, (1, 2, 4, 4))
        w = conv_w(rand_tensor(8, (1, 3, 3, 3)))
        with pytest.raises(ShapeError, match="input channels"):
            ops.conv2d_forward(x, w, pad=(1, 1))

    def test_kernel_larger_than_padded_input_rejected(self):
        x = rand_tensor(9, (1, 1, 2, 2))
        w = conv_w(rand_tensor(10, (1, 1, 5, 5)))
        with pytest.raises(ShapeError, match="kernel extent"):
            ops.conv2d_forward(x, w)

    def test_matches_naive_oracle_bit_for_bit(self, any_backend):
        rng = Rng(1234)
        for case in range(6):
            c = 1 + int(rng.integers(1, 3)[0])
            d = 1 + int(rng.integers(1, 3)[0])
            kh = 1 + int(rng.integers(1, 3)[0])
            kw = 1 + int(rng.integers(1, 3)[0])
            stride = (1 + int(rng.integers(1, 2)[0]), 1)
            x = rand_tensor(20 + case, (2, c, kh + 4, kw + 4))
            w = conv_w(rand_tensor(40 + case, (d, c, kh, kw)),
                       rand_tensor(60 + case, (d,)))
            ref = naive_conv2d(x, w.weights, w.bias, stride, (kh // 2, kw // 2))
            got = ops.conv2d_forward(x, w, stride, (kh // 2, kw // 2))
            assert np.array_equal(got, ref)

    def test_deterministic_across_calls(self, any_backend):
        x = rand_tensor(11, (2, 3, 6, 6))
        w = conv_w(rand_tensor(12, (4, 3, 3, 3)), rand_tensor(13, (4,)))
        a = ops.conv2d_forward(x, w, pad=(1, 1))
        b = ops.conv2d_forward(x, w, pad=(1, 1))
        assert np.array_equal(a, b)

    def test_float32_supported(self, any_backend):
        x = rand_tensor(14, (1, 2, 4, 4)).astype(np.float32)
        w = ConvWeights(
            rand_tensor(15, (2, 2, 3, 3)).astype(np.float32),
            np.zeros(2, np.float32),
        )
        out = ops.conv2d_forward(x, w, pad=(1, 1))
        assert out.dtype == np.float32


class TestConvBackward:
    def test_identity_kernel_passes_gradient(self, any_backend):
        x = rand_tensor(16, (2, 1, 3, 3))
        w = conv_w(np.ones((1, 1, 1, 1)))
        g = rand_tensor(17, (2, 1, 3, 3))
        b = ops.conv2d_backward(x, w, g)
        assert np.array_equal(b.grad_input, g)

    def test_zero_grad_out_gives_zero_grads(self, any_backend):
        x = rand_tensor(18, (1, 2, 4, 4))
        w = conv_w(rand_tensor(19, (3, 2, 3, 3)))
        b = ops.conv2d_backward(x, w, np.zeros((1, 3, 4, 4)), pad=(1, 1))
        assert not b.grad_input.any()
        assert not b.grad_weights.any()
        assert not b.grad_bias.any()

    def test_grad_out_shape_checked(self, any_backend):
        x = rand_tensor(20, (1, 1, 4, 4))
        w = conv_w(rand_tensor(21, (1, 1, 3, 3)))
        with pytest.raises(ShapeError, match="grad_out"):
            ops.conv2d_backward(x, w, np.zeros((1, 1, 4, 4)), pad=(0, 0))

    def test_spec_shape_finite_differences(self, any_backend):
        # a deliberately awkward configuration: 1x2x5x5 input, 3 filters
        # of 2 channels x 3x3, pad 1
        from lowrankcnn.gradcheck import numerical_grad, rel_error

        x = rand_tensor(22, (1, 2, 5, 5))
        w = conv_w(rand_tensor(23, (3, 2, 3, 3)), rand_tensor(24, (3,)))
        r = rand_tensor(25, (1, 3, 5, 5))

        def j():
            return float((ops.conv2d_forward(x, w, pad=(1, 1)) * r).sum())

        b = ops.conv2d_backward(x, w, r, pad=(1, 1))
        assert rel_error(b.grad_input, numerical_grad(j, x)) < 1e-6
        assert rel_error(b.grad_weights, numerical_grad(j, w.weights)) < 1e-6
        assert rel_error(b.grad_bias, numerical_grad(j, w.bias)) < 1e-6


class TestMaxPool:
    def test_single_window(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)
        out, idx = ops.maxpool_forward(x)
        assert out.reshape(-1).tolist() == [4.0]
        assert idx.reshape(-1).tolist() == [3]

    def test_ramp_window_maxima(self):
        x = np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)
        out, _ = ops.maxpool_forward(x)
        assert out[0, 0].tolist() == [[5.0, 7.0], [13.0, 15.0]]

    def test_constant_input_ties_to_first_in_scan_order(self):
        x = np.full((1, 1, 4, 4), 2.5)
        out, idx = ops.maxpool_forward(x)
        assert (out == 2.5).all()
        # window corners in flat h*w coordinates
        assert idx[0, 0].tolist() == [[0, 2], [8, 10]]
        g = np.ones((1, 1, 2, 2))
        gx = ops.maxpool_backward(idx, g, x.shape)
        expected = np.zeros((4, 4))
        expected[0, 0] = expected[0, 2] = expected[2, 0] = expected[2, 2] = 1.0
        assert np.array_equal(gx[0, 0], expected)

    def test_backward_routes_to_argmax(self):
        x = np.array([[[[1.0, 9.0, 2.0, 1.0],
                        [0.0, 3.0, 4.0, 8.0],
                        [5.0, 1.0, 1.0, 1.0],
                        [2.0, 6.0, 7.0, 3.0]]]])
        out, idx = ops.maxpool_forward(x)
        assert out[0, 0].tolist() == [[9.0, 8.0], [6.0, 7.0]]
        g = np.array([[[[10.0, 20.0], [30.0, 40.0]]]])
        gx = ops.maxpool_backward(idx, g, x.shape)
        assert gx[0, 0, 0, 1] == 10.0
        assert gx[0, 0, 1, 3] == 20.0
        assert gx[0, 0, 3, 1] == 30.0
        assert gx[0, 0, 3, 2] == 40.0
        assert gx.sum() == 100.0

    def test_odd_dims_drop_trailing(self):
        x = np.arange(25, dtype=np.float64).reshape(1, 1, 5, 5)
        out, _ = ops.maxpool_forward(x)
        assert out.shape == (1, 1, 2, 2)
        assert out[0, 0].tolist() == [[6.0, 8.0], [16.0, 18.0]]


class TestGlobalMaxPool:
    def test_channel_max(self):
        x = np.array([[1.0, 9.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)
        out, _ = ops.global_maxpool_forward(x)
        assert out.reshape(-1).tolist() == [9.0]

    def test_all_equal_routes_to_first_position(self):
        x = np.full((1, 2, 3, 3), 1.25)
        out, idx = ops.global_maxpool_forward(x)
        assert (out == 1.25).all()
        assert (idx == 0).all()
        g = np.ones((1, 2, 1, 1))
        gx = ops.global_maxpool_backward(idx, g, x.shape)
        assert gx[0, 0, 0, 0] == 1.0 and gx[0, 1, 0, 0] == 1.0
        assert gx.sum() == 2.0

    def test_against_scan_oracle(self):
        x = rand_tensor(30, (2, 3, 7, 7))
        out, idx = ops.global_maxpool_forward(x)
        for n in range(2):
            for c in range(3):
                best = -math.inf
                pos = -1
                for i in range(7):
                    for j in range(7):
                        if x[n, c, i, j] > best:
                            best = x[n, c, i, j]
                            pos = i * 7 + j
                assert out[n, c, 0, 0] == best
                assert idx[n, c] == pos


class TestRelu:
    def test_elementwise_example(self):
        x = np.array([-1.0, 0.0, 2.0]).reshape(1, 1, 1, 3)
        assert ops.relu_forward(x).reshape(-1).tolist() == [0.0, 0.0, 2.0]

    def test_backward_zero_at_kink(self):
        x = np.array([-1.0, 0.0, 2.0]).reshape(1, 1, 1, 3)
        g = np.ones_like(x)
        assert ops.relu_backward(x, g).reshape(-1).tolist() == [0.0, 0.0, 1.0]


class TestDense:
    def test_identity_weights(self):
        x = rand_tensor(31, (3, 1, 1, 5))
        out = ops.dense_forward(x, np.eye(5), np.zeros(5))
        assert np.allclose(out, x.reshape(3, 5))

    def test_zero_weights_broadcast_bias(self):
        x = rand_tensor(32, (2, 1, 1, 4))
        bias = np.array([1.0, 2.0, 3.0])
        out = ops.dense_forward(x, np.zeros((4, 3)), bias)
        assert np.array_equal(out, np.tile(bias, (2, 1)))

    def test_fan_in_checked(self):
        x = rand_tensor(33, (2, 1, 1, 4))
        with pytest.raises(ShapeError, match="fan-in"):
            ops.dense_forward(x, np.zeros((5, 3)), np.zeros(3))


class TestSoftmaxXent:
    def test_uniform_logits_loss_is_log_k(self):
        logits = np.zeros((4, 10))
        loss, grad = ops.softmax_xent(logits, np.array([0, 3, 5, 9]))
        assert abs(loss - math.log(10)) < 1e-12
        assert abs(loss - 2.302585) < 1e-6

    def test_saturated_margin_loss_near_zero(self):
        logits = np.zeros((2, 4))
        labels = np.array([1, 2])
        logits[0, 1] = 50.0
        logits[1, 2] = 50.0
        loss, _ = ops.softmax_xent(logits, labels)
        assert loss < 1e-8

    def test_grad_rows_sum_to_zero(self):
        logits = rand_tensor(34, (3, 4)).reshape(3, 4)
        _, grad = ops.softmax_xent(logits, np.array([0, 1, 2]))
        assert np.allclose(grad.sum(axis=1), 0.0, atol=1e-12)

    def test_stability_against_huge_logits(self):
        logits = np.full((1, 3), 1e4)
        loss, grad = ops.softmax_xent(logits, np.array([1]))
        assert math.isfinite(loss)
        assert np.isfinite(grad).all()

    def test_label_range_checked(self):
        with pytest.raises(ShapeError, match="label range"):
            ops.softmax_xent(np.zeros((2, 3)), np.array([0, 3]))


class TestConcatSplit:
    def test_round_trip(self):
        a = rand_tensor(35, (2, 3, 4, 4))
        b = rand_tensor(36, (2, 2, 4, 4))
        parts = ops.split_channels(ops.concat_channels([a, b]), [3, 2])
        assert np.array_equal(parts[0], a)
        assert np.array_equal(parts[1], b)

    def test_concat_of_one_is_identity(self):
        a = rand_tensor(37, (1, 2, 3, 3))
        assert np.array_equal(ops.concat_channels([a]), a)

    def test_order_preserved(self):
        ones = np.ones((1, 1, 2, 2))
        twos = np.full((1, 1, 2, 2), 2.0)
        out = ops.concat_channels([ones, twos])
        assert (out[:, 0] == 1.0).all()
        assert (out[:, 1] == 2.0).all()

    def test_mismatched_spatial_rejected(self):
        a = np.zeros((1, 1, 2, 2))
        b = np.zeros((1, 1, 3, 2))
        with pytest.raises(ShapeError, match="rows"):
            ops.concat_channels([a, b])

    def test_split_sizes_must_cover_channels(self):
        with pytest.raises(ShapeError, match="channel total"):
            ops.split_channels(np.zeros((1, 4, 2, 2)), [1, 2])
