"""Forward/backward kernels against hand values, loop oracles and
finite differences."""

import numpy as np
import pytest

from netlens import kernels, oracles
from netlens.errors import ArgumentError, DimensionError
from netlens.kernels import ConvParams


def arr(data, dtype=np.float64):
    return np.asarray(data, dtype=dtype)


class TestConv2d:
    def test_scalar_product(self):
        out = kernels.conv2d(
            arr([[[2.0]]]), arr([[[[3.0]]]]), arr([0.0]), ConvParams(1, 0)
        )
        assert out.shape == (1, 1, 1)
        assert out[0, 0, 0] == 6.0

    def test_all_ones_overlap_counts(self):
        x = np.ones((1, 3, 3))
        k = np.ones((1, 1, 3, 3))
        out = kernels.conv2d(x, k, None, ConvParams(1, 1))[0]
        expected = arr([[4, 6, 4], [6, 9, 6], [4, 6, 4]])
        assert np.array_equal(out, expected)

    def test_matches_nested_loop_oracle(self):
        rng = np.random.default_rng(42)
        x = rng.standard_normal((2, 4, 4))
        k = rng.standard_normal((3, 2, 3, 3))
        b = rng.standard_normal(3)
        got = kernels.conv2d(x, k, b, ConvParams(1, 1))
        want = oracles.conv2d_loops(x, k, b, stride=1, padding=1)
        assert oracles.rel_error(got, want) <= 1e-5

    def test_f32_vs_f64_oracle_tolerances(self):
        rng = np.random.default_rng(7)
        x64 = rng.standard_normal((3, 6, 6))
        k64 = rng.standard_normal((4, 3, 3, 3))
        want = oracles.conv2d_loops(x64, k64, None, stride=1, padding=1)
        got32 = kernels.conv2d(
            x64.astype(np.float32), k64.astype(np.float32), None, ConvParams(1, 1)
        )
        got64 = kernels.conv2d(x64, k64, None, ConvParams(1, 1))
        assert oracles.rel_error(got32, want) <= 1e-5
        assert oracles.rel_error(got64, want) <= 1e-12

    def test_linearity_zero_bias(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((2, 5, 5))
        y = rng.standard_normal((2, 5, 5))
        k = rng.standard_normal((3, 2, 3, 3))
        a, b = 1.7, -0.6
        lhs = kernels.conv2d(a * x + b * y, k, None, ConvParams(1, 1))
        rhs = a * kernels.conv2d(x, k, None, ConvParams(1, 1)) + b * kernels.conv2d(
            y, k, None, ConvParams(1, 1)
        )
        assert oracles.rel_error(lhs, rhs) <= 1e-6

    def test_run_to_run_bitwise(self):
        rng = np.random.default_rng(13)
        x = rng.standard_normal((4, 8, 8)).astype(np.float32)
        k = rng.standard_normal((5, 4, 3, 3)).astype(np.float32)
        first = kernels.conv2d(x, k, None, ConvParams(1, 1))
        second = kernels.conv2d(x, k, None, ConvParams(1, 1))
        assert first.tobytes() == second.tobytes()

    def test_channel_mismatch_names_axis(self):
        with pytest.raises(DimensionError) as exc:
            kernels.conv2d(np.ones((2, 4, 4)), np.ones((1, 3, 3, 3)))
        assert exc.value.axis == "channels"

    def test_kernel_larger_than_padded_input(self):
        with pytest.raises(DimensionError):
            kernels.conv2d(np.ones((1, 2, 2)), np.ones((1, 1, 5, 5)), None, ConvParams(1, 0))

    def test_output_geometry(self):
        out = kernels.conv2d(
            np.ones((1, 7, 5)), np.ones((2, 1, 3, 3)), None, ConvParams(2, 1)
        )
        assert out.shape == (2, 4, 3)  # (7+2-3)//2+1, (5+2-3)//2+1


class TestPooling:
    def test_maxpool_basic(self):
        out, arg = kernels.maxpool2d(arr([[[1.0, 2.0], [3.0, 4.0]]]))
        assert out.shape == (1, 1, 1)
        assert out[0, 0, 0] == 4.0
        assert arg[0, 0, 0] == 3  # row-major window position

    def test_maxpool_constant_input(self):
        out, arg = kernels.maxpool2d(np.full((2, 4, 4), 7.0))
        assert np.all(out == 7.0)
        assert np.all(arg == 0)  # ties resolve to the first window index

    def test_maxpool_matches_window_scan(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((3, 8, 8))
        out, _ = kernels.maxpool2d(x)
        assert np.array_equal(out, oracles.maxpool2d_scan(x))

    def test_avgpool_basic(self):
        out = kernels.avgpool2d(arr([[[1.0, 2.0], [3.0, 4.0]]]))
        assert out[0, 0, 0] == 2.5

    def test_avgpool_constant(self):
        out = kernels.avgpool2d(np.full((2, 6, 6), 3.25))
        assert out.shape == (2, 3, 3)
        assert np.all(out == 3.25)

    def test_avgpool_matches_window_scan_exactly(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((3, 8, 8))
        assert np.array_equal(kernels.avgpool2d(x), oracles.avgpool2d_scan(x))

    def test_odd_extent_rejected(self):
        with pytest.raises(DimensionError):
            kernels.maxpool2d(np.ones((1, 3, 4)))
        with pytest.raises(DimensionError):
            kernels.avgpool2d(np.ones((1, 4, 5)))

    def test_outputs_bounded_by_input(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((2, 6, 6))
        mx, _ = kernels.maxpool2d(x)
        av = kernels.avgpool2d(x)
        assert mx.max() <= x.max() and mx.min() >= x.min()
        assert av.max() <= x.max() and av.min() >= x.min()


class TestRelu:
    def test_basic(self):
        assert np.array_equal(kernels.relu(arr([-1.0, 0.0, 2.0])), arr([0.0, 0.0, 2.0]))

    def test_all_negative(self):
        assert np.all(kernels.relu(-np.ones((2, 3, 3))) == 0.0)

    def test_idempotent(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal((3, 5, 5))
        once = kernels.relu(x)
        assert np.array_equal(kernels.relu(once), once)


class TestSoftmax:
    def test_uniform(self):
        out = kernels.softmax(arr([0.0, 0.0]))
        assert np.allclose(out, [0.5, 0.5])
        assert abs(out.sum() - 1.0) <= 1e-6

    def test_shift_invariance(self):
        rng = np.random.default_rng(10)
        x = rng.standard_normal(6)
        assert np.allclose(
            kernels.softmax(x), kernels.softmax(x + 17.5), atol=1e-7
        )

    def test_large_scores_do_not_overflow(self):
        out = kernels.softmax(arr([1000.0, 0.0]))
        assert np.all(np.isfinite(out))
        assert out[0] == pytest.approx(1.0, abs=1e-12)
        assert out[1] == pytest.approx(0.0, abs=1e-12)

    def test_positive_and_normalized(self):
        rng = np.random.default_rng(11)
        out = kernels.softmax(rng.standard_normal(9))
        assert np.all(out > 0)
        assert out.sum() == pytest.approx(1.0, abs=1e-6)


class TestVjps:
    def test_relu_vjp(self):
        got = kernels.vjp_relu(arr([-1.0, 2.0]), arr([5.0, 7.0]))
        assert np.array_equal(got, arr([0.0, 7.0]))

    def test_maxpool_vjp_routes_to_argmax(self):
        x = arr([[[1.0, 2.0], [3.0, 4.0]]])
        _, argmax = kernels.maxpool2d(x)
        got = kernels.vjp_maxpool2d(argmax, arr([[[10.0]]]), x.shape)
        assert np.array_equal(got, arr([[[0.0, 0.0], [0.0, 10.0]]]))

    def test_maxpool_vjp_tie_first_index(self):
        x = np.full((1, 2, 2), 5.0)
        _, argmax = kernels.maxpool2d(x)
        got = kernels.vjp_maxpool2d(argmax, arr([[[4.0]]]), x.shape)
        assert np.array_equal(got, arr([[[4.0, 0.0], [0.0, 0.0]]]))

    def test_avgpool_vjp_uniform_quarter(self):
        got = kernels.vjp_avgpool2d(arr([[[8.0]]]), (1, 2, 2))
        assert np.array_equal(got, np.full((1, 2, 2), 2.0))

    def test_conv_vjp_matches_finite_differences(self):
        rng = np.random.default_rng(21)
        x = rng.standard_normal((2, 6, 6))
        k = rng.standard_normal((3, 2, 3, 3))
        upstream = rng.standard_normal((3, 6, 6))

        def scalar(xv):
            return float(np.sum(kernels.conv2d(xv, k, None, ConvParams(1, 1)) * upstream))

        got = kernels.vjp_conv2d(k, upstream, x.shape, ConvParams(1, 1))
        fd = oracles.central_difference(scalar, x, h=1e-4)
        assert oracles.rel_error(got, fd) <= 1e-5

    @pytest.mark.parametrize("stride,padding", [(1, 0), (1, 1), (2, 1)])
    def test_conv_vjp_geometries(self, stride, padding):
        rng = np.random.default_rng(22 + stride + padding)
        x = rng.standard_normal((2, 6, 6))
        k = rng.standard_normal((3, 2, 3, 3))
        params = ConvParams(stride, padding)
        out = kernels.conv2d(x, k, None, params)
        upstream = rng.standard_normal(out.shape)

        def scalar(xv):
            return float(np.sum(kernels.conv2d(xv, k, None, params) * upstream))

        got = kernels.vjp_conv2d(k, upstream, x.shape, params)
        fd = oracles.central_difference(scalar, x, h=1e-4)
        assert oracles.rel_error(got, fd) <= 1e-6

    def test_upstream_shape_enforced(self):
        with pytest.raises(DimensionError):
            kernels.vjp_conv2d(np.ones((1, 1, 3, 3)), np.ones((1, 2, 2)), (1, 4, 4),
                               ConvParams(1, 1))
        with pytest.raises(DimensionError):
            kernels.vjp_avgpool2d(np.ones((1, 3, 3)), (1, 4, 4))
        with pytest.raises(DimensionError):
            kernels.vjp_relu(np.ones((2, 2)), np.ones((3, 2)))


class TestFiniteness:
    def test_kernels_finite_on_finite_input(self):
        rng = np.random.default_rng(30)
        x = rng.standard_normal((3, 4, 4)) * 1e3
        k = rng.standard_normal((2, 3, 3, 3)) * 1e3
        for out in (
            kernels.conv2d(x, k, None, ConvParams(1, 1)),
            kernels.maxpool2d(x)[0],
            kernels.avgpool2d(x),
            kernels.relu(x),
        ):
            assert np.all(np.isfinite(out))

    def test_immutability(self):
        out = kernels.relu(np.ones((2, 2, 2)))
        with pytest.raises(ValueError):
            out[0, 0, 0] = 5.0

    def test_pool_requires_window_two(self):
        with pytest.raises(ArgumentError):
            kernels.maxpool2d(np.ones((1, 4, 4)), window=3, stride=3)
