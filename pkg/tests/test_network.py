"""Network construction, forward tracing, classification and gradients."""

import numpy as np
import pytest

from conftest import linear_readout_net, score_fn, toy_net
from netlens import kernels, oracles
from netlens.errors import ArgumentError, DimensionError, WeightStoreError
from netlens.network import (
    LayerSpec,
    NetworkDef,
    WeightStore,
    activation_gradient,
    build_vgg16,
    class_score,
    classify,
    conv_spec,
    densify_to_conv,
    forward,
    input_gradient,
    network_from_dict,
    network_to_dict,
    random_weights,
    zero_weights,
)


class TestBuildVgg16:
    def test_final_channel_count(self):
        net = build_vgg16(1000, tuple(f"c{i}" for i in range(1000)))
        assert net.layer("fc8").kernel_shape[0] == 1000

    def test_spatial_trace_through_pools(self):
        net = build_vgg16(2, ("a", "b"))
        shapes = net.infer_shapes((3, 224, 224))
        by_name = dict(zip(["input"] + [l.name for l in net.layers], shapes))
        assert by_name["pool1"][1:] == (112, 112)
        assert by_name["pool2"][1:] == (56, 56)
        assert by_name["pool3"][1:] == (28, 28)
        assert by_name["pool4"][1:] == (14, 14)
        assert by_name["pool5"][1:] == (7, 7)

    def test_classifier_stage_channels(self):
        net = build_vgg16(7, tuple(f"c{i}" for i in range(7)))
        assert net.layer("fc6").kernel_shape[:2] == (4096, 512)
        assert net.layer("fc6").kernel_shape[2:] == (7, 7)
        assert net.layer("fc7").kernel_shape == (4096, 4096, 1, 1)
        assert net.layer("fc8").kernel_shape == (7, 4096, 1, 1)

    def test_thirteen_convs_five_pools(self):
        net = build_vgg16(2, ("a", "b"))
        kinds = [l.kind for l in net.layers]
        names = [l.name for l in net.layers]
        feature_convs = [n for n in names if n.startswith("conv")]
        assert len(feature_convs) == 13
        assert kinds.count("maxpool") == 5
        assert kinds[-1] == "softmax"

    def test_bad_num_classes(self):
        with pytest.raises(ArgumentError):
            build_vgg16(0, ())
        with pytest.raises(ArgumentError):
            build_vgg16(2, ("only-one",))

    def test_parameter_count_formula(self):
        # published VGG-16 total for the 1000-way head
        net = build_vgg16(1000, tuple(f"c{i}" for i in range(1000)))
        assert net.parameter_count() == 138_357_544


class TestDensify:
    def test_scalar_identity(self):
        spec, kernel = densify_to_conv(np.array([[5.0]]), (1, 1, 1))
        assert kernel.shape == (1, 1, 1, 1)
        out = kernels.conv2d(np.array([[[3.0]]]), kernel, None, spec.params)
        assert out[0, 0, 0] == 15.0

    def test_matches_dense_matmul_oracle(self):
        rng = np.random.default_rng(17)
        mat = rng.standard_normal((3, 12))
        spec, kernel = densify_to_conv(mat, (3, 2, 2))
        assert kernel.shape == (3, 3, 2, 2)
        x = rng.standard_normal((3, 2, 2))
        conv_out = kernels.conv2d(x, kernel, None, spec.params).reshape(-1)
        dense_out = mat @ x.reshape(-1)
        assert oracles.rel_error(conv_out, dense_out) <= 1e-6

    def test_vgg_fc6_shape(self):
        mat = np.zeros((4096, 25088), dtype=np.float32)
        spec, kernel = densify_to_conv(mat, (512, 7, 7))
        assert kernel.shape == (4096, 512, 7, 7)
        assert spec.params.padding == 0 and spec.params.stride == 1

    def test_size_mismatch(self):
        with pytest.raises(DimensionError):
            densify_to_conv(np.zeros((4, 10)), (3, 2, 2))


class TestForward:
    def test_zero_weights_give_uniform_softmax(self):
        net, _, x = toy_net(seed=1)
        weights = zero_weights(net, dtype=np.float64)
        # toy nets have no softmax layer; wrap one on for this check
        layers = net.layers + (LayerSpec("softmax", "softmax"),)
        net2 = NetworkDef(layers, net.input_shape, net.class_manifest)
        trace = forward(net2, weights, x)
        assert np.all(trace.pre_softmax == 0.0)
        probs = trace.entries[-1][1]
        assert np.allclose(probs, 1.0 / net.num_classes)

    def test_trace_matches_manual_composition(self):
        rng = np.random.default_rng(23)
        net = NetworkDef(
            (
                conv_spec("c", 3, 2, 3, 3, padding=1),
                LayerSpec("r", "relu"),
            ),
            (2, 4, 4),
            ("a", "b", "c"),
        )
        weights = random_weights(net, seed=2, dtype=np.float64)
        x = rng.standard_normal((2, 4, 4))
        trace = forward(net, weights, x)
        manual_conv = kernels.conv2d(x, weights.kernel("c"), weights.bias("c"),
                                     net.layer("c").params)
        assert np.array_equal(trace.activation("c"), manual_conv)
        assert np.array_equal(trace.activation("r"), kernels.relu(manual_conv))
        assert trace.names() == ["input", "c", "r"]

    def test_trace_length_and_shapes(self):
        net, weights, x = toy_net(seed=5)
        trace = forward(net, weights, x)
        assert len(trace.entries) == len(net.layers) + 1
        inferred = net.infer_shapes(x.shape)
        observed = [a.shape for _, a in trace.entries]
        assert observed == inferred

    def test_missing_weights(self):
        net, _, x = toy_net(seed=6)
        with pytest.raises(WeightStoreError):
            forward(net, WeightStore({}), x)

    def test_undersized_input_rejected(self):
        net, weights, x = toy_net(seed=7)
        with pytest.raises(DimensionError):
            forward(net, weights, x[:, :2, :2])


class TestClassify:
    def test_two_class_ranking(self):
        net = linear_readout_net(cin=1, size=1, num_classes=2)
        kernel = np.stack([np.full((1, 1, 1), 0.1), np.full((1, 1, 1), 0.9)])
        weights = WeightStore({"readout": (kernel, None)})
        manifest_net = NetworkDef(net.layers, net.input_shape, ("nonsmoking", "smoking"))
        ranked = classify(manifest_net, weights, np.ones((1, 1, 1)), 1)
        label, score, prob = ranked[0]
        assert label == "smoking"
        assert score == pytest.approx(0.9)
        expected_prob = float(kernels.softmax(np.array([0.1, 0.9]))[1])
        assert prob == pytest.approx(expected_prob)

    def test_all_equal_scores_tie_to_first(self):
        net = linear_readout_net(cin=1, size=1, num_classes=3)
        kernel = np.ones((3, 1, 1, 1))
        weights = WeightStore({"readout": (kernel, None)})
        ranked = classify(net, weights, np.ones((1, 1, 1)), 3)
        assert [r[0] for r in ranked] == ["class0", "class1", "class2"]

    def test_matches_argsort_oracle(self):
        net, weights, x = toy_net(seed=8, num_classes=3)
        ranked = classify(net, weights, x, 3)
        scores = forward(net, weights, x).pre_softmax.reshape(-1)
        oracle_order = sorted(range(3), key=lambda i: (-scores[i], i))
        assert [r[0] for r in ranked] == [net.class_manifest[i] for i in oracle_order]

    def test_top_k_range(self):
        net, weights, x = toy_net(seed=9)
        with pytest.raises(ArgumentError):
            classify(net, weights, x, 0)
        with pytest.raises(ArgumentError):
            classify(net, weights, x, 3)

    def test_argmax_invariant_under_score_shift(self):
        net, weights, x = toy_net(seed=10, num_classes=3, with_bias=True)
        top = classify(net, weights, x, 1)[0][0]
        shifted = {
            n: (k, b + 100.0 if n == "readout" else b)
            for n, (k, b) in weights.entries.items()
        }
        top_shifted = classify(net, WeightStore(shifted), x, 1)[0][0]
        assert top == top_shifted


class TestGradients:
    def test_linear_layer_gradient_is_weights(self):
        net = linear_readout_net(cin=2, size=3, num_classes=2)
        weights = random_weights(net, seed=3, with_bias=False, dtype=np.float64)
        x = np.random.default_rng(0).standard_normal((2, 3, 3))
        grad = input_gradient(net, weights, x, 1)
        assert np.allclose(grad, weights.kernel("readout")[1], atol=1e-12)

    def test_dead_relu_zero_gradient(self):
        net = NetworkDef(
            (
                conv_spec("c", 2, 1, 1, 1, has_bias=False),
                LayerSpec("r", "relu"),
                conv_spec("out", 2, 2, 2, 2, has_bias=False),
            ),
            (1, 2, 2),
            ("a", "b"),
        )
        kernel_neg = -np.ones((2, 1, 1, 1))
        out_kernel = np.ones((2, 2, 2, 2))
        weights = WeightStore({"c": (kernel_neg, None), "out": (out_kernel, None)})
        grad = input_gradient(net, weights, np.ones((1, 2, 2)), 0)
        assert np.all(grad == 0.0)

    def test_input_gradient_matches_finite_differences(self):
        for seed in (31, 32, 33):
            net, weights, x = toy_net(seed=seed)
            grad = input_gradient(net, weights, x, 1)
            fd = oracles.central_difference(score_fn(net, weights, 1), x, h=1e-4)
            assert oracles.rel_error(grad, fd) <= 1e-5

    def test_linear_net_gradient_independent_of_input(self):
        net = linear_readout_net(cin=2, size=4)
        weights = random_weights(net, seed=12, with_bias=False, dtype=np.float64)
        rng = np.random.default_rng(6)
        g1 = input_gradient(net, weights, rng.standard_normal((2, 4, 4)), 0)
        g2 = input_gradient(net, weights, rng.standard_normal((2, 4, 4)), 0)
        assert np.array_equal(g1, g2)

    def test_invalid_class_index(self):
        net, weights, x = toy_net(seed=14)
        with pytest.raises(ArgumentError):
            input_gradient(net, weights, x, 5)


class TestActivationGradient:
    def test_final_score_layer_is_one_hot(self):
        net, weights, x = toy_net(seed=15)
        last = net.layers[-1].name
        grad = activation_gradient(net, weights, x, 1, last)
        expected = np.zeros_like(grad)
        expected[1] = 1.0
        assert np.array_equal(grad, expected)

    def test_single_layer_equals_input_gradient(self):
        net = linear_readout_net(cin=2, size=3)
        weights = random_weights(net, seed=4, with_bias=False, dtype=np.float64)
        x = np.random.default_rng(1).standard_normal((2, 3, 3))
        # gradient w.r.t. the input == input_gradient when asked below layer 0
        g_full = input_gradient(net, weights, x, 0)
        fd = oracles.central_difference(score_fn(net, weights, 0), x, h=1e-4)
        assert oracles.rel_error(g_full, fd) <= 1e-6

    def test_matches_finite_differences_at_inner_layer(self):
        from conftest import run_tail

        net, weights, x = toy_net(seed=16, max_layers=2)
        layer_name = net.layers[0].name  # first conv
        acts = forward(net, weights, x).activation(layer_name)
        got = activation_gradient(net, weights, x, 1, layer_name)

        def scalar(act):
            return class_score(run_tail(net, weights, layer_name, act), 1)

        fd = oracles.central_difference(scalar, np.array(acts), h=1e-4)
        assert oracles.rel_error(got, fd) <= 1e-5

    def test_unknown_layer(self):
        net, weights, x = toy_net(seed=17)
        with pytest.raises(ArgumentError):
            activation_gradient(net, weights, x, 0, "nope")


class TestSerialization:
    def test_round_trip(self):
        net, _, _ = toy_net(seed=18)
        rebuilt = network_from_dict(network_to_dict(net))
        assert rebuilt == net

    def test_manifest_override(self):
        net, _, _ = toy_net(seed=19)
        data = network_to_dict(net)
        rebuilt = network_from_dict(data, class_manifest=("x", "y"))
        assert rebuilt.class_manifest == ("x", "y")


class TestNetworkValidation:
    def test_duplicate_names_rejected(self):
        with pytest.raises(ArgumentError):
            NetworkDef(
                (
                    conv_spec("dup", 1, 1, 1, 1),
                    LayerSpec("dup", "relu"),
                ),
                (1, 2, 2),
                ("a",),
            )

    def test_manifest_length_must_match_output(self):
        with pytest.raises(ArgumentError):
            NetworkDef(
                (conv_spec("c", 3, 1, 1, 1),),
                (1, 2, 2),
                ("a", "b"),
            )

    def test_shape_composition_enforced(self):
        with pytest.raises(DimensionError):
            NetworkDef(
                (
                    conv_spec("c1", 4, 1, 3, 3, padding=1),
                    conv_spec("c2", 2, 8, 3, 3, padding=1),  # wrong cin
                ),
                (1, 4, 4),
                ("a", "b"),
            )
