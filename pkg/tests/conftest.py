"""Shared builders for the test suite.

Toy networks keep weights shifted positive and inputs in (0.5, 1.5) so
pre-activations stay far from zero: finite differences near ReLU kinks
and epsilon-free LRP denominators both need that margin.
"""

import os

# the performance criterion is specified single-threaded; BLAS reads
# these at load time, so they must be set before numpy imports
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

import numpy as np
import pytest

from netlens import kernels
from netlens.network import (
    LayerSpec,
    NetworkDef,
    class_score,
    conv_spec,
    forward,
    random_weights,
)


def toy_net(seed, max_layers=3, num_classes=2, with_bias=False):
    """Random small conv/relu/pool stack with a full-field readout."""
    rng = np.random.default_rng(seed)
    c = int(rng.integers(2, 4))
    size = int(rng.integers(3, 5)) * 2
    layers = []
    cin, h = c, size
    for i in range(int(rng.integers(1, max_layers + 1))):
        cout = int(rng.integers(2, 5))
        layers.append(conv_spec(f"conv{i}", cout, cin, 3, 3, padding=1, has_bias=with_bias))
        layers.append(LayerSpec(f"relu{i}", "relu"))
        if h % 2 == 0 and h > 2 and rng.random() < 0.5:
            layers.append(LayerSpec(f"pool{i}", "maxpool"))
            h //= 2
        cin = cout
    layers.append(conv_spec("readout", num_classes, cin, h, h, has_bias=with_bias))
    manifest = tuple(f"class{i}" for i in range(num_classes))
    net = NetworkDef(tuple(layers), (c, size, size), manifest)
    weights = random_weights(
        net, seed=seed + 1, with_bias=with_bias, dtype=np.float64, loc=0.45, scale=0.2
    )
    x = np.ascontiguousarray(rng.uniform(0.5, 1.5, size=(c, size, size)))
    return net, weights, x


def linear_readout_net(cin=2, size=4, num_classes=2):
    """Single full-field conv, no activation: a purely linear scorer."""
    layers = (conv_spec("readout", num_classes, cin, size, size, has_bias=False),)
    manifest = tuple(f"class{i}" for i in range(num_classes))
    return NetworkDef(layers, (cin, size, size), manifest)


def score_fn(net, weights, target):
    """Scalar pre-softmax class score as a function of the input."""

    def f(x):
        return class_score(forward(net, weights, x).pre_softmax, target)

    return f


def run_tail(net, weights, layer_name, activation):
    """Forward the layers *after* layer_name from a given activation.

    Used as the function under finite differences when checking
    activation gradients and Grad-CAM weights.
    """
    names = [l.name for l in net.layers]
    start = names.index(layer_name) + 1
    cur = activation
    pre_softmax = None
    for l in net.layers[start:]:
        if l.kind == "conv":
            cur = kernels.conv2d(
                cur, weights.kernel(l.name),
                weights.bias(l.name) if l.has_bias else None, l.params,
            )
        elif l.kind == "maxpool":
            cur, _ = kernels.maxpool2d(cur)
        elif l.kind == "avgpool":
            cur = kernels.avgpool2d(cur)
        elif l.kind == "relu":
            cur = kernels.relu(cur)
        else:
            pre_softmax = cur
            cur = kernels.channel_softmax(cur)
    return cur if pre_softmax is None else pre_softmax


@pytest.fixture(scope="session")
def vgg_full():
    """Full VGG-16 with the 1000-channel head and random weights.

    Session-scoped: materializing 138M parameters takes seconds and the
    structural acceptance checks all share it.
    """
    from netlens.network import build_vgg16

    manifest = tuple(f"class{i:04d}" for i in range(1000))
    net = build_vgg16(1000, manifest)
    weights = random_weights(net, seed=99, scale=0.05)
    return net, weights
