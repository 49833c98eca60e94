"""Built-in oracle suites runnable from the command line.

Each check regenerates random instances from the given seed, runs the
production path against the matching independent oracle and reports a
named pass/fail line. ``fault`` names a check whose engine-side inputs
get perturbed before comparison; it exists so the harness itself can be
shown to catch a broken kernel.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels, metrics, oracles
from .kernels import ConvParams
from .lrp import RuleAssignment, lrp, lrp_linear_rule
from .network import (
    LayerSpec,
    NetworkDef,
    conv_spec,
    input_gradient,
    random_weights,
)

CHECK_NAMES = (
    "conv2d-vs-nested-loops",
    "pooling-vs-window-scan",
    "gradient-vs-finite-differences",
    "lrp-four-step-vs-double-loop",
    "lrp-conservation",
    "metric-identities",
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _toy_net(rng, max_layers=3):
    """Small conv/relu/pool stack ending in a 2-class 1x1 readout.

    Weights are biased positive so pre-activations stay well away from
    zero (finite differences and epsilon-free LRP both need that).
    """
    c = int(rng.integers(2, 4))
    size = int(rng.integers(3, 5)) * 2
    layers = []
    cin, h = c, size
    for i in range(int(rng.integers(1, max_layers + 1))):
        cout = int(rng.integers(2, 5))
        layers.append(conv_spec(f"conv{i}", cout, cin, 3, 3, padding=1, has_bias=False))
        layers.append(LayerSpec(f"relu{i}", "relu"))
        if h % 2 == 0 and h > 2 and rng.random() < 0.5:
            layers.append(LayerSpec(f"pool{i}", "maxpool"))
            h //= 2
        cin = cout
    layers.append(conv_spec("readout", 2, cin, h, h, has_bias=False))
    net = NetworkDef(tuple(layers), (c, size, size), ("class0", "class1"))
    weights = random_weights(
        net, seed=int(rng.integers(0, 2**31)), with_bias=False,
        dtype=np.float64, loc=0.45, scale=0.2,
    )
    x = rng.uniform(0.5, 1.5, size=(c, size, size))
    return net, weights, np.ascontiguousarray(x)


def check_conv(seed, instances=40, fault=False):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        cin = int(rng.integers(1, 5))
        cout = int(rng.integers(1, 5))
        h = int(rng.integers(3, 9))
        w = int(rng.integers(3, 9))
        kh = int(rng.integers(1, min(h, 4)))
        kw = int(rng.integers(1, min(w, 4)))
        pad = int(rng.integers(0, 2))
        x = rng.standard_normal((cin, h, w))
        kernel = rng.standard_normal((cout, cin, kh, kw))
        bias = rng.standard_normal(cout)
        engine_kernel = kernel + 1e-3 if fault else kernel
        got = kernels.conv2d(x, engine_kernel, bias, ConvParams(1, pad))
        want = oracles.conv2d_loops(x, kernel, bias, stride=1, padding=pad)
        worst = max(worst, oracles.rel_error(got, want))
    passed = worst <= 1e-12
    return CheckResult(
        "conv2d-vs-nested-loops", passed,
        f"{instances} instances, worst relative error {worst:.3e}",
    )


def check_pooling(seed, instances=40, fault=False):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        c = int(rng.integers(1, 5))
        h = int(rng.integers(1, 5)) * 2
        w = int(rng.integers(1, 5)) * 2
        x = rng.standard_normal((c, h, w))
        if fault:
            x_engine = x + 1e-3
        else:
            x_engine = x
        mx, _ = kernels.maxpool2d(x_engine)
        av = kernels.avgpool2d(x_engine)
        worst = max(worst, oracles.rel_error(mx, oracles.maxpool2d_scan(x)))
        worst = max(worst, oracles.rel_error(av, oracles.avgpool2d_scan(x)))
    passed = worst <= 1e-12
    return CheckResult(
        "pooling-vs-window-scan", passed,
        f"{instances} instances, worst relative error {worst:.3e}",
    )


def check_gradients(seed, instances=8, fault=False):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        net, weights, x = _toy_net(rng)
        grad = input_gradient(net, weights, x, 1)
        if fault:
            grad = grad + 1e-3

        def score_of(xv):
            from .network import class_score, forward

            return class_score(forward(net, weights, xv).pre_softmax, 1)

        fd = oracles.central_difference(score_of, x, h=1e-4)
        worst = max(worst, oracles.rel_error(grad, fd))
    passed = worst <= 1e-6
    return CheckResult(
        "gradient-vs-finite-differences", passed,
        f"{instances} toy nets, worst relative error {worst:.3e}",
    )


def check_lrp_formula(seed, instances=10, fault=False):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        cin = int(rng.integers(2, 4))
        cout = int(rng.integers(2, 4))
        h = int(rng.integers(2, 4))
        layer = conv_spec("probe", cout, cin, 2, 2, padding=1, has_bias=False)
        kernel = rng.standard_normal(layer.kernel_shape)
        x = rng.uniform(0.2, 1.0, size=(cin, h, h))
        ho = h + 2 - 2 + 1
        upstream = rng.standard_normal((cout, ho, ho))
        got = lrp_linear_rule(x, layer, upstream, 0.0, kernel=kernel)
        if fault:
            got = got + 1e-3
        mat, _ = oracles.conv_weight_matrix(kernel, x.shape, stride=1, padding=1)
        want = oracles.lrp_z_double_loop(
            x.reshape(-1), mat, None, upstream.reshape(-1), 0.0
        )
        worst = max(worst, oracles.rel_error(got.reshape(-1), want))
    passed = worst <= 1e-10
    return CheckResult(
        "lrp-four-step-vs-double-loop", passed,
        f"{instances} layers, worst relative error {worst:.3e}",
    )


def check_conservation(seed, instances=8, fault=False):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        net, weights, x = _toy_net(rng)
        rules = RuleAssignment.z_everywhere(net, epsilon=0.0)
        trace = lrp(net, weights, x, 1, rules)
        top = trace.sums[0][1]
        if fault:
            top = top * (1.0 + 1e-3)
        for _, s in trace.sums:
            worst = max(worst, abs(s - top) / max(abs(top), 1e-300))
    passed = worst <= 1e-6
    return CheckResult(
        "lrp-conservation", passed,
        f"{instances} bias-free nets, worst relative drift {worst:.3e}",
    )


def check_metrics(seed, instances=20, fault=False):
    rng = np.random.default_rng(seed)
    worst = 0.0
    identity_ok = True
    for _ in range(instances):
        n = int(rng.integers(8, 40))
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        scores = np.round(rng.random(n), 2)  # coarse grid forces ties
        samples = [
            metrics.ScoredSample(int(l), float(s)) for l, s in zip(labels, scores)
        ]
        fast = metrics.roc_auc(samples)
        if fault:
            fast += 1e-3
        slow = oracles.auc_pair_counting(list(labels), list(scores))
        worst = max(worst, abs(fast - slow))

        k = int(rng.integers(2, 5))
        counts = rng.integers(0, 30, size=(k, k))
        if counts.sum() == 0:
            counts[0, 0] = 1
        matrix = metrics.ConfusionMatrix(counts, tuple(f"c{i}" for i in range(k)))
        rep = metrics.report(matrix)
        if abs(rep.weighted_recall - rep.accuracy) > 1e-12:
            identity_ok = False
    passed = worst <= 1e-12 and identity_ok
    return CheckResult(
        "metric-identities", passed,
        f"{instances} instances, worst AUC gap {worst:.3e}, "
        f"weighted-recall==accuracy {'held' if identity_ok else 'VIOLATED'}",
    )


_CHECKS = {
    "conv2d-vs-nested-loops": check_conv,
    "pooling-vs-window-scan": check_pooling,
    "gradient-vs-finite-differences": check_gradients,
    "lrp-four-step-vs-double-loop": check_lrp_formula,
    "lrp-conservation": check_conservation,
    "metric-identities": check_metrics,
}


def run_selftest(seed=0, fault=None):
    """Run every named check; returns the list of CheckResult."""
    if fault is not None and fault not in _CHECKS:
        raise ValueError(f"unknown check {fault!r}; known: {sorted(_CHECKS)}")
    results = []
    for name in CHECK_NAMES:
        results.append(_CHECKS[name](seed, fault=(fault == name)))
    return results
