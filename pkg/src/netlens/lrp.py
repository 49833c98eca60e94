"""Layer-wise relevance propagation from masked class scores to pixels.

The backward pass starts from the pre-softmax score map with every
non-target class zeroed, then redistributes relevance layer by layer:
convolutions and average pools under the basic proportional rule with a
sign-matched stabilizer, the input-adjacent convolution optionally
under the pixel-bound rule, ReLU passing relevance through unchanged.
Max pools are first rewritten as average pools so every redistribution
step is a linear layer.

Each rule runs as the four-step scheme: (1) forward through the layer,
(2) elementwise divide upstream relevance by the stabilized
pre-activations, (3) the layer's input-space vjp applied to the
quotient, (4) elementwise multiply by the input activations. Bias, when
present, joins the denominator in step 1 but receives no redistributed
share, so exact conservation holds only for bias-free networks with a
zero stabilizer.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .errors import ArgumentError, ConfigError, NumericalError
from .network import (
    AVGPOOL,
    CONV,
    INPUT_NAME,
    MAXPOOL,
    NetworkDef,
    RELU,
    SOFTMAX,
    _run_layers,
)
from .saliency import SaliencyMap
from .tensor import freeze

DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class ZRule:
    """Basic proportional redistribution with stabilizer epsilon."""

    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.epsilon < 0:
            raise ArgumentError(f"epsilon must be >= 0, got {self.epsilon}")


@dataclass(frozen=True)
class ZBRule:
    """Input rule honoring per-channel pixel bounds [low, high]."""

    low: tuple
    high: tuple
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.epsilon < 0:
            raise ArgumentError(f"epsilon must be >= 0, got {self.epsilon}")
        lo, hi = np.asarray(self.low), np.asarray(self.high)
        if lo.shape != hi.shape:
            raise ArgumentError("low/high bounds must have matching shapes")
        if np.any(lo > hi):
            raise ArgumentError("lower bounds must not exceed upper bounds")


@dataclass(frozen=True)
class RuleAssignment:
    """Map from layer name to its propagation rule.

    ``paper_default`` reproduces the described configuration: the basic
    rule on every conv/pool layer except the input-adjacent convolution,
    which gets the pixel-bound rule. Custom per-layer maps are accepted
    for experimentation.
    """

    rules: dict

    @classmethod
    def paper_default(cls, net, low, high, epsilon=DEFAULT_EPSILON):
        rules = {}
        first_conv = None
        for l in net.layers:
            if l.kind == CONV and first_conv is None:
                first_conv = l.name
                rules[l.name] = ZBRule(tuple(low), tuple(high), epsilon)
            elif l.kind in (CONV, MAXPOOL, AVGPOOL):
                rules[l.name] = ZRule(epsilon)
        if first_conv is None:
            raise ConfigError("network has no convolution layer")
        return cls(rules)

    @classmethod
    def z_everywhere(cls, net, epsilon=DEFAULT_EPSILON):
        return cls(
            {
                l.name: ZRule(epsilon)
                for l in net.layers
                if l.kind in (CONV, MAXPOOL, AVGPOOL)
            }
        )

    def validate_coverage(self, net):
        missing = [
            l.name
            for l in net.layers
            if l.kind in (CONV, AVGPOOL) and l.name not in self.rules
        ]
        if missing:
            raise ConfigError(f"no propagation rule assigned for layers {missing}")


@dataclass
class RelevanceTrace:
    """Relevance tensors top-down, masked scores first, pixels last.

    Each entry is (activation name, relevance of that activation); the
    final entry is the input. ``sums`` carries the per-layer totals used
    by conservation checks and reports.
    """

    entries: list
    target_class: int
    sums: list

    def relevance(self, name):
        for n, r in self.entries:
            if n == name:
                return r
        raise ArgumentError(f"no relevance recorded for {name!r}")

    def pixel(self):
        return self.entries[-1][1]


def canonicalize_for_lrp(net):
    """Replace every max pool with an average pool of the same geometry."""
    layers = tuple(
        replace(l, kind=AVGPOOL) if l.kind == MAXPOOL else l for l in net.layers
    )
    return NetworkDef(layers, net.input_shape, net.class_manifest)


def mask_top_relevance(scores, target_class):
    """Zero every class channel except the target."""
    k = scores.shape[0]
    if not 0 <= target_class < k:
        raise ArgumentError(f"target_class must be in 0..{k - 1}, got {target_class}")
    masked = np.zeros_like(scores)
    masked[target_class] = scores[target_class]
    return freeze(masked)


def _stabilized(z, epsilon):
    if epsilon == 0.0:
        if np.any(z == 0):
            raise NumericalError(
                "zero denominator with epsilon 0; pass epsilon > 0 or use a "
                "bias-free layer with nonzero pre-activations"
            )
        return z
    return z + epsilon * np.where(z >= 0, z.dtype.type(1), z.dtype.type(-1))


def _layer_forward(layer, x, kernel, bias):
    if layer.kind == CONV:
        return kernels.conv2d(x, kernel, bias, layer.params)
    if layer.kind == AVGPOOL:
        return kernels.avgpool2d(x)
    raise ConfigError(f"layer kind {layer.kind!r} is not a linear relevance layer")


def _layer_vjp(layer, in_shape, kernel, s):
    if layer.kind == CONV:
        return kernels.vjp_conv2d(kernel, s, in_shape, layer.params)
    return kernels.vjp_avgpool2d(s, in_shape)


def lrp_linear_rule(activations, layer, upstream, epsilon, kernel=None, bias=None):
    """Basic rule for one conv or average-pool layer (four-step scheme)."""
    z = _layer_forward(layer, activations, kernel, bias)
    if upstream.shape != z.shape:
        raise ArgumentError(
            f"upstream relevance shape {upstream.shape} does not match layer "
            f"output {z.shape}"
        )
    s = upstream / _stabilized(z, epsilon)
    c = _layer_vjp(layer, activations.shape, kernel, s)
    return freeze(activations * c)


def lrp_zb_rule(pixels, first_layer, upstream, low, high, epsilon, kernel, bias=None):
    """Pixel-bound input rule, run as three forward/vjp passes.

    low/high are per-channel bounds broadcast over the spatial axes;
    pixels must lie inside them.
    """
    if first_layer.kind != CONV:
        raise ConfigError("the pixel-bound rule applies to the input convolution")
    lo = np.broadcast_to(
        np.asarray(low, dtype=pixels.dtype).reshape(-1, 1, 1), pixels.shape
    )
    hi = np.broadcast_to(
        np.asarray(high, dtype=pixels.dtype).reshape(-1, 1, 1), pixels.shape
    )
    if np.any(pixels < lo) or np.any(pixels > hi):
        raise ArgumentError("pixel values fall outside the declared [low, high] box")
    w_pos = np.maximum(kernel, kernel.dtype.type(0))
    w_neg = np.minimum(kernel, kernel.dtype.type(0))
    lo = np.ascontiguousarray(lo)
    hi = np.ascontiguousarray(hi)
    z = (
        kernels.conv2d(pixels, kernel, bias, first_layer.params)
        - kernels.conv2d(lo, w_pos, None, first_layer.params)
        - kernels.conv2d(hi, w_neg, None, first_layer.params)
    )
    s = upstream / _stabilized(z, epsilon)
    shape = pixels.shape
    rel = (
        pixels * kernels.vjp_conv2d(kernel, s, shape, first_layer.params)
        - lo * kernels.vjp_conv2d(w_pos, s, shape, first_layer.params)
        - hi * kernels.vjp_conv2d(w_neg, s, shape, first_layer.params)
    )
    return freeze(rel)


def lrp(net, weights, x, target_class, rules):
    """Full relevance pass; returns the per-layer RelevanceTrace.

    Activations come from the true network forward (max pools intact);
    the max-to-average substitution applies only while redistributing
    relevance, so every step conserves totals against the real
    pre-softmax score. ReLU layers pass relevance through unchanged.
    """
    canon = canonicalize_for_lrp(net)
    rules.validate_coverage(canon)
    entries, pre_softmax, _ = _run_layers(net, weights, x, keep_ctx=False)
    activations = dict(entries)

    rel = mask_top_relevance(pre_softmax, target_class)
    names = [INPUT_NAME] + [l.name for l in canon.layers]
    # relevance is recorded against the activation it describes; start at
    # the score layer (the layer feeding softmax, or the last layer).
    top_index = len(canon.layers)
    if canon.layers[-1].kind == SOFTMAX:
        top_index -= 1
    trace_entries = [(names[top_index], rel)]

    for idx in range(top_index - 1, -1, -1):
        layer = canon.layers[idx]
        below = activations[names[idx]]
        if layer.kind == RELU:
            pass  # relevance flows through unchanged
        elif layer.kind == CONV:
            rule = rules.rules[layer.name]
            kernel = weights.kernel(layer.name)
            bias = weights.bias(layer.name) if layer.has_bias else None
            if isinstance(rule, ZBRule):
                rel = lrp_zb_rule(
                    below, layer, rel, rule.low, rule.high, rule.epsilon, kernel, bias
                )
            elif isinstance(rule, ZRule):
                rel = lrp_linear_rule(below, layer, rel, rule.epsilon, kernel, bias)
            else:
                raise ConfigError(f"unknown rule type for layer {layer.name!r}")
        elif layer.kind == AVGPOOL:
            rule = rules.rules[layer.name]
            rel = lrp_linear_rule(below, layer, rel, rule.epsilon)
        else:
            raise ConfigError(f"cannot propagate relevance through {layer.kind!r}")
        trace_entries.append((names[idx], rel))

    sums = [(n, float(np.sum(r, dtype=np.float64))) for n, r in trace_entries]
    return RelevanceTrace(trace_entries, target_class, sums)


def pool_relevance_channels(trace, layer_name):
    """Channel-sum of one layer's relevance as a signed spatial map."""
    rel = trace.relevance(layer_name)
    if rel.ndim != 3:
        raise ArgumentError(f"relevance of {layer_name!r} is not a (C, H, W) map")
    values = np.sum(rel, axis=0)
    return SaliencyMap(values=values, method="lrp", source_layer=layer_name)


def pixel_relevance(trace):
    """Channel-sum of the input relevance: the pixel attribution map."""
    return pool_relevance_channels(trace, INPUT_NAME)


def export_relevance_trace(trace, directory, clip_percentile=99.0):
    """Write per-layer relevance heatmaps (PPM) and the sums summary.

    Files are index-prefixed in top-down order; sums.txt lists one
    "layer<TAB>sum" line per entry.
    """
    import os

    from .imagepipe import encode_ppm
    from .saliency import render_heatmap
    from .weightio import write_atomic

    os.makedirs(directory, exist_ok=True)
    for idx, (name, _) in enumerate(trace.entries):
        smap = pool_relevance_channels(trace, name)
        img = render_heatmap(smap, clip_percentile)
        write_atomic(os.path.join(directory, f"{idx:03d}_{name}.ppm"), encode_ppm(img))
    lines = [f"{name}\t{format(s, '.17g')}" for name, s in trace.sums]
    write_atomic(
        os.path.join(directory, "sums.txt"), ("\n".join(lines) + "\n").encode("utf-8")
    )
