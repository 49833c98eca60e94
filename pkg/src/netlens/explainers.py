"""Gradient- and perturbation-based attribution methods.

Grad-CAM weights a convolution layer's feature maps by the spatial mean
of the class-score gradient at that layer and takes a ReLU of the
weighted sum; the gradient path keeps true max-pool routing (only the
relevance engine substitutes average pooling). Occlusion slides a
baseline patch over the input and records the class-score drop per
position. SmoothGrad averages plain input gradients over Gaussian-
perturbed copies of the input under an explicit seed, so runs are
reproducible byte for byte.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, ConfigError, DimensionError
from .network import (
    CONV,
    activation_gradient,
    class_score,
    forward,
    input_gradient,
)
from .saliency import SaliencyMap

OCCLUSION_PATCH = 16
OCCLUSION_STRIDE = 8
SMOOTHGRAD_SAMPLES = 25
SMOOTHGRAD_SIGMA_FACTOR = 0.15  # of the normalized pixel range (high - low)


@dataclass(frozen=True)
class GradCamContext:
    """Forward activations and score gradients at the target layer."""

    activations: np.ndarray
    gradients: np.ndarray
    spatial_size: int

    def __post_init__(self):
        if self.activations.shape != self.gradients.shape:
            raise DimensionError(
                f"activation shape {self.activations.shape} does not match "
                f"gradient shape {self.gradients.shape}",
                axis="rank",
            )
        if self.spatial_size != self.activations.shape[1] * self.activations.shape[2]:
            raise ArgumentError("spatial_size must equal H*W of the layer")


def default_gradcam_layer(net):
    """Deepest convolution ahead of the classifier stage.

    Picks the last conv that still precedes a pooling layer; if the
    network has no pooling, falls back to the last non-scoring conv (or
    the only conv).
    """
    conv_names = [l.name for l in net.layers if l.kind == CONV]
    if not conv_names:
        raise ConfigError("network has no convolution layer")
    last_pool = None
    for i, l in enumerate(net.layers):
        if l.kind in ("maxpool", "avgpool"):
            last_pool = i
    if last_pool is not None:
        before = [l.name for l in net.layers[:last_pool] if l.kind == CONV]
        if before:
            return before[-1]
    return conv_names[-2] if len(conv_names) > 1 else conv_names[0]


def gradcam_context(net, weights, x, target_class, layer_name):
    layer = net.layer(layer_name)
    if layer.kind != CONV:
        raise ConfigError(f"Grad-CAM target {layer_name!r} is not a conv layer")
    trace = forward(net, weights, x)
    acts = trace.activation(layer_name)
    grads = activation_gradient(net, weights, x, target_class, layer_name)
    return GradCamContext(acts, grads, acts.shape[1] * acts.shape[2])


def grad_cam(net, weights, x, target_class, layer_name=None):
    """Coarse class-discriminative localization map at a conv layer."""
    if layer_name is None:
        layer_name = default_gradcam_layer(net)
    ctx = gradcam_context(net, weights, x, target_class, layer_name)
    alpha = np.mean(ctx.gradients, axis=(1, 2))
    weighted = np.tensordot(alpha, ctx.activations, axes=([0], [0]))
    values = np.maximum(weighted, 0.0)
    return SaliencyMap(
        values=values,
        method=f"gradcam(layer={layer_name})",
        source_layer=layer_name,
    )


def _resolve_baseline(x, baseline):
    if np.isscalar(baseline):
        return np.full_like(x, x.dtype.type(baseline))
    baseline = np.asarray(baseline, dtype=x.dtype)
    if baseline.shape == (x.shape[0],):
        return np.broadcast_to(baseline[:, None, None], x.shape).copy()
    if baseline.shape == x.shape:
        return baseline.copy()
    raise DimensionError(
        f"baseline shape {baseline.shape} is neither scalar, per-channel "
        f"({x.shape[0]},) nor full {x.shape}",
        axis="baseline",
    )


def occlusion_map(net, weights, x, target_class, patch=OCCLUSION_PATCH,
                  stride=OCCLUSION_STRIDE, baseline=0.0):
    """Score drop per occluded patch position.

    Cell (i, j) holds original minus occluded target score when the
    patch at (i*stride, j*stride) is replaced by the baseline. Use
    :func:`occlusion_to_pixels` for a per-pixel view.
    """
    _, h, w = x.shape
    if patch < 1 or stride < 1:
        raise ArgumentError("patch and stride must be >= 1")
    if patch > h or patch > w:
        raise DimensionError(
            f"patch {patch} exceeds input extent {h}x{w}", axis="patch"
        )
    base = _resolve_baseline(x, baseline)
    reference = class_score(forward(net, weights, x).pre_softmax, target_class)
    ys = range(0, h - patch + 1, stride)
    xs = range(0, w - patch + 1, stride)
    values = np.zeros((len(ys), len(xs)), dtype=np.float64)
    for i, y0 in enumerate(ys):
        for j, x0 in enumerate(xs):
            patched = np.array(x)
            patched[:, y0 : y0 + patch, x0 : x0 + patch] = base[
                :, y0 : y0 + patch, x0 : x0 + patch
            ]
            score = class_score(forward(net, weights, patched).pre_softmax, target_class)
            values[i, j] = reference - score
    return SaliencyMap(
        values=values,
        method=f"occlusion(patch={patch},stride={stride})",
    )


def occlusion_to_pixels(smap, patch, stride, height, width):
    """Expand an occlusion cell map to pixel resolution.

    Each pixel averages the cells of every patch that covers it, so
    overlapping coverage is blended rather than overwritten.
    """
    acc = np.zeros((height, width), dtype=np.float64)
    count = np.zeros((height, width), dtype=np.float64)
    for i in range(smap.values.shape[0]):
        for j in range(smap.values.shape[1]):
            y0, x0 = i * stride, j * stride
            acc[y0 : y0 + patch, x0 : x0 + patch] += smap.values[i, j]
            count[y0 : y0 + patch, x0 : x0 + patch] += 1.0
    covered = count > 0
    acc[covered] /= count[covered]
    return SaliencyMap(values=acc, method=smap.method + "+pixels")


def smoothgrad(net, weights, x, target_class, samples=SMOOTHGRAD_SAMPLES,
               *, sigma, seed):
    """Noise-averaged input-gradient saliency, channel-summed.

    sigma and seed are mandatory: the Gaussian noise stream is fully
    determined by ``seed`` and reruns must match byte for byte. The mean
    is anchored at the first sample so a constant gradient field (sigma
    zero, or a purely linear network) is returned bit-exactly.
    """
    if samples < 1:
        raise ArgumentError(f"samples must be >= 1, got {samples}")
    if sigma < 0:
        raise ArgumentError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0.0:
        mean_grad = input_gradient(net, weights, x, target_class)
    else:
        rng = np.random.default_rng(seed)
        grads = []
        for _ in range(samples):
            noise = rng.normal(0.0, sigma, size=x.shape).astype(x.dtype)
            grads.append(input_gradient(net, weights, x + noise, target_class))
        anchor = grads[0].astype(np.float64)
        drift = np.zeros_like(anchor)
        for g in grads[1:]:
            drift += g.astype(np.float64) - anchor
        mean_grad = anchor + drift / samples
    values = np.sum(mean_grad, axis=0)
    return SaliencyMap(
        values=values,
        method=f"smoothgrad(n={samples},sigma={sigma},seed={seed})",
    )
