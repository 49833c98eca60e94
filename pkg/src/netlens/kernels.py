"""Forward and backward numeric kernels for channel-major feature maps.

All operations are pure functions: inputs are never mutated and outputs
come back frozen. Convolution runs as an im2col + single matrix product
so the BLAS core does the heavy lifting; the reduction axis is laid out
in (channel, kernel-row, kernel-col) order, matching the direct-loop
formulation checked by the selftest oracles. For a fixed configuration
the summation order is fixed, so repeated runs are bitwise identical.

Pooling kernels are specialized to the 2x2 / stride-2 window used by the
network builder. Max pooling resolves ties to the first index in
row-major window order so the gradient routing is deterministic.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ArgumentError, DimensionError
from .tensor import check_chw, check_kernel, freeze


@dataclass(frozen=True)
class ConvParams:
    """Stride and symmetric zero padding of a convolution."""

    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.stride < 1:
            raise ArgumentError(f"stride must be >= 1, got {self.stride}")
        if self.padding < 0:
            raise ArgumentError(f"padding must be >= 0, got {self.padding}")


VGG_CONV = ConvParams(stride=1, padding=1)


def conv_output_hw(h, w, kh, kw, params):
    """Spatial output extents of conv2d, raising on impossible geometry."""
    s, p = params.stride, params.padding
    if h + 2 * p < kh:
        raise DimensionError(
            f"padded height {h + 2 * p} smaller than kernel height {kh}", axis="height"
        )
    if w + 2 * p < kw:
        raise DimensionError(
            f"padded width {w + 2 * p} smaller than kernel width {kw}", axis="width"
        )
    return (h + 2 * p - kh) // s + 1, (w + 2 * p - kw) // s + 1


def _pad_chw(x, padding):
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (padding, padding), (padding, padding)))


def _im2col(x, kh, kw, params):
    """Patch matrix of shape (Cin*kh*kw, Hout*Wout) in (c, ky, kx) order."""
    cin = x.shape[0]
    xp = _pad_chw(x, params.padding)
    s = params.stride
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::s, ::s]
    ho, wo = win.shape[1], win.shape[2]
    cols = win.transpose(0, 3, 4, 1, 2).reshape(cin * kh * kw, ho * wo)
    return np.ascontiguousarray(cols), ho, wo


def conv2d(x, kernel, bias=None, params=ConvParams()):
    """2-D convolution (cross-correlation) over a (Cin, H, W) map.

    kernel: (Cout, Cin, kh, kw); bias: (Cout,) or None. Output value at
    (o, i, j) is the dot product of kernel o with the zero-padded
    receptive field at (i, j), plus bias[o].
    """
    check_chw(x)
    check_kernel(kernel)
    cout, cin_k, kh, kw = kernel.shape
    if x.shape[0] != cin_k:
        raise DimensionError(
            f"input has {x.shape[0]} channels but kernel expects {cin_k}",
            axis="channels",
        )
    if bias is not None and bias.shape != (cout,):
        raise DimensionError(
            f"bias shape {bias.shape} does not match {cout} output channels",
            axis="bias",
        )
    conv_output_hw(x.shape[1], x.shape[2], kh, kw, params)
    cols, ho, wo = _im2col(x, kh, kw, params)
    kmat = kernel.reshape(cout, cin_k * kh * kw)
    out = kmat @ cols
    if bias is not None:
        out = out + bias[:, None]
    return freeze(out.reshape(cout, ho, wo))


def vjp_conv2d(kernel, upstream, input_shape, params=ConvParams()):
    """Gradient of conv2d with respect to its input.

    input_shape is the forward input's (Cin, H, W); upstream must have
    the forward output shape (Cout, Hout, Wout). Weight gradients are
    out of scope.
    """
    cout, cin, kh, kw = kernel.shape
    _, h, w = input_shape
    ho, wo = conv_output_hw(h, w, kh, kw, params)
    if upstream.shape != (cout, ho, wo):
        raise DimensionError(
            f"upstream shape {upstream.shape} does not match forward output "
            f"({cout}, {ho}, {wo})",
            axis="upstream",
        )
    kmat = kernel.reshape(cout, cin * kh * kw)
    cols = kmat.T @ upstream.reshape(cout, ho * wo)
    grad_cols = cols.reshape(cin, kh, kw, ho, wo)

    p, s = params.padding, params.stride
    hp, wp = h + 2 * p, w + 2 * p
    grad_padded = np.zeros((cin, hp, wp), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            grad_padded[:, i : i + s * ho : s, j : j + s * wo : s] += grad_cols[:, i, j]
    if p:
        grad_padded = grad_padded[:, p:-p, p:-p]
    return freeze(np.ascontiguousarray(grad_padded))


def _check_poolable(x, window, stride):
    check_chw(x)
    if window != 2 or stride != 2:
        raise ArgumentError("pooling is specialized to window 2, stride 2")
    _, h, w = x.shape
    if h % 2 or w % 2:
        raise DimensionError(
            f"pooling needs even extents, got {h}x{w} (no implicit padding)",
            axis="height" if h % 2 else "width",
        )


def maxpool2d(x, window=2, stride=2):
    """2x2/2 max pooling. Returns (output, argmax).

    argmax holds, per output cell, the flat index 0..3 of the window
    maximum in row-major window order (ties -> first index); it feeds
    the gradient path.
    """
    _check_poolable(x, window, stride)
    c, h, w = x.shape
    win = x.reshape(c, h // 2, 2, w // 2, 2).transpose(0, 1, 3, 2, 4).reshape(
        c, h // 2, w // 2, 4
    )
    arg = np.argmax(win, axis=3)
    out = np.take_along_axis(win, arg[..., None], axis=3)[..., 0]
    return freeze(np.ascontiguousarray(out)), freeze(arg)


def vjp_maxpool2d(argmax, upstream, input_shape):
    """Route upstream values to the saved window-argmax positions."""
    c, h, w = input_shape
    if upstream.shape != (c, h // 2, w // 2):
        raise DimensionError(
            f"upstream shape {upstream.shape} does not match pooled output "
            f"({c}, {h // 2}, {w // 2})",
            axis="upstream",
        )
    win = np.zeros((c, h // 2, w // 2, 4), dtype=upstream.dtype)
    np.put_along_axis(win, argmax[..., None], upstream[..., None], axis=3)
    grad = win.reshape(c, h // 2, w // 2, 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h, w)
    return freeze(np.ascontiguousarray(grad))


def avgpool2d(x, window=2, stride=2):
    """2x2/2 average pooling with a fixed ((a+b)+c)+d summation order."""
    _check_poolable(x, window, stride)
    c, h, w = x.shape
    v = x.reshape(c, h // 2, 2, w // 2, 2)
    s = ((v[:, :, 0, :, 0] + v[:, :, 0, :, 1]) + v[:, :, 1, :, 0]) + v[:, :, 1, :, 1]
    return freeze(np.ascontiguousarray(s * s.dtype.type(0.25)))


def vjp_avgpool2d(upstream, input_shape):
    """Distribute upstream/4 uniformly over each 2x2 window."""
    c, h, w = input_shape
    if upstream.shape != (c, h // 2, w // 2):
        raise DimensionError(
            f"upstream shape {upstream.shape} does not match pooled output "
            f"({c}, {h // 2}, {w // 2})",
            axis="upstream",
        )
    g = upstream * upstream.dtype.type(0.25)
    grad = np.empty((c, h // 2, 2, w // 2, 2), dtype=upstream.dtype)
    grad[:] = g[:, :, None, :, None]
    return freeze(grad.reshape(c, h, w))


def relu(x):
    """Elementwise max(0, x)."""
    return freeze(np.maximum(x, x.dtype.type(0)))


def vjp_relu(x, upstream):
    """Mask upstream by strict positivity of the forward input."""
    if upstream.shape != x.shape:
        raise DimensionError(
            f"upstream shape {upstream.shape} does not match input {x.shape}",
            axis="upstream",
        )
    return freeze(np.where(x > 0, upstream, upstream.dtype.type(0)))


def softmax(scores):
    """Stable softmax of a 1-D score vector (max-subtracted)."""
    if scores.ndim != 1:
        raise DimensionError(
            f"softmax expects a 1-D score vector, got shape {scores.shape}",
            axis="rank",
        )
    shifted = scores - np.max(scores)
    e = np.exp(shifted)
    return freeze(e / np.sum(e))


def channel_softmax(scores):
    """Softmax over the channel axis of a (K, H, W) score map, per cell."""
    check_chw(scores)
    shifted = scores - np.max(scores, axis=0, keepdims=True)
    e = np.exp(shifted)
    return freeze(e / np.sum(e, axis=0, keepdims=True))
