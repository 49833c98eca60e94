"""Independent reference implementations used to cross-check the engine.

Everything here is deliberately written as plain loops (or closed-form
arithmetic) with no shared code paths into the production kernels:
these are the second routes of every dual-route check, consumed by the
test suite and by the built-in selftest command.
"""

import numpy as np


def conv2d_loops(x, kernel, bias=None, stride=1, padding=1):
    """Six-nested-loop direct convolution in float64."""
    cout, cin, kh, kw = kernel.shape
    _, h, w = x.shape
    xp = np.zeros((cin, h + 2 * padding, w + 2 * padding), dtype=np.float64)
    xp[:, padding : padding + h, padding : padding + w] = x
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    out = np.zeros((cout, ho, wo), dtype=np.float64)
    for o in range(cout):
        for i in range(ho):
            for j in range(wo):
                acc = 0.0
                for c in range(cin):
                    for ky in range(kh):
                        for kx in range(kw):
                            acc += float(xp[c, i * stride + ky, j * stride + kx]) * float(
                                kernel[o, c, ky, kx]
                            )
                if bias is not None:
                    acc += float(bias[o])
                out[o, i, j] = acc
    return out


def maxpool2d_scan(x):
    """Window-scan 2x2/2 max pooling (value only)."""
    c, h, w = x.shape
    out = np.empty((c, h // 2, w // 2), dtype=x.dtype)
    for ch in range(c):
        for i in range(h // 2):
            for j in range(w // 2):
                best = x[ch, 2 * i, 2 * j]
                for dy in range(2):
                    for dx in range(2):
                        v = x[ch, 2 * i + dy, 2 * j + dx]
                        if v > best:
                            best = v
                out[ch, i, j] = best
    return out


def avgpool2d_scan(x):
    """Window-scan 2x2/2 average pooling, summed in row-major order."""
    c, h, w = x.shape
    out = np.empty((c, h // 2, w // 2), dtype=x.dtype)
    for ch in range(c):
        for i in range(h // 2):
            for j in range(w // 2):
                acc = x.dtype.type(0)
                for dy in range(2):
                    for dx in range(2):
                        acc = acc + x[ch, 2 * i + dy, 2 * j + dx]
                out[ch, i, j] = acc * x.dtype.type(0.25)
    return out


def central_difference(f, x, h=1e-4):
    """Central finite-difference gradient of scalar f at x (float64)."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    xf = x.reshape(-1)
    for i in range(xf.size):
        orig = xf[i]
        xf[i] = orig + h
        fp = f(x)
        xf[i] = orig - h
        fm = f(x)
        xf[i] = orig
        flat[i] = (fp - fm) / (2.0 * h)
    return grad


def conv_weight_matrix(kernel, in_shape, stride=1, padding=1):
    """Dense (n_out, n_in) weight matrix equivalent to a convolution.

    Built by index arithmetic alone so LRP rules can be evaluated with
    the textbook double loop over neuron pairs.
    """
    cout, cin, kh, kw = kernel.shape
    _, h, w = in_shape
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    n_in = cin * h * w
    n_out = cout * ho * wo
    mat = np.zeros((n_out, n_in), dtype=np.float64)
    for o in range(cout):
        for i in range(ho):
            for j in range(wo):
                row = (o * ho + i) * wo + j
                for c in range(cin):
                    for ky in range(kh):
                        for kx in range(kw):
                            y = i * stride + ky - padding
                            x_ = j * stride + kx - padding
                            if 0 <= y < h and 0 <= x_ < w:
                                col = (c * h + y) * w + x_
                                mat[row, col] = kernel[o, c, ky, kx]
    return mat, (cout, ho, wo)


def avgpool_weight_matrix(in_shape):
    """Dense weight matrix of 2x2/2 average pooling (entries 0.25)."""
    c, h, w = in_shape
    ho, wo = h // 2, w // 2
    mat = np.zeros((c * ho * wo, c * h * w), dtype=np.float64)
    for ch in range(c):
        for i in range(ho):
            for j in range(wo):
                row = (ch * ho + i) * wo + j
                for dy in range(2):
                    for dx in range(2):
                        col = (ch * h + 2 * i + dy) * w + 2 * j + dx
                        mat[row, col] = 0.25
    return mat, (c, ho, wo)


def lrp_z_double_loop(x_flat, weight_mat, bias_flat, upstream_flat, epsilon):
    """Per-pair evaluation of the basic relevance redistribution rule.

    z_j = sum_i x_i w_ij (+ b_j); R_i = x_i * sum_j w_ij R_j / stab(z_j).
    """
    n_out, n_in = weight_mat.shape
    z = np.zeros(n_out, dtype=np.float64)
    for j in range(n_out):
        acc = 0.0
        for i in range(n_in):
            acc += x_flat[i] * weight_mat[j, i]
        if bias_flat is not None:
            acc += bias_flat[j]
        z[j] = acc
    rel = np.zeros(n_in, dtype=np.float64)
    for i in range(n_in):
        acc = 0.0
        for j in range(n_out):
            denom = z[j] + epsilon * (1.0 if z[j] >= 0 else -1.0)
            acc += weight_mat[j, i] * upstream_flat[j] / denom
        rel[i] = x_flat[i] * acc
    return rel


def lrp_zb_double_loop(x_flat, weight_mat, bias_flat, upstream_flat, low_flat, high_flat, epsilon):
    """Per-pair evaluation of the pixel-bound input rule.

    Numerator terms a_i w_ij - l_i w_ij^+ - h_i w_ij^- with
    w^+ = max(w, 0) and w^- = min(w, 0).
    """
    n_out, n_in = weight_mat.shape
    z = np.zeros(n_out, dtype=np.float64)
    for j in range(n_out):
        acc = 0.0
        for i in range(n_in):
            wij = weight_mat[j, i]
            wp = wij if wij > 0 else 0.0
            wn = wij if wij < 0 else 0.0
            acc += x_flat[i] * wij - low_flat[i] * wp - high_flat[i] * wn
        if bias_flat is not None:
            acc += bias_flat[j]
        z[j] = acc
    rel = np.zeros(n_in, dtype=np.float64)
    for i in range(n_in):
        acc = 0.0
        for j in range(n_out):
            wij = weight_mat[j, i]
            wp = wij if wij > 0 else 0.0
            wn = wij if wij < 0 else 0.0
            denom = z[j] + epsilon * (1.0 if z[j] >= 0 else -1.0)
            acc += (x_flat[i] * wij - low_flat[i] * wp - high_flat[i] * wn) * (
                upstream_flat[j] / denom
            )
        rel[i] = acc
    return rel


def auc_pair_counting(labels, scores):
    """O(n^2) Mann-Whitney AUC: positive-over-negative pair fraction."""
    pos = [s for l, s in zip(labels, scores) if l == 1]
    neg = [s for l, s in zip(labels, scores) if l == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def bilinear_sample(values, dst_len):
    """Closed-form 1-D bilinear resample with half-pixel centers."""
    src_len = len(values)
    scale = src_len / dst_len
    out = []
    for d in range(dst_len):
        s = (d + 0.5) * scale - 0.5
        x0 = int(np.floor(s))
        t = s - x0
        a = values[min(max(x0, 0), src_len - 1)]
        b = values[min(max(x0 + 1, 0), src_len - 1)]
        out.append((1.0 - t) * a + t * b)
    return out


def rel_error(actual, expected):
    """Max-norm relative error of actual against expected."""
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    scale = max(np.max(np.abs(expected)), 1e-300)
    return float(np.max(np.abs(actual - expected)) / scale)
