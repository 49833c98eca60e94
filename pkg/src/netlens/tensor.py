"""Tensor carrier and precision policy.

Feature maps are dense ``numpy.ndarray`` values in channel-major layout:
``(channels, height, width)`` for activations and ``(out_channels,
in_channels, kh, kw)`` for convolution kernels, flat data row-major over
that shape. Two precisions exist engine-wide: 32-bit storage
(``STORAGE_DTYPE``) and a 64-bit verification mode (``VERIFY_DTYPE``)
used wherever finite-difference or conservation checks need headroom.

Tensors are immutable once constructed: ``tensor()`` returns a
C-contiguous array with the writeable flag cleared, so values are safe
to share across threads and reuse between traces.
"""

import numpy as np

from .errors import ArgumentError, DimensionError

STORAGE_DTYPE = np.float32
VERIFY_DTYPE = np.float64

_ALLOWED = (np.dtype(np.float32), np.dtype(np.float64))


def tensor(data, dtype=STORAGE_DTYPE):
    """Build an immutable tensor from array-like data.

    The result is C-contiguous with dtype float32 or float64; any other
    requested dtype is rejected.
    """
    dt = np.dtype(dtype)
    if dt not in _ALLOWED:
        raise ArgumentError(f"unsupported dtype {dt}; use float32 or float64")
    arr = np.ascontiguousarray(data, dtype=dt)
    arr.setflags(write=False)
    return arr


def freeze(arr):
    """Mark an array immutable and return it (used on kernel outputs)."""
    arr.setflags(write=False)
    return arr


def assert_finite(arr, context=""):
    """Raise if the array contains NaN or Inf."""
    if not np.all(np.isfinite(arr)):
        where = f" in {context}" if context else ""
        raise FloatingPointError(f"non-finite values{where}")
    return arr


def check_chw(arr, name="input"):
    """Validate a (C, H, W) feature map shape."""
    if arr.ndim != 3:
        raise DimensionError(
            f"{name} must be 3-dimensional (channels, height, width), got shape {arr.shape}",
            axis="rank",
        )
    return arr


def check_kernel(arr, name="kernel"):
    """Validate a (Cout, Cin, kh, kw) convolution kernel shape."""
    if arr.ndim != 4:
        raise DimensionError(
            f"{name} must be 4-dimensional (out, in, kh, kw), got shape {arr.shape}",
            axis="rank",
        )
    return arr
