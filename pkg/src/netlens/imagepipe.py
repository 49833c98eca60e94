"""Image decoding, resizing, normalization and overlay composition.

The interchange format is binary PPM (P6, maxval 255): trivially
byte-exact, no decompression dependency. Resizing is bilinear with
half-pixel centers and edge clamping; the same convention is reused for
saliency-map upsampling so overlays line up. Normalization maps 8-bit
samples to (v/255 - mean) / std per channel and also yields the
attainable value box consumed by the pixel-bound LRP rule.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DimensionError, PpmError
from .tensor import STORAGE_DTYPE, freeze

# Widely used RGB statistics for models trained on 224x224 natural
# images; overridable through NormalizationSpec.
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class RgbImage:
    """8-bit RGB raster, row-major, shape (H, W, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3 or p.dtype != np.uint8:
            raise DimensionError(
                f"RgbImage needs uint8 (H, W, 3) data, got {p.dtype} {p.shape}",
                axis="rank",
            )
        p.setflags(write=False)

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]


@dataclass(frozen=True)
class NormalizationSpec:
    """Per-channel mean/std plus the derived normalized pixel bounds."""

    mean: tuple = IMAGENET_MEAN
    std: tuple = IMAGENET_STD

    def __post_init__(self):
        if len(self.mean) != 3 or len(self.std) != 3:
            raise ArgumentError("normalization needs 3 means and 3 stds")
        if any(s <= 0 for s in self.std):
            raise ArgumentError("normalization stds must be positive")

    def bounds(self):
        """(low, high) per channel: images of 0s and 255s mapped through."""
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        low = (0.0 - mean) / std
        high = (1.0 - mean) / std
        return tuple(low.tolist()), tuple(high.tolist())


def _read_header_token(data, pos):
    """Next whitespace-delimited PPM header token, skipping # comments."""
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise PpmError("unexpected end of PPM header")
    return data[start:pos], pos


def decode_ppm(data):
    """Decode binary P6 bytes (maxval 255) into an RgbImage.

    Header comments and arbitrary whitespace are tolerated; the payload
    must contain exactly 3*H*W samples.
    """
    if data[:2] != b"P6":
        raise PpmError(f"bad magic {data[:2]!r}; only binary P6 is supported")
    pos = 2
    fields = []
    for _ in range(3):
        token, pos = _read_header_token(data, pos)
        try:
            fields.append(int(token))
        except ValueError:
            raise PpmError(f"non-numeric header field {token!r}") from None
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise PpmError(f"degenerate dimensions {width}x{height}")
    if maxval != 255:
        raise PpmError(f"unsupported maxval {maxval}; only 255 is supported")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise PpmError("missing whitespace between header and payload")
    pos += 1  # exactly one whitespace byte separates header and payload
    expected = 3 * width * height
    payload = data[pos : pos + expected]
    if len(payload) != expected:
        raise PpmError(
            f"truncated payload: expected {expected} bytes, got {len(payload)}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).copy()
    return RgbImage(pixels)


def encode_ppm(image):
    """Encode an RgbImage as canonical binary P6 bytes."""
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + image.pixels.tobytes()


def read_ppm(path):
    with open(path, "rb") as fh:
        return decode_ppm(fh.read())


def _axis_taps(src_len, dst_len):
    """Sample positions and blend weights for one bilinear axis."""
    scale = src_len / dst_len
    s = (np.arange(dst_len, dtype=np.float64) + 0.5) * scale - 0.5
    x0 = np.floor(s).astype(np.int64)
    t = s - x0
    a = np.clip(x0, 0, src_len - 1)
    b = np.clip(x0 + 1, 0, src_len - 1)
    return a, b, t


def _resize_plane(plane, th, tw):
    ya, yb, ty = _axis_taps(plane.shape[0], th)
    xa, xb, tx = _axis_taps(plane.shape[1], tw)
    rows = plane[ya] * (1.0 - ty)[:, None] + plane[yb] * ty[:, None]
    return rows[:, xa] * (1.0 - tx)[None, :] + rows[:, xb] * tx[None, :]


def resize_bilinear(image, target_h, target_w):
    """Bilinear resize with half-pixel centers, per channel."""
    if target_h < 1 or target_w < 1:
        raise ArgumentError("target dimensions must be >= 1")
    if target_h == image.height and target_w == image.width:
        return RgbImage(image.pixels.copy())
    src = image.pixels.astype(np.float64)
    out = np.empty((target_h, target_w, 3), dtype=np.float64)
    for c in range(3):
        out[:, :, c] = _resize_plane(src[:, :, c], target_h, target_w)
    return RgbImage(np.floor(out + 0.5).clip(0, 255).astype(np.uint8))


def resize_plane_float(plane, target_h, target_w):
    """Float-valued bilinear resize of a 2-D array (same convention)."""
    plane = np.asarray(plane, dtype=np.float64)
    if (target_h, target_w) == plane.shape:
        return plane.copy()
    return _resize_plane(plane, target_h, target_w)


def to_input_tensor(image, spec, dtype=STORAGE_DTYPE):
    """Normalize an image into a channel-major (3, H, W) tensor."""
    samples = image.pixels.astype(np.float64) / 255.0
    mean = np.asarray(spec.mean, dtype=np.float64)
    std = np.asarray(spec.std, dtype=np.float64)
    normalized = (samples - mean) / std
    return freeze(np.ascontiguousarray(normalized.transpose(2, 0, 1), dtype=dtype))


def overlay(image, heatmap_rgb, alpha):
    """Per-pixel convex blend round(alpha*heat + (1-alpha)*image)."""
    if not 0.0 <= alpha <= 1.0:
        raise ArgumentError(f"alpha must be in [0, 1], got {alpha}")
    if (image.height, image.width) != (heatmap_rgb.height, heatmap_rgb.width):
        raise DimensionError(
            f"overlay dimensions {heatmap_rgb.height}x{heatmap_rgb.width} do not "
            f"match image {image.height}x{image.width}",
            axis="height",
        )
    blend = alpha * heatmap_rgb.pixels.astype(np.float64) + (1.0 - alpha) * (
        image.pixels.astype(np.float64)
    )
    return RgbImage(np.floor(blend + 0.5).clip(0, 255).astype(np.uint8))
