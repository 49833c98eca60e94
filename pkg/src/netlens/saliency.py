"""Signed spatial attribution maps and their red/blue rendering.

Every explainer produces a :class:`SaliencyMap`: a single-channel signed
grid tagged with the method that made it. Rendering uses a symmetric
diverging colormap anchored at a percentile of the absolute values so a
single outlier pixel cannot wash out the rest of the map: +m maps to
pure red, -m to pure blue, zero to white, linear in between, values
beyond the anchor saturate.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DimensionError
from .imagepipe import RgbImage, resize_plane_float

DEFAULT_CLIP_PERCENTILE = 99.0


@dataclass(frozen=True)
class SaliencyMap:
    """Signed (H, W) attribution values with provenance."""

    values: np.ndarray
    method: str
    source_layer: str = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise DimensionError(
                f"saliency map must be 2-D and non-empty, got shape {v.shape}",
                axis="rank",
            )
        v = np.ascontiguousarray(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    def total(self):
        return float(np.sum(self.values))


def render_heatmap(smap, clip_percentile=DEFAULT_CLIP_PERCENTILE):
    """Render a saliency map as a red/white/blue RGB image.

    Positive values shade toward red, negative toward blue, zero is
    white. The anchor m is the given percentile of |values|; an all-zero
    map renders all white.
    """
    if not 0.0 < clip_percentile <= 100.0:
        raise ArgumentError(f"clip_percentile must be in (0, 100], got {clip_percentile}")
    v = smap.values
    if not np.all(np.isfinite(v)):
        raise ArgumentError("saliency map contains non-finite values")
    m = float(np.percentile(np.abs(v), clip_percentile))
    if m == 0.0:
        return RgbImage(np.full((smap.height, smap.width, 3), 255, dtype=np.uint8))
    t = np.clip(v / m, -1.0, 1.0)
    fade = np.floor(255.0 * (1.0 - np.abs(t)) + 0.5)
    out = np.empty((smap.height, smap.width, 3), dtype=np.float64)
    out[:, :, 0] = np.where(t >= 0, 255.0, fade)
    out[:, :, 1] = fade
    out[:, :, 2] = np.where(t <= 0, 255.0, fade)
    return RgbImage(out.astype(np.uint8))


def upsample_map(smap, target_h, target_w):
    """Bilinear upsample matching the image-pipeline resize convention."""
    if target_h < 1 or target_w < 1:
        raise ArgumentError("target dimensions must be >= 1")
    values = resize_plane_float(smap.values, target_h, target_w)
    return SaliencyMap(values=values, method=smap.method, source_layer=smap.source_layer)
