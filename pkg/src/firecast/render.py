"""Raster visualization: binary masks, days-since-ignition ramps, and
prediction/target agreement overlays.

All functions return (H, W, 3) uint8 arrays; `save_png` writes them out
with deterministic bytes so rendered outputs diff cleanly between runs.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import ValidationError

# anchor colors of a dark-to-bright perceptual ramp (blue-green-yellow)
_RAMP = np.array(
    [
        (68, 1, 84),
        (59, 82, 139),
        (33, 145, 140),
        (94, 201, 98),
        (253, 231, 37),
    ],
    dtype=float,
)

TP_COLOR = (0, 200, 0)
FP_COLOR = (220, 0, 0)
FN_COLOR = (0, 90, 255)
BACKGROUND = (0, 0, 0)


def _as_2d(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ValidationError(f"expected a 2-D raster, got shape {arr.shape}")
    return arr


def render_mask(mask) -> np.ndarray:
    """Binary mask as black/white: white where the mask is set."""
    mask = _as_2d(mask)
    out = np.zeros((*mask.shape, 3), np.uint8)
    out[mask > 0] = (255, 255, 255)
    return out


def ramp_color(unit: np.ndarray) -> np.ndarray:
    """Map values in [0, 1] through the perceptual ramp."""
    unit = np.clip(np.asarray(unit, dtype=float), 0.0, 1.0)
    pos = unit * (len(_RAMP) - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, len(_RAMP) - 1)
    frac = (pos - lo)[..., np.newaxis]
    rgb = _RAMP[lo] * (1.0 - frac) + _RAMP[hi] * frac
    return np.clip(np.rint(rgb), 0, 255).astype(np.uint8)


def render_progression(values, vmax: float | None = None) -> np.ndarray:
    """Days-since-ignition raster on the color ramp; NaN renders black.

    `vmax` pins the top of the scale (defaults to the largest finite
    value) so frames of one fire share a consistent palette.
    """
    values = _as_2d(np.asarray(values, dtype=float))
    finite = np.isfinite(values)
    out = np.zeros((*values.shape, 3), np.uint8)
    out[...] = BACKGROUND
    if not finite.any():
        return out
    if vmax is None:
        vmax = float(values[finite].max())
    if vmax <= 0:
        vmax = 1.0
    out[finite] = ramp_color(values[finite] / vmax)
    return out


def render_triptych(pred_bin, target) -> np.ndarray:
    """Agreement overlay: green true positives, red false positives,
    blue false negatives, black elsewhere."""
    pred = _as_2d(pred_bin) > 0
    truth = _as_2d(target) > 0
    if pred.shape != truth.shape:
        raise ValidationError(f"shape mismatch {pred.shape} vs {truth.shape}")
    out = np.zeros((*pred.shape, 3), np.uint8)
    out[pred & truth] = TP_COLOR
    out[pred & ~truth] = FP_COLOR
    out[~pred & truth] = FN_COLOR
    return out


def save_png(rgb: np.ndarray, path) -> None:
    rgb = np.asarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValidationError(f"expected (H, W, 3) uint8, got {rgb.shape}")
    Image.fromarray(rgb, mode="RGB").save(path, format="PNG")
