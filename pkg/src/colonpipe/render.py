"""Slice rendering: HU windowing, label overlays, and PNG encoding.

Display conventions, shared by the slice exporter and the review service:
axial slices show anterior at the top and the patient's left on the left;
coronal and sagittal slices show superior at the top. The overlay formula is
fixed and public so served images are byte-testable:

    out_channel = round((1 - OVERLAY_ALPHA) * gray + OVERLAY_ALPHA * hue_channel)

applied only where a label is present; air and fluid use distinct hues.
"""
from __future__ import annotations

import io

import numpy as np
from PIL import Image

from .volume import AIR, FLUID

OVERLAY_ALPHA = 0.4
AIR_RGB = (255, 80, 80)
FLUID_RGB = (80, 140, 255)

AXIS_NAMES = {0: "sagittal", 1: "coronal", 2: "axial"}


def extract_slice(arr: np.ndarray, axis: int, index: int) -> np.ndarray:
    """Cut one orthogonal plane out of an (x, y, z) array, display-oriented."""
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1, or 2, got {axis}")
    if not 0 <= index < arr.shape[axis]:
        raise IndexError(f"index {index} outside axis {axis} of size {arr.shape[axis]}")
    if axis == 2:
        return arr[:, :, index].T  # rows anterior→posterior, cols left→right
    if axis == 1:
        return np.flipud(arr[:, index, :].T)  # rows superior→inferior
    return np.flipud(arr[index, :, :].T)


def window_to_uint8(plane: np.ndarray, window_hu: tuple[float, float]) -> np.ndarray:
    """Map HU linearly onto 0..255, clipping outside the window."""
    lo, hi = window_hu
    scaled = (plane.astype(np.float64) - lo) / (hi - lo)
    return np.rint(np.clip(scaled, 0.0, 1.0) * 255.0).astype(np.uint8)


def composite_overlay(gray: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Blend label hues over a grayscale slice; background stays untouched."""
    if gray.shape != labels.shape:
        raise ValueError(f"gray shape {gray.shape} != labels shape {labels.shape}")
    out = np.repeat(gray.astype(np.float64)[:, :, np.newaxis], 3, axis=2)
    for value, hue in ((AIR, AIR_RGB), (FLUID, FLUID_RGB)):
        where = labels == value
        for c in range(3):
            channel = out[:, :, c]
            channel[where] = (1.0 - OVERLAY_ALPHA) * channel[where] + OVERLAY_ALPHA * hue[c]
    return np.rint(out).astype(np.uint8)


def encode_png(pixels: np.ndarray) -> bytes:
    """Serialize a uint8 grayscale or RGB array as PNG bytes."""
    mode = "L" if pixels.ndim == 2 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(pixels, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def render_slice(values: np.ndarray, labels: np.ndarray | None, axis: int,
                 index: int, window_hu: tuple[float, float]) -> bytes:
    """Window one slice to 8-bit, optionally overlay labels, encode as PNG."""
    gray = window_to_uint8(extract_slice(values, axis, index), window_hu)
    if labels is None:
        return encode_png(gray)
    return encode_png(composite_overlay(gray, extract_slice(labels, axis, index)))
