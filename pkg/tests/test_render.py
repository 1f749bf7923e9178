import io

import numpy as np
import pytest
from PIL import Image

from colonpipe.render import (
    AIR_RGB,
    AXIS_NAMES,
    FLUID_RGB,
    OVERLAY_ALPHA,
    composite_overlay,
    encode_png,
    extract_slice,
    render_slice,
    window_to_uint8,
)
from colonpipe.volume import AIR, FLUID


def decode(png_bytes):
    return np.asarray(Image.open(io.BytesIO(png_bytes)))


# -------------------------------------------------------------- slice cutting

def test_axis_names():
    assert AXIS_NAMES == {0: "sagittal", 1: "coronal", 2: "axial"}


def test_extract_axial_rows_are_anterior_to_posterior():
    arr = np.zeros((4, 5, 6), dtype=np.int16)
    arr[1, 2, 3] = 7
    plane = extract_slice(arr, 2, 3)
    assert plane.shape == (5, 4)  # (ny rows, nx cols)
    assert plane[2, 1] == 7       # row = y (anterior at top), col = x


def test_extract_coronal_rows_are_superior_to_inferior():
    arr = np.zeros((4, 5, 6), dtype=np.int16)
    arr[1, 2, 0] = 7  # inferior-most slice
    plane = extract_slice(arr, 1, 2)
    assert plane.shape == (6, 4)  # (nz rows, nx cols)
    assert plane[5, 1] == 7       # low z lands at the bottom row


def test_extract_sagittal_rows_are_superior_to_inferior():
    arr = np.zeros((4, 5, 6), dtype=np.int16)
    arr[1, 2, 5] = 7  # superior-most slice
    plane = extract_slice(arr, 0, 1)
    assert plane.shape == (6, 5)  # (nz rows, ny cols)
    assert plane[0, 2] == 7       # high z lands at the top row


def test_extract_slice_validation():
    arr = np.zeros((4, 5, 6), dtype=np.int16)
    with pytest.raises(ValueError):
        extract_slice(arr, 3, 0)
    with pytest.raises(IndexError):
        extract_slice(arr, 2, 6)
    with pytest.raises(IndexError):
        extract_slice(arr, 2, -1)


# ----------------------------------------------------------------- windowing

def test_window_endpoints_and_clipping():
    plane = np.array([[-1200, -1000], [-300, 400], [500, -1000]], dtype=np.int16)
    out = window_to_uint8(plane, (-1000.0, 400.0))
    assert out[0, 0] == 0          # below the window clips to black
    assert out[0, 1] == 0          # exactly at the low edge
    assert out[1, 1] == 255        # exactly at the high edge
    assert out[2, 0] == 255        # above the window clips to white
    assert out[1, 0] == round((-300 + 1000) / 1400 * 255)


def test_window_midpoint_rounds_to_nearest():
    plane = np.array([[-300.0]])
    assert window_to_uint8(plane, (-1000.0, 400.0))[0, 0] == 128
    # 0.5/1.4 * 255 = 91.07 → 91
    plane = np.array([[-500.0]])
    assert window_to_uint8(plane, (-1000.0, 400.0))[0, 0] == 91


# ----------------------------------------------------------------- compositing

def test_composite_formula_exact():
    gray = np.full((2, 3), 100, dtype=np.uint8)
    labels = np.zeros((2, 3), dtype=np.uint8)
    labels[0, 0] = AIR
    labels[1, 2] = FLUID
    out = composite_overlay(gray, labels)
    for c in range(3):
        assert out[0, 0, c] == round(0.6 * 100 + 0.4 * AIR_RGB[c])
        assert out[1, 2, c] == round(0.6 * 100 + 0.4 * FLUID_RGB[c])
    assert (out[0, 1] == 100).all()  # background untouched
    assert OVERLAY_ALPHA == 0.4


def test_composite_background_untouched_everywhere(rng):
    gray = rng.integers(0, 256, size=(8, 8)).astype(np.uint8)
    labels = np.zeros((8, 8), dtype=np.uint8)
    out = composite_overlay(gray, labels)
    assert (out == gray[:, :, None]).all()


def test_composite_shape_mismatch():
    with pytest.raises(ValueError):
        composite_overlay(np.zeros((2, 2), dtype=np.uint8), np.zeros((2, 3), dtype=np.uint8))


# ------------------------------------------------------------------- encoding

def test_png_round_trip_grayscale(rng):
    pixels = rng.integers(0, 256, size=(5, 7)).astype(np.uint8)
    assert np.array_equal(decode(encode_png(pixels)), pixels)


def test_png_round_trip_rgb(rng):
    pixels = rng.integers(0, 256, size=(5, 7, 3)).astype(np.uint8)
    assert np.array_equal(decode(encode_png(pixels)), pixels)


def test_render_slice_matches_manual_pipeline():
    values = np.linspace(-1000, 400, 4 * 5 * 6).reshape(4, 5, 6).astype(np.int16)
    labels = np.zeros((4, 5, 6), dtype=np.uint8)
    labels[1:3, 1:3, 2] = AIR
    window = (-1000.0, 400.0)
    png = render_slice(values, labels, 2, 2, window)
    expect = composite_overlay(
        window_to_uint8(extract_slice(values, 2, 2), window),
        extract_slice(labels, 2, 2),
    )
    assert np.array_equal(decode(png), expect)


def test_render_slice_without_labels_is_grayscale():
    values = np.zeros((4, 4, 4), dtype=np.int16)
    png = render_slice(values, None, 2, 1, (-1000.0, 400.0))
    img = Image.open(io.BytesIO(png))
    assert img.mode == "L"
