"""Fluid mask post-processing and fusion with the air label.

Raw fluid predictions arrive from an external annotation tool as either a 3-D
mask or a stack of per-slice PNG masks. They are cleaned with component,
gravity, and geometry rules, smoothed, reconnected to the air lumen within
sagittal slices, and fused into the final two-class label map (air wins on
overlap).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .config import PipelineConfig
from .errors import DimsMismatch, UnreadableFile
from .morphology import (
    fill_holes,
    gaussian_smooth_binary,
    min_surface_distance_mm,
)
from .nifti import read_array
from .records import Position
from .volume import LabelMap, Mask, compose_labels


@dataclass(frozen=True)
class FluidContext:
    """Inputs to fluid post-processing: air label, raw fluid, patient position."""

    air: Mask
    fluid_raw: Mask
    cfg: PipelineConfig
    position: Position | None = None

    def __post_init__(self):
        if self.air.shape != self.fluid_raw.shape:
            raise DimsMismatch(
                f"air shape {self.air.shape} != fluid shape {self.fluid_raw.shape}"
            )
        if self.air.spacing != self.fluid_raw.spacing:
            raise DimsMismatch(
                f"air spacing {self.air.spacing} != fluid spacing {self.fluid_raw.spacing}"
            )


def component_filter(ctx: FluidContext) -> Mask:
    """Keep fluid components that are big enough and close to the air surface.

    A component is removed when its voxel count is below
    fluid_min_component_voxels or its minimum distance to the air surface
    exceeds fluid_surface_dist_mm.
    """
    cfg = ctx.cfg
    labels, count, mins = min_surface_distance_mm(
        ctx.fluid_raw.bits, ctx.air.bits, ctx.air.spacing, cfg.connectivity
    )
    if count == 0:
        return ctx.fluid_raw.with_bits(ctx.fluid_raw.bits.copy())
    sizes = np.bincount(labels.ravel(), minlength=count + 1)
    keep = (sizes >= cfg.fluid_min_component_voxels) & (mins <= cfg.fluid_surface_dist_mm)
    keep[0] = False
    return ctx.fluid_raw.with_bits(keep[labels])


def gravity_filter(ctx: FluidContext, fluid: Mask) -> Mask:
    """Drop fluid voxels with no air in the neighbouring axial slices.

    A fluid voxel at slice z survives iff some air voxel exists within slices
    [z-h, z+h] (h = gravity_slab_halfwidth_slices). When
    gravity_inplane_radius_voxels is finite, the air must additionally lie
    within that in-plane pixel radius of the fluid voxel.
    """
    cfg = ctx.cfg
    size = 2 * cfg.gravity_slab_halfwidth_slices + 1
    if np.isinf(cfg.gravity_inplane_radius_voxels):
        air_per_z = ctx.air.bits.any(axis=(0, 1)).astype(np.uint8)
        slab = ndimage.maximum_filter1d(air_per_z, size=size, mode="constant", cval=0)
        return fluid.with_bits(fluid.bits & slab.astype(bool)[np.newaxis, np.newaxis, :])
    slab3d = ndimage.maximum_filter1d(
        ctx.air.bits.astype(np.uint8), size=size, axis=2, mode="constant", cval=0
    ).astype(bool)
    allowed = np.zeros_like(fluid.bits)
    for z in range(fluid.shape[2]):
        if not fluid.bits[:, :, z].any():
            continue
        plane = slab3d[:, :, z]
        if not plane.any():
            continue
        dist = ndimage.distance_transform_edt(~plane)
        allowed[:, :, z] = dist <= cfg.gravity_inplane_radius_voxels
    return fluid.with_bits(fluid.bits & allowed)


def _axis_slice(arr: np.ndarray, axis: int, start: int, stop: int) -> np.ndarray:
    index = [slice(None)] * arr.ndim
    index[axis] = slice(start, stop)
    return arr[tuple(index)]


def _fill_gaps_one_direction(fluid: np.ndarray, air: np.ndarray, bg: np.ndarray,
                             out: np.ndarray, axis: int, max_gap: int) -> None:
    """Fill background runs of length ≤ max_gap that lead from fluid to air.

    Matches the pattern fluid, bg × L, air in the increasing direction of
    ``axis`` against the original masks and marks the gap voxels in ``out``.
    """
    n = fluid.shape[axis]
    for gap in range(1, max_gap + 1):
        window = gap + 2
        if n < window:
            break
        starts = n - window + 1
        ok = _axis_slice(fluid, axis, 0, starts).copy()
        for i in range(1, gap + 1):
            ok &= _axis_slice(bg, axis, i, i + starts)
        ok &= _axis_slice(air, axis, gap + 1, gap + 1 + starts)
        for i in range(1, gap + 1):
            _axis_slice(out, axis, i, i + starts)[ok] = True


def sagittal_connect(ctx: FluidContext, fluid: Mask) -> Mask:
    """Bridge small background gaps between fluid and air within sagittal slices.

    Straight axis-aligned runs of at most sagittal_max_gap_voxels background
    voxels with fluid at one end and air at the other become fluid. Runs are
    matched within each fixed-x plane, i.e. along the y and z axes only, and
    against the input masks (one pass, no cascading).
    """
    gap = ctx.cfg.sagittal_max_gap_voxels
    out = fluid.bits.copy()
    if gap <= 0 or not fluid.bits.any() or not ctx.air.bits.any():
        return fluid.with_bits(out)
    bg = ~(fluid.bits | ctx.air.bits)
    for axis in (1, 2):
        _fill_gaps_one_direction(fluid.bits, ctx.air.bits, bg, out, axis, gap)
        flipped_out = np.flip(out, axis=axis)
        _fill_gaps_one_direction(
            np.flip(fluid.bits, axis=axis),
            np.flip(ctx.air.bits, axis=axis),
            np.flip(bg, axis=axis),
            flipped_out,
            axis,
            gap,
        )
    return fluid.with_bits(out)


def fluid_postprocess(ctx: FluidContext) -> LabelMap:
    """Run the full fluid cleanup chain and fuse with the air label.

    Order: component filter → gravity filter → hole filling over air ∪ fluid
    (new voxels become fluid) → Gaussian smoothing of fluid → sagittal
    reconnection → fusion (air wins where both claim a voxel).
    """
    cfg = ctx.cfg
    fluid = component_filter(ctx)
    fluid = gravity_filter(ctx, fluid)
    union = ctx.air.bits | fluid.bits
    filled = fill_holes(union)
    fluid = fluid.with_bits(fluid.bits | (filled & ~union))
    fluid = fluid.with_bits(gaussian_smooth_binary(fluid.bits, cfg.smoothing_sigma_voxels))
    fluid = sagittal_connect(ctx, fluid)
    return compose_labels(ctx.air, fluid)


_SLICE_NAME = re.compile(r"_z(\d+)\.png$")


def import_fluid_nifti(path: str | Path, air: Mask) -> Mask:
    """Load a 3-D fluid prediction; any nonzero voxel counts as fluid."""
    arr, spacing = read_array(path)
    if arr.shape != air.shape:
        raise DimsMismatch(f"fluid mask shape {arr.shape} != air shape {air.shape}")
    return Mask(arr != 0, air.spacing)


def import_fluid_slices(directory: str | Path, scan_id: str, air: Mask) -> Mask:
    """Assemble a fluid mask from per-slice PNGs named ``<scan_id>_z<index>.png``.

    Images are resized back to the scan's in-plane grid with nearest-neighbour
    interpolation and thresholded at half intensity. Slices without a file are
    treated as fluid-free.
    """
    directory = Path(directory)
    nx, ny, nz = air.shape
    bits = np.zeros(air.shape, dtype=bool)
    pattern = f"{scan_id}_z*.png"
    found = False
    for path in sorted(directory.glob(pattern)):
        m = _SLICE_NAME.search(path.name)
        if not m:
            continue
        z = int(m.group(1))
        if not 0 <= z < nz:
            raise DimsMismatch(f"{path.name}: slice index {z} outside 0..{nz - 1}")
        with Image.open(path) as img:
            plane = np.asarray(img.convert("L").resize((nx, ny), Image.NEAREST))
        bits[:, :, z] = (plane > 127).T
        found = True
    if not found:
        raise UnreadableFile(f"no files matching {pattern} under {directory}")
    return Mask(bits, air.spacing)
