"""Air-colon segmentation: threshold, seed search, region growing, volume gate.

The segmenter labels the gas-distended colon lumen by thresholding the scan
at the air HU cutoff, growing the connected air region from an automatically
placed seed on the midline sagittal slice, and gating the result by physical
volume. Every failure mode is an exclusion value, not an exception, so the
orchestrator can keep a complete audit of why scans dropped out.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .config import PipelineConfig
from .morphology import region_grow
from .records import ExclusionReason, ExclusionRecord
from .volume import AIR, LabelMap, Mask, Volume


def threshold_binarize(volume: Volume, threshold_hu: float) -> Mask:
    """Mark every voxel at or below the HU threshold as air candidate."""
    return Mask(volume.values <= threshold_hu, volume.spacing)


def validate_scan(volume: Volume, cfg: PipelineConfig) -> Optional[ExclusionReason]:
    """Check acquisition geometry; None means the scan is usable.

    Bounds are inclusive: exactly min_axial_slices or max_axial_slices passes.
    """
    nx, ny, nz = volume.shape
    if nz < cfg.min_axial_slices:
        return ExclusionReason.DIMS_TOO_FEW_SLICES
    if nz > cfg.max_axial_slices:
        return ExclusionReason.DIMS_TOO_MANY_SLICES
    if nx < cfg.min_inplane_px or ny < cfg.min_inplane_px:
        return ExclusionReason.DIMS_IN_PLANE_TOO_SMALL
    return None


def find_seed(mask: Mask, cfg: PipelineConfig) -> Optional[tuple[int, int, int]]:
    """Locate the first air voxel on the midline sagittal slice.

    The search runs over z ascending within [seed_z_lo, seed_z_hi], and within
    each slice over y ascending in a band of ±seed_band_halfwidth_px around
    the anterior-posterior midpoint. Returns None when the band holds no air.
    """
    nx, ny, nz = mask.shape
    cx = nx // 2
    y_lo = max(0, ny // 2 - cfg.seed_band_halfwidth_px)
    y_hi = min(ny - 1, ny // 2 + cfg.seed_band_halfwidth_px)
    z_lo = max(0, cfg.seed_z_lo)
    z_hi = min(nz - 1, cfg.seed_z_hi)
    if y_lo > y_hi or z_lo > z_hi:
        return None
    band = mask.bits[cx, y_lo : y_hi + 1, z_lo : z_hi + 1]
    hits = np.argwhere(band.T)  # row-major over (z, y): z ascends first
    if hits.size == 0:
        return None
    z_off, y_off = hits[0]
    return (cx, y_lo + int(y_off), z_lo + int(z_off))


def volume_gate(mask: Mask, cfg: PipelineConfig) -> Optional[ExclusionReason]:
    """Gate a grown region by physical volume; boundaries are accepted."""
    v_cm3 = mask.volume_cm3()
    if v_cm3 > cfg.volume_max_cm3:
        return ExclusionReason.VOLUME_TOO_LARGE
    if v_cm3 < cfg.volume_min_cm3:
        return ExclusionReason.VOLUME_TOO_SMALL
    return None


def segment_air(volume: Volume, cfg: PipelineConfig,
                scan_id: str = "") -> LabelMap | ExclusionRecord:
    """Run threshold → seed → grow → gate; exclusions come back as records."""
    candidates = threshold_binarize(volume, cfg.air_threshold_hu)
    seed = find_seed(candidates, cfg)
    if seed is None:
        return ExclusionRecord(
            scan_id,
            ExclusionReason.SEED_NOT_FOUND,
            "no air voxel in the midline seed search band",
        )
    grown = region_grow(candidates.bits, seed, cfg.connectivity)
    region = Mask(grown, volume.spacing)
    gate = volume_gate(region, cfg)
    if gate is not None:
        return ExclusionRecord(
            scan_id,
            gate,
            f"grown region is {region.volume_cm3():.2f} cm3 "
            f"(accepted range {cfg.volume_min_cm3}-{cfg.volume_max_cm3} cm3)",
        )
    labels = np.where(grown, np.uint8(AIR), np.uint8(0))
    return LabelMap(labels, volume.spacing)
