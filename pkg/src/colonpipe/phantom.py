"""Synthetic CT phantoms with exact ground truth, for tests and demos.

Phantoms are box-built: an air-filled lumen inside soft tissue, optionally a
fluid pocket floating strictly inside the lumen, plus distractor blobs that
the fluid filters must reject. Geometry is chosen so every processing stage
has a hand-computable outcome, which makes end-to-end runs exactly checkable.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .volume import Mask, Volume

BODY_HU = 40
AIR_HU = -1000
FLUID_HU = 20

# inclusive index bounds per axis: ((x0, x1), (y0, y1), (z0, z1))
Box = tuple[tuple[int, int], tuple[int, int], tuple[int, int]]


def _paint(mask: np.ndarray, box: Box) -> None:
    (x0, x1), (y0, y1), (z0, z1) = box
    mask[x0 : x1 + 1, y0 : y1 + 1, z0 : z1 + 1] = True


def _corners(box: Box):
    (x0, x1), (y0, y1), (z0, z1) = box
    return product((x0, x1), (y0, y1), (z0, z1))


@dataclass(frozen=True)
class PhantomTruth:
    """A phantom volume with the masks each stage is expected to produce."""

    volume: Volume
    air: Mask          # expected air label after region growing
    fluid_raw: Mask    # raw fluid prediction handed to post-processing
    fluid: Mask        # expected fluid label after post-processing


def build_phantom(
    shape: tuple[int, int, int],
    spacing: tuple[float, float, float],
    lumen_boxes: list[Box],
    fluid_box: Box | None = None,
    distractor_boxes: list[Box] = (),
) -> PhantomTruth:
    """Assemble a phantom from boxes.

    The lumen is air except where the fluid pocket sits; distractor boxes go
    into the raw fluid mask only (their HU stays tissue unless inside the
    lumen). The expected post-processed fluid is the pocket minus its eight
    corner voxels: smoothing shaves the pocket's edges and corners, and the
    in-plane reconnection step restores every edge voxel (air lies directly
    across each one-voxel gap) but cannot restore corners, whose straight-line
    neighbours along y and z are themselves shaved edge voxels.
    """
    lumen = np.zeros(shape, dtype=bool)
    for box in lumen_boxes:
        _paint(lumen, box)
    pocket = np.zeros(shape, dtype=bool)
    if fluid_box is not None:
        _paint(pocket, fluid_box)
        if not (lumen[pocket].all()):
            raise ValueError("fluid pocket must lie inside the lumen")
    air = lumen & ~pocket

    values = np.full(shape, BODY_HU, dtype=np.int16)
    values[air] = AIR_HU
    values[pocket] = FLUID_HU

    fluid_raw = pocket.copy()
    for box in distractor_boxes:
        _paint(fluid_raw, box)

    expected_fluid = pocket.copy()
    if fluid_box is not None:
        for corner in _corners(fluid_box):
            expected_fluid[corner] = False

    return PhantomTruth(
        volume=Volume(values, spacing),
        air=Mask(air, spacing),
        fluid_raw=Mask(fluid_raw, spacing),
        fluid=Mask(expected_fluid, spacing),
    )


def standard_phantom(spacing: tuple[float, float, float] = (0.7, 0.7, 0.7)) -> PhantomTruth:
    """The reference 256³ phantom used by the end-to-end checks.

    The lumen (straight segment plus an elbow) passes through the seed search
    band and encloses about 25.9 cm³, inside the volume gate. The fluid
    pocket holds 2400 voxels. Distractors: a 15³ blob far from the lumen
    (fails the surface-distance rule) and a 5³ blob inside the lumen (fails
    the component-size rule).
    """
    return build_phantom(
        shape=(256, 256, 256),
        spacing=spacing,
        lumen_boxes=[
            ((118, 138), (118, 138), (60, 200)),
            ((118, 138), (139, 168), (180, 200)),
        ],
        fluid_box=((122, 136), (128, 135), (80, 99)),
        distractor_boxes=[
            ((30, 44), (30, 44), (100, 114)),
            ((125, 129), (120, 124), (150, 154)),
        ],
    )


def compact_phantom(
    shape: tuple[int, int, int] = (96, 96, 120),
    spacing: tuple[float, float, float] = (0.7, 0.7, 0.7),
) -> PhantomTruth:
    """A small valid phantom for fast multi-scan tests (12.3 cm³ lumen)."""
    return build_phantom(
        shape=shape,
        spacing=spacing,
        lumen_boxes=[((38, 58), (38, 58), (20, 100))],
        fluid_box=((42, 54), (44, 51), (40, 59)),
    )


def no_seed_phantom(shape=(96, 96, 120), spacing=(0.7, 0.7, 0.7)) -> Volume:
    """Valid-sized lumen placed off the midline column, so no seed is found."""
    truth = build_phantom(shape, spacing, [((10, 30), (38, 58), (20, 100))])
    return truth.volume


def tiny_lumen_phantom(shape=(96, 96, 120), spacing=(0.7, 0.7, 0.7)) -> Volume:
    """Lumen of ~0.04 cm³ crossing the seed band: fails the lower volume gate."""
    truth = build_phantom(shape, spacing, [((46, 50), (46, 50), (50, 54))])
    return truth.volume


def huge_lumen_phantom(shape=(96, 96, 120), spacing=(0.7, 0.7, 0.7)) -> Volume:
    """Lumen of ~111 cm³ crossing the seed band: fails the upper volume gate."""
    truth = build_phantom(shape, spacing, [((18, 77), (18, 77), (15, 104))])
    return truth.volume


def funnel_suite(spacing=(0.7, 0.7, 0.7)) -> dict[str, Volume]:
    """One scan per content-based exclusion reason plus one valid scan.

    Sized for a downscaled config (min_axial_slices=100, max_axial_slices=300,
    min_inplane_px=96) so the whole batch stays fast. Format-level exclusions
    (truncated files) are produced by the caller, not a generator.
    """
    return {
        "valid": compact_phantom(spacing=spacing).volume,
        "too-few-slices": build_phantom(
            (96, 96, 80), spacing, [((38, 58), (38, 58), (20, 70))]
        ).volume,
        "too-many-slices": build_phantom(
            (96, 96, 350), spacing, [((38, 58), (38, 58), (20, 100))]
        ).volume,
        "inplane-too-small": build_phantom(
            (80, 96, 120), spacing, [((30, 50), (38, 58), (20, 100))]
        ).volume,
        "no-seed": no_seed_phantom(spacing=spacing),
        "volume-too-small": tiny_lumen_phantom(spacing=spacing),
        "volume-too-large": huge_lumen_phantom(spacing=spacing),
    }
