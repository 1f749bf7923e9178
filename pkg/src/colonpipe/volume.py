"""In-memory volume types.

Every array in the pipeline lives in one canonical orientation: axis 0 runs
left to right, axis 1 anterior to posterior, axis 2 inferior to superior.
Shapes are (nx, ny, nz); ``spacing`` gives the voxel pitch per axis in mm.
Intensities are int16 Hounsfield units; label maps are uint8 with
0 = background, 1 = air, 2 = fluid.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimsMismatch, InvalidLabelValue

BACKGROUND = 0
AIR = 1
FLUID = 2

_LABEL_VALUES = frozenset((BACKGROUND, AIR, FLUID))


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


def _check_spacing(spacing) -> tuple[float, float, float]:
    sx, sy, sz = (float(s) for s in spacing)
    if sx <= 0 or sy <= 0 or sz <= 0:
        raise DimsMismatch(f"spacing must be positive, got {(sx, sy, sz)}")
    return (sx, sy, sz)


@dataclass(frozen=True)
class Volume:
    """A 3-D scan in canonical orientation: int16 HU values plus mm spacing."""

    values: np.ndarray
    spacing: tuple[float, float, float]

    def __post_init__(self):
        if self.values.ndim != 3:
            raise DimsMismatch(f"expected a 3-D array, got shape {self.values.shape}")
        object.__setattr__(self, "values", _freeze(self.values.astype(np.int16, copy=False)))
        object.__setattr__(self, "spacing", _check_spacing(self.spacing))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    def voxel_volume_mm3(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz


@dataclass(frozen=True)
class LabelMap:
    """A uint8 annotation volume: 0 background, 1 air, 2 fluid."""

    labels: np.ndarray
    spacing: tuple[float, float, float]

    def __post_init__(self):
        if self.labels.ndim != 3:
            raise DimsMismatch(f"expected a 3-D array, got shape {self.labels.shape}")
        arr = self.labels
        if arr.dtype != np.uint8:
            if not np.issubdtype(arr.dtype, np.integer):
                raise InvalidLabelValue(f"labels must be integer, got dtype {arr.dtype}")
            arr = arr.astype(np.uint8)
        bad = set(np.unique(arr)) - _LABEL_VALUES
        if bad:
            raise InvalidLabelValue(f"labels contain values outside {{0, 1, 2}}: {sorted(bad)}")
        object.__setattr__(self, "labels", _freeze(arr))
        object.__setattr__(self, "spacing", _check_spacing(self.spacing))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.labels.shape

    def mask(self, value: int) -> "Mask":
        if value not in _LABEL_VALUES:
            raise InvalidLabelValue(f"no such label value: {value}")
        return Mask(self.labels == value, self.spacing)

    def air_mask(self) -> "Mask":
        return self.mask(AIR)

    def fluid_mask(self) -> "Mask":
        return self.mask(FLUID)

    def voxel_volume_mm3(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz


@dataclass(frozen=True)
class Mask:
    """A single-class boolean volume with mm spacing."""

    bits: np.ndarray
    spacing: tuple[float, float, float] = field(default=(1.0, 1.0, 1.0))

    def __post_init__(self):
        if self.bits.ndim != 3:
            raise DimsMismatch(f"expected a 3-D array, got shape {self.bits.shape}")
        object.__setattr__(self, "bits", _freeze(self.bits.astype(bool, copy=False)))
        object.__setattr__(self, "spacing", _check_spacing(self.spacing))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.bits.shape

    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def volume_mm3(self) -> float:
        sx, sy, sz = self.spacing
        return self.count() * sx * sy * sz

    def volume_cm3(self) -> float:
        return self.volume_mm3() / 1000.0

    def with_bits(self, bits: np.ndarray) -> "Mask":
        if bits.shape != self.shape:
            raise DimsMismatch(f"shape {bits.shape} != {self.shape}")
        return Mask(bits, self.spacing)


def compose_labels(air: Mask, fluid: Mask) -> LabelMap:
    """Fuse air and fluid masks into one label map; air wins on overlap."""
    if air.shape != fluid.shape:
        raise DimsMismatch(f"air shape {air.shape} != fluid shape {fluid.shape}")
    if air.spacing != fluid.spacing:
        raise DimsMismatch(f"air spacing {air.spacing} != fluid spacing {fluid.spacing}")
    labels = np.zeros(air.shape, dtype=np.uint8)
    labels[fluid.bits] = FLUID
    labels[air.bits] = AIR
    return LabelMap(labels, air.spacing)
