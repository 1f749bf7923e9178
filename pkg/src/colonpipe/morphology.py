"""3-D binary morphology used across segmentation and post-processing.

All functions take and return plain boolean arrays indexed (x, y, z);
connectivity is one of 6 (faces), 18 (faces+edges), or 26 (full cube).
"""
from __future__ import annotations

import numba
import numpy as np
from scipy import ndimage

from .errors import SeedNotInForeground

_MAX_L1 = {6: 1, 18: 2, 26: 3}


def _structure(connectivity: int) -> np.ndarray:
    if connectivity not in _MAX_L1:
        raise ValueError(f"connectivity must be 6, 18, or 26, got {connectivity}")
    return ndimage.generate_binary_structure(3, _MAX_L1[connectivity])


@numba.njit(cache=True)
def _grow_kernel(mask, sx, sy, sz, max_l1):  # pragma: no cover - jitted
    nx, ny, nz = mask.shape
    out = np.zeros(mask.shape, dtype=np.bool_)
    cap = 4096
    stack = np.empty((cap, 3), dtype=np.int32)
    out[sx, sy, sz] = True
    stack[0, 0] = sx
    stack[0, 1] = sy
    stack[0, 2] = sz
    n = 1
    while n > 0:
        n -= 1
        x = stack[n, 0]
        y = stack[n, 1]
        z = stack[n, 2]
        for dx in range(-1, 2):
            for dy in range(-1, 2):
                for dz in range(-1, 2):
                    l1 = abs(dx) + abs(dy) + abs(dz)
                    if l1 == 0 or l1 > max_l1:
                        continue
                    ax = x + dx
                    ay = y + dy
                    az = z + dz
                    if ax < 0 or ax >= nx or ay < 0 or ay >= ny or az < 0 or az >= nz:
                        continue
                    if mask[ax, ay, az] and not out[ax, ay, az]:
                        out[ax, ay, az] = True
                        if n >= cap:
                            grown = np.empty((cap * 2, 3), dtype=np.int32)
                            grown[:cap] = stack
                            stack = grown
                            cap *= 2
                        stack[n, 0] = ax
                        stack[n, 1] = ay
                        stack[n, 2] = az
                        n += 1
    return out


def region_grow(mask: np.ndarray, seed: tuple[int, int, int], connectivity: int) -> np.ndarray:
    """Return the connected region of ``mask`` containing ``seed``."""
    if connectivity not in _MAX_L1:
        raise ValueError(f"connectivity must be 6, 18, or 26, got {connectivity}")
    sx, sy, sz = (int(c) for c in seed)
    nx, ny, nz = mask.shape
    if not (0 <= sx < nx and 0 <= sy < ny and 0 <= sz < nz):
        raise SeedNotInForeground(f"seed {seed} outside volume of shape {mask.shape}")
    if not mask[sx, sy, sz]:
        raise SeedNotInForeground(f"seed {seed} is not a foreground voxel")
    return _grow_kernel(np.ascontiguousarray(mask, dtype=np.bool_), sx, sy, sz,
                        _MAX_L1[connectivity])


def connected_components(mask: np.ndarray, connectivity: int) -> tuple[np.ndarray, int]:
    """Label connected components; returns (labels, count) with labels 1..count."""
    labels, count = ndimage.label(mask, structure=_structure(connectivity))
    return labels, int(count)


def component_sizes(labels: np.ndarray, count: int) -> np.ndarray:
    """Voxel count per component id; index 0 is the background count."""
    return np.bincount(labels.ravel(), minlength=count + 1)


def remove_small_components(mask: np.ndarray, min_voxels: int, connectivity: int) -> np.ndarray:
    """Drop connected components with fewer than ``min_voxels`` voxels."""
    labels, count = connected_components(mask, connectivity)
    if count == 0:
        return mask.copy()
    sizes = component_sizes(labels, count)
    keep = sizes >= min_voxels
    keep[0] = False
    return keep[labels]


def largest_component(mask: np.ndarray, connectivity: int) -> np.ndarray:
    labels, count = connected_components(mask, connectivity)
    if count == 0:
        return mask.copy()
    sizes = component_sizes(labels, count)
    sizes[0] = 0
    return labels == int(np.argmax(sizes))


def dilate(mask: np.ndarray, radius_voxels: float) -> np.ndarray:
    """Dilate by a Euclidean ball of the given radius, in voxel units."""
    if radius_voxels <= 0 or not mask.any():
        return mask.copy()
    return ndimage.distance_transform_edt(~mask) <= radius_voxels


def fill_holes(mask: np.ndarray) -> np.ndarray:
    """Fill background pockets that cannot reach the array border (6-connected)."""
    labels, count = connected_components(~mask, 6)
    if count == 0:
        return mask.copy()
    touches_border = np.zeros(count + 1, dtype=bool)
    touches_border[0] = True
    for axis in range(3):
        for index in (0, -1):
            face = np.take(labels, index, axis=axis)
            touches_border[np.unique(face)] = True
    return mask | ~touches_border[labels]


def gaussian_smooth_binary(mask: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian-blur the indicator function and re-threshold at one half."""
    if sigma <= 0:
        return mask.copy()
    blurred = ndimage.gaussian_filter(
        mask.astype(np.float64), sigma=sigma, mode="constant", cval=0.0, truncate=4.0
    )
    return blurred >= 0.5


def boundary(mask: np.ndarray) -> np.ndarray:
    """Mask voxels with at least one 6-neighbour outside the mask.

    Voxels on the array border count as boundary.
    """
    eroded = ndimage.binary_erosion(mask, structure=_structure(6), border_value=0)
    return mask & ~eroded


def surface_distance_field_mm(mask: np.ndarray,
                              spacing: tuple[float, float, float]) -> np.ndarray:
    """Distance from every voxel to the nearest surface voxel of ``mask``, in mm.

    An empty mask yields an all-infinity field.
    """
    surf = boundary(mask)
    if not surf.any():
        return np.full(mask.shape, np.inf)
    return ndimage.distance_transform_edt(~surf, sampling=spacing)


def min_surface_distance_mm(
    from_mask: np.ndarray,
    to_mask: np.ndarray,
    spacing: tuple[float, float, float],
    connectivity: int = 26,
) -> tuple[np.ndarray, int, np.ndarray]:
    """Per-component minimum distance from ``from_mask`` to the surface of ``to_mask``.

    Returns ``(labels, count, mins)`` where ``labels``/``count`` describe the
    components of ``from_mask`` and ``mins[i]`` is the minimum mm distance from
    any voxel center of component ``i`` (ids 1..count) to any surface voxel
    center of ``to_mask``. ``mins[0]`` is unused and all entries are infinity
    when ``to_mask`` has no surface.
    """
    labels, count = connected_components(from_mask, connectivity)
    mins = np.full(count + 1, np.inf)
    if count == 0:
        return labels, 0, mins
    field = surface_distance_field_mm(to_mask, spacing)
    if not np.isinf(field).all():
        mins[1:] = ndimage.minimum(field, labels=labels, index=np.arange(1, count + 1))
    return labels, count, mins
