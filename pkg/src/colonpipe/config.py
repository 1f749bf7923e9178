"""Pipeline configuration: every numeric rule threshold, overridable.

Config files use a flat TOML grammar (``key = value`` lines, ``#`` comments,
numbers, booleans, strings, and one-level arrays). Python 3.10 has no stdlib
TOML reader, so the small subset needed here is parsed locally.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError


@dataclass(frozen=True)
class PipelineConfig:
    """All tunable thresholds, with the production defaults.

    Units are in field names: HU for intensities, voxels/px for index-space
    sizes, mm for physical distances, cm3 for volumes.
    """

    air_threshold_hu: float = -800.0
    connectivity: int = 26
    seed_band_halfwidth_px: int = 50
    seed_z_lo: int = 50
    seed_z_hi: int = 250
    volume_min_cm3: float = 3.5
    volume_max_cm3: float = 27.0
    mask_dilation_voxels: float = 35.0
    fluid_min_component_voxels: int = 2000
    fluid_surface_dist_mm: float = 2.0
    gravity_slab_halfwidth_slices: int = 2
    island_min_voxels: int = 2000
    slices_per_scan: int = 7
    export_size_px: int = 1000
    train_fraction: float = 2.0 / 3.0
    hd_percentile: float = 95.0
    min_axial_slices: int = 350
    max_axial_slices: int = 700
    min_inplane_px: int = 512
    smoothing_sigma_voxels: float = 1.0
    sagittal_max_gap_voxels: int = 3
    gravity_inplane_radius_voxels: float = math.inf
    rolling_dice_window: int = 50
    windowing_hu: tuple[float, float] = (-1000.0, 400.0)

    def __post_init__(self):
        positive = [
            "connectivity",
            "seed_band_halfwidth_px",
            "volume_min_cm3",
            "volume_max_cm3",
            "fluid_min_component_voxels",
            "fluid_surface_dist_mm",
            "gravity_slab_halfwidth_slices",
            "island_min_voxels",
            "slices_per_scan",
            "export_size_px",
            "train_fraction",
            "hd_percentile",
            "min_axial_slices",
            "max_axial_slices",
            "min_inplane_px",
            "gravity_inplane_radius_voxels",
            "rolling_dice_window",
        ]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("mask_dilation_voxels", "smoothing_sigma_voxels", "sagittal_max_gap_voxels",
                     "seed_z_lo", "seed_z_hi"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.connectivity not in (6, 18, 26):
            raise ConfigError(f"connectivity must be 6, 18, or 26, got {self.connectivity}")
        if self.volume_min_cm3 >= self.volume_max_cm3:
            raise ConfigError("volume_min_cm3 must be below volume_max_cm3")
        if self.seed_z_lo >= self.seed_z_hi:
            raise ConfigError("seed_z_lo must be below seed_z_hi")
        if self.train_fraction >= 1.0:
            raise ConfigError("train_fraction must be below 1")
        lo, hi = self.windowing_hu
        if lo >= hi:
            raise ConfigError("windowing_hu must be (low, high) with low < high")

    def replace(self, **overrides) -> "PipelineConfig":
        return dataclasses.replace(self, **_coerce_fields(overrides))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["windowing_hu"] = list(self.windowing_hu)
        if math.isinf(self.gravity_inplane_radius_voxels):
            d["gravity_inplane_radius_voxels"] = "inf"
        return d

    def content_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()
        ).hexdigest()[:16]


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}


def _coerce_fields(values: dict) -> dict:
    out = {}
    for key, val in values.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        ftype = _FIELD_TYPES[key]
        try:
            if ftype == "int":
                out[key] = int(val)
            elif ftype == "float":
                out[key] = float(val)
            elif ftype.startswith("tuple"):
                lo, hi = val
                out[key] = (float(lo), float(hi))
            else:
                out[key] = val
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {val!r}") from exc
    return out


def _parse_scalar(text: str):
    text = text.strip()
    if not text:
        raise ConfigError("empty value")
    if text in ("true", "false"):
        return text == "true"
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return text[1:-1]
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        if not inner:
            return []
        return [_parse_scalar(part) for part in inner.split(",")]
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)  # covers inf / -inf / scientific notation
    except ValueError:
        raise ConfigError(f"cannot parse value {text!r}")


def parse_flat_toml(text: str) -> dict:
    """Parse the flat ``key = value`` TOML subset used for pipeline configs."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            raise ConfigError(f"line {lineno}: tables are not supported, use flat keys")
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, rest = line.partition("=")
        key = key.strip()
        if not key or not key.replace("_", "").isalnum():
            raise ConfigError(f"line {lineno}: bad key {key!r}")
        # strip trailing comment outside of strings
        if '"' not in rest and "#" in rest:
            rest = rest.split("#", 1)[0]
        values[key] = _parse_scalar(rest)
    return values


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Build a config from defaults, an optional TOML file, then overrides."""
    values: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        values.update(parse_flat_toml(p.read_text()))
    if overrides:
        values.update(overrides)
    try:
        return PipelineConfig(**_coerce_fields(values))
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def parse_override(item: str) -> tuple[str, object]:
    """Parse a ``key=value`` CLI override using the config value grammar."""
    if "=" not in item:
        raise ConfigError(f"override must be key=value, got {item!r}")
    key, _, val = item.partition("=")
    return key.strip(), _parse_scalar(val)
