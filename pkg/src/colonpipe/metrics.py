"""Overlap and boundary-distance metrics plus report aggregation.

Distances use the voxel-center convention: the surface of a mask is its set
of boundary voxels (6-neighbourhood), and directed distances are Euclidean
distances between spacing-weighted voxel centers. Aggregates are medians with
distribution-free order-statistic confidence intervals.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import binom

from .errors import CIUndefined, DimsMismatch, MetricUndefined
from .morphology import boundary, remove_small_components
from .volume import Mask


def boundary_voxels(mask: Mask) -> np.ndarray:
    """(n, 3) integer coordinates of the mask's boundary voxels."""
    return np.argwhere(boundary(mask.bits))


def dice(a: Mask, b: Mask) -> float:
    """Dice overlap 2|a∩b| / (|a|+|b|); two empty masks count as identical."""
    if a.shape != b.shape:
        raise DimsMismatch(f"shape {a.shape} != {b.shape}")
    na = a.count()
    nb = b.count()
    if na == 0 and nb == 0:
        return 1.0
    inter = int(np.count_nonzero(a.bits & b.bits))
    return 2.0 * inter / (na + nb)


@dataclass(frozen=True)
class SurfaceDistanceResult:
    assd_mm: float
    masd_mm: float
    hd95_mm: float
    distances_ab_mm: np.ndarray
    distances_ba_mm: np.ndarray


def surface_distances(a: Mask, b: Mask, hd_percentile: float = 95.0,
                      pooled_percentile: bool = False) -> SurfaceDistanceResult:
    """Symmetric boundary distances between two non-empty masks.

    ASSD is the sum of both directed distance sets over the total boundary
    count; MASD is the mean of the two directed means; the Hausdorff
    percentile is the max of the two directed percentiles
    (linear-interpolated), or the percentile of the pooled set when
    ``pooled_percentile`` is on.
    """
    if a.shape != b.shape:
        raise DimsMismatch(f"shape {a.shape} != {b.shape}")
    if a.spacing != b.spacing:
        raise DimsMismatch(f"spacing {a.spacing} != {b.spacing}")
    if a.count() == 0 or b.count() == 0:
        raise MetricUndefined("surface distances need two non-empty masks")
    spacing = np.asarray(a.spacing)
    pts_a = boundary_voxels(a) * spacing
    pts_b = boundary_voxels(b) * spacing
    d_ab = cKDTree(pts_b).query(pts_a)[0]
    d_ba = cKDTree(pts_a).query(pts_b)[0]
    assd = (d_ab.sum() + d_ba.sum()) / (len(d_ab) + len(d_ba))
    masd = (d_ab.mean() + d_ba.mean()) / 2.0
    if pooled_percentile:
        hd = float(np.percentile(np.concatenate([d_ab, d_ba]), hd_percentile))
    else:
        hd = float(max(np.percentile(d_ab, hd_percentile),
                       np.percentile(d_ba, hd_percentile)))
    return SurfaceDistanceResult(float(assd), float(masd), hd, d_ab, d_ba)


def rolling_dice(series: list[tuple[int, float]], window: int) -> list[tuple[int, float]]:
    """Trailing-window mean of a (index, dice) series, ordered by index.

    Early points with fewer than ``window`` predecessors average what exists.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    ordered = sorted(series, key=lambda p: p[0])
    values = [v for _, v in ordered]
    out = []
    for i, (idx, _) in enumerate(ordered):
        lo = max(0, i - window + 1)
        out.append((idx, float(np.mean(values[lo : i + 1]))))
    return out


def median_ci(samples: list[float], level: float = 0.95) -> tuple[float, float, float]:
    """Sample median with a distribution-free confidence interval.

    The interval is [x(r), x(n−r+1)] in order statistics, with r the largest
    rank whose two-sided binomial(n, 1/2) coverage still reaches ``level``.
    Small samples admit no such rank and raise CIUndefined.
    """
    if not 0 < level < 1:
        raise ValueError(f"level must be in (0, 1), got {level}")
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n == 0:
        raise CIUndefined("no samples")
    alpha = 1.0 - level
    r = 0
    for k in range(1, n // 2 + 1):
        if binom.cdf(k - 1, n, 0.5) <= alpha / 2:
            r = k
        else:
            break
    if r == 0:
        raise CIUndefined(f"need more samples for a {level:.0%} median interval, got {n}")
    return float(np.median(x)), float(x[r - 1]), float(x[n - r])


@dataclass
class ScanMetrics:
    scan_id: str
    dice: float
    assd_mm: float | None
    masd_mm: float | None
    hd95_mm: float | None

    def to_dict(self) -> dict:
        return {
            "scan_id": self.scan_id,
            "dice": self.dice,
            "assd_mm": self.assd_mm,
            "masd_mm": self.masd_mm,
            "hd95_mm": self.hd95_mm,
        }


@dataclass
class MetricsReport:
    """Per-scan metrics grouped by method tag, with median-CI aggregates."""

    per_scan: dict[str, list[ScanMetrics]] = field(default_factory=dict)

    def add(self, method: str, metrics: ScanMetrics) -> None:
        self.per_scan.setdefault(method, []).append(metrics)

    def common_scan_ids(self) -> set[str]:
        ids = None
        for rows in self.per_scan.values():
            present = {r.scan_id for r in rows}
            ids = present if ids is None else ids & present
        return ids or set()

    def aggregate(self, level: float = 0.95) -> dict:
        """Median and CI per metric per method, over scans all methods share."""
        common = self.common_scan_ids()
        out: dict = {}
        for method, rows in sorted(self.per_scan.items()):
            out[method] = {}
            usable = [r for r in rows if r.scan_id in common]
            for name in ("dice", "assd_mm", "masd_mm", "hd95_mm"):
                vals = [getattr(r, name) for r in usable]
                vals = [v for v in vals if v is not None and not math.isnan(v)]
                if not vals:
                    continue
                try:
                    med, lo, hi = median_ci(vals, level)
                except CIUndefined:
                    med, lo, hi = float(np.median(vals)), math.nan, math.nan
                out[method][name] = {"median": med, "ci_lo": lo, "ci_hi": hi, "n": len(vals)}
        return out

    def to_json(self, level: float = 0.95) -> str:
        payload = {
            "per_scan": {m: [r.to_dict() for r in rows] for m, rows in sorted(self.per_scan.items())},
            "aggregate": self.aggregate(level),
        }
        return json.dumps(_nan_to_none(payload), indent=2, allow_nan=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["method", "scan_id", "dice", "assd_mm", "masd_mm", "hd95_mm"])
        for method, rows in sorted(self.per_scan.items()):
            for r in sorted(rows, key=lambda r: r.scan_id):
                writer.writerow([method, r.scan_id, r.dice, r.assd_mm, r.masd_mm, r.hd95_mm])
        return buf.getvalue()


def _nan_to_none(value):
    """Deep-copy a JSON payload with every NaN replaced by null."""
    if isinstance(value, dict):
        return {k: _nan_to_none(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_nan_to_none(v) for v in value]
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def evaluate(preds: dict[str, Mask], refs: dict[str, Mask], refine: bool,
             cfg, method: str = "method") -> MetricsReport:
    """Score predictions against references scan by scan.

    With ``refine`` on, prediction components smaller than
    ``cfg.island_min_voxels`` are dropped first. Scans where either mask is
    empty get a Dice score but no distances (distances need two surfaces).
    """
    report = MetricsReport()
    for scan_id in sorted(set(preds) & set(refs)):
        pred, ref = preds[scan_id], refs[scan_id]
        if refine:
            pred = pred.with_bits(
                remove_small_components(pred.bits, cfg.island_min_voxels, cfg.connectivity)
            )
        d = dice(pred, ref)
        try:
            sd = surface_distances(pred, ref, cfg.hd_percentile)
            row = ScanMetrics(scan_id, d, sd.assd_mm, sd.masd_mm, sd.hd95_mm)
        except MetricUndefined:
            row = ScanMetrics(scan_id, d, None, None, None)
        report.add(method, row)
    return report
