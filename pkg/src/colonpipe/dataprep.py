"""Dataset preparation: masked volumes, annotation slices, splits, exports.

These steps produce the artifacts handed to external tools: masked CT volumes
for coarse-model inference, 2-D PNG slices for the annotation tool, a
stratified train/test split, and the trainer's directory layout.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import nifti
from .config import PipelineConfig
from .errors import DimsMismatch, MissingLabel, NoAirSlices, UnwritablePath
from .morphology import dilate
from .records import ScanRecord, ScanStatus
from .render import extract_slice, window_to_uint8
from .volume import AIR, LabelMap, Mask, Volume

MASK_FILL_HU = -1024

TRAIN = "train"
TEST = "test"

# scan_id -> TRAIN | TEST
SplitAssignment = dict


def prepare_masked_image(volume: Volume, coarse_mask: Mask, cfg: PipelineConfig) -> Volume:
    """Blank everything outside the dilated coarse mask to the fill HU."""
    if volume.shape != coarse_mask.shape:
        raise DimsMismatch(
            f"volume shape {volume.shape} != mask shape {coarse_mask.shape}"
        )
    keep = dilate(coarse_mask.bits, cfg.mask_dilation_voxels)
    values = np.where(keep, volume.values, np.int16(MASK_FILL_HU))
    return Volume(values, volume.spacing)


@dataclass
class SliceExport:
    scan_id: str
    z_indices: list[int]
    paths: list[Path]
    warning: str | None = None


def export_annotation_slices(volume: Volume, air: Mask, cfg: PipelineConfig,
                             rng_seed: int, out_dir: str | Path,
                             scan_id: str) -> SliceExport:
    """Export axial slices that contain air, as large grayscale PNGs.

    Picks ``slices_per_scan`` distinct z indices uniformly at random (seeded)
    among slices with at least one air voxel; when fewer candidates exist,
    exports them all and notes a warning. Slices are windowed to 8-bit and
    resized to export_size_px squared with bilinear interpolation.
    """
    if volume.shape != air.shape:
        raise DimsMismatch(f"volume shape {volume.shape} != air shape {air.shape}")
    candidates = np.flatnonzero(air.bits.any(axis=(0, 1)))
    if candidates.size == 0:
        raise NoAirSlices(f"scan {scan_id!r} has no axial slice containing air")
    rng = np.random.default_rng(rng_seed)
    warning = None
    if candidates.size < cfg.slices_per_scan:
        chosen = candidates
        warning = (f"only {candidates.size} air-bearing slices available, "
                   f"wanted {cfg.slices_per_scan}")
    else:
        chosen = rng.choice(candidates, size=cfg.slices_per_scan, replace=False)
    chosen = sorted(int(z) for z in chosen)

    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UnwritablePath(f"cannot create {out_dir}: {exc}") from exc
    size = (cfg.export_size_px, cfg.export_size_px)
    paths = []
    for z in chosen:
        plane = window_to_uint8(extract_slice(volume.values, 2, z), cfg.windowing_hu)
        img = Image.fromarray(plane, mode="L").resize(size, Image.BILINEAR)
        path = out_dir / f"{scan_id}_z{z}.png"
        img.save(path)
        paths.append(path)
    return SliceExport(scan_id, chosen, paths, warning)


def stratified_split(records: list[ScanRecord], cfg: PipelineConfig,
                     rng_seed: int) -> SplitAssignment:
    """Assign included scans to train/test, stratified by gender and position.

    Each (gender, position) stratum is shuffled with the seeded generator and
    cut at round(n * train_fraction), so per-stratum proportions match the
    global fraction to within one scan. Not subject-aware by design.
    """
    rng = np.random.default_rng(rng_seed)
    strata: dict[tuple[str, str], list[str]] = {}
    for rec in records:
        if rec.status is not ScanStatus.INCLUDED:
            continue
        key = (rec.gender.value, rec.position.value if rec.position else "")
        strata.setdefault(key, []).append(rec.scan_id)
    assignment: SplitAssignment = {}
    for key in sorted(strata):
        ids = sorted(strata[key])
        rng.shuffle(ids)
        n_train = int(round(len(ids) * cfg.train_fraction))
        for scan_id in ids[:n_train]:
            assignment[scan_id] = TRAIN
        for scan_id in ids[n_train:]:
            assignment[scan_id] = TEST
    return assignment


def _transform_labels(labels: LabelMap, target: str, separate_classes: bool) -> np.ndarray:
    if target == "air":
        return (labels.labels == AIR).astype(np.uint8)
    if target == "full":
        if separate_classes:
            return labels.labels.copy()
        return (labels.labels != 0).astype(np.uint8)
    raise ValueError(f"target must be 'air' or 'full', got {target!r}")


def _label_names(target: str, separate_classes: bool) -> dict:
    if target == "air":
        return {"background": 0, "air": 1}
    if separate_classes:
        return {"background": 0, "air": 1, "fluid": 2}
    return {"background": 0, "colon": 1}


@dataclass
class TrainingLayout:
    root: Path
    n_train: int
    n_test: int
    dataset_json: Path
    warnings: list[str] = field(default_factory=list)


def export_training_layout(records: list[ScanRecord], split: SplitAssignment,
                           out_dir: str | Path, target: str = "air",
                           separate_classes: bool = False) -> TrainingLayout:
    """Write the external trainer's directory convention.

    Train scans land as imagesTr/<id>_0000.nii.gz with labelsTr/<id>.nii.gz;
    test scans as imagesTs/<id>_0000.nii.gz. Images and labels are read from
    each record's registered paths ("image", "labels"). A train scan without
    a labels path raises MissingLabel. A dataset.json descriptor carries the
    channel map, label names, and training count.
    """
    root = Path(out_dir)
    images_tr = root / "imagesTr"
    labels_tr = root / "labelsTr"
    images_ts = root / "imagesTs"
    for d in (images_tr, labels_tr, images_ts):
        try:
            d.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise UnwritablePath(f"cannot create {d}: {exc}") from exc

    by_id = {rec.scan_id: rec for rec in records}
    n_train = n_test = 0
    for scan_id in sorted(split):
        rec = by_id.get(scan_id)
        if rec is None or rec.status is not ScanStatus.INCLUDED:
            continue
        side = split[scan_id]
        image_path = rec.paths.get("image")
        if image_path is None:
            raise MissingLabel(f"scan {scan_id!r} has no registered image path")
        volume = nifti.read_volume(image_path)
        if side == TRAIN:
            labels_path = rec.paths.get("labels")
            if labels_path is None:
                raise MissingLabel(f"train scan {scan_id!r} has no label map")
            labels = nifti.read_labels(labels_path)
            if labels.shape != volume.shape:
                raise DimsMismatch(
                    f"scan {scan_id!r}: labels shape {labels.shape} != image {volume.shape}"
                )
            nifti.write_volume(images_tr / f"{scan_id}_0000.nii.gz", volume)
            nifti.write_array(
                labels_tr / f"{scan_id}.nii.gz",
                _transform_labels(labels, target, separate_classes),
                labels.spacing,
            )
            n_train += 1
        else:
            nifti.write_volume(images_ts / f"{scan_id}_0000.nii.gz", volume)
            n_test += 1

    descriptor = {
        "channel_names": {"0": "CT"},
        "labels": _label_names(target, separate_classes),
        "numTraining": n_train,
        "file_ending": ".nii.gz",
    }
    dataset_json = root / "dataset.json"
    dataset_json.write_text(json.dumps(descriptor, indent=2) + "\n")
    return TrainingLayout(root, n_train, n_test, dataset_json)


def save_split(split: SplitAssignment, path: str | Path) -> None:
    Path(path).write_text(json.dumps(dict(sorted(split.items())), indent=2) + "\n")


def load_split(path: str | Path) -> SplitAssignment:
    return json.loads(Path(path).read_text())
