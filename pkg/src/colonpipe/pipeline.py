"""Batch orchestration: discover scans, run the per-scan chain, log outcomes.

Each scan runs load → geometry validation → air segmentation → optional fluid
import + post-processing → label save, independently of its peers, so one
corrupt file never aborts a batch. Workers return plain result dicts; the
parent sorts them by scan id before appending manifest events, which makes
the log independent of worker count and scheduling order.
"""
from __future__ import annotations

import csv
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import nifti
from .airseg import segment_air, validate_scan
from .config import PipelineConfig
from .errors import ColonPipeError
from .fluid import FluidContext, fluid_postprocess, import_fluid_nifti, import_fluid_slices
from .manifest import (
    EVENT_RUN_STARTED,
    EVENT_SCAN_EXCLUDED,
    EVENT_SCAN_INCLUDED,
    EVENT_SCAN_REGISTERED,
    Manifest,
)
from .records import ExclusionReason, ExclusionRecord, Position, Gender
from .volume import LabelMap


def scan_id_from_path(path: Path) -> str:
    name = path.name
    for suffix in (".nii.gz", ".nii"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return path.stem


def discover_scans(input_dir: str | Path) -> list[tuple[str, Path]]:
    """All NIfTI files under a directory, sorted by scan id."""
    input_dir = Path(input_dir)
    found = {}
    for path in sorted(input_dir.glob("*.nii")) + sorted(input_dir.glob("*.nii.gz")):
        found[scan_id_from_path(path)] = path
    return sorted(found.items())


def load_metadata_csv(path: str | Path | None) -> dict[str, dict]:
    """Read optional per-scan metadata (scan_id, position, gender, age)."""
    if path is None:
        return {}
    meta: dict[str, dict] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            scan_id = row.get("scan_id", "").strip()
            if not scan_id:
                continue
            entry: dict = {}
            if row.get("position"):
                entry["position"] = Position(row["position"].strip().lower()).value
            if row.get("gender"):
                entry["gender"] = Gender(row["gender"].strip().lower()).value
            if row.get("age"):
                entry["age"] = int(row["age"])
            meta[scan_id] = entry
    return meta


def _find_fluid_source(fluid_dir: Path | None, scan_id: str) -> Path | None:
    if fluid_dir is None:
        return None
    for suffix in (".nii.gz", ".nii"):
        candidate = fluid_dir / f"{scan_id}{suffix}"
        if candidate.exists():
            return candidate
    if any(fluid_dir.glob(f"{scan_id}_z*.png")):
        return fluid_dir
    return None


def process_scan(scan_id: str, image_path: str, cfg: PipelineConfig,
                 labels_dir: str, fluid_dir: str | None = None,
                 position: str | None = None) -> dict:
    """Run the full per-scan chain; returns a picklable outcome dict."""
    result = {"scan_id": scan_id, "image_path": str(image_path), "fluid": False}
    try:
        try:
            volume = nifti.read_volume(image_path)
        except ColonPipeError as exc:
            result.update(
                outcome="excluded",
                reason=ExclusionReason.DISRUPTED_FORMAT.value,
                detail=str(exc),
            )
            return result

        gate = validate_scan(volume, cfg)
        if gate is not None:
            result.update(outcome="excluded", reason=gate.value,
                          detail=f"dims {volume.shape}")
            return result

        outcome = segment_air(volume, cfg, scan_id)
        if isinstance(outcome, ExclusionRecord):
            result.update(outcome="excluded", reason=outcome.reason.value,
                          detail=outcome.detail)
            return result
        labels: LabelMap = outcome

        fluid_source = _find_fluid_source(
            Path(fluid_dir) if fluid_dir else None, scan_id
        )
        if fluid_source is not None:
            air = labels.air_mask()
            if fluid_source.is_dir():
                raw = import_fluid_slices(fluid_source, scan_id, air)
            else:
                raw = import_fluid_nifti(fluid_source, air)
            ctx = FluidContext(
                air=air,
                fluid_raw=raw,
                cfg=cfg,
                position=Position(position) if position else None,
            )
            labels = fluid_postprocess(ctx)
            result["fluid"] = True

        labels_path = Path(labels_dir) / f"{scan_id}.nii.gz"
        nifti.write_labels(labels_path, labels)
        result.update(outcome="included", labels_path=str(labels_path))
        return result
    except Exception:
        result.update(outcome="error", detail=traceback.format_exc())
        return result


def run_pipeline(input_dir: str | Path, cfg: PipelineConfig, out_dir: str | Path,
                 workers: int = 1, fluid_dir: str | Path | None = None,
                 metadata_csv: str | Path | None = None) -> tuple[Manifest, int]:
    """Process every scan in a directory; returns (manifest, error_count).

    The manifest file under ``out_dir`` is rewritten from scratch so a rerun
    with identical inputs and config produces an identical log (timestamps
    aside). Unexpected per-scan errors are reported and counted but do not
    stop the batch.
    """
    out_dir = Path(out_dir)
    labels_dir = out_dir / "labels"
    labels_dir.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(out_dir / "manifest.jsonl")
    if manifest.path.exists():
        manifest.path.unlink()
    manifest.append(EVENT_RUN_STARTED, config_hash=cfg.content_hash(),
                    config=cfg.to_dict())

    meta = load_metadata_csv(metadata_csv)
    scans = discover_scans(input_dir)
    jobs = [
        (
            scan_id,
            str(path),
            cfg,
            str(labels_dir),
            str(fluid_dir) if fluid_dir else None,
            meta.get(scan_id, {}).get("position"),
        )
        for scan_id, path in scans
    ]

    if workers <= 1:
        results = [process_scan(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_process_star, jobs))

    results.sort(key=lambda r: r["scan_id"])
    errors = 0
    for result in results:
        scan_id = result["scan_id"]
        entry = meta.get(scan_id, {})
        manifest.append(
            EVENT_SCAN_REGISTERED,
            scan_id=scan_id,
            paths={"image": result["image_path"]},
            **{k: entry[k] for k in ("position", "gender", "age") if k in entry},
        )
        if result["outcome"] == "included":
            manifest.append(
                EVENT_SCAN_INCLUDED,
                scan_id=scan_id,
                paths={"labels": result["labels_path"]},
                fluid=result["fluid"],
            )
        elif result["outcome"] == "excluded":
            manifest.append(
                EVENT_SCAN_EXCLUDED,
                scan_id=scan_id,
                reason=result["reason"],
                detail=result.get("detail", ""),
            )
        else:
            errors += 1
            print(f"error processing {scan_id}:\n{result.get('detail', '')}",
                  file=sys.stderr)
    return manifest, errors


def _process_star(job: tuple) -> dict:
    return process_scan(*job)
