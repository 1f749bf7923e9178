"""HTTP service backing the review UI.

Serves the scan roster, per-scan metadata, windowed slice images with
optional label overlays, and accepts expert verdicts. Verdicts append to the
manifest under a lock and update the in-memory state, so readers always see
the latest decision. A built frontend directory, when given, is mounted at
the web root.
"""
from __future__ import annotations

import threading
from collections import OrderedDict
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import nifti
from .config import PipelineConfig
from .errors import ColonPipeError
from .manifest import EVENT_VERDICT, Manifest
from .records import ScanStatus, Verdict
from .render import render_slice
from .volume import AIR, FLUID


class VerdictBody(BaseModel):
    verdict: str
    note: str = ""


class _VolumeCache:
    """Tiny LRU keyed by file path; volumes are large, keep only a few."""

    def __init__(self, maxsize: int = 4):
        self._entries: OrderedDict[str, object] = OrderedDict()
        self._maxsize = maxsize
        self._lock = threading.Lock()

    def get(self, path: str, loader):
        with self._lock:
            if path in self._entries:
                self._entries.move_to_end(path)
                return self._entries[path]
        value = loader(path)
        with self._lock:
            self._entries[path] = value
            self._entries.move_to_end(path)
            while len(self._entries) > self._maxsize:
                self._entries.popitem(last=False)
        return value


def create_app(manifest_path: str | Path, cfg: PipelineConfig | None = None,
               frontend_dir: str | Path | None = None) -> FastAPI:
    cfg = cfg or PipelineConfig()
    manifest = Manifest(manifest_path)
    state = manifest.replay()
    state_lock = threading.Lock()
    volumes = _VolumeCache()
    labelmaps = _VolumeCache()

    app = FastAPI(title="colonpipe review")

    def _get_record(scan_id: str):
        rec = state.records.get(scan_id)
        if rec is None:
            raise HTTPException(status_code=404, detail=f"unknown scan {scan_id!r}")
        return rec

    def _load_values(rec) -> np.ndarray:
        path = rec.paths.get("image")
        if not path or not Path(path).exists():
            raise HTTPException(status_code=404,
                                detail=f"no image on disk for {rec.scan_id!r}")
        try:
            return volumes.get(path, lambda p: nifti.read_volume(p))
        except ColonPipeError as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc

    def _load_labels(rec) -> np.ndarray:
        path = rec.paths.get("labels")
        if not path or not Path(path).exists():
            raise HTTPException(status_code=404,
                                detail=f"no label map for {rec.scan_id!r}")
        try:
            return labelmaps.get(path, lambda p: nifti.read_labels(p))
        except ColonPipeError as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc

    @app.get("/api/scans")
    def list_scans():
        with state_lock:
            return [
                {
                    "scan_id": rec.scan_id,
                    "status": rec.status.value,
                    "position": rec.position.value if rec.position else None,
                    "gender": rec.gender.value,
                    "verdict": rec.verdict.value if rec.verdict else None,
                    "exclusion_reason": (
                        rec.exclusion_reason.value if rec.exclusion_reason else None
                    ),
                }
                for _, rec in sorted(state.records.items())
            ]

    @app.get("/api/scans/{scan_id}/meta")
    def scan_meta(scan_id: str):
        with state_lock:
            rec = _get_record(scan_id)
        volume = _load_values(rec)
        layers = []
        if rec.paths.get("labels") and Path(rec.paths["labels"]).exists():
            present = np.unique(_load_labels(rec).labels)
            if AIR in present:
                layers.append("air")
            if FLUID in present:
                layers.append("fluid")
        return {
            "scan_id": rec.scan_id,
            "status": rec.status.value,
            "verdict": rec.verdict.value if rec.verdict else None,
            "dims": list(volume.shape),
            "spacing": list(volume.spacing),
            "label_layers": layers,
        }

    @app.get("/api/scans/{scan_id}/slice")
    def scan_slice(scan_id: str, axis: int, index: int, overlay: str = "none"):
        if overlay not in ("none", "labels"):
            raise HTTPException(status_code=422,
                                detail="overlay must be 'none' or 'labels'")
        with state_lock:
            rec = _get_record(scan_id)
        volume = _load_values(rec)
        labels = _load_labels(rec).labels if overlay == "labels" else None
        try:
            png = render_slice(volume.values, labels, axis, index, cfg.windowing_hu)
        except (ValueError, IndexError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return Response(content=png, media_type="image/png")

    @app.post("/api/scans/{scan_id}/verdict")
    def post_verdict(scan_id: str, body: VerdictBody):
        try:
            verdict = Verdict(body.verdict)
        except ValueError:
            raise HTTPException(status_code=422,
                                detail="verdict must be 'accepted' or 'rejected'")
        with state_lock:
            rec = _get_record(scan_id)
            if rec.status is not ScanStatus.INCLUDED:
                raise HTTPException(
                    status_code=409,
                    detail=f"scan {scan_id!r} is {rec.status.value}, not reviewable",
                )
            manifest.append(EVENT_VERDICT, scan_id=scan_id, verdict=verdict.value,
                            note=body.note)
            rec.record_verdict(verdict, body.note)
            return rec.to_dict()

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True),
                  name="frontend")

    return app
