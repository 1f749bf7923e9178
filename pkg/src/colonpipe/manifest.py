"""Append-only JSON-lines manifest: the pipeline's provenance store.

Every state change is one JSON object per line (crash-safe appends, easy
diffing); current state is reconstructed by replaying the log in order. The
latest event about a scan wins, so reruns simply append newer snapshots.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import UnreadableFile, UnwritablePath
from .records import ExclusionReason, Gender, Position, ScanRecord, ScanStatus, Verdict

EVENT_RUN_STARTED = "run_started"
EVENT_SCAN_REGISTERED = "scan_registered"
EVENT_SCAN_INCLUDED = "scan_included"
EVENT_SCAN_EXCLUDED = "scan_excluded"
EVENT_FLUID_FUSED = "fluid_fused"
EVENT_VERDICT = "verdict"
EVENT_SLICES_EXPORTED = "slices_exported"
EVENT_SPLIT_ASSIGNED = "split_assigned"
EVENT_EXPORTED_TRAINING = "exported_training"


@dataclass
class ManifestState:
    """Materialized view of a manifest log."""

    records: dict[str, ScanRecord] = field(default_factory=dict)
    split: dict[str, str] = field(default_factory=dict)
    config_hash: str | None = None
    rng_seeds: dict[str, int] = field(default_factory=dict)

    def record(self, scan_id: str) -> ScanRecord:
        if scan_id not in self.records:
            self.records[scan_id] = ScanRecord(scan_id=scan_id)
        return self.records[scan_id]

    def included(self) -> list[ScanRecord]:
        return [r for r in self.records.values() if r.status is ScanStatus.INCLUDED]


class Manifest:
    """One JSONL event log on disk."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def append(self, event: str, **payload) -> dict:
        entry = {"event": event, "ts": datetime.now(timezone.utc).isoformat(), **payload}
        line = json.dumps(entry, sort_keys=True)
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise UnwritablePath(f"cannot append to {self.path}: {exc}") from exc
        return entry

    def events(self) -> list[dict]:
        if not self.path.exists():
            return []
        out = []
        try:
            text = self.path.read_text()
        except OSError as exc:
            raise UnreadableFile(f"cannot read {self.path}: {exc}") from exc
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise UnreadableFile(
                    f"{self.path}:{lineno}: corrupt manifest line: {exc}"
                ) from exc
        return out

    def replay(self) -> ManifestState:
        state = ManifestState()
        for entry in self.events():
            _apply(state, entry)
        return state


def _apply(state: ManifestState, entry: dict) -> None:
    kind = entry.get("event")
    if kind == EVENT_RUN_STARTED:
        state.config_hash = entry.get("config_hash")
    elif kind == EVENT_SCAN_REGISTERED:
        rec = state.record(entry["scan_id"])
        if entry.get("position"):
            rec.position = Position(entry["position"])
        if entry.get("gender"):
            rec.gender = Gender(entry["gender"])
        if entry.get("age") is not None:
            rec.age = entry["age"]
        rec.paths.update(entry.get("paths", {}))
    elif kind == EVENT_SCAN_INCLUDED:
        rec = state.record(entry["scan_id"])
        rec.mark_included()
        rec.verdict = None
        rec.verdict_note = ""
        rec.paths.update(entry.get("paths", {}))
    elif kind == EVENT_SCAN_EXCLUDED:
        rec = state.record(entry["scan_id"])
        rec.mark_excluded(ExclusionReason(entry["reason"]), entry.get("detail", ""))
    elif kind == EVENT_FLUID_FUSED:
        rec = state.record(entry["scan_id"])
        rec.paths.update(entry.get("paths", {}))
    elif kind == EVENT_VERDICT:
        rec = state.record(entry["scan_id"])
        if rec.status is ScanStatus.INCLUDED:
            rec.record_verdict(Verdict(entry["verdict"]), entry.get("note", ""))
    elif kind == EVENT_SLICES_EXPORTED:
        rec = state.record(entry["scan_id"])
        rec.paths.update(entry.get("paths", {}))
        if "rng_seed" in entry:
            state.rng_seeds["slices"] = entry["rng_seed"]
    elif kind == EVENT_SPLIT_ASSIGNED:
        state.split = dict(entry.get("assignment", {}))
        if "rng_seed" in entry:
            state.rng_seeds["split"] = entry["rng_seed"]
    # EVENT_EXPORTED_TRAINING and unknown events carry no replayable state


def report_funnel(state: ManifestState) -> dict:
    """Count scans by outcome; buckets partition the total exactly."""
    counts: dict[str, int] = {"total": len(state.records), "included": 0, "pending": 0}
    for reason in ExclusionReason:
        counts[reason.value] = 0
    for rec in state.records.values():
        if rec.status is ScanStatus.INCLUDED:
            counts["included"] += 1
        elif rec.status is ScanStatus.PENDING:
            counts["pending"] += 1
        else:
            counts[rec.exclusion_reason.value] += 1
    return counts
