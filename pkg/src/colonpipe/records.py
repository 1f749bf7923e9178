"""Per-scan bookkeeping: status, exclusion reasons, and expert verdicts."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class Position(str, Enum):
    SUPINE = "supine"
    PRONE = "prone"


class Gender(str, Enum):
    FEMALE = "female"
    MALE = "male"
    UNKNOWN = "unknown"


class ScanStatus(str, Enum):
    PENDING = "pending"
    INCLUDED = "included"
    EXCLUDED = "excluded"


class Verdict(str, Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"


class ExclusionReason(str, Enum):
    DIMS_TOO_FEW_SLICES = "DimsTooFewSlices"
    DIMS_TOO_MANY_SLICES = "DimsTooManySlices"
    DIMS_IN_PLANE_TOO_SMALL = "DimsInPlaneTooSmall"
    DISRUPTED_FORMAT = "DisruptedFormat"
    SEED_NOT_FOUND = "SeedNotFound"
    VOLUME_TOO_SMALL = "VolumeTooSmall"
    VOLUME_TOO_LARGE = "VolumeTooLarge"
    EXPERT_REJECTED = "ExpertRejected"


@dataclass(frozen=True)
class ExclusionRecord:
    """Why a scan dropped out of the pipeline."""

    scan_id: str
    reason: ExclusionReason
    detail: str = ""


@dataclass
class ScanRecord:
    """Mutable per-scan state tracked by the manifest.

    Invariants: ``status == EXCLUDED`` iff ``exclusion_reason`` is set, and a
    verdict may only be recorded while the scan is included. A rejection
    flips the scan to excluded with reason ``ExpertRejected``.
    """

    scan_id: str
    position: Position | None = None
    gender: Gender = Gender.UNKNOWN
    age: int | None = None
    status: ScanStatus = ScanStatus.PENDING
    exclusion_reason: ExclusionReason | None = None
    exclusion_detail: str = ""
    verdict: Verdict | None = None
    verdict_note: str = ""
    paths: dict[str, str] = field(default_factory=dict)

    def mark_included(self) -> None:
        self.status = ScanStatus.INCLUDED
        self.exclusion_reason = None
        self.exclusion_detail = ""

    def mark_excluded(self, reason: ExclusionReason, detail: str = "") -> None:
        self.status = ScanStatus.EXCLUDED
        self.exclusion_reason = reason
        self.exclusion_detail = detail

    def record_verdict(self, verdict: Verdict, note: str = "") -> None:
        if self.status is not ScanStatus.INCLUDED:
            raise ValueError(
                f"verdict on scan {self.scan_id!r} with status {self.status.value}"
            )
        self.verdict = verdict
        self.verdict_note = note
        if verdict is Verdict.REJECTED:
            self.mark_excluded(ExclusionReason.EXPERT_REJECTED, note or "rejected by expert")

    def to_dict(self) -> dict:
        return {
            "scan_id": self.scan_id,
            "position": self.position.value if self.position else None,
            "gender": self.gender.value,
            "age": self.age,
            "status": self.status.value,
            "exclusion_reason": self.exclusion_reason.value if self.exclusion_reason else None,
            "exclusion_detail": self.exclusion_detail,
            "verdict": self.verdict.value if self.verdict else None,
            "verdict_note": self.verdict_note,
            "paths": dict(self.paths),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScanRecord":
        return cls(
            scan_id=d["scan_id"],
            position=Position(d["position"]) if d.get("position") else None,
            gender=Gender(d.get("gender", "unknown")),
            age=d.get("age"),
            status=ScanStatus(d.get("status", "pending")),
            exclusion_reason=(
                ExclusionReason(d["exclusion_reason"]) if d.get("exclusion_reason") else None
            ),
            exclusion_detail=d.get("exclusion_detail", ""),
            verdict=Verdict(d["verdict"]) if d.get("verdict") else None,
            verdict_note=d.get("verdict_note", ""),
            paths=dict(d.get("paths", {})),
        )
