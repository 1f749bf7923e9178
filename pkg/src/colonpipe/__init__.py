"""Rule-based annotation pipeline for CT colonography volumes.

Segments the air-distended colon with threshold + seeded region growing,
post-processes externally predicted fluid masks, and manages the dataset
lifecycle around them: exclusion accounting, annotation-slice export,
stratified splitting, training-layout export, evaluation metrics, and an
HTTP review service.
"""
from .config import PipelineConfig, load_config
from .errors import ColonPipeError
from .records import (
    ExclusionReason,
    ExclusionRecord,
    Gender,
    Position,
    ScanRecord,
    ScanStatus,
    Verdict,
)
from .volume import AIR, BACKGROUND, FLUID, LabelMap, Mask, Volume, compose_labels

__version__ = "0.1.0"

__all__ = [
    "AIR",
    "BACKGROUND",
    "FLUID",
    "ColonPipeError",
    "ExclusionReason",
    "ExclusionRecord",
    "Gender",
    "LabelMap",
    "Mask",
    "PipelineConfig",
    "Position",
    "ScanRecord",
    "ScanStatus",
    "Verdict",
    "Volume",
    "compose_labels",
    "load_config",
    "__version__",
]
