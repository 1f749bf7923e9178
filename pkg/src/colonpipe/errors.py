"""Exception types shared across the pipeline."""


class ColonPipeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ColonPipeError):
    """Invalid configuration file, key, or value."""


class UnreadableFile(ColonPipeError):
    """File is missing, truncated, or otherwise unparseable."""


class UnsupportedFormat(ColonPipeError):
    """File parses but is not a format this package handles."""


class MissingOrientation(ColonPipeError):
    """Volume file carries no usable orientation information."""


class UnwritablePath(ColonPipeError):
    """Output path cannot be written."""


class InvalidLabelValue(ColonPipeError):
    """Label map contains a value other than 0, 1, or 2."""


class DimsMismatch(ColonPipeError):
    """Two grids that must share dims/spacing do not."""


class SeedNotInForeground(ColonPipeError):
    """Region-growing seed points at an unset voxel."""


class MetricUndefined(ColonPipeError):
    """Surface metrics requested for an empty mask."""


class CIUndefined(ColonPipeError):
    """Too few samples for a distribution-free median CI at this level."""


class NoAirSlices(ColonPipeError):
    """No axial slice contains any air voxel to export."""


class MissingLabel(ColonPipeError):
    """A training scan has no label map."""
