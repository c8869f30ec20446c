"""Exception types shared across the package.

Error-to-exit-code mapping used by the CLI lives in :mod:`foilmetric.cli`;
everything here is a plain exception hierarchy so library callers can catch
one base class.
"""


class FoilmetricError(Exception):
    """Base class for all package errors."""


class ConfigError(FoilmetricError, ValueError):
    """Invalid configuration or parameter combination."""


class FormatError(FoilmetricError, ValueError):
    """Malformed, truncated, or inconsistent file content."""


class CapacityError(FoilmetricError, ValueError):
    """Data exceeds a hard limit of the exchange format."""


class SizeError(FoilmetricError, ValueError):
    """Raster dimensions do not match between operands."""


class GenerationError(FoilmetricError, ValueError):
    """Synthetic foil parameters produce an unusable pattern."""


class SegmentationError(FoilmetricError, RuntimeError):
    """A segmentation backend failed; carries backend diagnostics."""

    def __init__(self, message, backend_name="", details=""):
        super().__init__(message)
        self.backend_name = backend_name
        self.details = details


class UnknownLabelError(FoilmetricError, KeyError):
    """A cell label is not present in the mask."""


class DegenerateDataError(FoilmetricError, ValueError):
    """Statistical input has no usable spread (all-equal or empty)."""


class InsufficientCellsError(FoilmetricError, ValueError):
    """Too few cells to run the requested statistic."""
