"""Exception hierarchy shared across the package.

Error classes map onto the CLI exit codes: ConfigError -> 2,
non-convergence -> 3 (signalled by result flags, not exceptions),
FormatError and its subclasses -> 4.
"""

from __future__ import annotations


class SounderError(Exception):
    """Base class for all package errors."""


class ConfigError(SounderError):
    """Invalid configuration, parameters, or input files."""


class GuardTimeError(ConfigError):
    """Guard time below the hardware switching floor (2 us)."""


class ScheduleError(ConfigError):
    """Inconsistent sweep schedule request."""


class CalibrationError(SounderError):
    """Calibration response unusable (zero or near-zero tone)."""


class DriftEstimationError(SounderError):
    """Drift estimation preconditions not met (e.g. too few anchors)."""


class FormatError(SounderError):
    """Base class for capture container integrity problems."""


class BadMagicError(FormatError):
    """File does not start with the container magic."""


class UnsupportedVersionError(FormatError):
    """Container version not understood by this reader."""


class CrcMismatchError(FormatError):
    """Trailing CRC-32 does not match file contents."""


class TruncationError(FormatError):
    """File ends before the declared structures are complete."""
