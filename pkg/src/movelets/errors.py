"""Error taxonomy shared across the package.

Every condition a caller can reasonably handle gets its own class so the
CLI can map failures onto machine-readable records without string matching.
"""


class MoveletsError(Exception):
    """Base class for all domain errors raised by this package."""


class EmptySegment(MoveletsError):
    """A segment with start == end was used where samples are required."""


class OutOfBounds(MoveletsError):
    """A segment or index range extends past the end of a series."""


class DegenerateCalibration(MoveletsError):
    """Calibration means are (near-)parallel or (near-)zero.

    The orientation of the device cannot be identified from such input.
    """


class InsufficientSamples(MoveletsError):
    """A statistic needs more samples than the segment provides."""


class SingularCovariance(MoveletsError):
    """Sample covariance has zero operator norm; the test statistic is undefined."""


class LengthMismatch(MoveletsError):
    """Two sequences that must be aligned sample-for-sample have different lengths."""


class EmptyDictionary(MoveletsError):
    """A nearest-match query was made against a dictionary with no entries."""


class SeriesTooShort(MoveletsError):
    """A series is shorter than one movelet window."""


class UndefinedRate(MoveletsError):
    """A rate with a zero denominator was requested directly.

    Report assembly records such rates as absent instead of raising.
    """


class UnmappedLabel(MoveletsError):
    """A label was encountered that the active grouping map does not cover."""


class InsufficientSubjects(MoveletsError):
    """Leave-one-subject-out selection needs at least two training subjects."""


class InvalidConfig(MoveletsError):
    """A configuration value or key is outside the documented schema."""


class FsMismatch(MoveletsError):
    """Dictionary and query series disagree on sampling frequency."""


class ParseError(MoveletsError):
    """A file could not be parsed. Carries a 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class NonUniformIndex(ParseError):
    """Recording rows are not indexed 0, 1, 2, ... without gaps."""


class UnknownLabel(ParseError):
    """Strict parsing met a label outside the declared label set."""


class WindowTooLong(UserWarning):
    """Movelet window exceeds the series length; extraction returns nothing."""
