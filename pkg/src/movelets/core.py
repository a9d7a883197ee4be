"""Core types for triaxial accelerometer data.

Conventions used throughout the package:

* Samples are acceleration in units of g (standard gravity).
* Axis order is fixed: index 0 is up-down, index 1 is forward-backward,
  index 2 is left-right, all in the wearer's frame after normalization.
  At rest while standing, gravity reads (-1, 0, 0); lying on the back
  reads (0, -1, 0).
* Time is discrete. A series is indexed by sample number; seconds convert
  through the sampling frequency ``fs``. Durations given in seconds map to
  sample counts via ``round(seconds * fs)``.
* All types here are immutable after construction. Arrays are copied in
  and marked read-only, so instances can be shared freely across threads.

Activity labels are plain strings. The empty string is reserved: it means
"no label at this sample" and is exposed as :data:`UNLABELED`. It is a
timeline state, not an activity, and never participates in label sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptySegment, LengthMismatch, OutOfBounds

#: Timeline state for samples with no activity label. Not an activity.
UNLABELED = ""


def as_vec3(value) -> np.ndarray:
    """Coerce ``value`` to a read-only float64 vector of shape (3,).

    Raises ValueError on wrong shape or non-finite entries.
    """
    v = np.array(value, dtype=np.float64)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    v.flags.writeable = False
    return v


def magnitude(v) -> float:
    """Euclidean norm of a 3-vector.

    For a resting accelerometer this is the quantity whose deviation from
    1 g reveals device bias.
    """
    return float(np.linalg.norm(as_vec3(v)))


def _frozen_array(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class TriaxialSeries:
    """A uniformly sampled triaxial acceleration series.

    :param samples: array of shape (N, 3), one row per sample, axis order
        as documented in the module docstring.
    :param fs: sampling frequency in Hz, > 0.
    :param start_time: time of sample 0 in seconds. Only used when
        rendering time columns; all computation is index-based.
    """

    samples: np.ndarray
    fs: float
    start_time: float = 0.0

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.float64)
        if s.ndim != 2 or s.shape[1] != 3:
            raise ValueError(f"samples must have shape (N, 3), got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        if not (float(self.fs) > 0.0):
            raise ValueError(f"fs must be positive, got {self.fs}")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "fs", float(self.fs))
        object.__setattr__(self, "start_time", float(self.start_time))

    def __len__(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class LabelTimeline:
    """Per-sample activity labels aligned with a series of equal length.

    Labels are strings; :data:`UNLABELED` (the empty string) marks samples
    with no activity. ``fs`` is carried so timelines are meaningful on
    their own in files.
    """

    labels: tuple[str, ...]
    fs: float

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        if not (float(self.fs) > 0.0):
            raise ValueError(f"fs must be positive, got {self.fs}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "fs", float(self.fs))

    def __len__(self) -> int:
        return len(self.labels)

    def label_set(self) -> tuple[str, ...]:
        """Sorted distinct labels present, excluding the unlabeled state."""
        return tuple(sorted({x for x in self.labels if x != UNLABELED}))

    def as_array(self) -> np.ndarray:
        """Labels as a numpy unicode array (for vectorized comparisons)."""
        return np.array(self.labels, dtype=np.str_)


@dataclass(frozen=True)
class Segment:
    """Half-open sample-index range [start, end) into a series.

    ``start == end`` is constructible (so callers can represent "nothing
    selected") but any operation that needs samples rejects it with
    :class:`EmptySegment`. Bounds against a concrete series are checked by
    the operation, not here, since a segment does not know its series.
    """

    start: int
    end: int

    def __post_init__(self):
        start, end = int(self.start), int(self.end)
        if start < 0:
            raise ValueError(f"segment start must be >= 0, got {start}")
        if end < start:
            raise ValueError(f"segment end {end} precedes start {start}")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)

    def __len__(self) -> int:
        return self.end - self.start


def segment_view(series: TriaxialSeries, segment: Segment) -> np.ndarray:
    """Read-only (n, 3) view of the samples a segment selects.

    Raises EmptySegment for zero-length segments and OutOfBounds when the
    segment extends past the series.
    """
    if len(segment) == 0:
        raise EmptySegment(f"segment [{segment.start}, {segment.end}) selects no samples")
    if segment.end > len(series):
        raise OutOfBounds(
            f"segment [{segment.start}, {segment.end}) exceeds series length {len(series)}"
        )
    return series.samples[segment.start:segment.end]


def segment_mean(series: TriaxialSeries, segment: Segment) -> np.ndarray:
    """Per-axis arithmetic mean over a segment, as a read-only 3-vector.

    This is the discrete counterpart of averaging the continuous signal
    over the segment's time span, and is what calibration consumes.
    """
    return _frozen_array(segment_view(series, segment).mean(axis=0))


def check_aligned(series: TriaxialSeries, timeline: LabelTimeline) -> None:
    """Require a series and timeline of equal length and equal fs."""
    if len(series) != len(timeline):
        raise LengthMismatch(
            f"series has {len(series)} samples but timeline has {len(timeline)}"
        )
    if series.fs != timeline.fs:
        raise LengthMismatch(
            f"series fs {series.fs} differs from timeline fs {timeline.fs}"
        )


def label_runs(labels: Sequence[str]) -> list[tuple[int, int, str]]:
    """Maximal constant runs of a label sequence as (start, end, label).

    Ends are exclusive. Unlabeled stretches appear as runs of
    :data:`UNLABELED` like any other value.
    """
    arr = np.array(labels, dtype=np.str_)
    n = arr.shape[0]
    if n == 0:
        return []
    boundaries = np.flatnonzero(arr[1:] != arr[:-1]) + 1
    edges = np.concatenate([[0], boundaries, [n]])
    return [
        (int(edges[i]), int(edges[i + 1]), str(arr[edges[i]]))
        for i in range(len(edges) - 1)
    ]


def window_samples(h_seconds: float, fs: float) -> int:
    """Number of samples in a window of ``h_seconds`` at ``fs`` Hz.

    Computed as round(h * fs), floored at 1. Window lengths that round to
    the same sample count are equivalent everywhere in this package.
    """
    if not (h_seconds > 0.0):
        raise ValueError(f"window length must be positive, got {h_seconds}")
    return max(int(round(h_seconds * fs)), 1)
