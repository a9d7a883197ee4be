"""Movelet extraction, dictionaries, nearest-match search, and prediction.

A movelet is one window of H consecutive samples (H = round(h * fs)) cut
from a labeled series. Training data becomes a dictionary of movelets
pooled over subjects; an unlabeled series is classified by sliding a
query window over it, finding each window's nearest dictionary entry
under the mean squared-difference distance, and letting the windows
covering each sample vote on its label.

Exactness contract
------------------
``nearest_match`` must return the same entry as a plain linear scan, no
matter which acceleration path is used. Both fast paths here only ever
*narrow the candidate set* using bounds with generous floating-point
safety margins, then score the survivors with the same canonical
distance computation the linear scan uses, so the selected entry (and
the byte-for-byte MatchResult built from it) cannot differ. Approximate
structures (trees, hashing) are deliberately absent.

Ties in distance are broken toward the lowest (subject_id, start_index)
pair, compared lexicographically. Dictionaries store entries in that
order, so "first index wins" argmin gives the tie-break for free.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import (
    UNLABELED,
    LabelTimeline,
    TriaxialSeries,
    check_aligned,
    label_runs,
    window_samples,
)
from .errors import (
    EmptyDictionary,
    FsMismatch,
    LengthMismatch,
    SeriesTooShort,
    WindowTooLong,
)

#: Environment variable controlling how many worker threads prediction
#: may use when splitting query blocks. Unset or "1" means serial.
THREADS_ENV_VAR = "MOVELETS_NUM_THREADS"

# Relative slack applied to floating-point pruning bounds. Orders of
# magnitude above accumulated rounding error, orders below any real
# distance gap; candidates inside the slack are re-scored canonically.
_PRUNE_SLACK = 1e-9


@dataclass(frozen=True)
class Movelet:
    """One window of samples with its provenance and (optional) label."""

    window: np.ndarray
    subject_id: str
    start_index: int
    label: str | None = None

    def __post_init__(self):
        w = np.array(self.window, dtype=np.float64)
        if w.ndim != 2 or w.shape[1] != 3:
            raise ValueError(f"movelet window must have shape (H, 3), got {w.shape}")
        if w.shape[0] < 1:
            raise ValueError("movelet window must contain at least one sample")
        if not np.all(np.isfinite(w)):
            raise ValueError("movelet window must be finite")
        w.flags.writeable = False
        object.__setattr__(self, "window", w)
        object.__setattr__(self, "subject_id", str(self.subject_id))
        object.__setattr__(self, "start_index", int(self.start_index))


@dataclass(frozen=True)
class MatchResult:
    """Nearest dictionary entry for one query window."""

    subject_id: str
    start_index: int
    distance: float
    label: str


@dataclass(frozen=True)
class MoveletDictionary:
    """An immutable pool of labeled movelets sharing one window length.

    Entries are canonicalized to (subject_id, start_index) order at
    construction, which makes every downstream result independent of the
    order recordings were supplied in.
    """

    h_seconds: float
    fs: float
    windows: np.ndarray
    labels: tuple[str, ...]
    subject_ids: tuple[str, ...]
    start_indices: tuple[int, ...]

    def __post_init__(self):
        w = np.array(self.windows, dtype=np.float64)
        if w.ndim != 3 or w.shape[2] != 3:
            raise ValueError(f"windows must have shape (M, H, 3), got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("windows must be finite")
        labels = tuple(str(x) for x in self.labels)
        subject_ids = tuple(str(x) for x in self.subject_ids)
        starts = tuple(int(x) for x in self.start_indices)
        m = w.shape[0]
        if not (len(labels) == len(subject_ids) == len(starts) == m):
            raise ValueError("windows, labels, subject_ids, start_indices must align")
        if any(lbl == UNLABELED for lbl in labels):
            raise ValueError("dictionary entries must carry a non-empty label")
        if not (float(self.fs) > 0.0):
            raise ValueError(f"fs must be positive, got {self.fs}")
        expected_h = window_samples(float(self.h_seconds), float(self.fs))
        if m > 0 and w.shape[1] != expected_h:
            raise ValueError(
                f"window length {w.shape[1]} does not match round(h*fs) = {expected_h}"
            )

        order = sorted(range(m), key=lambda i: (subject_ids[i], starts[i]))
        w = np.ascontiguousarray(w[order])
        w.flags.writeable = False
        object.__setattr__(self, "windows", w)
        object.__setattr__(self, "labels", tuple(labels[i] for i in order))
        object.__setattr__(self, "subject_ids", tuple(subject_ids[i] for i in order))
        object.__setattr__(self, "start_indices", tuple(starts[i] for i in order))
        object.__setattr__(self, "h_seconds", float(self.h_seconds))
        object.__setattr__(self, "fs", float(self.fs))

    def __len__(self) -> int:
        return self.windows.shape[0]

    @property
    def window_length(self) -> int:
        """H, the number of samples per entry."""
        if len(self) > 0:
            return self.windows.shape[1]
        return window_samples(self.h_seconds, self.fs)

    def label_set(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.labels)))

    def entry(self, i: int) -> Movelet:
        return Movelet(
            window=self.windows[i],
            subject_id=self.subject_ids[i],
            start_index=self.start_indices[i],
            label=self.labels[i],
        )

    def entries(self) -> list[Movelet]:
        return [self.entry(i) for i in range(len(self))]

    @cached_property
    def _flat(self) -> np.ndarray:
        return np.ascontiguousarray(self.windows.reshape(len(self), -1))

    @cached_property
    def _flat_norms_sq(self) -> np.ndarray:
        f = self._flat
        return np.einsum("ij,ij->i", f, f)


def _as_window(m) -> np.ndarray:
    if isinstance(m, Movelet):
        return m.window
    w = np.asarray(m, dtype=np.float64)
    if w.ndim != 2 or w.shape[1] != 3:
        raise ValueError(f"expected a movelet or (H, 3) array, got shape {w.shape}")
    return w


def movelet_distance(m1, m2) -> float:
    """Mean over aligned samples of squared Euclidean distance.

    Accepts movelets or raw (H, 3) arrays. Windows of unequal length
    raise LengthMismatch; there is no alignment or warping.
    """
    w1 = _as_window(m1)
    w2 = _as_window(m2)
    if w1.shape[0] != w2.shape[0]:
        raise LengthMismatch(
            f"cannot compare windows of {w1.shape[0]} and {w2.shape[0]} samples"
        )
    return float(((w1 - w2) ** 2).sum()) / w1.shape[0]


def _canonical_sums(windows: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Squared-difference sums of one query against a stack of windows.

    This is the single scoring computation every search path shares;
    movelet_distance is this divided by H.
    """
    return ((windows - query) ** 2).sum(axis=(1, 2))


def extract_movelets(
    series: TriaxialSeries,
    timeline: LabelTimeline,
    h_seconds: float,
    *,
    subject_id: str = "",
    stride: int = 1,
) -> list[Movelet]:
    """Cut all purely labeled windows of length round(h*fs) from a series.

    Windows slide by ``stride`` samples (default 1, fully overlapping). A
    window is kept only if every sample in it carries the same non-empty
    label; windows touching a label change or unlabeled samples are
    dropped. If the window is longer than the series a WindowTooLong
    warning is emitted and the result is empty.
    """
    check_aligned(series, timeline)
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    h = window_samples(h_seconds, series.fs)
    n = len(series)
    if h > n:
        warnings.warn(
            f"window of {h} samples exceeds series length {n}; no movelets extracted",
            WindowTooLong,
            stacklevel=2,
        )
        return []

    labels = timeline.as_array()
    starts = np.arange(0, n - h + 1, stride)
    if n > 1:
        changes = np.concatenate([[0], np.cumsum(labels[1:] != labels[:-1])])
    else:
        changes = np.zeros(1, dtype=np.int64)
    # a window starting at k is pure iff no label boundary falls inside it
    pure = changes[starts + h - 1] == changes[starts]
    labeled = labels[starts] != UNLABELED
    keep = starts[pure & labeled]

    return [
        Movelet(
            window=series.samples[k:k + h],
            subject_id=subject_id,
            start_index=int(k),
            label=str(labels[k]),
        )
        for k in keep
    ]


def build_dictionary(
    recordings: Iterable[tuple[TriaxialSeries, LabelTimeline, str]],
    h_seconds: float,
    *,
    stride: int = 1,
) -> MoveletDictionary:
    """Pool purely labeled movelets from several subjects' recordings.

    ``recordings`` yields (series, timeline, subject_id) triples that must
    agree on fs. A single-subject iterable builds a subject-level
    dictionary; there is no separate code path for that case.
    """
    fs: float | None = None
    movelets: list[Movelet] = []
    for series, timeline, subject_id in recordings:
        if fs is None:
            fs = series.fs
        elif series.fs != fs:
            raise FsMismatch(
                f"recording for {subject_id!r} has fs {series.fs}, expected {fs}"
            )
        movelets.extend(
            extract_movelets(
                series, timeline, h_seconds, subject_id=subject_id, stride=stride
            )
        )
    if fs is None:
        raise ValueError("build_dictionary needs at least one recording")

    h = window_samples(h_seconds, fs)
    if movelets:
        windows = np.stack([m.window for m in movelets])
    else:
        windows = np.empty((0, h, 3))
    return MoveletDictionary(
        h_seconds=h_seconds,
        fs=fs,
        windows=windows,
        labels=tuple(m.label for m in movelets),  # type: ignore[misc]
        subject_ids=tuple(m.subject_id for m in movelets),
        start_indices=tuple(m.start_index for m in movelets),
    )


def _require_entries(dictionary: MoveletDictionary) -> None:
    if len(dictionary) == 0:
        raise EmptyDictionary("nearest-match query against a dictionary with no entries")


def _result(dictionary: MoveletDictionary, index: int, query: np.ndarray) -> MatchResult:
    # every search path funnels through here so the reported distance is
    # always the one canonical computation, byte-for-byte
    return MatchResult(
        subject_id=dictionary.subject_ids[index],
        start_index=dictionary.start_indices[index],
        distance=movelet_distance(query, dictionary.windows[index]),
        label=dictionary.labels[index],
    )


def _scan_winner(dictionary: MoveletDictionary, query: np.ndarray) -> int:
    sums = _canonical_sums(dictionary.windows, query)
    return int(np.argmin(sums))


def _early_abandon_winner(dictionary: MoveletDictionary, query: np.ndarray) -> int:
    """Linear-scan winner via time-chunked partial-sum pruning.

    Partial squared-difference sums only grow, so any entry whose partial
    sum already exceeds a known full sum (entry 0's, used as the bound)
    cannot win. Pruning keeps a relative slack so rounding differences
    between chunked and canonical summation order cannot discard the true
    winner; survivors are re-scored canonically, which restores the exact
    linear-scan selection including the tie-break.
    """
    windows = dictionary.windows
    m, h, _ = windows.shape
    bound = float(_canonical_sums(windows[:1], query)[0])
    threshold = bound * (1.0 + _PRUNE_SLACK) + 1e-12

    alive = np.arange(m)
    partial = np.zeros(m)
    chunk = 16
    for t0 in range(0, h, chunk):
        t1 = min(t0 + chunk, h)
        partial = partial + (
            (windows[alive, t0:t1] - query[t0:t1]) ** 2
        ).sum(axis=(1, 2))
        keep = partial <= threshold
        alive = alive[keep]
        partial = partial[keep]
        if alive.size == 1:
            break

    sums = _canonical_sums(windows[alive], query)
    return int(alive[int(np.argmin(sums))])


def nearest_match(
    query: Movelet | np.ndarray,
    dictionary: MoveletDictionary,
    *,
    early_abandon: bool = True,
) -> MatchResult:
    """Nearest dictionary entry under the movelet distance.

    With ``early_abandon`` the scan prunes entries whose partial sums
    already exceed a running bound; the result is identical to the plain
    scan by construction (see module docstring). Distance ties go to the
    entry with the lowest (subject_id, start_index).
    """
    _require_entries(dictionary)
    q = _as_window(query)
    if q.shape[0] != dictionary.window_length:
        raise LengthMismatch(
            f"query has {q.shape[0]} samples, dictionary windows have "
            f"{dictionary.window_length}"
        )
    if early_abandon:
        winner = _early_abandon_winner(dictionary, q)
    else:
        winner = _scan_winner(dictionary, q)
    return _result(dictionary, winner, q)


def _batch_winners(
    dictionary: MoveletDictionary, queries: np.ndarray
) -> np.ndarray:
    """Winner index per query row, exactly as the linear scan would pick.

    Uses the inner-product expansion of the squared distance to rank all
    entries cheaply, keeps every entry within a safety margin of each
    row's best expanded score, and re-scores those finalists with the
    canonical summation. The margin dwarfs the expansion's rounding error,
    so the canonical winner is always among the finalists.
    """
    flat = dictionary._flat
    dict_norms = dictionary._flat_norms_sq
    q_flat = np.ascontiguousarray(queries.reshape(queries.shape[0], -1))
    q_norms = np.einsum("ij,ij->i", q_flat, q_flat)

    expanded = q_norms[:, None] + dict_norms[None, :] - 2.0 * (q_flat @ flat.T)
    scale = 1.0 + q_norms + float(dict_norms.max(initial=0.0))
    margins = _PRUNE_SLACK * scale

    winners = np.empty(queries.shape[0], dtype=np.int64)
    best = expanded.min(axis=1)
    for i in range(queries.shape[0]):
        finalists = np.flatnonzero(expanded[i] <= best[i] + margins[i])
        sums = _canonical_sums(dictionary.windows[finalists], queries[i])
        winners[i] = finalists[int(np.argmin(sums))]
    return winners


def _num_threads(override: int | None) -> int:
    if override is not None:
        n = int(override)
    else:
        n = int(os.environ.get(THREADS_ENV_VAR, "1") or "1")
    if n < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    return n


def nearest_match_indices(
    series: TriaxialSeries,
    dictionary: MoveletDictionary,
    *,
    num_threads: int | None = None,
) -> np.ndarray:
    """Winner entry index for every query start of a series.

    Query windows start at every sample index 0 .. N-H; the result has
    N-H+1 entries. Work may be split across threads by contiguous query
    blocks (count from ``num_threads`` or the MOVELETS_NUM_THREADS
    environment variable); the merge is keyed by start index, so the
    output is identical for any thread count.
    """
    _require_entries(dictionary)
    if series.fs != dictionary.fs:
        raise FsMismatch(
            f"series fs {series.fs} differs from dictionary fs {dictionary.fs}"
        )
    h = dictionary.window_length
    n = len(series)
    if n < h:
        raise SeriesTooShort(
            f"series of {n} samples is shorter than one window of {h}"
        )

    queries = np.lib.stride_tricks.sliding_window_view(series.samples, (h, 3))
    queries = queries.reshape(n - h + 1, h, 3)

    # keep per-block temporaries (block x M expanded matrix) around 32 MB
    block = max(1, int(4_000_000 // max(len(dictionary), 1)))
    blocks = [
        (t0, min(t0 + block, queries.shape[0]))
        for t0 in range(0, queries.shape[0], block)
    ]
    threads = _num_threads(num_threads)

    out = np.empty(queries.shape[0], dtype=np.int64)
    if threads == 1 or len(blocks) == 1:
        for t0, t1 in blocks:
            out[t0:t1] = _batch_winners(dictionary, queries[t0:t1])
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = pool.map(
                lambda se: (se[0], _batch_winners(dictionary, queries[se[0]:se[1]])),
                blocks,
            )
            for t0, winners in results:
                out[t0:t0 + winners.shape[0]] = winners
    return out


def vote_labels(
    start_labels: Sequence[str],
    n_samples: int,
    window_length: int,
) -> tuple[str, ...]:
    """Per-sample majority vote over the windows covering each sample.

    ``start_labels[k]`` is the label assigned to the window starting at
    sample k. Sample j is covered by starts max(0, j-H+1) .. min(j, N-H);
    near the series edges that set is simply smaller. The most frequent
    label wins; ties go to the lexicographically smallest label.
    """
    n_starts = len(start_labels)
    h = int(window_length)
    if n_starts != n_samples - h + 1:
        raise LengthMismatch(
            f"{n_starts} start labels inconsistent with {n_samples} samples "
            f"and window {h}"
        )
    arr = np.array(start_labels, dtype=np.str_)
    label_order = sorted(set(start_labels))
    j = np.arange(n_samples)
    lo = np.maximum(0, j - h + 1)
    hi = np.minimum(j, n_starts - 1)

    counts = np.empty((len(label_order), n_samples), dtype=np.int64)
    for li, label in enumerate(label_order):
        csum = np.concatenate([[0], np.cumsum(arr == label)])
        counts[li] = csum[hi + 1] - csum[lo]
    # argmax returns the first maximum; label_order is sorted, so ties
    # resolve to the lexicographically smallest label
    choice = np.argmax(counts, axis=0)
    return tuple(label_order[c] for c in choice)


def predict_labels(
    series: TriaxialSeries,
    dictionary: MoveletDictionary,
    *,
    num_threads: int | None = None,
) -> LabelTimeline:
    """Label every sample of a series from its nearest movelets.

    Each query window takes the label of its nearest dictionary entry,
    then every sample takes the majority label of the windows covering it
    (see :func:`vote_labels`; edge samples vote over a truncated set).
    The dictionary and series must agree on fs.
    """
    winners = nearest_match_indices(series, dictionary, num_threads=num_threads)
    start_labels = [dictionary.labels[w] for w in winners]
    labels = vote_labels(start_labels, len(series), dictionary.window_length)
    return LabelTimeline(labels=labels, fs=series.fs)


def budget_timeline(
    timeline: LabelTimeline,
    seconds: float | None,
    *,
    overrides: Mapping[str, float] | None = None,
) -> LabelTimeline:
    """Restrict training labels to one budgeted run per activity.

    For each label, the first contiguous run is kept, trimmed to
    round(seconds * fs) samples; every other sample of that label becomes
    unlabeled. Per-label budgets in ``overrides`` replace ``seconds``.
    ``seconds=None`` (with no overrides for a label) keeps that label's
    first run whole. Mirrors training protocols that allot each activity
    a single short demonstration.
    """
    overrides = dict(overrides or {})
    labels = timeline.as_array()
    out = np.full(labels.shape[0], UNLABELED, dtype=labels.dtype)
    seen: set[str] = set()
    for start, end, label in label_runs(timeline.labels):
        if label == UNLABELED or label in seen:
            continue
        seen.add(label)
        budget = overrides.get(label, seconds)
        if budget is None:
            keep = end
        else:
            if float(budget) < 0.0:
                raise ValueError(f"budget for {label!r} must be >= 0, got {budget}")
            keep = min(end, start + int(round(float(budget) * timeline.fs)))
        out[start:keep] = label
    return LabelTimeline(labels=tuple(out.tolist()), fs=timeline.fs)
