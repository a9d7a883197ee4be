"""Scoring predicted timelines and selecting the movelet window length.

Two rates are reported per (subject, activity):

* true prediction rate: of the samples truly in the activity, the
  fraction predicted as it (a recall);
* false prediction rate: of the samples predicted as the activity, the
  fraction truly something else (complement of a precision).

Both are computed over samples whose truth label is set; unlabeled truth
samples (transition gaps, masked spans) are scored nowhere. A rate whose
denominator is zero is undefined: the direct functions raise
UndefinedRate, report assembly records the rate as absent, and averages
skip it rather than counting it as zero.

Raw activity labels can be collapsed into coarser classes through a
GroupingMap before dictionary construction and scoring; the default map
collapses the fifteen recorded activities into five classes.

Window length h is chosen by leave-one-subject-out cross-validation over
the training subjects: for each candidate h, each subject is predicted
from a dictionary pooled over the others, and the candidate with the
best average true prediction rate wins, ties going to the smallest h.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .core import UNLABELED, LabelTimeline, TriaxialSeries
from .errors import (
    InsufficientSubjects,
    InvalidConfig,
    LengthMismatch,
    MoveletsError,
    UndefinedRate,
    UnmappedLabel,
)
from .matching import budget_timeline, build_dictionary, predict_labels

#: Raw activity labels in the recording protocol's order.
RAW_ACTIVITY_LABELS = (
    "lying",
    "standing",
    "washDish",
    "knead",
    "dressing",
    "foldTowel",
    "vacuum",
    "shop",
    "write",
    "dealCards",
    "chairStand",
    "normalWalk",
    "normalWalkNoSwing",
    "fastWalk",
    "fastWalkNoSwing",
)

#: The five coarse classes the raw activities collapse into.
GROUPED_LABELS = ("chairStand", "lying", "standing", "upperBody", "walking")


@dataclass(frozen=True)
class GroupingMap:
    """A total mapping from raw activity labels onto coarser classes."""

    mapping: Mapping[str, str]

    def __post_init__(self):
        m = {str(k): str(v) for k, v in dict(self.mapping).items()}
        if UNLABELED in m:
            raise ValueError("the unlabeled state cannot be grouped")
        if UNLABELED in m.values():
            raise ValueError("grouping cannot map an activity to the unlabeled state")
        object.__setattr__(self, "mapping", MappingProxyType(m))

    def apply(self, label: str) -> str:
        if label == UNLABELED:
            return UNLABELED
        try:
            return self.mapping[label]
        except KeyError:
            raise UnmappedLabel(f"label {label!r} is not covered by the grouping map")

    def domain(self) -> tuple[str, ...]:
        return tuple(sorted(self.mapping))

    def codomain(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.mapping.values())))


DEFAULT_GROUPING = GroupingMap(
    {
        "lying": "lying",
        "standing": "standing",
        "washDish": "upperBody",
        "knead": "upperBody",
        "dressing": "upperBody",
        "foldTowel": "upperBody",
        "vacuum": "upperBody",
        "shop": "upperBody",
        "write": "upperBody",
        "dealCards": "upperBody",
        "chairStand": "chairStand",
        "normalWalk": "walking",
        "normalWalkNoSwing": "walking",
        "fastWalk": "walking",
        "fastWalkNoSwing": "walking",
    }
)


def group_labels(timeline: LabelTimeline, grouping: GroupingMap) -> LabelTimeline:
    """Collapse every label of a timeline through the grouping map.

    Unlabeled samples stay unlabeled. A label outside the map raises
    UnmappedLabel.
    """
    return LabelTimeline(
        labels=tuple(grouping.apply(x) for x in timeline.labels),
        fs=timeline.fs,
    )


def _scored_mask(truth: LabelTimeline) -> np.ndarray:
    return truth.as_array() != UNLABELED


def _check_pair(pred: LabelTimeline, truth: LabelTimeline) -> None:
    if len(pred) != len(truth):
        raise LengthMismatch(
            f"prediction has {len(pred)} samples but truth has {len(truth)}"
        )


def true_prediction_rate(pred: LabelTimeline, truth: LabelTimeline, activity: str) -> float:
    """Fraction of the activity's truth samples predicted as the activity."""
    _check_pair(pred, truth)
    t = truth.as_array()
    p = pred.as_array()
    in_activity = t == activity
    denom = int(in_activity.sum())
    if denom == 0:
        raise UndefinedRate(f"no truth samples labeled {activity!r}")
    hits = int((p[in_activity] == activity).sum())
    return hits / denom


def false_prediction_rate(pred: LabelTimeline, truth: LabelTimeline, activity: str) -> float:
    """Fraction of the activity's predicted samples that are truly other.

    Only samples with a truth label are counted; predictions on unlabeled
    truth samples are scored nowhere.
    """
    _check_pair(pred, truth)
    t = truth.as_array()
    p = pred.as_array()
    predicted = (p == activity) & _scored_mask(truth)
    denom = int(predicted.sum())
    if denom == 0:
        raise UndefinedRate(f"no scored samples predicted as {activity!r}")
    wrong = int((t[predicted] != activity).sum())
    return wrong / denom


@dataclass(frozen=True)
class ActivityScore:
    """Rates and supports for one (subject, activity) cell.

    ``truth_count`` and ``pred_count`` are the rate denominators; a rate
    is None exactly when its denominator is zero.
    """

    true_rate: float | None
    false_rate: float | None
    truth_count: int
    pred_count: int


@dataclass(frozen=True)
class PredictionReport:
    """Scores for a batch of predicted subjects against truth.

    ``confusion`` is the aggregate count matrix over all scored samples,
    rows indexed by truth label and columns by predicted label in
    ``labels`` order. Mean rates average the defined per-(subject,
    activity) rates without weighting; they are None when no cell
    defines the rate.
    """

    labels: tuple[str, ...]
    subjects: tuple[str, ...]
    scores: Mapping[str, Mapping[str, ActivityScore]]
    confusion: np.ndarray
    mean_true_rate: float | None
    mean_false_rate: float | None

    def __post_init__(self):
        c = np.array(self.confusion, dtype=np.int64)
        a = len(self.labels)
        if c.shape != (a, a):
            raise ValueError(f"confusion must be {a}x{a}, got {c.shape}")
        c.flags.writeable = False
        object.__setattr__(self, "confusion", c)
        object.__setattr__(
            self,
            "scores",
            MappingProxyType(
                {s: MappingProxyType(dict(v)) for s, v in dict(self.scores).items()}
            ),
        )


def confusion_matrix(
    pred: LabelTimeline, truth: LabelTimeline, labels: Sequence[str]
) -> np.ndarray:
    """Count matrix over scored samples, truth rows by prediction columns.

    Every scored sample (truth label set) must carry truth and predicted
    labels from ``labels``; anything else raises UnmappedLabel. Row sums
    therefore equal per-activity truth sample counts.
    """
    _check_pair(pred, truth)
    label_list = list(labels)
    index = {lbl: i for i, lbl in enumerate(label_list)}
    t = truth.as_array()
    p = pred.as_array()
    scored = _scored_mask(truth)
    out = np.zeros((len(label_list), len(label_list)), dtype=np.int64)
    for ti, pi in zip(t[scored], p[scored]):
        if ti not in index:
            raise UnmappedLabel(f"truth label {ti!r} is outside the scored label set")
        if pi not in index:
            raise UnmappedLabel(
                f"predicted label {pi!r} is outside the scored label set"
            )
        out[index[ti], index[pi]] += 1
    return out


def rates_from_confusion(
    confusion: np.ndarray, labels: Sequence[str]
) -> dict[str, ActivityScore]:
    """Per-activity rates recomputed from a confusion matrix's counts."""
    c = np.asarray(confusion, dtype=np.int64)
    out: dict[str, ActivityScore] = {}
    for i, label in enumerate(labels):
        truth_count = int(c[i].sum())
        pred_count = int(c[:, i].sum())
        true_rate = int(c[i, i]) / truth_count if truth_count else None
        false_rate = (pred_count - int(c[i, i])) / pred_count if pred_count else None
        out[label] = ActivityScore(
            true_rate=true_rate,
            false_rate=false_rate,
            truth_count=truth_count,
            pred_count=pred_count,
        )
    return out


def evaluate_predictions(
    results: Sequence[tuple[str, LabelTimeline, LabelTimeline]],
    labels: Sequence[str] | None = None,
) -> PredictionReport:
    """Score (subject_id, predicted, truth) triples into one report.

    ``labels`` fixes the activity set and its order; by default it is the
    sorted union of labels observed in the scored samples. Per-cell rates
    come from per-subject confusion counts, so they agree exactly with
    the direct counting definitions.
    """
    if not results:
        raise ValueError("evaluate_predictions needs at least one subject")
    if labels is None:
        observed: set[str] = set()
        for _, pred, truth in results:
            scored = _scored_mask(truth)
            observed.update(truth.as_array()[scored])
            observed.update(pred.as_array()[scored])
        observed.discard(UNLABELED)
        label_list = sorted(str(lbl) for lbl in observed)
    else:
        label_list = [str(lbl) for lbl in labels]

    subjects = []
    scores: dict[str, dict[str, ActivityScore]] = {}
    total = np.zeros((len(label_list), len(label_list)), dtype=np.int64)
    for subject_id, pred, truth in results:
        if subject_id in scores:
            raise ValueError(f"duplicate subject id {subject_id!r}")
        c = confusion_matrix(pred, truth, label_list)
        subjects.append(subject_id)
        scores[subject_id] = rates_from_confusion(c, label_list)
        total += c

    true_rates = [
        s.true_rate for per in scores.values() for s in per.values()
        if s.true_rate is not None
    ]
    false_rates = [
        s.false_rate for per in scores.values() for s in per.values()
        if s.false_rate is not None
    ]
    return PredictionReport(
        labels=tuple(label_list),
        subjects=tuple(subjects),
        scores=scores,
        confusion=total,
        mean_true_rate=sum(true_rates) / len(true_rates) if true_rates else None,
        mean_false_rate=sum(false_rates) / len(false_rates) if false_rates else None,
    )


@dataclass(frozen=True)
class HSelectionResult:
    """Outcome of the leave-one-subject-out window-length sweep.

    ``mean_true_rates[i]`` is the average true prediction rate over all
    (held-out subject, activity) cells for ``candidates[i]``, or None if
    every fold of that candidate failed. ``skipped`` records
    (candidate_h, subject_id, reason) for folds that errored.
    """

    candidates: tuple[float, ...]
    mean_true_rates: tuple[float | None, ...]
    chosen_h: float
    skipped: tuple[tuple[float, str, str], ...] = ()


def loso_select_h(
    training: Sequence[tuple[TriaxialSeries, LabelTimeline, str]],
    candidates: Sequence[float],
    *,
    stride: int = 1,
    budget_seconds: float | None = None,
    budget_overrides: Mapping[str, float] | None = None,
    num_threads: int | None = None,
) -> HSelectionResult:
    """Choose h by leave-one-subject-out cross-validation.

    For each candidate h and each training subject, a dictionary is
    pooled from the other subjects (their timelines first trimmed by the
    training budget) and the held-out subject's series is predicted and
    scored against its own labels. The candidate maximizing the mean
    true prediction rate wins; ties break toward the smallest h. A fold
    that raises a domain error is skipped with a warning and recorded.
    """
    recordings = list(training)
    if len(recordings) < 2:
        raise InsufficientSubjects(
            f"leave-one-subject-out needs at least 2 subjects, got {len(recordings)}"
        )
    cands = [float(h) for h in candidates]
    if not cands:
        raise InvalidConfig("candidate list for h selection is empty")
    if any(h <= 0 for h in cands):
        raise InvalidConfig(f"candidate h values must be positive: {cands}")

    budgeted = [
        (series, budget_timeline(timeline, budget_seconds, overrides=budget_overrides))
        for series, timeline, _ in recordings
    ]

    means: list[float | None] = []
    skipped: list[tuple[float, str, str]] = []
    for h in cands:
        cell_rates: list[float] = []
        for i, (series_i, timeline_i, subject_i) in enumerate(recordings):
            pool = [
                (budgeted[j][0], budgeted[j][1], recordings[j][2])
                for j in range(len(recordings))
                if j != i
            ]
            try:
                dictionary = build_dictionary(pool, h, stride=stride)
                pred = predict_labels(series_i, dictionary, num_threads=num_threads)
            except MoveletsError as exc:
                warnings.warn(
                    f"h={h}: fold holding out {subject_i!r} skipped: {exc}",
                    stacklevel=2,
                )
                skipped.append((h, subject_i, f"{type(exc).__name__}: {exc}"))
                continue
            report = evaluate_predictions([(subject_i, pred, timeline_i)])
            cell_rates.extend(
                s.true_rate
                for per in report.scores.values()
                for s in per.values()
                if s.true_rate is not None
            )
        means.append(sum(cell_rates) / len(cell_rates) if cell_rates else None)

    defined = [(m, h) for m, h in zip(means, cands) if m is not None]
    if not defined:
        raise InvalidConfig("every fold of every candidate failed; nothing to choose")
    best_mean = max(m for m, _ in defined)
    chosen = min(h for m, h in defined if m == best_mean)
    return HSelectionResult(
        candidates=tuple(cands),
        mean_true_rates=tuple(means),
        chosen_h=chosen,
        skipped=tuple(skipped),
    )
