"""File formats: recordings, label files, transforms, dictionaries, reports.

All text formats are line-oriented with '#'-prefixed header lines and
LF newlines, so equal inputs serialize to byte-identical files. Floats
are written with repr, which round-trips float64 exactly: for every
format here, load(save(x)) reconstructs x with bit-equal numbers.

Formats
-------
Recording CSV (``movelets-recording v1``)
    Header lines declare subject id, sampling frequency, the fixed axis
    order, and (when labels are present) the declared label set. Data
    rows are ``sample_index,x1,x2,x3[,label]`` with sample indices
    0,1,2,... and an empty label meaning unlabeled.

Labels CSV (``movelets-labels v1``)
    Same shape without the sample columns: ``sample_index,label``.

Transform text (``movelets-transform v1``)
    Twelve decimal numbers: three rows of the rotation matrix followed
    by the bias row, whitespace separated, describing x = R u - b.

Dictionary (NumPy ``.npz`` archive)
    Arrays ``windows`` (M, H, 3), ``labels``, ``subject_ids``,
    ``start_indices`` plus scalar ``h_seconds`` and ``fs``.

Report / selection / bias-test JSON
    Documented dictionaries with a ``format`` tag; see the save
    functions for the exact schemas.

Pipeline config JSON
    Optional keys ``h_candidates``, ``budget_seconds``,
    ``budget_overrides``, ``grouping`` ("default", null, or a raw-to-
    grouped mapping), ``alpha``, ``stride``, ``eps_parallel``. Unknown
    keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .core import UNLABELED, LabelTimeline, Segment, TriaxialSeries
from .errors import (
    InvalidConfig,
    NonUniformIndex,
    ParseError,
    UnknownLabel,
)
from .evaluation import (
    DEFAULT_GROUPING,
    ActivityScore,
    GroupingMap,
    HSelectionResult,
    PredictionReport,
)
from .matching import MoveletDictionary
from .normalize import BiasTestResult, NormalizationTransform, RotationMatrix

AXES = ("up-down", "forward-backward", "left-right")

_RECORDING_TAG = "movelets-recording v1"
_LABELS_TAG = "movelets-labels v1"
_TRANSFORM_TAG = "movelets-transform v1"
_REPORT_TAG = "movelets-report v1"
_SELECTION_TAG = "movelets-selection v1"
_BIAS_TAG = "movelets-bias-test v1"


@dataclass(frozen=True)
class Recording:
    """A parsed recording file: samples, per-sample labels, metadata."""

    series: TriaxialSeries
    timeline: LabelTimeline
    subject_id: str
    label_set: tuple[str, ...] | None = None


def _fmt(x: float) -> str:
    return repr(float(x))


def _parse_float(token: str, line: int, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"line {line}: {what} {token!r} is not a number", line)


def _read_lines(path: str | Path) -> list[str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}")
    return text.splitlines()


def _split_header(
    lines: list[str], expected_tag: str
) -> tuple[dict[str, str], int]:
    """Parse '#' header lines; returns (key -> value, first data line index)."""
    if not lines or not lines[0].startswith("#"):
        raise ParseError(f"line 1: expected '# {expected_tag}' header", 1)
    tag = lines[0].lstrip("#").strip()
    if tag != expected_tag:
        raise ParseError(f"line 1: expected format {expected_tag!r}, got {tag!r}", 1)
    meta: dict[str, str] = {}
    i = 1
    while i < len(lines) and lines[i].startswith("#"):
        body = lines[i].lstrip("#").strip()
        if "=" not in body:
            raise ParseError(f"line {i + 1}: header line without key=value", i + 1)
        key, value = body.split("=", 1)
        meta[key.strip()] = value.strip()
        i += 1
    return meta, i


def _require_meta(meta: dict[str, str], key: str, tag: str) -> str:
    if key not in meta:
        raise ParseError(f"{tag} header is missing {key}=")
    return meta[key]


# --------------------------------------------------------------------------
# recording CSV


def save_recording(
    path: str | Path,
    series: TriaxialSeries,
    timeline: LabelTimeline | None = None,
    *,
    subject_id: str,
    label_set: Sequence[str] | None = None,
) -> None:
    """Write a recording; labels are included when a timeline is given.

    The declared label set defaults to the labels the timeline uses.
    """
    out = [f"# {_RECORDING_TAG}", f"# subject={subject_id}", f"# fs={_fmt(series.fs)}"]
    if series.start_time != 0.0:
        out.append(f"# start_time={_fmt(series.start_time)}")
    out.append(f"# axes={','.join(AXES)}")
    if timeline is not None:
        if len(timeline) != len(series) or timeline.fs != series.fs:
            raise ValueError("timeline does not align with the series")
        declared = tuple(label_set) if label_set is not None else timeline.label_set()
        out.append(f"# labels={','.join(declared)}")
        out.append("sample_index,x1,x2,x3,label")
        for i, (row, lbl) in enumerate(zip(series.samples, timeline.labels)):
            out.append(f"{i},{_fmt(row[0])},{_fmt(row[1])},{_fmt(row[2])},{lbl}")
    else:
        out.append("sample_index,x1,x2,x3")
        for i, row in enumerate(series.samples):
            out.append(f"{i},{_fmt(row[0])},{_fmt(row[1])},{_fmt(row[2])}")
    Path(path).write_text("\n".join(out) + "\n")


def load_recording(path: str | Path, *, strict: bool = False) -> Recording:
    """Parse a recording file.

    In strict mode every row label must belong to the declared label set;
    otherwise labels are taken as written. Sample indices must run
    0,1,2,... or NonUniformIndex is raised with the offending line.
    """
    lines = _read_lines(path)
    meta, start = _split_header(lines, _RECORDING_TAG)
    subject_id = _require_meta(meta, "subject", _RECORDING_TAG)
    fs = _parse_float(_require_meta(meta, "fs", _RECORDING_TAG), start, "fs")
    start_time = float(meta.get("start_time", "0.0"))
    axes = _require_meta(meta, "axes", _RECORDING_TAG)
    if tuple(axes.split(",")) != AXES:
        raise ParseError(f"axes declaration {axes!r} does not match {','.join(AXES)!r}")
    declared: tuple[str, ...] | None = None
    if "labels" in meta:
        declared = tuple(x for x in meta["labels"].split(",") if x != "")

    if start >= len(lines):
        raise ParseError("recording has no column header row")
    columns = lines[start].split(",")
    if columns == ["sample_index", "x1", "x2", "x3", "label"]:
        has_labels = True
    elif columns == ["sample_index", "x1", "x2", "x3"]:
        has_labels = False
    else:
        raise ParseError(
            f"line {start + 1}: unexpected column header {lines[start]!r}", start + 1
        )

    samples: list[tuple[float, float, float]] = []
    labels: list[str] = []
    expected = 5 if has_labels else 4
    for offset, line in enumerate(lines[start + 1:]):
        lineno = start + 2 + offset
        if line == "":
            continue
        parts = line.split(",")
        if len(parts) != expected:
            raise ParseError(
                f"line {lineno}: expected {expected} fields, got {len(parts)}", lineno
            )
        idx = parts[0]
        if idx != str(len(samples)):
            raise NonUniformIndex(
                f"line {lineno}: sample_index {idx!r}, expected {len(samples)}", lineno
            )
        samples.append(
            (
                _parse_float(parts[1], lineno, "x1"),
                _parse_float(parts[2], lineno, "x2"),
                _parse_float(parts[3], lineno, "x3"),
            )
        )
        if has_labels:
            label = parts[4]
            if strict and label != UNLABELED and label not in (declared or ()):
                raise UnknownLabel(
                    f"line {lineno}: label {label!r} not in declared set", lineno
                )
            labels.append(label)
        else:
            labels.append(UNLABELED)

    if not samples:
        raise ParseError("recording contains no samples")
    series = TriaxialSeries(samples=np.array(samples), fs=fs, start_time=start_time)
    timeline = LabelTimeline(labels=tuple(labels), fs=fs)
    return Recording(
        series=series, timeline=timeline, subject_id=subject_id, label_set=declared
    )


# --------------------------------------------------------------------------
# labels CSV


def save_labels(
    path: str | Path, timeline: LabelTimeline, *, subject_id: str
) -> None:
    out = [f"# {_LABELS_TAG}", f"# subject={subject_id}", f"# fs={_fmt(timeline.fs)}"]
    out.append("sample_index,label")
    for i, lbl in enumerate(timeline.labels):
        out.append(f"{i},{lbl}")
    Path(path).write_text("\n".join(out) + "\n")


def load_labels(path: str | Path) -> tuple[LabelTimeline, str]:
    lines = _read_lines(path)
    meta, start = _split_header(lines, _LABELS_TAG)
    subject_id = _require_meta(meta, "subject", _LABELS_TAG)
    fs = _parse_float(_require_meta(meta, "fs", _LABELS_TAG), start, "fs")
    if start >= len(lines) or lines[start] != "sample_index,label":
        raise ParseError(f"line {start + 1}: expected 'sample_index,label'", start + 1)
    labels: list[str] = []
    for offset, line in enumerate(lines[start + 1:]):
        lineno = start + 2 + offset
        if line == "":
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: expected 2 fields", lineno)
        if parts[0] != str(len(labels)):
            raise NonUniformIndex(
                f"line {lineno}: sample_index {parts[0]!r}, expected {len(labels)}",
                lineno,
            )
        labels.append(parts[1])
    if not labels:
        raise ParseError("label file contains no rows")
    return LabelTimeline(labels=tuple(labels), fs=fs), subject_id


# --------------------------------------------------------------------------
# transform text


def save_transform(path: str | Path, transform: NormalizationTransform) -> None:
    m = transform.rotation.matrix
    rows = [" ".join(_fmt(v) for v in row) for row in m]
    rows.append(" ".join(_fmt(v) for v in transform.bias))
    Path(path).write_text(f"# {_TRANSFORM_TAG}\n" + "\n".join(rows) + "\n")


def load_transform(path: str | Path) -> NormalizationTransform:
    lines = _read_lines(path)
    _split_header(lines, _TRANSFORM_TAG)
    values: list[float] = []
    for offset, line in enumerate(lines):
        if line.startswith("#") or line == "":
            continue
        for token in line.split():
            values.append(_parse_float(token, offset + 1, "entry"))
    if len(values) != 12:
        raise ParseError(f"transform needs 12 numbers, found {len(values)}")
    rotation = np.array(values[:9]).reshape(3, 3)
    try:
        return NormalizationTransform(
            rotation=RotationMatrix(rotation), bias=np.array(values[9:])
        )
    except ValueError as exc:
        raise ParseError(f"transform file is not a valid frame correction: {exc}")


# --------------------------------------------------------------------------
# dictionary archive


def save_dictionary(path: str | Path, dictionary: MoveletDictionary) -> None:
    with open(path, "wb") as fh:
        np.savez(
            fh,
            windows=dictionary.windows,
            labels=np.array(dictionary.labels, dtype=np.str_),
            subject_ids=np.array(dictionary.subject_ids, dtype=np.str_),
            start_indices=np.array(dictionary.start_indices, dtype=np.int64),
            h_seconds=np.float64(dictionary.h_seconds),
            fs=np.float64(dictionary.fs),
        )


def load_dictionary(path: str | Path) -> MoveletDictionary:
    try:
        with np.load(path, allow_pickle=False) as data:
            return MoveletDictionary(
                h_seconds=float(data["h_seconds"]),
                fs=float(data["fs"]),
                windows=data["windows"],
                labels=tuple(str(x) for x in data["labels"]),
                subject_ids=tuple(str(x) for x in data["subject_ids"]),
                start_indices=tuple(int(x) for x in data["start_indices"]),
            )
    except (OSError, KeyError, ValueError) as exc:
        raise ParseError(f"cannot load dictionary from {path}: {exc}")


# --------------------------------------------------------------------------
# JSON reports


def _write_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def _load_json(path: str | Path, tag: str) -> dict:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read {path}: {exc}")
    if not isinstance(payload, dict) or payload.get("format") != tag:
        raise ParseError(f"{path} is not a {tag!r} file")
    return payload


def report_to_dict(report: PredictionReport) -> dict:
    return {
        "format": _REPORT_TAG,
        "labels": list(report.labels),
        "subjects": list(report.subjects),
        "scores": {
            subject: {
                label: {
                    "true_rate": score.true_rate,
                    "false_rate": score.false_rate,
                    "truth_count": score.truth_count,
                    "pred_count": score.pred_count,
                }
                for label, score in per.items()
            }
            for subject, per in report.scores.items()
        },
        "confusion": report.confusion.tolist(),
        "mean_true_rate": report.mean_true_rate,
        "mean_false_rate": report.mean_false_rate,
    }


def save_report(path: str | Path, report: PredictionReport) -> None:
    _write_json(path, report_to_dict(report))


def load_report(path: str | Path) -> PredictionReport:
    payload = _load_json(path, _REPORT_TAG)
    try:
        scores = {
            subject: {
                label: ActivityScore(
                    true_rate=cell["true_rate"],
                    false_rate=cell["false_rate"],
                    truth_count=int(cell["truth_count"]),
                    pred_count=int(cell["pred_count"]),
                )
                for label, cell in per.items()
            }
            for subject, per in payload["scores"].items()
        }
        return PredictionReport(
            labels=tuple(payload["labels"]),
            subjects=tuple(payload["subjects"]),
            scores=scores,
            confusion=np.array(payload["confusion"], dtype=np.int64),
            mean_true_rate=payload["mean_true_rate"],
            mean_false_rate=payload["mean_false_rate"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed report file {path}: {exc}")


def save_confusion_csv(path: str | Path, report: PredictionReport) -> None:
    """Confusion matrix as CSV: truth labels down, predictions across."""
    out = ["truth\\pred," + ",".join(report.labels)]
    for label, row in zip(report.labels, report.confusion):
        out.append(label + "," + ",".join(str(int(v)) for v in row))
    Path(path).write_text("\n".join(out) + "\n")


def selection_to_dict(result: HSelectionResult) -> dict:
    return {
        "format": _SELECTION_TAG,
        "candidates": list(result.candidates),
        "mean_true_rates": list(result.mean_true_rates),
        "chosen_h": result.chosen_h,
        "skipped": [
            {"h": h, "subject": subject, "reason": reason}
            for h, subject, reason in result.skipped
        ],
    }


def save_selection(path: str | Path, result: HSelectionResult) -> None:
    _write_json(path, selection_to_dict(result))


def load_selection(path: str | Path) -> HSelectionResult:
    payload = _load_json(path, _SELECTION_TAG)
    try:
        return HSelectionResult(
            candidates=tuple(float(h) for h in payload["candidates"]),
            mean_true_rates=tuple(
                None if m is None else float(m) for m in payload["mean_true_rates"]
            ),
            chosen_h=float(payload["chosen_h"]),
            skipped=tuple(
                (float(s["h"]), str(s["subject"]), str(s["reason"]))
                for s in payload["skipped"]
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed selection file {path}: {exc}")


def bias_result_to_dict(result: BiasTestResult) -> dict:
    return {
        "format": _BIAS_TAG,
        "statistic": result.statistic,
        "n": result.n,
        "mean_norm_sq": result.mean_norm_sq,
        "sigma_op_norm": result.sigma_op_norm,
        "alpha": result.alpha,
        "critical_value": result.critical_value,
        "rejected": result.rejected,
    }


def save_bias_result(path: str | Path, result: BiasTestResult) -> None:
    _write_json(path, bias_result_to_dict(result))


def load_bias_result(path: str | Path) -> BiasTestResult:
    payload = _load_json(path, _BIAS_TAG)
    try:
        return BiasTestResult(
            statistic=float(payload["statistic"]),
            n=int(payload["n"]),
            mean_norm_sq=float(payload["mean_norm_sq"]),
            sigma_op_norm=float(payload["sigma_op_norm"]),
            alpha=float(payload["alpha"]),
            critical_value=float(payload["critical_value"]),
            rejected=bool(payload["rejected"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed bias-test file {path}: {exc}")


# --------------------------------------------------------------------------
# pipeline config


@dataclass(frozen=True)
class PipelineConfig:
    """Defaults for the experiment-shaped CLI commands."""

    h_candidates: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5)
    budget_seconds: float | None = None
    budget_overrides: Mapping[str, float] = MappingProxyType({})
    grouping: GroupingMap | None = None
    alpha: float = 0.05
    stride: int = 1
    eps_parallel: float = 1e-6

    def __post_init__(self):
        object.__setattr__(
            self,
            "budget_overrides",
            MappingProxyType(dict(self.budget_overrides)),
        )


_CONFIG_KEYS = {
    "h_candidates",
    "budget_seconds",
    "budget_overrides",
    "grouping",
    "alpha",
    "stride",
    "eps_parallel",
}


def parse_grouping(value) -> GroupingMap | None:
    """Interpret a config/CLI grouping value.

    "default" selects the built-in raw-to-grouped map, None/"none"
    disables grouping, and a mapping becomes a custom GroupingMap.
    """
    if value is None or value == "none":
        return None
    if value == "default":
        return DEFAULT_GROUPING
    if isinstance(value, Mapping):
        return GroupingMap(value)
    raise InvalidConfig(f"grouping must be 'default', 'none', or a mapping: {value!r}")


def config_from_dict(payload: Mapping) -> PipelineConfig:
    unknown = set(payload) - _CONFIG_KEYS
    if unknown:
        raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
    try:
        defaults = PipelineConfig()
        candidates = tuple(
            float(h) for h in payload.get("h_candidates", defaults.h_candidates)
        )
        if not candidates or any(h <= 0 for h in candidates):
            raise InvalidConfig(f"h_candidates must be positive: {candidates}")
        budget = payload.get("budget_seconds", defaults.budget_seconds)
        overrides = {
            str(k): float(v) for k, v in payload.get("budget_overrides", {}).items()
        }
        alpha = float(payload.get("alpha", defaults.alpha))
        if not (0.0 < alpha < 1.0):
            raise InvalidConfig(f"alpha must lie in (0, 1), got {alpha}")
        stride = int(payload.get("stride", defaults.stride))
        if stride < 1:
            raise InvalidConfig(f"stride must be >= 1, got {stride}")
        eps = float(payload.get("eps_parallel", defaults.eps_parallel))
        if eps <= 0:
            raise InvalidConfig(f"eps_parallel must be positive, got {eps}")
        return PipelineConfig(
            h_candidates=candidates,
            budget_seconds=None if budget is None else float(budget),
            budget_overrides=overrides,
            grouping=parse_grouping(payload.get("grouping", defaults.grouping)),
            alpha=alpha,
            stride=stride,
            eps_parallel=eps,
        )
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"malformed config value: {exc}")


def load_config(path: str | Path) -> PipelineConfig:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}")
    if not isinstance(payload, Mapping):
        raise InvalidConfig(f"config {path} must be a JSON object")
    return config_from_dict(payload)


# --------------------------------------------------------------------------
# plotting export


def save_plot_csv(
    path: str | Path,
    series: TriaxialSeries,
    timeline: LabelTimeline | None = None,
    segment: Segment | None = None,
) -> None:
    """Per-axis time/value CSV for external plotting tools.

    Columns are time in seconds and the three axes, plus the label column
    when a timeline is supplied. ``segment`` restricts the sample range.
    """
    lo, hi = 0, len(series)
    if segment is not None:
        lo, hi = segment.start, min(segment.end, hi)
    header = "time_s,x1,x2,x3" + (",label" if timeline is not None else "")
    out = [header]
    for k in range(lo, hi):
        t = series.start_time + k / series.fs
        row = f"{_fmt(t)},{_fmt(series.samples[k, 0])},{_fmt(series.samples[k, 1])},{_fmt(series.samples[k, 2])}"
        if timeline is not None:
            row += f",{timeline.labels[k]}"
        out.append(row)
    Path(path).write_text("\n".join(out) + "\n")
