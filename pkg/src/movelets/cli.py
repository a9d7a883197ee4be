"""Command-line interface.

Each subcommand is a thin adapter: load files, call one library
operation, serialize the result. One command runs per process; there is
no shared state between invocations. Exit codes: 0 on success, 1 on
data/domain errors (a JSON error record goes to stderr), 2 on usage
errors. Set MOVELETS_NUM_THREADS to let prediction fan out over query
blocks; results are identical for any thread count.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import fileio
from .core import Segment
from .errors import MoveletsError, ParseError
from .evaluation import (
    evaluate_predictions,
    group_labels,
    loso_select_h,
)
from .matching import budget_timeline, build_dictionary, predict_labels
from .normalize import (
    EPSILON_PARALLEL,
    apply_transform,
    bias_test,
    calibration_segments,
    estimate_transform,
    labeled_run_segment,
)
from .synth import DEFAULT_PROGRAM, make_corpus


def _domain_errors(fn):
    """Map domain failures onto exit code 1 with a JSON record on stderr."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except MoveletsError as exc:
            record = {"error": type(exc).__name__, "message": str(exc)}
            if isinstance(exc, ParseError) and exc.line is not None:
                record["line"] = exc.line
            click.echo(json.dumps(record), err=True)
            sys.exit(1)

    return wrapper


def _parse_segment(value: str) -> Segment:
    try:
        start, end = value.split(":")
        return Segment(start=int(start), end=int(end))
    except ValueError as exc:
        raise click.BadParameter(f"expected START:END sample indices, got {value!r}") from exc


def _parse_grouping_option(value: str | None):
    if value is None or value in ("default", "none"):
        return fileio.parse_grouping(value)
    path = Path(value)
    if not path.exists():
        raise click.BadParameter(
            f"grouping must be 'default', 'none', or a JSON map file; {value!r} not found"
        )
    try:
        return fileio.parse_grouping(json.loads(path.read_text()))
    except json.JSONDecodeError as exc:
        raise click.BadParameter(f"grouping file {value!r} is not valid JSON: {exc}")


def _parse_budget_overrides(pairs: tuple[str, ...]) -> dict[str, float]:
    out: dict[str, float] = {}
    for pair in pairs:
        if "=" not in pair:
            raise click.BadParameter(f"expected LABEL=SECONDS, got {pair!r}")
        label, _, seconds = pair.partition("=")
        try:
            out[label] = float(seconds)
        except ValueError:
            raise click.BadParameter(f"budget for {label!r} is not a number: {seconds!r}")
    return out


def _extended_grouping(grouping):
    # predictions may already use grouped labels; let them pass through
    if grouping is None:
        return None
    from .evaluation import GroupingMap

    extended = dict(grouping.mapping)
    for target in grouping.codomain():
        extended.setdefault(target, target)
    return GroupingMap(extended)


@click.group()
def main():
    """Accelerometer normalization and movelet-based activity prediction."""


@main.command()
@click.option("--subjects", type=int, required=True, help="Number of subjects to generate.")
@click.option("--seed", type=int, default=0, show_default=True, help="Corpus seed.")
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option("--fs", type=float, default=80.0, show_default=True)
@click.option("--noise-sigma", type=float, default=0.05, show_default=True)
@click.option("--bias-max", type=float, default=0.06, show_default=True)
@click.option("--gap-seconds", type=float, default=1.0, show_default=True)
@click.option(
    "--program",
    type=str,
    default=None,
    help="Activity program as LABEL:SECONDS,LABEL:SECONDS,... "
    "(default: the built-in six-activity program).",
)
@_domain_errors
def synth(subjects, seed, out_dir, fs, noise_sigma, bias_max, gap_seconds, program):
    """Generate a labeled synthetic corpus with known ground truth.

    Writes one recording CSV per subject plus the true normalization
    transform alongside it, and a manifest of everything written.
    """
    if program is None:
        parsed_program = DEFAULT_PROGRAM
    else:
        items = []
        for chunk in program.split(","):
            label, _, seconds = chunk.partition(":")
            try:
                items.append((label, float(seconds)))
            except ValueError:
                raise click.BadParameter(f"bad program entry {chunk!r}")
        parsed_program = tuple(items)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = make_corpus(
        subjects,
        seed,
        program=parsed_program,
        fs=fs,
        noise_sigma=noise_sigma,
        bias_max=bias_max,
        gap_seconds=gap_seconds,
    )
    manifest = {"seed": seed, "subjects": []}
    for subject in corpus:
        sid = subject.config.subject_id
        recording_path = out / f"{sid}.csv"
        transform_path = out / f"{sid}.transform.txt"
        fileio.save_recording(
            recording_path, subject.raw, subject.timeline, subject_id=sid
        )
        fileio.save_transform(transform_path, subject.truth_transform)
        manifest["subjects"].append(
            {
                "subject": sid,
                "recording": str(recording_path),
                "truth_transform": str(transform_path),
            }
        )
    click.echo(json.dumps(manifest, indent=2))


@main.command()
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--standing", type=str, default=None, help="Standing segment START:END.")
@click.option("--lying", type=str, default=None, help="Lying segment START:END.")
@click.option(
    "--calib-seconds",
    type=float,
    default=3.0,
    show_default=True,
    help="Length of auto-located calibration segments.",
)
@click.option("--settle-seconds", type=float, default=0.0, show_default=True)
@click.option("--transform-out", type=click.Path(dir_okay=False), default=None)
@click.option(
    "--apply-transform",
    "transform_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Skip estimation and apply this transform file instead.",
)
@click.option("--eps-parallel", type=float, default=EPSILON_PARALLEL, show_default=True)
@_domain_errors
def normalize(
    input_path,
    out_path,
    standing,
    lying,
    calib_seconds,
    settle_seconds,
    transform_out,
    transform_path,
    eps_parallel,
):
    """Estimate (or apply) a frame correction and write the normalized recording.

    Without explicit --standing/--lying segments the calibration segments
    are located from the recording's own labels.
    """
    recording = fileio.load_recording(input_path)
    if transform_path is not None:
        if standing is not None or lying is not None:
            raise click.UsageError("--apply-transform excludes --standing/--lying")
        transform = fileio.load_transform(transform_path)
    else:
        if (standing is None) != (lying is None):
            raise click.UsageError("--standing and --lying must be given together")
        if standing is not None:
            standing_seg = _parse_segment(standing)
            lying_seg = _parse_segment(lying)
        else:
            standing_seg, lying_seg = calibration_segments(
                recording.timeline,
                seconds=calib_seconds,
                settle_seconds=settle_seconds,
            )
        transform = estimate_transform(
            recording.series, standing_seg, lying_seg, eps_parallel=eps_parallel
        )

    normalized = apply_transform(recording.series, transform)
    fileio.save_recording(
        out_path,
        normalized,
        recording.timeline,
        subject_id=recording.subject_id,
        label_set=recording.label_set,
    )
    if transform_out is not None:
        fileio.save_transform(transform_out, transform)


@main.command(name="bias-test")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--segment", type=str, default=None, help="Resting segment START:END.")
@click.option(
    "--standing-label",
    type=str,
    default="standing",
    show_default=True,
    help="Label used to auto-locate the resting segment when --segment is absent.",
)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@_domain_errors
def bias_test_cmd(input_path, segment, standing_label, alpha, out_path):
    """Test a resting segment for device bias; prints the result as JSON."""
    recording = fileio.load_recording(input_path)
    if segment is not None:
        seg = _parse_segment(segment)
    else:
        seg = labeled_run_segment(recording.timeline, standing_label)
    result = bias_test(recording.series, seg, alpha=alpha)
    payload = fileio.bias_result_to_dict(result)
    click.echo(json.dumps(payload, indent=2))
    if out_path is not None:
        fileio.save_bias_result(out_path, result)


@main.command(name="build-dict")
@click.option(
    "--input",
    "input_paths",
    type=click.Path(exists=True, dir_okay=False),
    multiple=True,
    required=True,
    help="Normalized labeled recording; repeat per subject.",
)
@click.option("--h", "h_seconds", type=float, required=True, help="Window length in seconds.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--stride", type=int, default=1, show_default=True)
@click.option("--budget-seconds", type=float, default=None)
@click.option(
    "--budget",
    "budget_pairs",
    type=str,
    multiple=True,
    help="Per-label training budget LABEL=SECONDS; repeatable.",
)
@click.option(
    "--grouping",
    type=str,
    default=None,
    help="'default', 'none', or a JSON file mapping raw labels to groups.",
)
@click.option("--strict/--no-strict", default=False, help="Enforce declared label sets.")
@_domain_errors
def build_dict(
    input_paths, h_seconds, out_path, stride, budget_seconds, budget_pairs, grouping, strict
):
    """Pool movelets from normalized recordings into a dictionary file."""
    grouping_map = _parse_grouping_option(grouping)
    overrides = _parse_budget_overrides(budget_pairs)
    recordings = []
    for path in input_paths:
        rec = fileio.load_recording(path, strict=strict)
        timeline = rec.timeline
        if grouping_map is not None:
            timeline = group_labels(timeline, grouping_map)
        if budget_seconds is not None or overrides:
            timeline = budget_timeline(timeline, budget_seconds, overrides=overrides)
        recordings.append((rec.series, timeline, rec.subject_id))
    dictionary = build_dictionary(recordings, h_seconds, stride=stride)
    fileio.save_dictionary(out_path, dictionary)
    click.echo(
        json.dumps(
            {
                "entries": len(dictionary),
                "window_samples": dictionary.window_length,
                "labels": list(dictionary.label_set()),
                "subjects": sorted(set(dictionary.subject_ids)),
            }
        )
    )


@main.command()
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--dict", "dict_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@_domain_errors
def predict(input_path, dict_path, out_path):
    """Label every sample of a normalized recording from a dictionary."""
    recording = fileio.load_recording(input_path)
    dictionary = fileio.load_dictionary(dict_path)
    labels = predict_labels(recording.series, dictionary)
    fileio.save_labels(out_path, labels, subject_id=recording.subject_id)


@main.command()
@click.option(
    "--pred",
    "pred_paths",
    type=click.Path(exists=True, dir_okay=False),
    multiple=True,
    required=True,
    help="Predicted labels CSV; repeat per subject, paired with --truth in order.",
)
@click.option(
    "--truth",
    "truth_paths",
    type=click.Path(exists=True, dir_okay=False),
    multiple=True,
    required=True,
    help="Truth recording CSV; repeat per subject.",
)
@click.option("--grouping", type=str, default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--confusion-csv", type=click.Path(dir_okay=False), default=None)
@_domain_errors
def evaluate(pred_paths, truth_paths, grouping, out_path, confusion_csv):
    """Score predicted label files against truth recordings."""
    if len(pred_paths) != len(truth_paths):
        raise click.UsageError(
            f"{len(pred_paths)} --pred files but {len(truth_paths)} --truth files"
        )
    grouping_map = _parse_grouping_option(grouping)
    pred_grouping = _extended_grouping(grouping_map)
    triples = []
    for pred_path, truth_path in zip(pred_paths, truth_paths):
        pred, _ = fileio.load_labels(pred_path)
        truth_rec = fileio.load_recording(truth_path)
        truth = truth_rec.timeline
        if grouping_map is not None:
            truth = group_labels(truth, grouping_map)
            pred = group_labels(pred, pred_grouping)
        triples.append((truth_rec.subject_id, pred, truth))
    report = evaluate_predictions(triples)
    fileio.save_report(out_path, report)
    if confusion_csv is not None:
        fileio.save_confusion_csv(confusion_csv, report)
    click.echo(
        json.dumps(
            {
                "mean_true_rate": report.mean_true_rate,
                "mean_false_rate": report.mean_false_rate,
                "subjects": list(report.subjects),
            }
        )
    )


@main.command(name="select-h")
@click.option(
    "--input",
    "input_paths",
    type=click.Path(exists=True, dir_okay=False),
    multiple=True,
    required=True,
    help="Normalized labeled training recording; repeat per subject.",
)
@click.option(
    "--candidates",
    type=str,
    default="0.25,0.5,0.75,1.0,1.25,1.5",
    show_default=True,
    help="Comma-separated window lengths in seconds.",
)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--stride", type=int, default=1, show_default=True)
@click.option("--budget-seconds", type=float, default=None)
@click.option("--budget", "budget_pairs", type=str, multiple=True)
@click.option("--grouping", type=str, default=None)
@_domain_errors
def select_h(input_paths, candidates, out_path, stride, budget_seconds, budget_pairs, grouping):
    """Choose the movelet window length by leave-one-subject-out folds."""
    try:
        cands = [float(x) for x in candidates.split(",") if x != ""]
    except ValueError:
        raise click.BadParameter(f"bad candidate list {candidates!r}")
    grouping_map = _parse_grouping_option(grouping)
    overrides = _parse_budget_overrides(budget_pairs)
    training = []
    for path in input_paths:
        rec = fileio.load_recording(path)
        timeline = rec.timeline
        if grouping_map is not None:
            timeline = group_labels(timeline, grouping_map)
        training.append((rec.series, timeline, rec.subject_id))
    result = loso_select_h(
        training,
        cands,
        stride=stride,
        budget_seconds=budget_seconds,
        budget_overrides=overrides,
    )
    fileio.save_selection(out_path, result)
    click.echo(json.dumps(fileio.selection_to_dict(result), indent=2))


@main.command(name="plot-data")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--from-seconds", type=float, default=None)
@click.option("--to-seconds", type=float, default=None)
@_domain_errors
def plot_data(input_path, out_path, from_seconds, to_seconds):
    """Export a recording as a time/value CSV for external plotting."""
    recording = fileio.load_recording(input_path)
    segment = None
    if from_seconds is not None or to_seconds is not None:
        fs = recording.series.fs
        lo = int(round((from_seconds or 0.0) * fs))
        hi = (
            len(recording.series)
            if to_seconds is None
            else min(len(recording.series), int(round(to_seconds * fs)))
        )
        segment = Segment(start=lo, end=hi)
    has_labels = any(lbl != "" for lbl in recording.timeline.labels)
    fileio.save_plot_csv(
        out_path,
        recording.series,
        recording.timeline if has_labels else None,
        segment,
    )


if __name__ == "__main__":
    main()
