import json

import numpy as np
import pytest

from movelets import (
    DEFAULT_GROUPING,
    GroupingMap,
    InvalidConfig,
    LabelTimeline,
    NonUniformIndex,
    ParseError,
    PipelineConfig,
    Segment,
    SubjectConfig,
    TriaxialSeries,
    UNLABELED,
    UnknownLabel,
    bias_test,
    build_dictionary,
    estimate_transform,
    evaluate_predictions,
    generate_subject,
    load_bias_result,
    load_config,
    load_dictionary,
    load_labels,
    load_recording,
    load_report,
    load_selection,
    load_transform,
    loso_select_h,
    parse_grouping,
    save_bias_result,
    save_confusion_csv,
    save_dictionary,
    save_labels,
    save_plot_csv,
    save_recording,
    save_report,
    save_selection,
    save_transform,
)
from movelets.fileio import config_from_dict


@pytest.fixture()
def subject():
    return generate_subject(
        SubjectConfig(
            subject_id="subA",
            seed=31,
            program=(("standing", 2.0), ("normalWalk", 2.0)),
            noise_sigma=0.05,
        )
    )


# --- recordings -----------------------------------------------------------


def test_recording_round_trip_is_bit_exact(tmp_path, subject):
    path = tmp_path / "rec.csv"
    save_recording(path, subject.raw, subject.timeline, subject_id="subA")
    loaded = load_recording(path)
    np.testing.assert_array_equal(loaded.series.samples, subject.raw.samples)
    assert loaded.timeline == subject.timeline
    assert loaded.subject_id == "subA"
    assert loaded.series.fs == subject.raw.fs
    assert loaded.label_set == subject.timeline.label_set()
    # serialization is deterministic: saving the load reproduces the bytes
    again = tmp_path / "rec2.csv"
    save_recording(again, loaded.series, loaded.timeline, subject_id=loaded.subject_id)
    assert path.read_bytes() == again.read_bytes()


def test_recording_without_labels(tmp_path, subject):
    path = tmp_path / "plain.csv"
    save_recording(path, subject.raw, subject_id="subA")
    loaded = load_recording(path)
    assert loaded.label_set is None
    assert set(loaded.timeline.labels) == {UNLABELED}
    np.testing.assert_array_equal(loaded.series.samples, subject.raw.samples)


def test_recording_three_rows(tmp_path):
    path = tmp_path / "tiny.csv"
    path.write_text(
        "# movelets-recording v1\n"
        "# subject=t\n"
        "# fs=80.0\n"
        "# axes=up-down,forward-backward,left-right\n"
        "sample_index,x1,x2,x3\n"
        "0,-1.0,0.0,0.0\n"
        "1,-0.9,0.1,0.0\n"
        "2,-1.1,-0.1,0.0\n"
    )
    loaded = load_recording(path)
    assert len(loaded.series) == 3
    assert loaded.series.samples[1, 1] == 0.1


def test_recording_strict_label_checking(tmp_path):
    path = tmp_path / "bad_label.csv"
    path.write_text(
        "# movelets-recording v1\n"
        "# subject=t\n"
        "# fs=80.0\n"
        "# axes=up-down,forward-backward,left-right\n"
        "# labels=standing\n"
        "sample_index,x1,x2,x3,label\n"
        "0,-1.0,0.0,0.0,standing\n"
        "1,-1.0,0.0,0.0,jumping\n"
    )
    with pytest.raises(UnknownLabel) as info:
        load_recording(path, strict=True)
    assert info.value.line == 8
    # lax mode takes the label as written
    assert load_recording(path).timeline.labels[1] == "jumping"


def test_recording_index_must_be_contiguous(tmp_path):
    path = tmp_path / "gap.csv"
    path.write_text(
        "# movelets-recording v1\n"
        "# subject=t\n"
        "# fs=80.0\n"
        "# axes=up-down,forward-backward,left-right\n"
        "sample_index,x1,x2,x3\n"
        "0,-1.0,0.0,0.0\n"
        "2,-1.0,0.0,0.0\n"
    )
    with pytest.raises(NonUniformIndex) as info:
        load_recording(path)
    assert info.value.line == 7


@pytest.mark.parametrize(
    "text,line",
    [
        ("", 1),
        ("not a header\n", 1),
        ("# movelets-labels v1\n", 1),
        (
            "# movelets-recording v1\n# subject=t\n# fs=80.0\n"
            "# axes=up-down,forward-backward,left-right\n"
            "sample_index,x1,x2,x3\n0,-1.0,oops,0.0\n",
            6,
        ),
    ],
)
def test_recording_parse_errors_carry_line(tmp_path, text, line):
    path = tmp_path / "broken.csv"
    path.write_text(text)
    with pytest.raises(ParseError) as info:
        load_recording(path)
    if info.value.line is not None:
        assert info.value.line == line


def test_recording_rejects_missing_metadata(tmp_path):
    path = tmp_path / "nometa.csv"
    path.write_text("# movelets-recording v1\n# fs=80.0\n# axes=a,b,c\nx\n")
    with pytest.raises(ParseError):
        load_recording(path)


# --- labels ---------------------------------------------------------------


def test_labels_round_trip(tmp_path, subject):
    path = tmp_path / "labels.csv"
    save_labels(path, subject.timeline, subject_id="subA")
    timeline, sid = load_labels(path)
    assert timeline == subject.timeline
    assert sid == "subA"


def test_labels_bad_row(tmp_path):
    path = tmp_path / "labels.csv"
    path.write_text("# movelets-labels v1\n# subject=t\n# fs=80.0\nsample_index,label\n0,a\n5,b\n")
    with pytest.raises(NonUniformIndex):
        load_labels(path)


# --- transforms -----------------------------------------------------------


def test_transform_round_trip(tmp_path, subject):
    transform = subject.truth_transform
    path = tmp_path / "t.txt"
    save_transform(path, transform)
    loaded = load_transform(path)
    np.testing.assert_array_equal(loaded.rotation.matrix, transform.rotation.matrix)
    np.testing.assert_array_equal(loaded.bias, transform.bias)


def test_transform_rejects_non_rotation(tmp_path):
    path = tmp_path / "t.txt"
    rows = ["# movelets-transform v1"]
    rows += ["2.0 0.0 0.0", "0.0 1.0 0.0", "0.0 0.0 1.0", "0.0 0.0 0.0"]
    path.write_text("\n".join(rows) + "\n")
    with pytest.raises(ParseError):
        load_transform(path)


def test_transform_needs_twelve_numbers(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text("# movelets-transform v1\n1.0 0.0\n")
    with pytest.raises(ParseError):
        load_transform(path)


# --- dictionaries ---------------------------------------------------------


def test_dictionary_round_trip_is_bit_exact(tmp_path, subject):
    d = build_dictionary(
        [(subject.normalized_truth, subject.timeline, "subA")], 0.25
    )
    path = tmp_path / "dict.npz"
    save_dictionary(path, d)
    loaded = load_dictionary(path)
    np.testing.assert_array_equal(loaded.windows, d.windows)
    assert loaded.labels == d.labels
    assert loaded.subject_ids == d.subject_ids
    assert loaded.start_indices == d.start_indices
    assert loaded.h_seconds == d.h_seconds
    assert loaded.fs == d.fs


def test_dictionary_load_rejects_garbage(tmp_path):
    path = tmp_path / "junk.npz"
    path.write_bytes(b"not an archive")
    with pytest.raises(ParseError):
        load_dictionary(path)


# --- reports and selections -----------------------------------------------


def tl(labels):
    return LabelTimeline(labels=tuple(labels), fs=80.0)


def test_report_round_trip(tmp_path):
    report = evaluate_predictions(
        [
            ("s1", tl(["a", "a", "b"]), tl(["a", "b", "b"])),
            ("s2", tl(["b", "b"]), tl(["b", "b"])),
        ]
    )
    path = tmp_path / "report.json"
    save_report(path, report)
    loaded = load_report(path)
    assert loaded.labels == report.labels
    assert loaded.subjects == report.subjects
    assert loaded.mean_true_rate == report.mean_true_rate
    assert loaded.mean_false_rate == report.mean_false_rate
    np.testing.assert_array_equal(loaded.confusion, report.confusion)
    for sid in report.subjects:
        for label in report.labels:
            assert loaded.scores[sid][label] == report.scores[sid][label]


def test_confusion_csv_content(tmp_path):
    report = evaluate_predictions(
        [("s1", tl(["a", "a", "b"]), tl(["a", "b", "b"]))]
    )
    path = tmp_path / "confusion.csv"
    save_confusion_csv(path, report)
    assert path.read_text() == "truth\\pred,a,b\na,1,0\nb,1,1\n"


def test_selection_round_trip(tmp_path):
    def const(sid):
        return (
            TriaxialSeries(samples=np.tile([1.0, 0.0, 0.0], (60, 1)), fs=80.0),
            tl(["hold"] * 60),
            sid,
        )

    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = loso_select_h([const("s1"), const("s2")], [0.25, 2.0])
    path = tmp_path / "selection.json"
    save_selection(path, result)
    loaded = load_selection(path)
    assert loaded == result
    assert loaded.mean_true_rates[1] is None
    assert loaded.skipped == result.skipped


def test_bias_result_round_trip(tmp_path, rng):
    samples = np.array([-1.0, 0.0, 0.0]) + rng.normal(0.0, 0.05, (100, 3))
    series = TriaxialSeries(samples=samples, fs=80.0)
    result = bias_test(series, Segment(0, 100))
    path = tmp_path / "bias.json"
    save_bias_result(path, result)
    assert load_bias_result(path) == result


def test_json_loaders_reject_wrong_format_tag(tmp_path):
    path = tmp_path / "x.json"
    path.write_text(json.dumps({"format": "something-else"}))
    for loader in (load_report, load_selection, load_bias_result):
        with pytest.raises(ParseError):
            loader(path)


# --- pipeline config ------------------------------------------------------


def test_config_defaults():
    config = PipelineConfig()
    assert config.h_candidates == (0.25, 0.5, 0.75, 1.0, 1.25, 1.5)
    assert config.budget_seconds is None
    assert config.grouping is None
    assert config.alpha == 0.05
    assert config.stride == 1


def test_config_from_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(
        json.dumps(
            {
                "h_candidates": [0.5, 1.0],
                "budget_seconds": 6.0,
                "budget_overrides": {"lying": 12.0},
                "grouping": "default",
                "alpha": 0.01,
            }
        )
    )
    config = load_config(path)
    assert config.h_candidates == (0.5, 1.0)
    assert config.budget_seconds == 6.0
    assert config.budget_overrides == {"lying": 12.0}
    assert config.grouping == DEFAULT_GROUPING
    assert config.alpha == 0.01


def test_config_rejects_unknown_keys():
    with pytest.raises(InvalidConfig):
        config_from_dict({"h_candidates": [0.5], "window": 3})


@pytest.mark.parametrize(
    "payload",
    [
        {"h_candidates": []},
        {"h_candidates": [0.0]},
        {"alpha": 1.5},
        {"alpha": 0.0},
        {"stride": 0},
        {"eps_parallel": -1e-6},
        {"grouping": 42},
        {"h_candidates": ["soon"]},
    ],
)
def test_config_value_validation(payload):
    with pytest.raises(InvalidConfig):
        config_from_dict(payload)


def test_config_file_must_be_object(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("[1, 2, 3]")
    with pytest.raises(InvalidConfig):
        load_config(path)


def test_parse_grouping_forms():
    assert parse_grouping(None) is None
    assert parse_grouping("none") is None
    assert parse_grouping("default") is DEFAULT_GROUPING
    custom = parse_grouping({"x": "y"})
    assert isinstance(custom, GroupingMap)
    assert custom.apply("x") == "y"
    with pytest.raises(InvalidConfig):
        parse_grouping(3.5)


# --- plot export ----------------------------------------------------------


def test_plot_csv_layout(tmp_path, subject):
    path = tmp_path / "plot.csv"
    save_plot_csv(path, subject.raw, subject.timeline, Segment(10, 13))
    lines = path.read_text().splitlines()
    assert lines[0] == "time_s,x1,x2,x3,label"
    assert len(lines) == 4
    first = lines[1].split(",")
    assert float(first[0]) == 10 / subject.raw.fs
    assert float(first[1]) == subject.raw.samples[10, 0]
    assert first[4] == subject.timeline.labels[10]


def test_plot_csv_without_labels(tmp_path, subject):
    path = tmp_path / "plot.csv"
    save_plot_csv(path, subject.raw)
    lines = path.read_text().splitlines()
    assert lines[0] == "time_s,x1,x2,x3"
    assert len(lines) == len(subject.raw) + 1
