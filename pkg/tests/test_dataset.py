import logging

import numpy as np
import pytest

from lrst.errors import (
    ConfigError,
    DegenerateDesignError,
    DuplicateCellError,
    MissingBaselineError,
    MissingCellError,
    NonFiniteValueError,
    SchemaError,
    UnknownArmLabelError,
)
from lrst.utils.dataset import (
    ColumnSchema,
    DirectionMap,
    TrialDataset,
    changes_from_baseline,
    parse_long_csv,
    write_long_csv,
)
from oracles import random_dataset

HEADER = "subject,arm,visit,outcome,value"


def complete_rows(n_x=2, n_y=2, visits=("13", "26"), outcomes=("A", "B")):
    rows = []
    for s in range(n_x + n_y):
        arm = "control" if s < n_x else "treatment"
        for t, visit in enumerate(visits):
            for k, outcome in enumerate(outcomes):
                rows.append(f"s{s},{arm},{visit},{outcome},{10 * s + 2 * t + k}")
    return rows


def csv_text(rows, header=HEADER):
    return "\n".join([header, *rows]) + "\n"


def test_parse_complete_design(write_csv):
    data = parse_long_csv(write_csv(csv_text(complete_rows())))
    assert (data.n_x, data.n_y, data.n_visits, data.n_outcomes) == (2, 2, 2, 2)
    assert data.visit_labels == ("13", "26")
    assert data.outcome_labels == ("A", "B")
    assert data.subject_ids_x == ("s0", "s1")
    assert data.subject_ids_y == ("s2", "s3")
    assert data.arm_x_values[1, 1, 0] == 12
    assert data.arm_y_values[1, 0, 1] == 31


def test_visits_sorted_numerically(write_csv):
    data = parse_long_csv(write_csv(csv_text(complete_rows(visits=("26", "13", "104")))))
    assert data.visit_labels == ("13", "26", "104")
    # subject s0 at visit 13, outcome A was written with t=1
    assert data.arm_x_values[0, 0, 0] == 2


def test_direction_flips_listed_outcome_only(write_csv):
    data = parse_long_csv(write_csv(csv_text(complete_rows())), direction=DirectionMap.parse("A=-1"))
    assert data.arm_x_values[1, 1, 0] == -12
    assert data.arm_x_values[1, 1, 1] == 13


def test_direction_for_unknown_outcome(write_csv):
    with pytest.raises(SchemaError, match="unknown outcome"):
        parse_long_csv(write_csv(csv_text(complete_rows())), direction=DirectionMap.parse("C=-1"))


@pytest.mark.parametrize("text", ["A=2", "A", "A=minus"])
def test_direction_parse_rejects(text):
    with pytest.raises(ConfigError):
        DirectionMap.parse(text)


def test_missing_cell_names_subject(write_csv):
    rows = complete_rows()[:-1]
    with pytest.raises(MissingCellError) as excinfo:
        parse_long_csv(write_csv(csv_text(rows)))
    assert list(excinfo.value.subjects) == ["s3"]
    assert "s3" in str(excinfo.value)


def test_drop_incomplete(write_csv, caplog):
    rows = complete_rows(n_y=3)[:-1]
    with caplog.at_level(logging.WARNING):
        data = parse_long_csv(write_csv(csv_text(rows)), drop_incomplete=True)
    assert data.n_y == 2
    assert "s4" not in data.subject_ids_y
    assert "Dropping 1 incomplete subject" in caplog.text


def test_duplicate_cell(write_csv):
    rows = complete_rows()
    rows.append(rows[0])
    with pytest.raises(DuplicateCellError, match="line"):
        parse_long_csv(write_csv(csv_text(rows)))


def test_unknown_arm_label(write_csv):
    rows = complete_rows()
    rows[0] = rows[0].replace("control", "placebo")
    with pytest.raises(UnknownArmLabelError, match="placebo"):
        parse_long_csv(write_csv(csv_text(rows)))


def test_subject_in_both_arms(write_csv):
    rows = complete_rows()
    rows[0] = rows[0].replace("control", "treatment")
    with pytest.raises(UnknownArmLabelError, match="both arms"):
        parse_long_csv(write_csv(csv_text(rows)))


@pytest.mark.parametrize("value", ["inf", "-inf", "abc"])
def test_non_finite_value_reports_line(write_csv, value):
    rows = complete_rows()
    rows[0] = rows[0].rsplit(",", 1)[0] + f",{value}"
    with pytest.raises(NonFiniteValueError, match="line"):
        parse_long_csv(write_csv(csv_text(rows)))


@pytest.mark.parametrize("value", ["", "NA", "nan", "N/A"])
def test_blank_value_is_missing_cell(write_csv, caplog, value):
    rows = complete_rows(n_y=3)
    rows[-1] = rows[-1].rsplit(",", 1)[0] + f",{value}"
    path = write_csv(csv_text(rows))
    with pytest.raises(MissingCellError) as excinfo:
        parse_long_csv(path)
    assert list(excinfo.value.subjects) == ["s4"]

    with caplog.at_level(logging.INFO):
        data = parse_long_csv(path, drop_incomplete=True)
    assert data.subject_ids_y == ("s2", "s3")
    assert "line(s) 21" in caplog.text


def test_short_row_is_missing_cell(write_csv):
    rows = complete_rows()
    rows[0] = rows[0].rsplit(",", 1)[0]
    with pytest.raises(MissingCellError):
        parse_long_csv(write_csv(csv_text(rows)))


def test_ragged_csv(write_csv):
    rows = complete_rows()
    rows[1] += ",extra,fields"
    with pytest.raises(SchemaError, match="line 3"):
        parse_long_csv(write_csv(csv_text(rows)))


def test_empty_csv(write_csv):
    with pytest.raises(SchemaError, match="empty"):
        parse_long_csv(write_csv(""))


def test_missing_column(write_csv):
    rows = [row.rsplit(",", 1)[0] for row in complete_rows()]
    with pytest.raises(SchemaError, match="value"):
        parse_long_csv(write_csv(csv_text(rows, header="subject,arm,visit,outcome")))


def test_single_subject_arm_is_degenerate(write_csv):
    with pytest.raises(DegenerateDesignError):
        parse_long_csv(write_csv(csv_text(complete_rows(n_x=1))))


def test_schema_renames(write_csv):
    rows = [row.replace("treatment", "drug").replace("control", "pbo") for row in complete_rows()]
    schema = ColumnSchema.parse(
        "subject=ID,arm=GROUP,visit=week,outcome=scale,value=score", control_label="pbo", treatment_label="drug"
    )
    data = parse_long_csv(write_csv(csv_text(rows, header="ID,GROUP,week,scale,score")), schema=schema)
    assert (data.n_x, data.n_y) == (2, 2)
    assert data.arm_y_values[0, 0, 0] == 20


def test_schema_parse_rejects_unknown_role():
    with pytest.raises(ConfigError, match="unknown schema role"):
        ColumnSchema.parse("patient=ID")


def test_round_trip(tmp_path, rng):
    data = random_dataset(rng, n_x=7, n_y=9, n_visits=4, n_outcomes=3)
    path = write_long_csv(data, str(tmp_path / "trial.csv"))
    parsed = parse_long_csv(path)
    assert parsed.visit_labels == data.visit_labels
    assert parsed.outcome_labels == data.outcome_labels
    np.testing.assert_allclose(parsed.arm_x_values, data.arm_x_values, rtol=1e-14)
    np.testing.assert_allclose(parsed.arm_y_values, data.arm_y_values, rtol=1e-14)


def test_orientation_is_applied_once(tmp_path, write_csv):
    direction = DirectionMap.parse("A=-1,B=+1")
    oriented = parse_long_csv(write_csv(csv_text(complete_rows())), direction=direction)
    path = write_long_csv(oriented, str(tmp_path / "oriented.csv"))
    reparsed = parse_long_csv(path)
    np.testing.assert_array_equal(reparsed.arm_x_values, oriented.arm_x_values)
    np.testing.assert_array_equal(reparsed.arm_y_values, oriented.arm_y_values)


def test_changes_from_baseline():
    raw_x = np.array([[5.0, 7.0, 9.0], [3.0, 3.0, 3.0]]).reshape(2, 3, 1)
    raw_y = np.array([[1.0, 2.0, 4.0], [0.0, -1.0, 1.0]]).reshape(2, 3, 1)
    data = changes_from_baseline(raw_x, raw_y, ["0", "13", "26"], ["score"])
    assert data.visit_labels == ("13", "26")
    np.testing.assert_array_equal(data.arm_x_values[:, :, 0], [[2, 4], [0, 0]])
    np.testing.assert_array_equal(data.arm_y_values[:, :, 0], [[1, 3], [-1, 1]])

    flipped = changes_from_baseline(raw_x, raw_y, ["0", "13", "26"], ["score"], DirectionMap({"score": -1}))
    np.testing.assert_array_equal(flipped.arm_x_values[0, :, 0], [-2, -4])


def test_changes_from_baseline_requires_baseline():
    raw = np.ones((2, 3, 1))
    missing = raw.copy()
    missing[1, 0, 0] = np.nan
    with pytest.raises(MissingBaselineError):
        changes_from_baseline(missing, raw, ["0", "13", "26"], ["score"])
    with pytest.raises(MissingBaselineError):
        changes_from_baseline(raw[:, :1], raw[:, :1], ["0"], ["score"])


def test_parse_raw_scores_with_baseline(write_csv):
    data = parse_long_csv(write_csv(csv_text(complete_rows(visits=("0", "13", "26")))), baseline="0")
    assert data.visit_labels == ("13", "26")
    # value grows by 2 per visit index
    np.testing.assert_array_equal(data.arm_x_values[:, :, 0], [[2, 4], [2, 4]])


def test_parse_baseline_not_in_file(write_csv):
    with pytest.raises(MissingBaselineError, match="'99'"):
        parse_long_csv(write_csv(csv_text(complete_rows())), baseline="99")


def test_parse_subject_without_baseline(write_csv):
    rows = [row for row in complete_rows(visits=("0", "13")) if not row.startswith("s1,control,0,")]
    with pytest.raises(MissingBaselineError, match="s1"):
        parse_long_csv(write_csv(csv_text(rows)), baseline="0")


def test_dataset_validation():
    good = np.zeros((3, 2, 1))
    with pytest.raises(SchemaError):
        TrialDataset(np.zeros((3, 2)), np.zeros((3, 2)), ["1", "2"], ["a"])
    with pytest.raises(SchemaError):
        TrialDataset(good, np.zeros((3, 3, 1)), ["1", "2"], ["a"])
    with pytest.raises(SchemaError):
        TrialDataset(good, good, ["1", "1"], ["a"])
    with pytest.raises(DegenerateDesignError):
        TrialDataset(good[:1], good, ["1", "2"], ["a"])
    bad = good.copy()
    bad[0, 0, 0] = np.inf
    with pytest.raises(NonFiniteValueError):
        TrialDataset(bad, good, ["1", "2"], ["a"])


def test_dataset_helpers(rng):
    data = random_dataset(rng, n_x=3, n_y=5, n_visits=4, n_outcomes=2)
    assert not data.arm_x_values.flags.writeable
    assert data.pooled().shape == (8, 4, 2)
    assert data.ratio == pytest.approx(0.6)

    swapped = data.swap_arms()
    np.testing.assert_array_equal(swapped.arm_x_values, data.arm_y_values)

    last = data.truncate_visits([3])
    assert last.visit_labels == (data.visit_labels[3],)
    np.testing.assert_array_equal(last.arm_y_values[:, 0], data.arm_y_values[:, 3])
