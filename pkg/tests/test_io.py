import json

import numpy as np
import pytest

from gaitrehab.errors import ParseError, SchemaError, ValidationError
from gaitrehab.io import (
    CSV_HEADER, load_manifest, load_trial, read_sidecar, save_trial, sidecar_path_for, trial_to_csv,
)
from gaitrehab.model import Group, Placement
from gaitrehab.synthetic import GaitProfile, fixture_plans, generate_trial, write_cohort


@pytest.fixture(scope="module")
def small_trial():
    prof = GaitProfile(group=Group.Patient, recovery_day=30, seed=3)
    return generate_trial(prof, duration=3.0, trial_id="P01_T1")[0]


def test_round_trip_exact(tmp_path, small_trial):
    side = save_trial(small_trial, tmp_path / "P01_T1.csv")
    assert side == sidecar_path_for(tmp_path / "P01_T1.csv")
    back = load_trial(tmp_path / "P01_T1.csv")
    assert back == small_trial
    assert back.trial_id == "P01_T1"
    assert back.subject.days_post_op == 30


def test_csv_layout(small_trial):
    lines = trial_to_csv(small_trial).splitlines()
    assert lines[0].split(",") == CSV_HEADER
    assert len(lines) == 1 + 7 * len(small_trial)
    assert lines[1].split(",")[1] == "LeftFoot"


def test_shuffled_rows_still_load(tmp_path, small_trial):
    text = trial_to_csv(small_trial).splitlines()
    body = text[1:]
    rng = np.random.default_rng(0)
    rng.shuffle(body)
    # rows of one placement must stay in time order; sort them back per placement
    body.sort(key=lambda ln: (ln.split(",")[1], float(ln.split(",")[0])))
    save_trial(small_trial, tmp_path / "a.csv")
    (tmp_path / "a.csv").write_text("\n".join([text[0]] + body) + "\n")
    assert load_trial(tmp_path / "a.csv") == small_trial


def _corrupt(tmp_path, small_trial, fn):
    save_trial(small_trial, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    (tmp_path / "t.csv").write_text("\n".join(fn(lines)) + "\n")
    return tmp_path / "t.csv"


def test_bad_header(tmp_path, small_trial):
    path = _corrupt(tmp_path, small_trial, lambda ls: ["time,where"] + ls[1:])
    with pytest.raises(SchemaError, match="header"):
        load_trial(path)


def test_non_numeric_reports_line(tmp_path, small_trial):
    def fn(ls):
        ls[5] = ls[5].replace(ls[5].split(",")[3], "abc", 1)
        return ls
    with pytest.raises(ParseError, match=":6:"):
        load_trial(_corrupt(tmp_path, small_trial, fn))


def test_unknown_placement(tmp_path, small_trial):
    def fn(ls):
        parts = ls[3].split(",")
        parts[1] = "Head"
        ls[3] = ",".join(parts)
        return ls
    with pytest.raises(SchemaError, match="Head"):
        load_trial(_corrupt(tmp_path, small_trial, fn))


def test_missing_placement(tmp_path, small_trial):
    path = _corrupt(tmp_path, small_trial, lambda ls: [ln for ln in ls if ",Pelvis," not in ln])
    with pytest.raises(SchemaError, match="Pelvis"):
        load_trial(path)


def test_wrong_field_count(tmp_path, small_trial):
    def fn(ls):
        ls[2] += ",1.0"
        return ls
    with pytest.raises(ParseError, match="fields"):
        load_trial(_corrupt(tmp_path, small_trial, fn))


def test_nan_rejected(tmp_path, small_trial):
    def fn(ls):
        parts = ls[10].split(",")
        parts[5] = "nan"
        ls[10] = ",".join(parts)
        return ls
    with pytest.raises(ValidationError, match="non-finite"):
        load_trial(_corrupt(tmp_path, small_trial, fn))


def test_sidecar_schema(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"subject_id": "X", "group": "control"}))
    with pytest.raises(SchemaError, match="missing"):
        read_sidecar(p)
    p.write_text("{not json")
    with pytest.raises(ParseError):
        read_sidecar(p)
    p.write_text(json.dumps({"subject_id": "X", "group": "patient", "age": 60, "weight_kg": 70,
                             "sample_rate_hz": 100, "calibration_window": [0, 1]}))
    with pytest.raises(SchemaError, match="days_post_op"):
        read_sidecar(p)


def test_manifest_round_trip_and_validation(tmp_path):
    plans = fixture_plans("easy", 0, n_patients=3, n_controls=3, n_test_patients=1, n_test_controls=1,
                          trials_per_subject=2)
    manifest, path = write_cohort(tmp_path, plans, duration=3.0)
    back = load_manifest(path)
    assert [e.trial for e in back] == [e.trial for e in manifest]
    assert [e.split for e in back] == ["train"] * 4 + ["test"] * 2 + ["train"] * 4 + ["test"] * 2
    back.validate()
    raw = json.loads(path.read_text())
    raw[0]["split"] = "validation"
    path.write_text(json.dumps(raw))
    with pytest.raises(SchemaError, match="split"):
        load_manifest(path)
    raw[0]["split"] = "test"
    path.write_text(json.dumps(raw))
    with pytest.raises(SchemaError, match="both splits"):
        load_manifest(path).validate()


def test_placement_column_parsed(tmp_path, small_trial):
    save_trial(small_trial, tmp_path / "x.csv")
    back = load_trial(tmp_path / "x.csv")
    np.testing.assert_array_equal(back.streams[Placement.RightShank].gyro, small_trial.streams[Placement.RightShank].gyro)
