import xml.etree.ElementTree as ET

import numpy as np
import pytest
from scipy import stats

from gaitrehab.dataset import FeatureMatrix
from gaitrehab.errors import DimensionMismatch, InsufficientData, ModelVersionError, ValidationError, ZeroVariance
from gaitrehab.grading import (
    Band, GradeSeries, GradingModel, build_grading, classify_by_grade, correlation_summary, grade, grade_matrix,
    grade_raw, grade_svg, grade_time_correlation, grades_csv, load_grading, per_feature_profile, save_grading,
    series_from_records,
)
from gaitrehab.selection import select_features
from gaitrehab.synthetic import planted_feature_matrix


@pytest.fixture(scope="module")
def train():
    X, labels = planted_feature_matrix(25, 12, {0: 2.5, 3: -2.0, 5: 3.0, 8: 1.5}, seed=4)
    days = [20 + i for i in range(25)] + [None] * 25
    return FeatureMatrix(X * 3 + 1, tuple(f"S{j}_MI" for j in range(12)), labels,
                         [f"P{i}" for i in range(25)] + [f"C{i}" for i in range(25)], days)


@pytest.fixture(scope="module")
def selection(train):
    return select_features(train, k=4)


@pytest.mark.parametrize("scheme", ["SNR", "LDA", "PCA"])
def test_model_properties(train, selection, scheme):
    model = build_grading(selection, train, scheme)
    assert np.linalg.norm(model.weights) == pytest.approx(1.0, abs=1e-12)
    g = grade_raw(model, train.columns(selection.names).X)
    pat = train.is_patient
    assert g[~pat].mean() > g[pat].mean()
    assert (model.g_min, model.g_max) == (g[~pat].min(), g[~pat].max())
    assert model.g_avg == pytest.approx(g[~pat].mean())
    assert all(classify_by_grade(model, v) is Band.Within for v in g[~pat])


def test_snr_weights_are_normalized_snr(train, selection):
    model = build_grading(selection, train, "SNR")
    np.testing.assert_allclose(model.weights, selection.snr / np.linalg.norm(selection.snr))


def test_grade_is_weighted_sum(train, selection):
    model = build_grading(selection, train, "LDA")
    z = model.standardizer.transform(train.columns(selection.names).X[7])
    expected = sum(f * w for f, w in zip(z, model.weights))
    assert grade(model, z) == pytest.approx(expected, abs=1e-12)
    assert per_feature_profile(model, z).sum() == pytest.approx(grade(model, z), abs=1e-12)
    with pytest.raises(DimensionMismatch):
        grade(model, z[:3])


def test_band_bounds_inclusive(train, selection):
    model = build_grading(selection, train, "PCA")
    assert classify_by_grade(model, model.g_min) is Band.Within
    assert classify_by_grade(model, model.g_max) is Band.Within
    assert classify_by_grade(model, model.g_min - 1e-9) is Band.Below
    assert classify_by_grade(model, model.g_max + 1e-9) is Band.Above


def test_unknown_scheme(train, selection):
    with pytest.raises(ValueError):
        build_grading(selection, train, "ICA")


def test_correlation_matches_scipy(rng):
    days = np.sort(rng.choice(np.arange(14, 365), 15, replace=False))
    g = 0.01 * days + rng.normal(0, 0.5, 15)
    series = GradeSeries(tuple((f"P{i}", int(d), float(v)) for i, (d, v) in enumerate(zip(days, g))))
    c = grade_time_correlation(series)
    assert c.r == pytest.approx(stats.pearsonr(days, g).statistic, rel=1e-12)
    assert c.spearman == pytest.approx(stats.spearmanr(days, g).statistic, rel=1e-12)
    assert c.n == 15


def test_series_validation():
    with pytest.raises(ValidationError):
        GradeSeries((("P1", 10, 0.0), ("P1", 10, 1.0)))
    with pytest.raises(InsufficientData):
        grade_time_correlation(GradeSeries((("P1", 10, 0.0), ("P2", 20, 1.0))))
    with pytest.raises(ZeroVariance):
        grade_time_correlation(GradeSeries(tuple((f"P{i}", i, 1.0) for i in range(4))))


def test_records_csv_svg(train, selection):
    model = build_grading(selection, train, "SNR")
    records = grade_matrix(model, train)
    text = grades_csv(records)
    lines = text.splitlines()
    assert lines[0] == "subject_id,days_post_op,scheme,G,band"
    assert lines[1].startswith("P0,20,SNR,")
    assert lines[-1].startswith("C24,,SNR,")
    series = series_from_records(records)
    assert len(series.points) == 25
    summary = correlation_summary(records)
    assert summary["n"] == 25
    root = ET.fromstring(grade_svg(records, model))
    circles = root.findall("{http://www.w3.org/2000/svg}circle")
    assert len(circles) == 50
    labels = [t.text for t in root.findall("{http://www.w3.org/2000/svg}text")]
    assert {"G_min", "G_avg", "G_max"} <= set(labels)


def test_correlation_summary_degrades(train, selection):
    model = build_grading(selection, train, "SNR")
    records = [r for r in grade_matrix(model, train) if r.days_post_op is None]
    assert correlation_summary(records)["pearson_r"] is None


def test_persistence(train, selection, tmp_path):
    model = build_grading(selection, train, "LDA")
    save_grading(model, tmp_path / "g.json")
    back = load_grading(tmp_path / "g.json")
    assert back.names == model.names and back.standardizer == model.standardizer
    np.testing.assert_array_equal(back.weights, model.weights)
    assert (back.g_min, back.g_avg, back.g_max) == (model.g_min, model.g_avg, model.g_max)
    with pytest.raises(ModelVersionError):
        GradingModel.from_dict({**model.to_dict(), "version": 2})
