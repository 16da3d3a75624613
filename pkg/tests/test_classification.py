import json
import math

import numpy as np
import pytest
from scipy import linalg, stats

from gaitrehab.classification import (
    EvalReport, LdaModel, classify, components_for, evaluate, format_report, load_model, model_from_dict, model_to_dict,
    models_equal, predict, save_model, train_lda, train_nb, train_pca,
)
from gaitrehab.dataset import FeatureMatrix, Standardizer
from gaitrehab.errors import (
    DegenerateGroups, DimensionMismatch, EmptyTestSet, ModelVersionError, SchemaError,
)
from gaitrehab.model import Group
from gaitrehab.synthetic import planted_feature_matrix


def data(n=25, d=6, seed=0, shift=2.0):
    X, labels = planted_feature_matrix(n, d, {0: shift, 2: -shift, 4: shift}, seed=seed)
    X = X * np.arange(1, d + 1) + 10
    return FeatureMatrix(X, tuple(f"S{j}_MI" for j in range(d)), labels)


def test_lda_matches_generalized_eigenproblem():
    m = data()
    model = train_lda(m)
    Z = model.standardizer.transform(m.X)
    pat = m.is_patient
    mp, mc = Z[pat].mean(0), Z[~pat].mean(0)
    Sw = sum(np.outer(z - mu, z - mu) for z, mu in zip(Z, np.where(pat[:, None], mp, mc)))
    Sb = np.outer(mp - mc, mp - mc)
    _, vecs = linalg.eigh(Sb, Sw)
    w = vecs[:, -1] / np.linalg.norm(vecs[:, -1])
    w *= np.sign(w @ (mp - mc))
    np.testing.assert_allclose(model.w, w, atol=1e-6)
    assert model.b == pytest.approx(0.5 * w @ (mp + mc), abs=1e-6)


def test_pca_matches_svd():
    m = data()
    model = train_pca(m, m=3)
    Z = model.standardizer.transform(m.X)
    D = Z - Z.mean(0)
    _, s, vt = np.linalg.svd(D, full_matrices=False)
    np.testing.assert_allclose(model.eigenvalues, s ** 2 / (len(Z) - 1), rtol=1e-10)
    for a, v in zip(model.axes, vt[:3]):
        assert abs(a @ v) == pytest.approx(1.0, abs=1e-10)
        assert a[np.argmax(np.abs(a))] > 0


def test_components_for():
    assert components_for(np.array([5.0, 3.0, 1.5, 0.5]), 0.95) == 3
    assert components_for(np.array([95.0, 5.0]), 0.95) == 1


def test_nb_matches_scipy_logpdf():
    m = data()
    model = train_nb(m)
    Z = model.standardizer.transform(m.X)
    z = Z[3]
    lp = stats.norm.logpdf(z, model.mean_patient, np.sqrt(model.var_patient)).sum()
    lc = stats.norm.logpdf(z, model.mean_control, np.sqrt(model.var_control)).sum()
    assert model.score(z) == pytest.approx(lp - lc + math.log(0.5 / 0.5), rel=1e-10)


@pytest.mark.parametrize("train", [train_lda, train_pca, train_nb])
def test_separable_data_classified(train):
    m = data(shift=4.0)
    test = data(n=10, seed=9, shift=4.0)
    r = evaluate(train(m), test)
    assert r.accuracy == 1.0 and (r.tp, r.tn) == (10, 10)


def test_tie_goes_to_patient():
    model = LdaModel(("a_MI",), Standardizer((0.0,), (1.0,)), np.array([1.0]), 0.0)
    assert model.score(np.array([0.0])) == 0.0
    assert classify(model, np.array([0.0])) is Group.Patient
    assert classify(model, np.array([-1e-12])) is Group.Control


def test_classify_and_predict_dimensions():
    model = train_lda(data())
    with pytest.raises(DimensionMismatch):
        classify(model, np.zeros(5))
    with pytest.raises(DimensionMismatch):
        classify(model, np.zeros((2, 6)))
    assert predict(model, data().X[:2]) == [Group.Patient, Group.Patient]


def test_single_group_rejected():
    m = FeatureMatrix(np.eye(3), ("a", "b", "c"), ["Patient"] * 3)
    with pytest.raises(DegenerateGroups):
        train_nb(m)


def test_eval_report_metrics():
    r = EvalReport(tp=6, fp=1, tn=6, fn=1)
    assert r.accuracy == pytest.approx(12 / 14) and f"{100 * r.accuracy:.1f}" == "85.7"
    only_controls = EvalReport(0, 0, 4, 0)
    assert math.isnan(only_controls.sensitivity)
    assert only_controls.to_dict()["sensitivity"] is None
    assert EvalReport.from_dict(r.to_dict()) == r
    text = format_report({"LDA": r, "NB": only_controls})
    assert "85.7%" in text and "n/a" in text


def test_evaluate_reorders_and_rejects_empty():
    m = data()
    model = train_lda(m)
    shuffled = m.columns(list(reversed(m.names)))
    assert evaluate(model, shuffled) == evaluate(model, m)
    with pytest.raises(EmptyTestSet):
        evaluate(model, m.rows(np.zeros(len(m), bool)))


@pytest.mark.parametrize("train", [train_lda, train_pca, train_nb])
def test_persistence_round_trip(train, tmp_path):
    model = train(data())
    save_model(model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert models_equal(model, back)
    Z = model.standardizer.transform(data(seed=3).X)
    np.testing.assert_array_equal(model.score(Z), back.score(Z))


def test_persistence_errors(tmp_path):
    d = model_to_dict(train_lda(data()))
    with pytest.raises(ModelVersionError):
        model_from_dict({**d, "version": 99})
    with pytest.raises(SchemaError):
        model_from_dict({**d, "params": {}})
    with pytest.raises(SchemaError):
        model_from_dict({**d, "kind": "SVM"})
    json.dumps(d)
