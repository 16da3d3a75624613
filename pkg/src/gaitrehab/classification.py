"""LDA, PCA-subspace and Gaussian Naive Bayes classifiers for Patient vs Control.

All three models standardize features with training statistics. ``classify``
takes a row that is already standardized; ``predict`` and ``evaluate`` take raw
feature rows and apply the model's own standardizer. Patient is the positive
class and exact ties go to Patient.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import linalg

from .dataset import FeatureMatrix, Standardizer
from .errors import (
    DegenerateData, DegenerateGroups, DimensionMismatch, EmptyTestSet, ModelVersionError,
    SchemaError, SingularScatter,
)
from .io import write_json_atomic
from .model import Group

MODEL_VERSION = 1
LDA_RIDGE = 1e-6            # relative to mean within-class variance
PCA_VARIANCE = 0.95
NB_VAR_FLOOR = 1e-9         # relative to the pooled column variance
KINDS = ("LDA", "PCA", "NB")


def _check_groups(train: FeatureMatrix) -> tuple[np.ndarray, np.ndarray]:
    pat = train.is_patient
    if pat.all() or not pat.any():
        raise DegenerateGroups("training data must contain both Patient and Control rows")
    return pat, ~pat


def _fix_sign(v: np.ndarray) -> np.ndarray:
    """Flip so that the largest-magnitude component is positive (first one on ties)."""
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


@dataclass(frozen=True)
class LdaModel:
    names: tuple
    standardizer: Standardizer
    w: np.ndarray           # unit norm, points toward the patient mean
    b: float
    kind: str = "LDA"

    def score(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float) @ self.w - self.b

    def _params(self) -> dict:
        return {"w": self.w.tolist(), "b": self.b}


@dataclass(frozen=True)
class PcaModel:
    names: tuple
    standardizer: Standardizer
    mean: np.ndarray
    axes: np.ndarray        # (m, d) rows are principal axes
    eigenvalues: np.ndarray  # all of them, descending
    centroid_patient: np.ndarray
    centroid_control: np.ndarray
    kind: str = "PCA"

    @property
    def m(self) -> int:
        return len(self.axes)

    def project(self, z) -> np.ndarray:
        return (np.asarray(z, dtype=float) - self.mean) @ self.axes.T

    def score(self, z) -> np.ndarray:
        """Squared distance to the control centroid minus distance to the patient centroid."""
        y = self.project(z)
        dp = np.sum((y - self.centroid_patient) ** 2, axis=-1)
        dc = np.sum((y - self.centroid_control) ** 2, axis=-1)
        return dc - dp

    def _params(self) -> dict:
        return {"mean": self.mean.tolist(), "axes": self.axes.tolist(),
                "eigenvalues": self.eigenvalues.tolist(),
                "centroid_patient": self.centroid_patient.tolist(),
                "centroid_control": self.centroid_control.tolist()}


@dataclass(frozen=True)
class NbModel:
    names: tuple
    standardizer: Standardizer
    mean_patient: np.ndarray
    var_patient: np.ndarray
    mean_control: np.ndarray
    var_control: np.ndarray
    prior_patient: float
    kind: str = "NB"

    def _loglik(self, z, mu, var) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return -0.5 * np.sum(np.log(2.0 * math.pi * var) + (z - mu) ** 2 / var, axis=-1)

    def score(self, z) -> np.ndarray:
        """Log posterior odds of Patient over Control."""
        return (self._loglik(z, self.mean_patient, self.var_patient) + math.log(self.prior_patient)
                - self._loglik(z, self.mean_control, self.var_control) - math.log(1.0 - self.prior_patient))

    def _params(self) -> dict:
        return {"mean_patient": self.mean_patient.tolist(), "var_patient": self.var_patient.tolist(),
                "mean_control": self.mean_control.tolist(), "var_control": self.var_control.tolist(),
                "prior_patient": self.prior_patient}


ClassifierModel = Union[LdaModel, PcaModel, NbModel]


def fisher_direction(Z: np.ndarray, pat: np.ndarray, ridge: float = LDA_RIDGE) -> np.ndarray:
    """Unit vector proportional to (S_w + lambda I)^-1 (mu_patient - mu_control)."""
    mp, mc = Z[pat].mean(axis=0), Z[~pat].mean(axis=0)
    Dp, Dc = Z[pat] - mp, Z[~pat] - mc
    Sw = Dp.T @ Dp + Dc.T @ Dc
    d = Z.shape[1]
    lam = ridge * np.trace(Sw) / d
    if not lam > 0.0:
        raise SingularScatter("within-class scatter is zero")
    try:
        w = linalg.solve(Sw + lam * np.eye(d), mp - mc, assume_a="pos")
    except (linalg.LinAlgError, ValueError) as exc:
        raise SingularScatter(f"regularized scatter not invertible: {exc}") from None
    norm = np.linalg.norm(w)
    if not (norm > 0.0 and np.isfinite(norm)):
        raise SingularScatter("class means coincide; no discriminant direction")
    return w / norm


def train_lda(train: FeatureMatrix, ridge: float = LDA_RIDGE) -> LdaModel:
    pat, _ = _check_groups(train)
    std = Standardizer.fit(train.X)
    Z = std.transform(train.X)
    w = fisher_direction(Z, pat, ridge)
    b = 0.5 * float(w @ (Z[pat].mean(axis=0) + Z[~pat].mean(axis=0)))
    return LdaModel(train.names, std, w, b)


def principal_axes(Z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(mean, eigenvalues descending, axes as rows) of the sample covariance."""
    if len(Z) < 2:
        raise DegenerateData("PCA needs at least 2 rows")
    mean = Z.mean(axis=0)
    C = np.cov(Z - mean, rowvar=False).reshape(Z.shape[1], Z.shape[1])
    evals, evecs = np.linalg.eigh(C)
    order = np.argsort(-evals, kind="stable")
    evals = np.clip(evals[order], 0.0, None)
    axes = np.array([_fix_sign(evecs[:, i]) for i in order])
    if not evals.sum() > 0.0:
        raise DegenerateData("training data has zero variance")
    return mean, evals, axes


def components_for(evals: np.ndarray, fraction: float = PCA_VARIANCE) -> int:
    ratio = np.cumsum(evals) / evals.sum()
    return int(np.searchsorted(ratio, fraction - 1e-12) + 1)


def train_pca(train: FeatureMatrix, m: Optional[int] = None, fraction: float = PCA_VARIANCE) -> PcaModel:
    """Nearest-centroid classifier in the leading principal subspace.

    ``m`` defaults to the fewest components retaining ``fraction`` of the variance.
    """
    pat, _ = _check_groups(train)
    std = Standardizer.fit(train.X)
    Z = std.transform(train.X)
    mean, evals, axes = principal_axes(Z)
    if m is None:
        m = components_for(evals, fraction)
    if not 1 <= m <= len(evals):
        raise DegenerateData(f"m = {m} outside 1..{len(evals)}")
    axes = axes[:m]
    Y = (Z - mean) @ axes.T
    return PcaModel(train.names, std, mean, axes, evals, Y[pat].mean(axis=0), Y[~pat].mean(axis=0))


def train_nb(train: FeatureMatrix, var_floor: float = NB_VAR_FLOOR) -> NbModel:
    pat, _ = _check_groups(train)
    std = Standardizer.fit(train.X)
    Z = std.transform(train.X)
    col_var = Z.var(axis=0)
    floor = var_floor * np.where(col_var > 0, col_var, 1.0)
    vp = np.maximum(Z[pat].var(axis=0), floor)
    vc = np.maximum(Z[~pat].var(axis=0), floor)
    return NbModel(train.names, std, Z[pat].mean(axis=0), vp, Z[~pat].mean(axis=0), vc,
                   float(pat.mean()))


TRAINERS = {"LDA": train_lda, "PCA": train_pca, "NB": train_nb}


def _check_dim(model: ClassifierModel, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != len(model.names):
        raise DimensionMismatch(f"model expects {len(model.names)} features, got {z.shape[-1]}")
    return z


def classify(model: ClassifierModel, z) -> Group:
    """Label of one standardized row."""
    z = _check_dim(model, z)
    if z.ndim != 1:
        raise DimensionMismatch("classify takes a single row; use predict for matrices")
    return Group.Patient if model.score(z) >= 0.0 else Group.Control


def predict(model: ClassifierModel, X) -> list[Group]:
    """Labels of raw (unstandardized) rows."""
    Z = model.standardizer.transform(np.atleast_2d(_check_dim(model, X)))
    return [Group.Patient if s >= 0.0 else Group.Control for s in model.score(Z)]


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.n

    @property
    def sensitivity(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else math.nan

    @property
    def specificity(self) -> float:
        return self.tn / (self.tn + self.fp) if self.tn + self.fp else math.nan

    def to_dict(self) -> dict:
        def f(v):
            return None if math.isnan(v) else v
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn, "accuracy": self.accuracy,
                "sensitivity": f(self.sensitivity), "specificity": f(self.specificity)}

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(int(d["tp"]), int(d["fp"]), int(d["tn"]), int(d["fn"]))


def evaluate(model: ClassifierModel, test: FeatureMatrix) -> EvalReport:
    if len(test) == 0:
        raise EmptyTestSet("test set has no rows")
    if tuple(test.names) != tuple(model.names):
        test = test.columns(model.names)
    pred = predict(model, test.X)
    tp = fp = tn = fn = 0
    for y, p in zip(test.labels, pred):
        if y is Group.Patient:
            tp, fn = (tp + 1, fn) if p is Group.Patient else (tp, fn + 1)
        else:
            fp, tn = (fp + 1, tn) if p is Group.Patient else (fp, tn + 1)
    return EvalReport(tp, fp, tn, fn)


def format_report(reports: dict) -> str:
    """Human-readable table: one row per classifier, percentages."""
    lines = [f"{'Classifier':<12}{'Accuracy':>10}{'Sensitivity':>13}{'Specificity':>13}"]
    for kind, r in reports.items():
        cells = [r.accuracy, r.sensitivity, r.specificity]
        txt = ["n/a" if math.isnan(v) else f"{100 * v:.1f}%" for v in cells]
        lines.append(f"{kind:<12}{txt[0]:>10}{txt[1]:>13}{txt[2]:>13}")
    return "\n".join(lines) + "\n"


# --- persistence ------------------------------------------------------------------

def model_to_dict(model: ClassifierModel) -> dict:
    return {"version": MODEL_VERSION, "kind": model.kind, "features": list(model.names),
            "standardizer": model.standardizer.to_dict(), "params": model._params()}


def model_from_dict(d: dict) -> ClassifierModel:
    version = d.get("version")
    if version != MODEL_VERSION:
        raise ModelVersionError(f"model version {version!r}; this build reads version {MODEL_VERSION}")
    try:
        kind, names, p = d["kind"], tuple(d["features"]), d["params"]
        std = Standardizer.from_dict(d["standardizer"])
        arr = {k: np.asarray(v, dtype=float) for k, v in p.items() if isinstance(v, list)}
        if kind == "LDA":
            return LdaModel(names, std, arr["w"], float(p["b"]))
        if kind == "PCA":
            return PcaModel(names, std, arr["mean"], arr["axes"].reshape(-1, len(names)), arr["eigenvalues"],
                            arr["centroid_patient"], arr["centroid_control"])
        if kind == "NB":
            return NbModel(names, std, arr["mean_patient"], arr["var_patient"], arr["mean_control"],
                           arr["var_control"], float(p["prior_patient"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed model file: {exc}") from None
    raise SchemaError(f"unknown model kind {kind!r}")


def save_model(model: ClassifierModel, path) -> None:
    write_json_atomic(path, model_to_dict(model))


def load_model(path) -> ClassifierModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def models_equal(a: ClassifierModel, b: ClassifierModel) -> bool:
    return model_to_dict(a) == model_to_dict(b)
