"""Rehabilitation grade G = sum_i F_i W_i over the selected features.

``F`` is the standardized feature row and ``W`` one of three unit-norm weight
vectors: the signed SNR of each feature, the Fisher discriminant direction, or
the first principal axis. Weights are oriented so that controls grade higher
than patients, and the control training grades define the healthy band.
"""
from __future__ import annotations

import enum
import math
import json
from dataclasses import dataclass
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np
from scipy import stats

from .classification import LDA_RIDGE, fisher_direction, principal_axes
from .dataset import FeatureMatrix, Standardizer
from .errors import DimensionMismatch, InsufficientData, ModelVersionError, SchemaError, ValidationError, ZeroVariance
from .io import write_json_atomic
from .model import Group
from .selection import SelectionResult

GRADING_VERSION = 1
SCHEMES = ("SNR", "LDA", "PCA")


class Band(str, enum.Enum):
    Within = "WithinControlBand"
    Below = "BelowBand"
    Above = "AboveBand"


@dataclass(frozen=True)
class GradingModel:
    scheme: str
    names: tuple
    weights: np.ndarray
    standardizer: Standardizer
    g_min: float
    g_avg: float
    g_max: float

    def to_dict(self) -> dict:
        return {"version": GRADING_VERSION, "scheme": self.scheme, "features": list(self.names),
                "weights": self.weights.tolist(), "standardizer": self.standardizer.to_dict(),
                "g_min": self.g_min, "g_avg": self.g_avg, "g_max": self.g_max}

    @classmethod
    def from_dict(cls, d: dict) -> "GradingModel":
        if d.get("version") != GRADING_VERSION:
            raise ModelVersionError(f"grading model version {d.get('version')!r}; expected {GRADING_VERSION}")
        try:
            return cls(d["scheme"], tuple(d["features"]), np.asarray(d["weights"], dtype=float),
                       Standardizer.from_dict(d["standardizer"]), float(d["g_min"]), float(d["g_avg"]),
                       float(d["g_max"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed grading model: {exc}") from None


def scheme_weights(selection: SelectionResult, Z: np.ndarray, is_patient: np.ndarray, scheme: str,
                   ridge: float = LDA_RIDGE) -> np.ndarray:
    """Raw (unnormalized, unoriented) weight vector for a scheme."""
    if scheme == "SNR":
        return selection.snr.astype(float)
    if scheme == "LDA":
        return fisher_direction(Z, is_patient, ridge)
    if scheme == "PCA":
        return principal_axes(Z)[2][0]
    raise ValueError(f"unknown grading scheme {scheme!r}; choose from {', '.join(SCHEMES)}")


def build_grading(selection: SelectionResult, train: FeatureMatrix, scheme: str,
                  ridge: float = LDA_RIDGE) -> GradingModel:
    train = train.columns(selection.names)
    pat = train.is_patient
    if pat.all() or not pat.any():
        raise InsufficientData("grading needs both groups in the training data")
    std = Standardizer.fit(train.X)
    Z = std.transform(train.X)
    w = np.asarray(scheme_weights(selection, Z, pat, scheme, ridge), dtype=float)
    norm = np.linalg.norm(w)
    if not norm > 0.0:
        raise ZeroVariance(f"{scheme} weights are all zero")
    w = w / norm
    g = _weighted_sum(Z, w)
    if g[~pat].mean() < g[pat].mean():
        w, g = -w, -g
    gc = g[~pat]
    return GradingModel(scheme, train.names, w, std, float(gc.min()), float(gc.mean()), float(gc.max()))


def _check(model: GradingModel, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != len(model.weights):
        raise DimensionMismatch(f"grading model expects {len(model.weights)} features, got {z.shape[-1]}")
    return z


def _weighted_sum(Z: np.ndarray, w: np.ndarray) -> np.ndarray:
    # correctly rounded per-row sum: a row's grade does not depend on which matrix
    # it sits in, so the band edges reproduce exactly when controls are regraded
    P = Z * w
    if P.ndim == 1:
        return np.float64(math.fsum(P))
    return np.array([math.fsum(row) for row in P.reshape(-1, P.shape[-1])]).reshape(P.shape[:-1])


def grade(model: GradingModel, z) -> float:
    """Grade of one standardized row (or an array of grades for a matrix)."""
    g = _weighted_sum(_check(model, z), model.weights)
    return float(g) if np.ndim(g) == 0 else g


def grade_raw(model: GradingModel, X):
    return grade(model, model.standardizer.transform(_check(model, X)))


def per_feature_profile(model: GradingModel, z) -> np.ndarray:
    return _check(model, z) * model.weights


def classify_by_grade(model: GradingModel, g: float) -> Band:
    if g < model.g_min:
        return Band.Below
    if g > model.g_max:
        return Band.Above
    return Band.Within


@dataclass(frozen=True)
class GradeSeries:
    """(subject_id, days_post_op, G) points of patients followed over time."""

    points: tuple

    def __post_init__(self):
        last: dict = {}
        for sid, day, _ in self.points:
            if sid in last and day <= last[sid]:
                raise ValidationError(f"subject {sid}: days_post_op must increase strictly")
            last[sid] = day

    @property
    def days(self) -> np.ndarray:
        return np.array([p[1] for p in self.points], dtype=float)

    @property
    def grades(self) -> np.ndarray:
        return np.array([p[2] for p in self.points], dtype=float)


@dataclass(frozen=True)
class Correlation:
    r: float                # Pearson
    spearman: float
    n: int


def grade_time_correlation(series: GradeSeries) -> Correlation:
    d, g = series.days, series.grades
    if len(d) < 3:
        raise InsufficientData(f"correlation needs at least 3 points, got {len(d)}")
    if np.ptp(g) == 0.0 or np.ptp(d) == 0.0:
        raise ZeroVariance("grades or days are constant")
    r = float(np.corrcoef(d, g)[0, 1])
    rho = float(stats.spearmanr(d, g).statistic)
    return Correlation(r, rho, len(d))


# --- reports -----------------------------------------------------------------------

GRADE_HEADER = ("subject_id", "days_post_op", "scheme", "G", "band")


@dataclass(frozen=True)
class GradeRecord:
    subject_id: str
    group: Group
    days_post_op: Optional[int]
    scheme: str
    G: float
    band: Band


def grade_matrix(model: GradingModel, matrix: FeatureMatrix) -> list[GradeRecord]:
    m = matrix.columns(model.names)
    gs = np.atleast_1d(grade_raw(model, m.X))
    return [GradeRecord(sid, lab, day, model.scheme, float(g), classify_by_grade(model, float(g)))
            for sid, lab, day, g in zip(m.ids, m.labels, m.days, gs)]


def series_from_records(records: Sequence[GradeRecord]) -> GradeSeries:
    pts = sorted((r.subject_id, r.days_post_op, r.G) for r in records if r.days_post_op is not None)
    return GradeSeries(tuple(pts))


def grades_csv(records: Sequence[GradeRecord]) -> str:
    lines = [",".join(GRADE_HEADER)]
    for r in records:
        day = "" if r.days_post_op is None else str(r.days_post_op)
        lines.append(f"{r.subject_id},{day},{r.scheme},{r.G!r},{r.band.value}")
    return "\n".join(lines) + "\n"


def grade_svg(records: Sequence[GradeRecord], model: GradingModel, width: int = 480, height: int = 320) -> str:
    """Scatter of G against days post-op with the control band drawn as horizontal lines.

    Controls have no operation date and are drawn at day 0.
    """
    pad = 48
    days = [r.days_post_op or 0 for r in records]
    gs = [r.G for r in records] + [model.g_min, model.g_max]
    x0, x1 = 0.0, max(days + [1])
    y0, y1 = min(gs), max(gs)
    if y1 == y0:
        y0, y1 = y0 - 1.0, y1 + 1.0
    span = y1 - y0
    y0, y1 = y0 - 0.05 * span, y1 + 0.05 * span

    def px(d):
        return pad + (d - x0) / (x1 - x0) * (width - 2 * pad)

    def py(g):
        return height - pad - (g - y0) / (y1 - y0) * (height - 2 * pad)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<title>{escape(model.scheme)} grade vs days after operation</title>',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="12">days post-op</text>',
           f'<text x="14" y="{height / 2:.1f}" font-size="12" transform="rotate(-90 14 {height / 2:.1f})" '
           f'text-anchor="middle">G ({escape(model.scheme)})</text>']
    for label, g, dash in (("G_max", model.g_max, "4 2"), ("G_avg", model.g_avg, "1 2"), ("G_min", model.g_min, "4 2")):
        y = py(g)
        out.append(f'<line x1="{pad}" y1="{y:.2f}" x2="{width - pad}" y2="{y:.2f}" stroke="gray" '
                   f'stroke-dasharray="{dash}"/>')
        out.append(f'<text x="{width - pad + 2}" y="{y + 4:.2f}" font-size="10">{label}</text>')
    for r, d in zip(records, days):
        color = "crimson" if r.group is Group.Patient else "steelblue"
        out.append(f'<circle cx="{px(d):.2f}" cy="{py(r.G):.2f}" r="3" fill="{color}">'
                   f'<title>{escape(r.subject_id)}</title></circle>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def correlation_summary(records: Sequence[GradeRecord]) -> dict:
    try:
        c = grade_time_correlation(series_from_records(records))
        return {"pearson_r": c.r, "spearman_rho": c.spearman, "n": c.n}
    except (InsufficientData, ZeroVariance) as exc:
        return {"pearson_r": None, "spearman_rho": None, "n": 0, "note": str(exc)}


def save_grading(model: GradingModel, path) -> None:
    write_json_atomic(path, model.to_dict())


def load_grading(path) -> GradingModel:
    with open(path, encoding="utf-8") as fh:
        return GradingModel.from_dict(json.load(fh))
