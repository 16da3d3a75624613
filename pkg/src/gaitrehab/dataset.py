"""Feature tables: trial-level rows from extraction and subject-level matrices for statistics."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, ParseError, SchemaError, ValidationError
from .features import FEATURE_NAMES
from .io import SPLITS
from .model import Group

META_COLUMNS = ("trial_id", "subject_id", "group", "days_post_op", "split")


def _labels(labels) -> tuple:
    try:
        return tuple(Group(str(g.value if isinstance(g, Group) else g).capitalize()) for g in labels)
    except ValueError as exc:
        raise ValidationError(f"unknown group label: {exc}") from None


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Rows (subjects or trials) by named feature columns, with group labels."""

    X: np.ndarray
    names: tuple
    labels: tuple
    ids: tuple = ()
    days: tuple = ()         # days post-op per row, None for controls

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim != 2:
            raise DimensionMismatch(f"feature matrix must be 2-D, got shape {X.shape}")
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "labels", _labels(self.labels))
        ids = tuple(self.ids) if self.ids else tuple(f"row{i}" for i in range(len(X)))
        days = tuple(self.days) if self.days else (None,) * len(X)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "days", days)
        if X.shape[1] != len(self.names):
            raise DimensionMismatch(f"{X.shape[1]} columns but {len(self.names)} names")
        if not (len(self.labels) == len(ids) == len(days) == len(X)):
            raise DimensionMismatch("labels, ids and days must have one entry per row")
        if not np.all(np.isfinite(X)):
            bad = sorted({self.names[j] for j in np.nonzero(~np.isfinite(X))[1]})
            raise ValidationError(f"non-finite values in column(s): {', '.join(bad[:5])}")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)

    def __len__(self):
        return len(self.X)

    @property
    def shape(self):
        return self.X.shape

    @property
    def is_patient(self) -> np.ndarray:
        return np.array([g is Group.Patient for g in self.labels], dtype=bool)

    def group(self, g: Group) -> np.ndarray:
        mask = self.is_patient if g is Group.Patient else ~self.is_patient
        return self.X[mask]

    def columns(self, names: Sequence[str]) -> "FeatureMatrix":
        """Subset and reorder columns by name."""
        index = {n: i for i, n in enumerate(self.names)}
        missing = [n for n in names if n not in index]
        if missing:
            raise DimensionMismatch(f"unknown feature column(s): {', '.join(missing[:5])}")
        cols = [index[n] for n in names]
        return FeatureMatrix(self.X[:, cols], tuple(names), self.labels, self.ids, self.days)

    def rows(self, mask) -> "FeatureMatrix":
        idx = np.nonzero(np.asarray(mask, dtype=bool))[0]
        return FeatureMatrix(
            self.X[idx], self.names, [self.labels[i] for i in idx],
            [self.ids[i] for i in idx], [self.days[i] for i in idx],
        )


@dataclass(frozen=True)
class Standardizer:
    """Per-column z-score with training statistics; constant columns keep unit scale."""

    mean: tuple
    scale: tuple

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        mu = X.mean(axis=0)
        sd = X.std(axis=0, ddof=1) if len(X) > 1 else np.zeros(X.shape[1])
        sd = np.where(sd > 0, sd, 1.0)
        return cls(tuple(mu.tolist()), tuple(sd.tolist()))

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != len(self.mean):
            raise DimensionMismatch(f"expected {len(self.mean)} features, got {X.shape[-1]}")
        return (X - np.asarray(self.mean)) / np.asarray(self.scale)

    def inverse(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=float) * np.asarray(self.scale) + np.asarray(self.mean)

    def to_dict(self) -> dict:
        return {"mean": list(self.mean), "scale": list(self.scale)}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(tuple(float(v) for v in d["mean"]), tuple(float(v) for v in d["scale"]))


# --- trial-level feature table ---------------------------------------------------

@dataclass(frozen=True)
class TrialRow:
    trial_id: str
    subject_id: str
    group: Group
    days_post_op: Optional[int]
    split: str
    values: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class FeatureTable:
    rows: tuple
    names: tuple = FEATURE_NAMES

    def __len__(self):
        return len(self.rows)

    def __eq__(self, other):
        if not isinstance(other, FeatureTable) or self.names != other.names or len(self) != len(other):
            return False
        return all(
            a.trial_id == b.trial_id and a.subject_id == b.subject_id and a.group == b.group
            and a.days_post_op == b.days_post_op and a.split == b.split
            and np.array_equal(a.values, b.values, equal_nan=True)
            for a, b in zip(self.rows, other.rows)
        )

    def split(self, name: str) -> "FeatureTable":
        return FeatureTable(tuple(r for r in self.rows if r.split == name), self.names)

    def trial_matrix(self) -> FeatureMatrix:
        return FeatureMatrix(
            np.array([r.values for r in self.rows]).reshape(len(self.rows), len(self.names)),
            self.names, [r.group for r in self.rows], [r.trial_id for r in self.rows],
            [r.days_post_op for r in self.rows],
        )

    def subject_matrix(self) -> FeatureMatrix:
        """Average each subject's trials so rows are independent samples."""
        order, groups = [], {}
        for r in self.rows:
            if r.subject_id not in groups:
                order.append(r.subject_id)
                groups[r.subject_id] = []
            groups[r.subject_id].append(r)
        X, labels, days = [], [], []
        for sid in order:
            rows = groups[sid]
            X.append(np.mean([r.values for r in rows], axis=0))
            labels.append(rows[0].group)
            days.append(rows[0].days_post_op)
        X = np.array(X).reshape(len(order), len(self.names))
        return FeatureMatrix(X, self.names, labels, order, days)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(META_COLUMNS) + list(self.names))
        for r in self.rows:
            days = "" if r.days_post_op is None else str(r.days_post_op)
            w.writerow([r.trial_id, r.subject_id, r.group.value, days, r.split]
                       + [repr(float(v)) for v in r.values])
        return buf.getvalue()


def read_feature_csv(path) -> FeatureTable:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty feature file") from None
        if tuple(header[:len(META_COLUMNS)]) != META_COLUMNS:
            raise SchemaError(f"{path}: header must start with {','.join(META_COLUMNS)}")
        names = tuple(header[len(META_COLUMNS):])
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            trial_id, subject_id, group, days, split = rec[:5]
            if split not in SPLITS:
                raise SchemaError(f"{path}:{lineno}: split {split!r} is not train or test")
            try:
                values = np.array([float(v) for v in rec[5:]])
                days_v = int(days) if days != "" else None
                g = Group(group.capitalize())
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            rows.append(TrialRow(trial_id, subject_id, g, days_v, split, values))
    return FeatureTable(tuple(rows), names)


def finite_or_none(v: float):
    """JSON-safe float: NaN and infinities become null."""
    return float(v) if math.isfinite(v) else None
