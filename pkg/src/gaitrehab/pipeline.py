"""Manifest-level orchestration: trials on disk -> feature table -> models and grades."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import partial
from typing import Iterable, Optional

import numpy as np

from .classification import LDA_RIDGE, EvalReport, evaluate, train_lda, train_nb, train_pca
from .dataset import META_COLUMNS, FeatureMatrix, FeatureTable, TrialRow
from .errors import DataError, EmptyTestSet, GaitError, NumericalError, WindowTooLong
from .features import FEATURE_NAMES, extract_features, window_count
from .grading import SCHEMES, build_grading, grade_matrix
from .io import CohortManifest, ManifestEntry, load_trial
from .kinematics import SIGNALS, KinematicsConfig, preprocess_trial
from .model import TrialRecording
from .selection import DEFAULT_ALPHA, DEFAULT_K, SelectionResult, select_features


@dataclass(frozen=True)
class TrialFailure:
    trial_id: str
    path: str
    error: str          # exception class name
    message: str

    @property
    def exit_code(self) -> int:
        return 3 if self.error in _NUMERICAL else 2

    def to_dict(self) -> dict:
        return {"trial_id": self.trial_id, "path": self.path, "error": self.error, "message": self.message}


def _subclasses(cls):
    out = {cls.__name__}
    for sub in cls.__subclasses__():
        out |= _subclasses(sub)
    return out


_NUMERICAL = _subclasses(NumericalError)


def trial_row(trial: TrialRecording, split: str, config: KinematicsConfig = KinematicsConfig()) -> TrialRow:
    """Full 243-feature row of an in-memory trial; raises on any failure."""
    trial.validate()
    fv = extract_features(preprocess_trial(trial, config=config))
    m = trial.subject
    return TrialRow(trial.trial_id, m.id, m.group, m.days_post_op, split, np.array(fv.values))


def _entry_row(entry: ManifestEntry, config: KinematicsConfig):
    try:
        trial = load_trial(entry.trial, entry.sidecar)
        return trial_row(trial, entry.split, config)
    except GaitError as exc:
        return TrialFailure(entry.trial_id, entry.trial.as_posix(), type(exc).__name__, str(exc))
    except OSError as exc:
        return TrialFailure(entry.trial_id, entry.trial.as_posix(), "DataError", str(exc))


def _map(fn, items, jobs: int):
    items = list(items)
    if jobs == 1 or len(items) < 2:
        return [fn(i) for i in items]
    from joblib import Parallel, delayed
    return Parallel(n_jobs=jobs)(delayed(fn)(i) for i in items)


@dataclass(frozen=True)
class ExtractionResult:
    table: FeatureTable
    failures: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def exit_code(self) -> int:
        return max((f.exit_code for f in self.failures), default=0)


def extract_manifest(manifest: CohortManifest, config: KinematicsConfig = KinematicsConfig(),
                     jobs: int = 1) -> ExtractionResult:
    """One row per trial in manifest order. Failed trials are reported, not dropped silently."""
    out = _map(partial(_entry_row, config=config), manifest.entries, jobs)
    rows = tuple(r for r in out if isinstance(r, TrialRow))
    failures = tuple(r for r in out if isinstance(r, TrialFailure))
    return ExtractionResult(FeatureTable(rows, FEATURE_NAMES), failures)


def extract_trials(items: Iterable[tuple[TrialRecording, str]],
                   config: KinematicsConfig = KinematicsConfig()) -> ExtractionResult:
    """In-memory counterpart of ``extract_manifest`` over (trial, split) pairs."""
    rows, failures = [], []
    for trial, split in items:
        try:
            rows.append(trial_row(trial, split, config))
        except GaitError as exc:
            failures.append(TrialFailure(trial.trial_id, "", type(exc).__name__, str(exc)))
    return ExtractionResult(FeatureTable(tuple(rows), FEATURE_NAMES), tuple(failures))


# --- windowed extraction ---------------------------------------------------------------

WINDOW_COLUMNS = META_COLUMNS + ("window", "start_s")


def windowed_rows(trial: TrialRecording, split: str, window_s: float, hop_s: float,
                  config: KinematicsConfig = KinematicsConfig()) -> list[list]:
    """Feature rows over sliding windows of the walking segment; unavailable features are NaN."""
    fs = trial.sample_rate
    sig = preprocess_trial(trial, config=config)
    n = len(next(iter(sig.signals.values())))
    w, h = int(round(window_s * fs)), int(round(hop_s * fs))
    if w < 1 or h < 1:
        raise DataError("window and hop must span at least one sample")
    if w > n:
        raise WindowTooLong(f"{trial.trial_id}: window {window_s:g} s exceeds walking segment {n / fs:g} s")
    m = trial.subject
    days = "" if m.days_post_op is None else str(m.days_post_op)
    rows = []
    for i in range(window_count(n, w, h)):
        s0 = i * h
        chunk = {s: sig.signals[s][s0:s0 + w] for s in SIGNALS}
        fv = extract_features(chunk, fs, strict=False)
        rows.append([trial.trial_id, m.id, m.group.value, days, split, str(i), repr(s0 / fs)]
                    + [repr(float(v)) for v in fv.values])
    return rows


def windowed_csv(rows: Iterable[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(WINDOW_COLUMNS) + list(FEATURE_NAMES))
    w.writerows(rows)
    return buf.getvalue()


# --- statistics stage ---------------------------------------------------------------------

@dataclass(frozen=True)
class TrainEvalResult:
    selection: SelectionResult
    models: dict                 # kind -> ClassifierModel
    reports: dict                # kind -> EvalReport
    train: FeatureMatrix = field(repr=False)
    test: FeatureMatrix = field(repr=False)


def split_matrices(table: FeatureTable, per_trial: bool = False) -> tuple[FeatureMatrix, FeatureMatrix]:
    def mat(t):
        return t.trial_matrix() if per_trial else t.subject_matrix()
    train, test = table.split("train"), table.split("test")
    if len(train) == 0:
        raise EmptyTestSet("feature table has no train rows")
    if len(test) == 0:
        raise EmptyTestSet("feature table has no test rows")
    return mat(train), mat(test)


def train_and_evaluate(table: FeatureTable, alpha: float = DEFAULT_ALPHA, k: int = DEFAULT_K,
                       pca_m: Optional[int] = None, per_trial: bool = False, ridge: float = LDA_RIDGE,
                       selection: Optional[SelectionResult] = None) -> TrainEvalResult:
    """Select on the training subjects, then train and test all three classifiers."""
    train, test = split_matrices(table, per_trial)
    sel = select_features(train, alpha, k) if selection is None else selection
    tr, te = train.columns(sel.names), test.columns(sel.names)
    models = {"LDA": train_lda(tr, ridge), "PCA": train_pca(tr, m=pca_m), "NB": train_nb(tr)}
    reports: dict[str, EvalReport] = {kind: evaluate(mdl, te) for kind, mdl in models.items()}
    return TrainEvalResult(sel, models, reports, tr, te)


def grade_cohort(table: FeatureTable, selection: SelectionResult, schemes=SCHEMES,
                 grade_split: Optional[str] = None, ridge: float = LDA_RIDGE) -> dict:
    """Build one grading model per scheme on the training subjects and grade ``grade_split`` rows.

    With ``grade_split`` None every subject in the table is graded.
    """
    train = table.split("train").subject_matrix()
    target = table if grade_split is None else table.split(grade_split)
    target_m = target.subject_matrix()
    out = {}
    for scheme in schemes:
        model = build_grading(selection, train, scheme, ridge)
        out[scheme] = (model, grade_matrix(model, target_m))
    return out
