"""Feature selection by significance testing and SNR ranking.

For each feature the control group (index 1) and patient group (index 2) are
compared with a two-sided Welch t-test. Features with p below the significance
level are ranked by the magnitude of

    SNR = (mu1 - mu2) / (sigma1 + sigma2)

and the top K are kept. The signed SNR is retained because grading uses its
direction.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .dataset import FeatureMatrix
from .errors import DegenerateGroups, NoSignificantFeatures, SchemaError, ZeroSpread
from .io import write_json_atomic
from .model import Group

DEFAULT_ALPHA = 0.05
DEFAULT_K = 26


def t_test(group1, group2, paired: bool = False) -> float:
    """Two-sided p-value of Welch's unequal-variance t-test.

    With ``paired=True`` the samples are matched element-wise (same subject
    measured twice) and a one-sample test on the differences is used instead.
    """
    a = np.asarray(group1, dtype=float).ravel()
    b = np.asarray(group2, dtype=float).ravel()
    if paired:
        if len(a) != len(b):
            raise DegenerateGroups(f"paired test needs equal sizes, got {len(a)} and {len(b)}")
        d = a - b
        if len(d) < 2:
            raise DegenerateGroups("paired test needs at least 2 pairs")
        se2 = d.var(ddof=1) / len(d)
        if se2 == 0.0:
            raise DegenerateGroups("paired differences have zero variance")
        t = d.mean() / math.sqrt(se2)
        return float(2.0 * stats.t.sf(abs(t), len(d) - 1))
    if len(a) < 2 or len(b) < 2:
        raise DegenerateGroups(f"each group needs at least 2 samples, got {len(a)} and {len(b)}")
    va, vb = a.var(ddof=1) / len(a), b.var(ddof=1) / len(b)
    se2 = va + vb
    if se2 == 0.0:
        raise DegenerateGroups("both groups have zero variance")
    t = (a.mean() - b.mean()) / math.sqrt(se2)
    df = se2 ** 2 / (va ** 2 / (len(a) - 1) + vb ** 2 / (len(b) - 1))
    return float(2.0 * stats.t.sf(abs(t), df))


def snr(mu1: float, mu2: float, sigma1: float, sigma2: float) -> float:
    spread = sigma1 + sigma2
    if not spread > 0.0:
        raise ZeroSpread(f"sigma1 + sigma2 = {spread}")
    return (mu1 - mu2) / spread


@dataclass(frozen=True)
class FeatureStats:
    signal: str
    feature: str
    mu1: float      # control mean
    mu2: float      # patient mean
    sigma1: float
    sigma2: float
    p: float
    snr: float

    @property
    def name(self) -> str:
        return f"{self.signal}_{self.feature}"


def split_name(name: str) -> tuple[str, str]:
    signal, _, feature = name.rpartition("_")
    return signal, feature


def feature_stats(matrix: FeatureMatrix) -> list[FeatureStats]:
    """Group statistics for every column. Degenerate columns get p = 1 and snr = 0."""
    ctrl = matrix.group(Group.Control)
    pat = matrix.group(Group.Patient)
    if len(ctrl) < 2 or len(pat) < 2:
        raise DegenerateGroups(f"need >= 2 subjects per group, got {len(pat)} patients and {len(ctrl)} controls")
    out = []
    for j, name in enumerate(matrix.names):
        c, p_ = ctrl[:, j], pat[:, j]
        mu1, mu2 = float(c.mean()), float(p_.mean())
        s1, s2 = float(c.std(ddof=1)), float(p_.std(ddof=1))
        try:
            p = t_test(c, p_)
            r = snr(mu1, mu2, s1, s2)
        except (DegenerateGroups, ZeroSpread):
            p, r = 1.0, 0.0
        out.append(FeatureStats(*split_name(name), mu1, mu2, s1, s2, p, r))
    return out


@dataclass(frozen=True)
class SelectionResult:
    alpha: float
    k: int
    features: tuple          # FeatureStats, sorted by |snr| descending

    @property
    def names(self) -> tuple:
        return tuple(f.name for f in self.features)

    @property
    def snr(self) -> np.ndarray:
        return np.array([f.snr for f in self.features])

    def __len__(self):
        return len(self.features)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "k": self.k, "features": [asdict(f) for f in self.features]}

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionResult":
        try:
            feats = tuple(FeatureStats(**f) for f in d["features"])
            return cls(float(d["alpha"]), int(d["k"]), feats)
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed selection file: {exc}") from None


def select_features(matrix: FeatureMatrix, alpha: float = DEFAULT_ALPHA, k: int = DEFAULT_K) -> SelectionResult:
    """Keep p < alpha, rank by |snr| (ties by feature name), truncate to k."""
    if k < 1:
        raise ValueError("k must be positive")
    all_stats = feature_stats(matrix)
    significant = [s for s in all_stats if s.p < alpha]
    if not significant:
        raise NoSignificantFeatures(f"no feature has p < {alpha:g}")
    significant.sort(key=lambda s: (-abs(s.snr), s.name))
    return SelectionResult(float(alpha), int(k), tuple(significant[:k]))


def save_selection(result: SelectionResult, path) -> None:
    write_json_atomic(path, result.to_dict())


def load_selection(path) -> SelectionResult:
    with open(path, encoding="utf-8") as fh:
        return SelectionResult.from_dict(json.load(fh))
