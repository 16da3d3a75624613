"""Gait rehabilitation quantification from body-worn IMUs.

Multi-sensor walking recordings become sagittal joint angles and global
accelerations, then a 243-dimensional feature vector, a Patient/Control
classification and a scalar rehabilitation grade.
"""

__version__ = "0.1.0"

from .classification import EvalReport, classify, evaluate, predict, train_lda, train_nb, train_pca
from .dataset import FeatureMatrix, FeatureTable, Standardizer
from .features import FEATURE_NAMES, FEATURES, extract_features
from .grading import build_grading, classify_by_grade, grade, grade_time_correlation, per_feature_profile
from .io import load_manifest, load_trial, save_trial
from .kinematics import SIGNALS, joint_angles, preprocess_trial
from .model import Group, JointId, Placement, SubjectMeta, TrialRecording
from .selection import select_features, snr, t_test
from .synthetic import GaitProfile, generate_cohort, generate_trial

__all__ = [
    "__version__", "EvalReport", "classify", "evaluate", "predict", "train_lda", "train_nb", "train_pca",
    "FeatureMatrix", "FeatureTable", "Standardizer", "FEATURE_NAMES", "FEATURES", "extract_features",
    "build_grading", "classify_by_grade", "grade", "grade_time_correlation", "per_feature_profile",
    "load_manifest", "load_trial", "save_trial", "SIGNALS", "joint_angles", "preprocess_trial",
    "Group", "JointId", "Placement", "SubjectMeta", "TrialRecording", "select_features", "snr", "t_test",
    "GaitProfile", "generate_cohort", "generate_trial",
]
