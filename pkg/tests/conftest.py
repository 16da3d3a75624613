import numpy as np
import pytest

from gaitrehab.pipeline import extract_trials
from gaitrehab.synthetic import GaitProfile, fixture_plans, generate_trial, iter_cohort_trials


def cohort_table(kind, seed=0):
    plans = fixture_plans(kind, seed)
    result = extract_trials((trial, plan.split) for plan, _, trial, _ in iter_cohort_trials(plans))
    assert result.ok, result.failures[:3]
    return result.table


@pytest.fixture(scope="session")
def easy_table():
    return cohort_table("easy")


@pytest.fixture(scope="session")
def recovery_table():
    return cohort_table("recovery")


@pytest.fixture(scope="session")
def clean_trial():
    """Noise-free, bias-free trial at 2 steps/s with its ground truth."""
    prof = GaitProfile(cadence=2.0, accel_noise=0.0, gyro_noise=0.0, mag_noise=0.0, gyro_bias=0.0, seed=11)
    return generate_trial(prof, duration=12.0, trial_id="clean")


@pytest.fixture(scope="session")
def noisy_trial():
    prof = GaitProfile(cadence=2.2, gyro_bias=0.4, mount_angles={"LeftThigh": 6.0, "RightShank": -5.0}, seed=5)
    return generate_trial(prof, duration=10.0, trial_id="noisy")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
