import numpy as np
import pytest

from gaitrehab.calibration import calibrate
from gaitrehab.errors import UnsupportedRate
from gaitrehab.kinematics import (
    SIGNALS, KinematicsConfig, accel_inclination, joint_angles, preprocess_trial, sagittal_rate,
)
from gaitrehab.model import JOINTS, Placement


def rmse(a, b):
    return float(np.sqrt(np.mean((a - b) ** 2)))


def test_sign_conventions():
    assert sagittal_rate(np.array([[1.0, 2.0, 3.0]]))[0] == -2.0
    np.testing.assert_allclose(accel_inclination([1.0, 0.0], [1.0, 1.0]), [45.0, 0.0])
    # unwrapping keeps continuity across +/-180
    ang = accel_inclination([1e-3, -1e-3], [-1.0, -1.0])
    assert abs(ang[1] - ang[0]) < 1.0


@pytest.mark.parametrize("name", ["clean_trial", "noisy_trial"])
def test_joint_angles_track_truth(name, request):
    trial, truth = request.getfixturevalue(name)
    ja = joint_angles(trial)
    w = slice(truth.walk_start, None)
    for j in JOINTS:
        assert rmse(ja[j].angle.values[w], truth.joint_angles[j][w]) < 1.0, j


def test_kf_beats_raw_integration_with_bias(noisy_trial):
    trial, truth = noisy_trial
    ja = joint_angles(trial)
    w = slice(truth.walk_start, None)
    worse = sum(rmse(ja[j].theta_g[w], truth.joint_angles[j][w]) > rmse(ja[j].angle.values[w], truth.joint_angles[j][w])
                for j in JOINTS)
    assert worse == len(JOINTS)


def test_global_acceleration_matches_truth(clean_trial):
    trial, truth = clean_trial
    sig = preprocess_trial(trial)
    w = slice(truth.walk_start, None)
    for p in Placement:
        ref = truth.motion_accel[p][w]
        # vertical is insensitive to small tilt errors; horizontal axes pick up
        # g * sin(tilt error) of the accelerometer-corrected attitude (about 1 deg)
        assert rmse(sig[f"{p.value}_z"], ref[:, 2]) < 0.05 * np.std(ref[:, 2]), p
        for k, ax in enumerate("xy"):
            assert rmse(sig[f"{p.value}_{ax}"], ref[:, k]) < 0.25, (p, ax)


def test_preprocess_shapes(clean_trial):
    trial, truth = clean_trial
    sig = preprocess_trial(trial)
    assert list(sig.signals) == list(SIGNALS)
    assert len(SIGNALS) == 27
    n = len(trial) - truth.walk_start
    assert all(len(v) == n for v in sig.signals.values())


def test_dump_csv(clean_trial):
    trial, _ = clean_trial
    ja = joint_angles(trial, calibrate(trial))
    text = ja[JOINTS[0]].dump_csv(trial.time)
    lines = text.splitlines()
    assert lines[0] == "t,theta_g,theta_a,theta_corrected,beta"
    assert len(lines) == len(trial) + 1


def test_smooth_config():
    x = np.ones(200)
    with pytest.raises(UnsupportedRate):
        KinematicsConfig().smooth(x, 50.0)
    np.testing.assert_allclose(KinematicsConfig(filter_cutoff=5.0).smooth(x, 50.0), 1.0, atol=1e-9)
