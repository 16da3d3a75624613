import math

import numpy as np
import pytest

from gaitrehab.model import ImuSample
from gaitrehab.orientation import (
    DEG2RAD, OrientationState, _imu_step, estimate_orientation, to_global_accel, update_orientation,
)
from gaitrehab.quaternion import from_axis_angle, quat_rotate, random_unit


def test_jit_run_matches_python_steps(rng):
    n = 300
    gyro = rng.normal(0, 50, size=(n, 3))
    accel = rng.normal(0, 2, size=(n, 3)) + [0, 0, 9.81]
    q0 = random_unit(rng, 1)[0]
    got = estimate_orientation(gyro, accel, 0.01, q0=q0)
    q = tuple(q0)
    for i in range(n):
        q = _imu_step(*q, *(gyro[i] * DEG2RAD), *accel[i], 0.01, 0.1)
        np.testing.assert_allclose(got[i], q, atol=1e-12)


def test_update_orientation_is_one_step(rng):
    s = ImuSample(0.0, np.array([0.1, 0.2, 9.7]), np.array([3.0, -2.0, 1.0]), np.zeros(3))
    one = update_orientation(OrientationState(), s, 0.01)
    run = estimate_orientation(s.gyro[None], s.accel[None], 0.01)
    np.testing.assert_allclose(one.q, run[0], atol=1e-14)


def test_pure_rotation_without_correction():
    # gain 0 integrates the gyro only; compare with the closed-form rotation
    n, dt, rate = 1000, 0.01, 36.0
    gyro = np.tile([0.0, 0.0, rate], (n, 1))
    q = estimate_orientation(gyro, np.tile([0, 0, 9.81], (n, 1)), dt, gain=0.0)
    expected = from_axis_angle([0, 0, 1], math.radians(rate * n * dt))
    assert abs(abs(np.dot(q[-1], expected)) - 1.0) < 1e-6


def test_converges_to_tilt():
    tilt = from_axis_angle([0, 1, 0], math.radians(20))
    # specific force of a static sensor is gravity reaction expressed in the sensor frame
    a_sensor = quat_rotate(np.array([tilt[0], *(-tilt[1:])]), [0, 0, 9.81])
    n = 3000
    q = estimate_orientation(np.zeros((n, 3)), np.tile(a_sensor, (n, 1)), 0.01)
    np.testing.assert_allclose(quat_rotate(q[-1], a_sensor), [0, 0, 9.81], atol=1e-3)


def test_marg_path_runs_and_stays_unit(rng):
    n = 200
    gyro = rng.normal(0, 10, size=(n, 3))
    accel = np.tile([0, 0, 9.81], (n, 1)) + rng.normal(0, 0.1, size=(n, 3))
    mag = np.tile([0.2, 0.0, -0.4], (n, 1))
    q = estimate_orientation(gyro, accel, 0.01, mag=mag)
    np.testing.assert_allclose(np.linalg.norm(q, axis=1), 1.0, atol=1e-12)


def test_global_accel_removes_gravity():
    q = np.tile([1.0, 0, 0, 0], (5, 1))
    a = to_global_accel(q, np.tile([0.5, 0, 9.81], (5, 1)))
    np.testing.assert_allclose(a, np.tile([0.5, 0, 0], (5, 1)), atol=1e-12)


def test_zero_accel_skips_correction():
    q = _imu_step(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.01, 0.1)
    assert q == pytest.approx((1.0, 0.0, 0.0, 0.0))
