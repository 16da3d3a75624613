"""From calibrated IMU streams to joint angles and global accelerations.

Sensor axes convention (declared at ingestion): x anterior, y left
(mediolateral), z along the segment pointing up when standing. The sagittal
segment angle is the backward tilt of the segment, so its rate is ``-gyro_y``
and its accelerometer inclination is ``atan2(a_x, a_z)`` of the specific force.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .calibration import CalibrationOffsets, calibrate
from .filtering import CUTOFF_HZ, ORDER, lowpass, lowpass7hz
from .kalman import KalmanConfig, KalmanResult, integrate_rate, kf_joint_angle
from .model import G_STANDARD, JOINT_SEGMENTS, JOINTS, PLACEMENTS, JointId, Placement, TimeSeries, TrialRecording
from .orientation import DEFAULT_GAIN, estimate_orientation, to_global_accel

AXES = ("x", "y", "z")


@dataclass(frozen=True)
class KinematicsConfig:
    orientation_gain: float = DEFAULT_GAIN
    use_mag: bool = False
    gravity: float = G_STANDARD
    kalman: KalmanConfig = field(default_factory=KalmanConfig)
    filter_cutoff: float = CUTOFF_HZ
    filter_order: int = ORDER

    def smooth(self, x, fs: float) -> np.ndarray:
        """Zero-phase low-pass of the pipeline; the default design is only valid at 100 Hz."""
        if (self.filter_cutoff, self.filter_order) == (CUTOFF_HZ, ORDER):
            return lowpass7hz(x, fs)
        return lowpass(x, fs, self.filter_cutoff, self.filter_order)


class SegmentAngles(NamedTuple):
    theta_g: np.ndarray     # gyro-integrated sagittal angle, deg
    theta_a: np.ndarray     # accelerometer inclination, deg
    kf: KalmanResult


@dataclass(frozen=True)
class JointAngleSeries:
    joint: JointId
    angle: TimeSeries
    theta_g: np.ndarray
    theta_a: np.ndarray
    beta: np.ndarray

    def dump_csv(self, t) -> str:
        """Debug table ``t,theta_g,theta_a,theta_corrected,beta`` for plotting."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "theta_g", "theta_a", "theta_corrected", "beta"])
        for row in zip(t, self.theta_g, self.theta_a, self.angle.values, self.beta):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def sagittal_rate(gyro_dps) -> np.ndarray:
    return -np.asarray(gyro_dps, dtype=float)[:, 1]


def accel_inclination(anterior, vertical) -> np.ndarray:
    """Inclination in degrees, atan2(anterior, vertical), unwrapped across +/-180."""
    ang = np.arctan2(np.asarray(anterior, dtype=float), np.asarray(vertical, dtype=float))
    return np.degrees(np.unwrap(ang))


def segment_angles(trial: TrialRecording, placement: Placement,
                   config: KinematicsConfig = KinematicsConfig()) -> SegmentAngles:
    """Raw (uncalibrated) sagittal pitch of one sensor, gyro and accel routes plus KF fusion."""
    s = trial.streams[placement]
    ts = trial.period
    acc = config.smooth(s.accel, trial.sample_rate)
    theta_a = accel_inclination(acc[:, 0], acc[:, 2])
    i0, i1 = trial.calibration_window
    theta_g = integrate_rate(sagittal_rate(s.gyro), ts, initial=float(np.mean(theta_a[i0:i1])))
    return SegmentAngles(theta_g, theta_a, kf_joint_angle(theta_g, theta_a, ts, config.kalman))


def joint_angles(trial: TrialRecording, offsets: Optional[CalibrationOffsets] = None,
                 config: KinematicsConfig = KinematicsConfig()) -> dict[JointId, JointAngleSeries]:
    """Sagittal angle of each joint: proximal minus distal segment, zeroed at standing."""
    if offsets is None:
        offsets = calibrate(trial)
    segs = {p: segment_angles(trial, p, config) for p in PLACEMENTS}
    out = {}
    for j in JOINTS:
        prox, dist = (segs[p] for p in JOINT_SEGMENTS[j])
        off = offsets.joint[j]
        angle = prox.kf.corrected - dist.kf.corrected - off
        out[j] = JointAngleSeries(
            joint=j,
            angle=TimeSeries(angle, trial.sample_rate, j.value),
            theta_g=prox.theta_g - dist.theta_g - off,
            theta_a=prox.theta_a - dist.theta_a - off,
            beta=prox.kf.bias - dist.kf.bias,
        )
    return out


def global_acceleration(trial: TrialRecording, placement: Placement, offsets: CalibrationOffsets,
                        config: KinematicsConfig = KinematicsConfig()) -> np.ndarray:
    """Gravity-free, 7 Hz low-passed acceleration of one sensor in the global frame, (N, 3)."""
    s = trial.streams[placement]
    q = estimate_orientation(
        s.gyro, s.accel, trial.period, q0=offsets.reference[placement],
        gain=config.orientation_gain, mag=s.mag if config.use_mag else None,
    )
    a = to_global_accel(q, s.accel, gravity=config.gravity)
    return config.smooth(a, trial.sample_rate)


class SignalId(NamedTuple):
    source: str                 # placement or joint name
    axis: Optional[str] = None  # global axis for accelerations, None for joints

    @property
    def name(self) -> str:
        return f"{self.source}_{self.axis}" if self.axis else self.source


SIGNALS: tuple[SignalId, ...] = tuple(
    [SignalId(p.value, ax) for p in PLACEMENTS for ax in AXES] + [SignalId(j.value) for j in JOINTS]
)


@dataclass(frozen=True, eq=False)
class TrialSignals:
    """The 27 analysis signals of a trial, restricted to the walking segment."""

    trial_id: str
    sample_rate: float
    signals: dict               # SignalId -> 1-D array
    joints: dict = field(default_factory=dict)  # JointId -> JointAngleSeries (full length)
    offsets: Optional[CalibrationOffsets] = None

    def __getitem__(self, key) -> np.ndarray:
        if isinstance(key, str):
            key = next(s for s in self.signals if s.name == key)
        return self.signals[key]


def preprocess_trial(trial: TrialRecording, offsets: Optional[CalibrationOffsets] = None,
                     config: KinematicsConfig = KinematicsConfig()) -> TrialSignals:
    if offsets is None:
        offsets = calibrate(trial)
    walk = trial.walking_slice
    signals = {}
    for p in PLACEMENTS:
        a = global_acceleration(trial, p, offsets, config)[walk]
        for k, ax in enumerate(AXES):
            signals[SignalId(p.value, ax)] = np.ascontiguousarray(a[:, k])
    joints = joint_angles(trial, offsets, config)
    for j in JOINTS:
        signals[SignalId(j.value)] = np.ascontiguousarray(joints[j].angle.values[walk])
    return TrialSignals(trial.trial_id, trial.sample_rate, signals, joints, offsets)
