"""Standing-phase calibration: the posture that defines 0 deg at every joint."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotStationary
from .model import JOINT_SEGMENTS, JOINTS, PLACEMENTS, TrialRecording
from .quaternion import from_two_vectors

GYRO_STILL_DPS = 5.0
MIN_STANDING_S = 1.0


@dataclass(frozen=True)
class CalibrationOffsets:
    reference: dict        # Placement -> (4,) tilt quaternion, sensor -> global
    segment: dict          # Placement -> sagittal inclination at standing, deg
    joint: dict            # JointId -> proximal minus distal standing angle, deg

    @classmethod
    def identity(cls) -> "CalibrationOffsets":
        return cls(
            {p: np.array([1.0, 0.0, 0.0, 0.0]) for p in PLACEMENTS},
            {p: 0.0 for p in PLACEMENTS},
            {j: 0.0 for j in JOINTS},
        )

    def to_dict(self) -> dict:
        return {
            "reference": {p.value: [float(v) for v in q] for p, q in self.reference.items()},
            "segment_deg": {p.value: float(v) for p, v in self.segment.items()},
            "joint_deg": {j.value: float(v) for j, v in self.joint.items()},
        }


def inclination_deg(anterior: float, vertical: float) -> float:
    return math.degrees(math.atan2(anterior, vertical))


def calibrate(trial: TrialRecording, gyro_threshold: float = GYRO_STILL_DPS,
              min_duration: float = MIN_STANDING_S) -> CalibrationOffsets:
    """Derive per-sensor references from the declared standing window.

    Raises NotStationary when the window is shorter than ``min_duration`` or
    any sensor turns faster than ``gyro_threshold`` deg/s inside it.
    """
    i0, i1 = trial.calibration_window
    if (i1 - i0) < min_duration * trial.sample_rate - 1e-9:
        raise NotStationary(
            f"calibration window holds {(i1 - i0) / trial.sample_rate:.2f} s; need {min_duration:g} s"
        )
    reference, segment = {}, {}
    for p in PLACEMENTS:
        s = trial.streams[p]
        rate = np.linalg.norm(s.gyro[i0:i1], axis=1)
        if np.any(rate >= gyro_threshold):
            k = i0 + int(np.argmax(rate))
            raise NotStationary(
                f"{p.value}: gyro magnitude {rate.max():.1f} deg/s at t={s.t[k]:.2f}s during standing"
            )
        a = s.accel[i0:i1].mean(axis=0)
        reference[p] = from_two_vectors(a, [0.0, 0.0, 1.0])
        segment[p] = inclination_deg(a[0], a[2])
    joint = {j: segment[JOINT_SEGMENTS[j][0]] - segment[JOINT_SEGMENTS[j][1]] for j in JOINTS}
    return CalibrationOffsets(reference, segment, joint)

