"""Domain types shared by every stage of the pipeline.

Arrays stored on the frozen dataclasses are marked read-only, so the objects
behave as immutable values and can be shared between threads.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Optional

import numpy as np

from .errors import SchemaError, SyncError, ValidationError

G_STANDARD = 9.81
ACCEL_RANGE = 16.0 * G_STANDARD  # m/s^2
GYRO_RANGE = 2000.0  # deg/s
MAG_RANGE = 1.3  # gauss
MAX_INTERPOLATED_GAP = 3  # samples


class Placement(str, enum.Enum):
    LeftFoot = "LeftFoot"
    RightFoot = "RightFoot"
    LeftShank = "LeftShank"
    RightShank = "RightShank"
    LeftThigh = "LeftThigh"
    RightThigh = "RightThigh"
    Pelvis = "Pelvis"


class JointId(str, enum.Enum):
    LeftHip = "LeftHip"
    RightHip = "RightHip"
    LeftKnee = "LeftKnee"
    RightKnee = "RightKnee"
    LeftAnkle = "LeftAnkle"
    RightAnkle = "RightAnkle"

    @property
    def segments(self) -> tuple[Placement, Placement]:
        """(proximal, distal) placements spanning the joint."""
        return JOINT_SEGMENTS[self]


JOINT_SEGMENTS = {
    JointId.LeftHip: (Placement.Pelvis, Placement.LeftThigh),
    JointId.RightHip: (Placement.Pelvis, Placement.RightThigh),
    JointId.LeftKnee: (Placement.LeftThigh, Placement.LeftShank),
    JointId.RightKnee: (Placement.RightThigh, Placement.RightShank),
    JointId.LeftAnkle: (Placement.LeftShank, Placement.LeftFoot),
    JointId.RightAnkle: (Placement.RightShank, Placement.RightFoot),
}

PLACEMENTS = tuple(Placement)
JOINTS = tuple(JointId)


class Group(str, enum.Enum):
    Patient = "Patient"
    Control = "Control"


class Gender(str, enum.Enum):
    Female = "female"
    Male = "male"
    Other = "other"
    Unknown = "unknown"


class ImuSample(NamedTuple):
    """One 9-axis reading. Units: s, m/s^2, deg/s, gauss."""

    t: float
    accel: np.ndarray
    gyro: np.ndarray
    mag: np.ndarray


@dataclass(frozen=True)
class SubjectMeta:
    id: str
    group: Group
    age: float
    weight: float
    gender: Gender = Gender.Unknown
    days_post_op: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "group", Group(self.group))
        object.__setattr__(self, "gender", Gender(self.gender))
        if (self.group is Group.Patient) != (self.days_post_op is not None):
            raise ValidationError(
                f"subject {self.id}: days_post_op must be given for patients and only for patients"
            )


@dataclass(frozen=True)
class TimeSeries:
    values: np.ndarray
    sample_rate: float
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))

    def __len__(self):
        return len(self.values)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SensorStream:
    """Samples of one IMU: t (N,), accel/gyro/mag (N, 3)."""

    t: np.ndarray
    accel: np.ndarray
    gyro: np.ndarray
    mag: np.ndarray

    def __post_init__(self):
        for name in ("t", "accel", "gyro", "mag"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n = len(self.t)
        if self.t.ndim != 1:
            raise ValidationError("timestamps must be one-dimensional")
        for name in ("accel", "gyro", "mag"):
            if getattr(self, name).shape != (n, 3):
                raise ValidationError(f"{name} must have shape ({n}, 3)")

    def __len__(self):
        return len(self.t)

    def __eq__(self, other):
        if not isinstance(other, SensorStream):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in ("t", "accel", "gyro", "mag")
        )

    def sample(self, i: int) -> ImuSample:
        return ImuSample(float(self.t[i]), self.accel[i], self.gyro[i], self.mag[i])

    def validate(self, placement: str = "") -> None:
        if len(self.t) > 1 and not np.all(np.diff(self.t) > 0):
            raise ValidationError(f"{placement}: timestamps are not strictly increasing")
        for name, limit in (("accel", ACCEL_RANGE), ("gyro", GYRO_RANGE), ("mag", MAG_RANGE)):
            a = getattr(self, name)
            if not np.all(np.isfinite(a)):
                raise ValidationError(f"{placement}: non-finite {name} values")
            if np.any(np.abs(a) > limit):
                raise ValidationError(f"{placement}: {name} exceeds full-scale range +/-{limit}")


@dataclass(frozen=True, eq=False)
class TrialRecording:
    subject: SubjectMeta
    streams: Mapping[Placement, SensorStream]
    sample_rate: float = 100.0
    calibration_window_s: tuple[float, float] = (0.0, 1.0)
    trial_id: str = ""

    def __post_init__(self):
        streams = {Placement(k): v for k, v in self.streams.items()}
        object.__setattr__(self, "streams", streams)
        object.__setattr__(self, "calibration_window_s", tuple(float(v) for v in self.calibration_window_s))
        self.validate()

    def validate(self) -> None:
        missing = [p.value for p in PLACEMENTS if p not in self.streams]
        if missing:
            raise SchemaError(f"missing placement(s): {', '.join(missing)}")
        if not self.sample_rate > 0:
            raise ValidationError("sample_rate must be positive")
        for p, s in self.streams.items():
            s.validate(p.value)
        lengths = {len(s) for s in self.streams.values()}
        if len(lengths) != 1:
            raise SyncError(f"streams have unequal lengths {sorted(lengths)}")
        period = 1.0 / self.sample_rate
        starts = [s.t[0] for s in self.streams.values()]
        if max(starts) - min(starts) >= period:
            raise SyncError("stream start times differ by one sample period or more")
        i0, i1 = self.calibration_window
        if i1 <= i0:
            raise ValidationError("calibration window is empty")
        if i1 >= len(self):
            raise ValidationError("calibration window leaves no walking data")

    def __len__(self):
        return len(next(iter(self.streams.values())))

    def __eq__(self, other):
        if not isinstance(other, TrialRecording):
            return NotImplemented
        return (
            self.subject == other.subject
            and self.sample_rate == other.sample_rate
            and self.calibration_window_s == other.calibration_window_s
            and self.streams.keys() == other.streams.keys()
            and all(self.streams[p] == other.streams[p] for p in self.streams)
        )

    @property
    def period(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def time(self) -> np.ndarray:
        return self.streams[Placement.Pelvis].t

    @property
    def calibration_window(self) -> tuple[int, int]:
        """Half-open sample index range [start, end) of the standing phase."""
        t = self.time
        start_s, end_s = self.calibration_window_s
        eps = 0.25 * self.period
        i0 = int(np.searchsorted(t, start_s - eps, side="left"))
        i1 = int(np.searchsorted(t, end_s - eps, side="left"))
        return i0, i1

    @property
    def walking_slice(self) -> slice:
        return slice(self.calibration_window[1], len(self))


def fill_gaps(stream: SensorStream, sample_rate: float, placement: str = "") -> SensorStream:
    """Linearly interpolate runs of at most MAX_INTERPOLATED_GAP missing samples."""
    t = stream.t
    if len(t) < 2:
        return stream
    period = 1.0 / sample_rate
    steps = np.diff(t) / period
    missing = np.rint(steps).astype(int) - 1
    missing[steps < 1.5] = 0
    if not missing.any():
        return stream
    worst = int(missing.max())
    if worst > MAX_INTERPOLATED_GAP:
        k = int(np.argmax(missing))
        raise SyncError(f"{placement}: gap of {worst} samples after t={t[k]:.3f}s exceeds {MAX_INTERPOLATED_GAP}")
    # indices of gap starts, then build the new time axis
    new_t = [t[:1]]
    for k in range(len(t) - 1):
        if missing[k]:
            new_t.append(t[k] + period * np.arange(1, missing[k] + 1))
        new_t.append(t[k + 1: k + 2])
    new_t = np.concatenate(new_t)
    cols = {}
    for name in ("accel", "gyro", "mag"):
        a = getattr(stream, name)
        cols[name] = np.column_stack([np.interp(new_t, t, a[:, j]) for j in range(3)])
    return SensorStream(new_t, cols["accel"], cols["gyro"], cols["mag"])


def synchronize(streams: Mapping[Placement, SensorStream], sample_rate: float) -> dict[Placement, SensorStream]:
    """Fill short gaps and trim all streams to a common, sample-aligned span.

    Streams already on a shared grid are returned untouched (bit for bit).
    Offsets above half a sample period between streams are rejected.
    """
    period = 1.0 / sample_rate
    filled = {p: fill_gaps(s, sample_rate, p.value) for p, s in streams.items()}
    for p, s in filled.items():
        if len(s) == 0:
            raise SchemaError(f"{p.value}: stream is empty")
    start = max(s.t[0] for s in filled.values())
    end = min(s.t[-1] for s in filled.values())
    out = {}
    for p, s in filled.items():
        keep = (s.t >= start - 0.5 * period) & (s.t <= end + 0.5 * period)
        if keep.all():
            out[p] = s
        else:
            out[p] = SensorStream(s.t[keep], s.accel[keep], s.gyro[keep], s.mag[keep])
    lengths = {len(s) for s in out.values()}
    if len(lengths) != 1:
        raise SyncError(f"streams cannot be aligned: lengths {sorted(lengths)} after trimming")
    times = np.stack([s.t for s in out.values()])
    if np.max(times.max(axis=0) - times.min(axis=0)) > 0.5 * period:
        raise SyncError("inter-stream timestamp offset exceeds half a sample period")
    return out
