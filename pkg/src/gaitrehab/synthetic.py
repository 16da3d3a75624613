"""Seeded generator of multi-IMU walking trials with analytic ground truth.

Kinematic model
---------------
Each body segment rotates only in the sagittal plane. A segment angle is the
backward tilt of the segment's up-axis, i.e. a rotation by that angle about the
subject's rightward axis (``-y`` with x anterior, y left, z up). Joint angles
are proximal minus distal segment angle, so knee flexion is positive.

Joint trajectories are 3-harmonic Fourier curves of the stride phase. The
sensor carries a fixed pitch mounting offset relative to its segment. From the
analytic sensor pitch ``alpha(t)``::

    gyro   = (0, -alpha_dot, 0) + bias + noise                      (deg/s)
    accel  = R_y(alpha) @ (a_motion + (0, 0, g)) + noise             (m/s^2)
    mag    = R_y(alpha) @ earth_field + noise                        (gauss)

``a_motion`` is a smooth periodic global-frame acceleration; translation is
not integrated. A standing phase with all joint angles at zero is prepended
and walking fades in over a short raised-cosine ramp.

Random numbers come from PCG64 streams spawned off one ``SeedSequence``, one
stream per sensor and channel, so every trial is reproducible bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .errors import InvalidProfile
from .io import CohortManifest, ManifestEntry, save_manifest, save_trial
from .model import (
    G_STANDARD,
    JOINT_SEGMENTS,
    JOINTS,
    PLACEMENTS,
    Gender,
    Group,
    JointId,
    Placement,
    SensorStream,
    SubjectMeta,
    TrialRecording,
)

# normalised (range 0..1) Fourier shapes: [a0, cos1, sin1, cos2, sin2, cos3, sin3]
KNEE_SHAPE = (0.3208, -0.035, -0.3609, -0.2442, 0.1178, 0.0009, 0.0539)
HIP_FLEXION_SHAPE = (0.5818, 0.4788, -0.0633, -0.091, -0.0526, 0.003, 0.0288)
ANKLE_SHAPE = (0.511, -0.0725, 0.2312, 0.0975, -0.2615, -0.0718, 0.0348)

EARTH_FIELD = np.array([0.2, 0.0, -0.4])  # gauss, global frame

# motion-acceleration scale per segment level
_SEGMENT_SCALE = {"Pelvis": 1.0, "Thigh": 1.2, "Shank": 1.5, "Foot": 2.0}

PARAMETERS = ("cadence", "knee_amp", "hip_amp", "ankle_amp", "stride_asymmetry", "accel_amp", "pelvis_amp")


def _fourier(coef, p):
    c = np.asarray(coef)
    w = 2.0 * np.pi * p
    val = np.full_like(p, c[0])
    der = np.zeros_like(p)
    for h in range(1, 4):
        a, b = c[2 * h - 1], c[2 * h]
        val += a * np.cos(h * w) + b * np.sin(h * w)
        der += 2.0 * np.pi * h * (-a * np.sin(h * w) + b * np.cos(h * w))
    return val, der


@dataclass(frozen=True)
class GaitProfile:
    cadence: float = 2.2                 # steps/s
    stride_asymmetry: float = 0.0        # left step longer by this fraction
    knee_amp: float = 60.0               # deg, peak flexion
    hip_amp: float = 40.0                # deg, range
    ankle_amp: float = 25.0              # deg, range
    pelvis_amp: float = 3.0              # deg
    accel_amp: float = 0.6               # m/s^2
    accel_noise: float = 0.05            # m/s^2
    gyro_noise: float = 0.2              # deg/s
    mag_noise: float = 0.002             # gauss
    gyro_bias: float = 0.0               # deg/s, per-axis std of the per-sensor bias
    mount_angles: Mapping[str, float] = field(default_factory=dict)  # deg pitch per placement
    group: Group = Group.Control
    recovery_day: Optional[int] = None
    seed: int = 0

    def validate(self) -> None:
        if not 0.5 <= self.cadence <= 3.0:
            raise InvalidProfile(f"cadence {self.cadence} outside [0.5, 3.0] steps/s")
        if not 0.0 <= self.knee_amp <= 75.0:
            raise InvalidProfile(f"knee amplitude {self.knee_amp} outside [0, 75] deg")
        if not 0.0 <= self.hip_amp <= 70.0 or not 0.0 <= self.ankle_amp <= 50.0:
            raise InvalidProfile("hip/ankle amplitude outside physiological range")
        if not 0.0 <= self.stride_asymmetry < 0.5:
            raise InvalidProfile("stride_asymmetry must be in [0, 0.5)")
        for name in ("pelvis_amp", "accel_amp", "accel_noise", "gyro_noise", "mag_noise", "gyro_bias"):
            if getattr(self, name) < 0:
                raise InvalidProfile(f"{name} must be non-negative")
        for p, m in self.mount_angles.items():
            Placement(p)
            if abs(m) >= 45.0:
                raise InvalidProfile(f"mount angle {m} for {p} must be below 45 deg")
        if (Group(self.group) is Group.Patient) != (self.recovery_day is not None):
            raise InvalidProfile("recovery_day is required for patients and only for patients")

    @property
    def stride_period(self) -> float:
        return 2.0 / self.cadence

    @property
    def step_periods(self) -> tuple[float, float]:
        """(left step, right step) durations in seconds."""
        T = self.stride_period
        a = self.stride_asymmetry
        return T * (1.0 + a) / (2.0 + a), T / (2.0 + a)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    t: np.ndarray
    walk_start: int                              # first sample after the standing phase
    segment_angles: dict                         # Placement -> deg (without mounting)
    joint_angles: dict                           # JointId -> deg
    motion_accel: dict                           # Placement -> (N, 3) global m/s^2
    gyro_bias: dict                              # Placement -> (3,) deg/s
    mount_angles: dict                           # Placement -> deg
    step_period: float                           # shorter step, s
    stride_period: float


def _phase(t_walk, profile: GaitProfile):
    """Left-leg stride phase in [0, 1) and its time derivative (piecewise constant)."""
    T = profile.stride_period
    tl, tr = profile.step_periods
    tau = np.mod(t_walk, T)
    first = tau < tl
    p = np.where(first, 0.5 * tau / tl, 0.5 + 0.5 * (tau - tl) / tr)
    dp = np.where(first, 0.5 / tl, 0.5 / tr)
    return p, dp


def _envelope(t, start, ramp):
    u = np.clip((t - start) / ramp, 0.0, 1.0) if ramp > 0 else (t >= start).astype(float)
    e = 0.5 * (1.0 - np.cos(np.pi * u))
    de = np.where((u > 0) & (u < 1), 0.5 * np.pi * np.sin(np.pi * u) / max(ramp, 1e-12), 0.0)
    return e, de


def _joint_curves(p_own, dp, profile: GaitProfile):
    """Joint angle (deg) and d/dt for one leg, as a function of its own stride phase."""
    k, dk = _fourier(KNEE_SHAPE, p_own)
    h, dh = _fourier(HIP_FLEXION_SHAPE, p_own)
    a, da = _fourier(ANKLE_SHAPE, p_own)
    knee = profile.knee_amp * k, profile.knee_amp * dk * dp
    # proximal-minus-distal hip angle is minus the flexion curve
    hip = -profile.hip_amp * (h - 0.5), -profile.hip_amp * dh * dp
    ankle = profile.ankle_amp * (a - 0.5), profile.ankle_amp * da * dp
    return hip, knee, ankle


def _level(p: Placement) -> str:
    for key in _SEGMENT_SCALE:
        if p.value.endswith(key):
            return key
    raise AssertionError(p)


def _motion_accel(p: Placement, p_left, profile: GaitProfile):
    """Global-frame motion acceleration (anterior, lateral, vertical) for one sensor."""
    s = _SEGMENT_SCALE[_level(p)] * profile.accel_amp
    ps = np.mod(2.0 * p_left, 1.0)  # step phase, restarts at each heel strike
    w = 2.0 * np.pi
    ant = 0.5 * np.sin(w * ps + 0.4)
    vert = 0.8 * np.cos(w * ps) + 0.3 * np.sin(2 * w * ps)
    lat = 0.3 * np.sin(w * p_left)
    if p is not Placement.Pelvis:
        own = p_left if p.value.startswith("Left") else np.mod(p_left - 0.5, 1.0)
        ant = ant + 0.8 * np.sin(w * own)
        vert = vert + 0.5 * np.cos(w * own + 0.3)
        lat = lat + 0.2 * np.sin(w * own + 1.0)
    return s * np.column_stack([ant, lat, vert])


def _rotate_pitch(alpha_deg, v):
    """R_y(alpha) applied row-wise: maps global vectors into the sensor frame."""
    a = np.radians(alpha_deg)
    c, s = np.cos(a), np.sin(a)
    x, y, z = v[:, 0], v[:, 1], v[:, 2]
    return np.column_stack([x * c + z * s, y, -x * s + z * c])


def generate_trial(profile: GaitProfile, duration: float = 10.0, subject: Optional[SubjectMeta] = None,
                   standing_s: float = 2.0, ramp_s: float = 0.5, fs: float = 100.0,
                   trial_id: str = "", gravity: float = G_STANDARD) -> tuple[TrialRecording, GroundTruth]:
    """Synthesize one trial: ``standing_s`` of quiet standing then ``duration`` of walking."""
    profile.validate()
    if duration <= 0 or standing_s < 1.0:
        raise InvalidProfile("duration must be positive and standing phase at least 1 s")
    n = int(round((standing_s + duration) * fs))
    t = np.arange(n) / fs
    walk_start = int(round(standing_s * fs))
    t_walk = np.maximum(t - standing_s, 0.0)

    p_left, dp = _phase(t_walk, profile)
    p_right = np.mod(p_left - 0.5, 1.0)
    env, denv = _envelope(t, standing_s, ramp_s)

    def faded(curve):
        val, rate = curve
        return env * val, denv * val + env * rate

    w = 2.0 * np.pi
    pel = profile.pelvis_amp * np.sin(2 * w * p_left), profile.pelvis_amp * 2 * w * np.cos(2 * w * p_left) * dp
    pelvis = faded(pel)
    left = [faded(c) for c in _joint_curves(p_left, dp, profile)]
    right = [faded(c) for c in _joint_curves(p_right, dp, profile)]

    joints = {
        JointId.LeftHip: left[0], JointId.LeftKnee: left[1], JointId.LeftAnkle: left[2],
        JointId.RightHip: right[0], JointId.RightKnee: right[1], JointId.RightAnkle: right[2],
    }
    seg = {Placement.Pelvis: pelvis}
    for side in ("Left", "Right"):
        hip, knee, ankle = (joints[JointId(side + j)] for j in ("Hip", "Knee", "Ankle"))
        thigh = seg[Placement.Pelvis][0] - hip[0], seg[Placement.Pelvis][1] - hip[1]
        shank = thigh[0] - knee[0], thigh[1] - knee[1]
        foot = shank[0] - ankle[0], shank[1] - ankle[1]
        seg[Placement(side + "Thigh")] = thigh
        seg[Placement(side + "Shank")] = shank
        seg[Placement(side + "Foot")] = foot

    ss = np.random.SeedSequence(profile.seed)
    children = ss.spawn(len(PLACEMENTS))
    streams, motion, biases, mounts = {}, {}, {}, {}
    for placement, child in zip(PLACEMENTS, children):
        rng_bias, rng_acc, rng_gyr, rng_mag = (np.random.Generator(np.random.PCG64(c)) for c in child.spawn(4))
        mount = float(profile.mount_angles.get(placement.value, 0.0))
        angle, rate = seg[placement]
        alpha = angle + mount
        a_motion = _motion_accel(placement, p_left, profile) * env[:, None]
        specific = a_motion + np.array([0.0, 0.0, gravity])
        accel = _rotate_pitch(alpha, specific) + rng_acc.normal(0.0, profile.accel_noise, (n, 3))
        bias = rng_bias.normal(0.0, profile.gyro_bias, 3) if profile.gyro_bias > 0 else np.zeros(3)
        gyro = np.zeros((n, 3))
        gyro[:, 1] = -rate
        gyro += bias + rng_gyr.normal(0.0, profile.gyro_noise, (n, 3))
        mag = _rotate_pitch(alpha, np.tile(EARTH_FIELD, (n, 1))) + rng_mag.normal(0.0, profile.mag_noise, (n, 3))
        streams[placement] = SensorStream(t, accel, gyro, mag)
        motion[placement] = a_motion
        biases[placement] = bias
        mounts[placement] = mount

    if subject is None:
        group = Group(profile.group)
        subject = SubjectMeta(
            id=f"S{profile.seed}", group=group, age=65.0 if group is Group.Patient else 33.0,
            weight=75.0, gender=Gender.Unknown, days_post_op=profile.recovery_day,
        )
    trial = TrialRecording(subject, streams, fs, (0.0, standing_s), trial_id=trial_id)
    truth = GroundTruth(
        t=t,
        walk_start=walk_start,
        segment_angles={p: seg[p][0] for p in PLACEMENTS},
        joint_angles={j: joints[j][0] for j in JOINTS},
        motion_accel=motion,
        gyro_bias=biases,
        mount_angles=mounts,
        step_period=min(profile.step_periods),
        stride_period=profile.stride_period,
    )
    return trial, truth


# --- cohorts -----------------------------------------------------------------

@dataclass(frozen=True)
class Population:
    """Control-group parameter means and between-subject standard deviations."""

    mean: Mapping[str, float] = field(default_factory=lambda: {
        "cadence": 2.4, "knee_amp": 60.0, "hip_amp": 40.0, "ankle_amp": 25.0,
        "stride_asymmetry": 0.02, "accel_amp": 0.6, "pelvis_amp": 3.0,
    })
    sd: Mapping[str, float] = field(default_factory=lambda: {
        "cadence": 0.04, "knee_amp": 3.0, "hip_amp": 3.0, "ankle_amp": 2.0,
        "stride_asymmetry": 0.01, "accel_amp": 0.05, "pelvis_amp": 0.4,
    })
    # direction in which an operation shifts each parameter
    patient_sign: Mapping[str, float] = field(default_factory=lambda: {
        "cadence": -1.0, "knee_amp": -1.0, "hip_amp": -1.0, "ankle_amp": -1.0,
        "stride_asymmetry": 1.0, "accel_amp": -1.0, "pelvis_amp": 1.0,
    })
    trial_sd_fraction: float = 0.25      # within-subject jitter relative to sd
    full_recovery_days: float = 365.0
    min_cadence: float = 2.05            # keeps stride below 1 s for the autocorrelation windows


EASY_SEPARATION = {"cadence": 4.0, "knee_amp": 4.0, "hip_amp": 4.0, "ankle_amp": 4.0, "stride_asymmetry": 4.0}
RECOVERY_SEPARATION = {"cadence": 4.0, "knee_amp": 4.0, "hip_amp": 4.0, "stride_asymmetry": 4.0}


@dataclass(frozen=True)
class SubjectPlan:
    meta: SubjectMeta
    split: str
    profiles: tuple                      # one GaitProfile per trial


def _clip_params(params: dict, pop: Population) -> dict:
    params["cadence"] = min(max(params["cadence"], pop.min_cadence), 3.0)
    params["knee_amp"] = min(max(params["knee_amp"], 5.0), 75.0)
    params["hip_amp"] = min(max(params["hip_amp"], 5.0), 70.0)
    params["ankle_amp"] = min(max(params["ankle_amp"], 2.0), 50.0)
    params["stride_asymmetry"] = min(max(params["stride_asymmetry"], 0.0), 0.3)
    for k in ("accel_amp", "pelvis_amp"):
        params[k] = max(params[k], 0.0)
    return params


def plan_cohort(n_patients: int, n_controls: int, separation: Mapping[str, float], seed: int,
                trials_per_subject: int = 7, n_test_patients: int = 0, n_test_controls: int = 0,
                recovery_days: Optional[tuple] = None, recovery_noise: Optional[float] = None,
                population: Population = Population(), gyro_bias: float = 0.3,
                spread_split: Optional[str] = None) -> list[SubjectPlan]:
    """Draw per-subject, per-trial gait profiles.

    ``separation`` gives the patient shift of each parameter in units of its
    between-subject sd. Patients partially recover: their parameters move from
    the patient mean toward the control mean by ``day / full_recovery_days``.
    ``recovery_days`` = (first, last) spreads patients evenly over that range,
    either all of them or only those of ``spread_split`` ("train" or "test");
    the others draw their day from [14, 60]. With ``recovery_noise`` set, the
    between-subject spread of patients is replaced by noise of that fraction of
    the control-patient parameter range.
    """
    if n_patients < 2 or n_controls < 2:
        raise InvalidProfile("need at least 2 subjects per group")
    if n_test_patients > n_patients or n_test_controls > n_controls:
        raise InvalidProfile("test split larger than group")
    if spread_split not in (None, "train", "test"):
        raise InvalidProfile(f"spread_split must be train, test or None, got {spread_split!r}")
    unknown = set(separation) - set(PARAMETERS)
    if unknown:
        raise InvalidProfile(f"unknown separation parameter(s): {sorted(unknown)}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    plans = []
    for group, count, n_test in ((Group.Patient, n_patients, n_test_patients),
                                 (Group.Control, n_controls, n_test_controls)):
        if group is Group.Patient:
            days = rng.integers(14, 61, size=count)
            if recovery_days is not None:
                lo = 0 if spread_split is None else (count - n_test if spread_split == "test" else 0)
                hi = count if spread_split in (None, "test") else count - n_test
                days[lo:hi] = np.rint(np.linspace(recovery_days[0], recovery_days[1], hi - lo)).astype(int)
        else:
            days = [None] * count
        for i in range(count):
            sid = f"{'P' if group is Group.Patient else 'C'}{i + 1:02d}"
            split = "train" if i < count - n_test else "test"
            day = None if days[i] is None else int(days[i])
            base = {}
            for k in PARAMETERS:
                shift = population.patient_sign[k] * separation.get(k, 0.0) * population.sd[k]
                mu = population.mean[k]
                if group is Group.Patient:
                    frac = min(day / population.full_recovery_days, 1.0)
                    mu = mu + (1.0 - frac) * shift
                    if recovery_noise is not None:
                        base[k] = mu + rng.normal(0.0, recovery_noise * abs(shift)) if shift else mu
                        continue
                base[k] = rng.normal(mu, population.sd[k])
            mounts = {p.value: float(rng.uniform(-8.0, 8.0)) for p in PLACEMENTS}
            age = rng.normal(65.0, 5.0) if group is Group.Patient else rng.normal(33.0, 6.0)
            meta = SubjectMeta(
                id=sid, group=group, age=round(float(age), 1), weight=round(float(rng.normal(75.0, 10.0)), 1),
                gender=Gender.Female if rng.random() < 0.5 else Gender.Male, days_post_op=day,
            )
            profiles = []
            for _ in range(trials_per_subject):
                params = {k: base[k] + rng.normal(0.0, population.trial_sd_fraction * population.sd[k])
                          for k in PARAMETERS}
                params = _clip_params(params, population)
                profiles.append(GaitProfile(
                    **params, gyro_bias=gyro_bias, mount_angles=mounts, group=group,
                    recovery_day=day, seed=int(rng.integers(0, 2**63 - 1)),
                ))
            plans.append(SubjectPlan(meta, split, tuple(profiles)))
    return plans


def iter_cohort_trials(plans, duration: float = 10.0):
    """Yield (plan, trial index, TrialRecording, GroundTruth) for every planned trial."""
    for plan in plans:
        for k, prof in enumerate(plan.profiles):
            trial, truth = generate_trial(prof, duration, subject=plan.meta, trial_id=f"{plan.meta.id}_T{k + 1}")
            yield plan, k, trial, truth


def generate_cohort(out_dir, n_patients: int, n_controls: int, separation: Mapping[str, float], seed: int,
                    duration: float = 10.0, **plan_kwargs) -> tuple[CohortManifest, Path]:
    """Write trials, sidecars and ``manifest.json`` under ``out_dir``."""
    plans = plan_cohort(n_patients, n_controls, separation, seed, **plan_kwargs)
    return write_cohort(out_dir, plans, duration)


def write_cohort(out_dir, plans, duration: float = 10.0) -> tuple[CohortManifest, Path]:
    out_dir = Path(out_dir)
    entries = []
    for plan, _, trial, _ in iter_cohort_trials(plans, duration):
        path = out_dir / "trials" / f"{trial.trial_id}.csv"
        side = save_trial(trial, path)
        entries.append(ManifestEntry(path, side, plan.split))
    manifest = CohortManifest(tuple(entries), out_dir)
    manifest_path = out_dir / "manifest.json"
    save_manifest(manifest, manifest_path)
    return manifest, manifest_path


# --- standard fixtures ----------------------------------------------------------

# Patients in the easy and null cohorts do not recover, so the planted shift is
# exactly the declared effect size.
_NO_RECOVERY = Population(full_recovery_days=math.inf)

FIXTURES = {
    "easy": dict(n_patients=15, n_controls=15, separation=EASY_SEPARATION, n_test_patients=7,
                 n_test_controls=7, population=_NO_RECOVERY),
    "null": dict(n_patients=15, n_controls=15, separation={}, n_test_patients=7, n_test_controls=7,
                 population=_NO_RECOVERY),
    # 20+20 early post-op patients and controls train the grading (more subjects than
    # selected features, so the within-class scatter is full rank); 12 further
    # patients are followed over the year
    "recovery": dict(n_patients=32, n_controls=27, separation=RECOVERY_SEPARATION, n_test_patients=12,
                     n_test_controls=7, recovery_days=(14, 350), recovery_noise=0.1, spread_split="test"),
}


def fixture_plans(kind: str, seed: int = 0, **overrides) -> list[SubjectPlan]:
    """Subject plans of a named standard cohort."""
    try:
        kwargs = dict(FIXTURES[kind])
    except KeyError:
        raise InvalidProfile(f"unknown fixture {kind!r}; choose from {', '.join(FIXTURES)}") from None
    kwargs.update(overrides)
    return plan_cohort(seed=seed, **kwargs)


# --- feature-level fixtures ------------------------------------------------------

def planted_feature_matrix(n_per_group: int, n_features: int, planted: Mapping[int, float], seed: int):
    """Gaussian feature matrix whose columns in ``planted`` differ between groups.

    ``planted`` maps column index to the control-minus-patient mean shift in
    units of the within-group sd. Returns (X, labels) with labels 'Patient' /
    'Control', patients first.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    X = rng.normal(size=(2 * n_per_group, n_features))
    for col, delta in planted.items():
        X[n_per_group:, col] += delta
    labels = [Group.Patient] * n_per_group + [Group.Control] * n_per_group
    return X, labels


def with_profile(profile: GaitProfile, **changes) -> GaitProfile:
    return replace(profile, **changes)


__all__ = [
    "GaitProfile", "GroundTruth", "Population", "SubjectPlan", "EASY_SEPARATION", "RECOVERY_SEPARATION",
    "generate_trial", "plan_cohort", "FIXTURES", "fixture_plans", "write_cohort", "iter_cohort_trials", "generate_cohort", "planted_feature_matrix",
    "with_profile", "JOINT_SEGMENTS",
]
