"""The nine per-signal gait features and the 243-element trial vector.

Definitions used here:

* MI: root mean square.
* PAF: skewness (third standardised moment), a symmetry index.
* StepPeriod / StridePeriod: lags of autocorrelation peaks (unbiased estimate,
  normalised by lag 0). Step is the first peak >= 0.2 in [0.3, 1.0] s, stride
  the first such peak after it in [0.6, 2.0] s.
* Regularity: autocorrelation at the stride lag, clamped to [0, 1].
* APC: power in 0.5-5 Hz from a Hann periodogram (nfft = next power of two).
* SE: Shannon entropy of the normalised periodogram over log(#bins).
* SMNR: dB ratio of power at the stride fundamental and its first four
  harmonics (+/- two frequency-resolution bins, the Hann main lobe) to the
  rest of the 0.5-5 Hz band.
* WE: Shannon entropy of mean coefficient power across the six bands of a
  5-level db4 wavelet decomposition.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
import pywt

from .errors import (
    EmptySignal,
    FeatureExtractionError,
    GaitError,
    NoPeriodicity,
    SignalTooShort,
    WindowTooLong,
    ZeroVariance,
)
from .kinematics import SIGNALS, SignalId, TrialSignals

FEATURES = ("MI", "PAF", "StepPeriod", "StridePeriod", "Regularity", "APC", "SE", "SMNR", "WE")

STEP_RANGE_S = (0.3, 1.0)
STRIDE_RANGE_S = (0.6, 2.0)
MIN_PEAK = 0.2
BAND_HZ = (0.5, 5.0)
N_HARMONICS = 5          # fundamental plus four harmonics
HARMONIC_HALF_WIDTH = 2  # resolution bins, the Hann main-lobe half width
WAVELET = "db4"
WAVELET_LEVELS = 5
MIN_WAVELET_LENGTH = 64


def feature_names(signals=SIGNALS) -> list[str]:
    return [f"{s.name}_{f}" for s in signals for f in FEATURES]


FEATURE_NAMES = tuple(feature_names())


def _as_signal(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise EmptySignal("signal is empty")
    return x


# --- time domain -------------------------------------------------------------

def movement_intensity(x) -> float:
    x = _as_signal(x)
    return float(np.sqrt(np.mean(x * x)))


def paf(x) -> float:
    x = _as_signal(x)
    d = x - x.mean()
    m2 = np.mean(d * d)
    if m2 <= 1e-24 * max(np.mean(x * x), 1e-300):
        raise ZeroVariance("signal is constant")
    return float(np.mean(d ** 3) / m2 ** 1.5)


def autocorrelation(x, max_lag: Optional[int] = None) -> np.ndarray:
    """Unbiased autocorrelation of the demeaned signal, normalised so r[0] = 1."""
    x = _as_signal(x)
    n = len(x)
    max_lag = n - 1 if max_lag is None else min(max_lag, n - 1)
    d = x - x.mean()
    e0 = float(np.dot(d, d))
    if e0 <= 0.0:
        raise ZeroVariance("signal is constant")
    nfft = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(d, nfft)
    acov = np.fft.irfft(spec * np.conj(spec), nfft)[: max_lag + 1]
    lags = np.arange(max_lag + 1)
    return (acov / (n - lags)) / (e0 / n)


def _peaks(r: np.ndarray, lo: int, hi: int, after: int = 0) -> list[int]:
    """Lags in [lo, hi] that are local maxima over +/-2 samples with r >= MIN_PEAK."""
    out = []
    for k in range(max(lo, after + 1, 2), min(hi, len(r) - 3) + 1):
        v = r[k]
        if v < MIN_PEAK:
            continue
        if v > r[k - 1] and v >= r[k + 1] and v >= r[k - 2] and v >= r[k + 2]:
            out.append(k)
    return out


@dataclass(frozen=True)
class Periodicity:
    step_lag: int
    stride_lag: int
    r: np.ndarray
    fs: float

    @property
    def step_period(self) -> float:
        return self.step_lag / self.fs

    @property
    def stride_period(self) -> float:
        return self.stride_lag / self.fs


def periodicity(x, fs: float) -> Periodicity:
    x = _as_signal(x)
    max_lag = int(math.floor(STRIDE_RANGE_S[1] * fs)) + 3
    try:
        r = autocorrelation(x, max_lag)
    except ZeroVariance:
        raise NoPeriodicity("constant signal has no periodicity") from None
    lo, hi = math.ceil(STEP_RANGE_S[0] * fs - 1e-9), math.floor(STEP_RANGE_S[1] * fs + 1e-9)
    steps = _peaks(r, lo, hi)
    if not steps:
        raise NoPeriodicity(f"no autocorrelation peak >= {MIN_PEAK} in {STEP_RANGE_S} s")
    step = steps[0]
    lo, hi = math.ceil(STRIDE_RANGE_S[0] * fs - 1e-9), math.floor(STRIDE_RANGE_S[1] * fs + 1e-9)
    strides = _peaks(r, lo, hi, after=step)
    if not strides:
        raise NoPeriodicity(f"no stride autocorrelation peak >= {MIN_PEAK} in {STRIDE_RANGE_S} s")
    return Periodicity(step, strides[0], r, fs)


def step_period(x, fs: float) -> float:
    return periodicity(x, fs).step_period


def stride_period(x, fs: float) -> float:
    return periodicity(x, fs).stride_period


def regularity(x, fs: float, lag: Optional[int] = None) -> float:
    """Autocorrelation at the stride lag (or a forced ``lag`` in samples), clamped to [0, 1]."""
    if lag is None:
        per = periodicity(x, fs)
        value = per.r[per.stride_lag]
    else:
        value = autocorrelation(x, lag)[lag]
    return float(min(max(value, 0.0), 1.0))


# --- frequency domain ---------------------------------------------------------

def periodogram(x, fs: float) -> tuple[np.ndarray, np.ndarray]:
    """One-sided Hann periodogram (density, units^2/Hz) with nfft = next power of two."""
    x = _as_signal(x)
    n = len(x)
    nfft = 1 << (n - 1).bit_length()
    w = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
    X = np.fft.rfft((x - x.mean()) * w, nfft)
    p = (X.real ** 2 + X.imag ** 2) / (fs * np.dot(w, w))
    if nfft % 2 == 0:
        p[1:-1] *= 2.0
    else:
        p[1:] *= 2.0
    return np.fft.rfftfreq(nfft, 1.0 / fs), p


def _band(f: np.ndarray) -> np.ndarray:
    return (f >= BAND_HZ[0]) & (f <= BAND_HZ[1])


def apc(x, fs: float) -> float:
    f, p = periodogram(x, fs)
    return float(np.sum(p[_band(f)]) * (f[1] - f[0]))


def spectral_entropy(x, fs: float) -> float:
    _, p = periodogram(x, fs)
    total = float(np.sum(p))
    if total <= 0.0:
        raise ZeroVariance("signal is constant")
    q = p[p > 0] / total
    return float(-np.sum(q * np.log(q)) / math.log(len(p)))


def smnr(x, fs: float, stride_s: Optional[float] = None) -> float:
    x = _as_signal(x)
    if stride_s is None:
        stride_s = periodicity(x, fs).stride_period
    f, p = periodogram(x, fs)
    resolution = fs / len(x)
    f0 = 1.0 / stride_s
    harmonic = np.zeros(len(f), dtype=bool)
    for h in range(1, N_HARMONICS + 1):
        harmonic |= np.abs(f - h * f0) <= HARMONIC_HALF_WIDTH * resolution
    band = _band(f)
    sig = float(np.sum(p[band & harmonic]))
    rest = float(np.sum(p[band & ~harmonic]))
    floor = 1e-12 * (sig + rest) if (sig + rest) > 0 else 1e-300
    return 10.0 * math.log10(max(sig, floor) / max(rest, floor))


# --- time-frequency -------------------------------------------------------------

def wavelet_band_powers(x) -> np.ndarray:
    x = _as_signal(x)
    if len(x) < MIN_WAVELET_LENGTH:
        raise SignalTooShort(f"wavelet energy needs >= {MIN_WAVELET_LENGTH} samples, got {len(x)}")
    with warnings.catch_warnings():
        # short windows trip pywt's level warning; periodization makes the boundary exact anyway
        warnings.simplefilter("ignore", UserWarning)
        coeffs = pywt.wavedec(np.array(x), WAVELET, mode="periodization", level=WAVELET_LEVELS)
    return np.array([np.mean(c * c) for c in coeffs])


def wavelet_energy(x) -> float:
    e = wavelet_band_powers(x)
    total = float(e.sum())
    if total <= 0.0:
        return 0.0
    q = e[e > 0] / total
    return float(max(-np.sum(q * np.log(q)), 0.0))


# --- per-signal and per-trial extraction ------------------------------------------

def signal_features(x, fs: float, strict: bool = True) -> tuple[dict, dict]:
    """All nine features of one signal.

    Returns ``(values, errors)``. With ``strict`` the first failure is raised;
    otherwise failed features are NaN and their exceptions collected.
    """
    x = _as_signal(x)
    values: dict[str, float] = {}
    errors: dict[str, GaitError] = {}

    def run(name, fn):
        try:
            values[name] = float(fn())
        except GaitError as exc:
            if strict:
                raise
            values[name] = float("nan")
            errors[name] = exc

    run("MI", lambda: movement_intensity(x))
    run("PAF", lambda: paf(x))
    per = None
    try:
        per = periodicity(x, fs)
    except GaitError as exc:
        if strict:
            raise
        for name in ("StepPeriod", "StridePeriod", "Regularity"):
            values[name] = float("nan")
            errors[name] = exc
    if per is not None:
        values["StepPeriod"] = per.step_period
        values["StridePeriod"] = per.stride_period
        values["Regularity"] = float(min(max(per.r[per.stride_lag], 0.0), 1.0))
    run("APC", lambda: apc(x, fs))
    run("SE", lambda: spectral_entropy(x, fs))
    if per is not None:
        run("SMNR", lambda: smnr(x, fs, per.stride_period))
    else:
        values["SMNR"] = float("nan")
        errors["SMNR"] = errors["StepPeriod"]
    run("WE", lambda: wavelet_energy(x))
    for name, v in values.items():
        if not math.isfinite(v) and name not in errors:
            exc = ZeroVariance(f"{name} is not finite")
            if strict:
                raise exc
            errors[name] = exc
    return {f: values[f] for f in FEATURES}, errors


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray                     # (243,) in FEATURE_NAMES order
    trial_id: str = ""
    errors: dict = field(default_factory=dict)   # column name -> exception

    def __post_init__(self):
        a = np.array(self.values, dtype=float)
        a.setflags(write=False)
        object.__setattr__(self, "values", a)

    @property
    def ok(self) -> bool:
        return not self.errors

    def as_dict(self) -> dict:
        return dict(zip(FEATURE_NAMES, self.values.tolist()))

    def __getitem__(self, key) -> float:
        if isinstance(key, tuple):
            sig, feat = key
            name = sig.name if isinstance(sig, SignalId) else str(sig)
            key = f"{name}_{feat}"
        return float(self.values[FEATURE_NAMES.index(key)])

    def __len__(self):
        return len(self.values)


def extract_features(signals, fs: Optional[float] = None, strict: bool = True) -> FeatureVector:
    """Compute the 27 x 9 feature vector of a trial.

    ``signals`` is a TrialSignals or a mapping SignalId -> array. With
    ``strict`` any failing feature raises FeatureExtractionError listing every
    failure; otherwise the vector carries NaNs plus an ``errors`` map.
    """
    trial_id = ""
    if isinstance(signals, TrialSignals):
        fs = signals.sample_rate if fs is None else fs
        trial_id = signals.trial_id
        signals = signals.signals
    if fs is None:
        raise ValueError("sample rate required")
    missing = [s.name for s in SIGNALS if s not in signals]
    if missing:
        raise FeatureExtractionError({m: KeyError(m) for m in missing}, trial_id)
    lengths = {len(signals[s]) for s in SIGNALS}
    if len(lengths) != 1:
        raise FeatureExtractionError({"length": ValueError(f"signal lengths differ: {sorted(lengths)}")}, trial_id)
    out = []
    failures = {}
    for s in SIGNALS:
        vals, errs = signal_features(signals[s], fs, strict=False)
        out.extend(vals[f] for f in FEATURES)
        failures.update({f"{s.name}_{f}": e for f, e in errs.items()})
    if failures and strict:
        raise FeatureExtractionError(failures, trial_id)
    return FeatureVector(np.array(out), trial_id, failures)


def window_count(n: int, window: int, hop: int) -> int:
    return (n - window) // hop + 1


def windowed_features(x, fs: float, window: int, hop: int) -> list[dict]:
    """Features over a sliding window of ``window`` samples advanced by ``hop``.

    Each entry is ``{"window": i, "start": sample, **features}``; features that
    cannot be computed inside a window are NaN.
    """
    x = _as_signal(x)
    if window > len(x):
        raise WindowTooLong(f"window {window} exceeds signal length {len(x)}")
    if window < 1 or hop < 1:
        raise ValueError("window and hop must be >= 1")
    out = []
    for i in range(window_count(len(x), window, hop)):
        start = i * hop
        vals, _ = signal_features(x[start:start + window], fs, strict=False)
        out.append({"window": i, "start": start, **vals})
    return out


def signals_from_mapping(mapping: Mapping[str, np.ndarray]) -> dict:
    """Key a name -> array mapping by SignalId."""
    by_name = {s.name: s for s in SIGNALS}
    return {by_name[k]: np.asarray(v, dtype=float) for k, v in mapping.items()}
