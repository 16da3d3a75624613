import math

import numpy as np
import pytest

import oracles
from gaitrehab.errors import EmptySignal, FeatureExtractionError, NoPeriodicity, SignalTooShort, WindowTooLong, ZeroVariance
from gaitrehab.features import (
    FEATURE_NAMES, FEATURES, apc, autocorrelation, extract_features, movement_intensity, paf, periodicity,
    periodogram, regularity, signal_features, smnr, spectral_entropy, wavelet_band_powers, wavelet_energy,
    windowed_features,
)
from gaitrehab.kinematics import SIGNALS

FS = 100.0


@pytest.fixture(scope="module")
def signals():
    rng = np.random.default_rng(2024)
    return [oracles.gait_like(rng)[0] for _ in range(20)]


def test_names():
    assert len(FEATURE_NAMES) == 243 == len(set(FEATURE_NAMES))
    assert FEATURE_NAMES[0] == f"{SIGNALS[0].name}_MI"
    assert FEATURE_NAMES[-1] == f"{SIGNALS[-1].name}_WE"


def test_time_domain_oracles(signals):
    for x in signals:
        assert movement_intensity(x) == pytest.approx(oracles.rms(x), rel=1e-12)
        assert paf(x) == pytest.approx(oracles.skewness(x), rel=1e-9)


def test_autocorrelation_oracle(signals):
    for x in signals[:5]:
        np.testing.assert_allclose(autocorrelation(x, 203), oracles.acf(x, 203), rtol=1e-9, atol=1e-12)


def test_periodicity_oracle(signals):
    for x in signals:
        step, stride, r = oracles.gait_periods(x, FS)
        per = periodicity(x, FS)
        assert (per.step_lag, per.stride_lag) == (step, stride)
        assert regularity(x, FS) == pytest.approx(min(max(r[stride], 0), 1), rel=1e-9)


def test_periodogram_oracle(signals):
    for x in signals[:5]:
        f, p = periodogram(x, FS)
        fo, po = oracles.hann_psd(x, FS)
        np.testing.assert_allclose(f, fo, rtol=1e-12)
        np.testing.assert_allclose(p, po, rtol=1e-8, atol=1e-12 * po.max())


def test_periodogram_parseval():
    # density integrates to the mean power of the windowed signal
    rng = np.random.default_rng(0)
    x = rng.normal(size=1024)
    f, p = periodogram(x, FS)
    w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(1024) / 1024)
    d = (x - x.mean()) * w
    assert p.sum() * (f[1] - f[0]) == pytest.approx(np.sum(d * d) / np.sum(w * w), rel=1e-9)


def test_spectral_oracles(signals):
    for x in signals:
        _, stride, _ = oracles.gait_periods(x, FS)
        assert apc(x, FS) == pytest.approx(oracles.apc(x, FS), rel=1e-8)
        assert spectral_entropy(x, FS) == pytest.approx(oracles.spectral_entropy(x, FS), rel=1e-8)
        assert smnr(x, FS) == pytest.approx(oracles.smnr(x, FS, stride / FS), rel=1e-8)


@pytest.mark.parametrize("n", [64, 65, 333, 1000])
def test_wavelet_oracle(n):
    x = np.random.default_rng(n).normal(size=n)
    assert wavelet_energy(x) == pytest.approx(oracles.wavelet_entropy(x), rel=1e-10)


def test_wavelet_bands_conserve_energy():
    # an orthogonal periodized transform preserves the sum of squares
    x = np.random.default_rng(1).normal(size=512)
    sizes = [16, 16, 32, 64, 128, 256]
    assert np.dot(wavelet_band_powers(x), sizes) == pytest.approx(np.dot(x, x), rel=1e-10)


def test_closed_form_values():
    t = np.arange(1024) / FS
    sine = np.sin(2 * np.pi * 1.5625 * t)      # an integer number of cycles
    assert movement_intensity(sine) == pytest.approx(1 / math.sqrt(2), rel=1e-12)
    assert spectral_entropy(sine, FS) < 0.15
    noise = np.random.default_rng(3).normal(size=1024)
    assert spectral_entropy(noise, FS) > 0.9
    assert paf(sine) == pytest.approx(0.0, abs=1e-10)


def test_step_and_stride_of_asymmetric_pattern():
    t = np.arange(1000) / FS
    x = np.sin(2 * np.pi * 2.0 * t) + 0.3 * np.sin(2 * np.pi * 1.0 * t)
    per = periodicity(x, FS)
    assert per.step_period == pytest.approx(0.5, abs=0.02)
    assert per.stride_period == pytest.approx(1.0, abs=0.02)


def test_failures():
    with pytest.raises(EmptySignal):
        movement_intensity([])
    with pytest.raises(ZeroVariance):
        paf(np.ones(100))
    with pytest.raises(NoPeriodicity):
        periodicity(np.ones(300), FS)
    with pytest.raises(NoPeriodicity):
        periodicity(np.random.default_rng(0).normal(size=500), FS)
    with pytest.raises(SignalTooShort):
        wavelet_energy(np.ones(63))
    assert wavelet_energy(np.zeros(64)) == 0.0


def test_non_strict_collects_errors():
    vals, errs = signal_features(np.random.default_rng(0).normal(size=500), FS, strict=False)
    assert math.isnan(vals["StepPeriod"]) and math.isnan(vals["SMNR"])
    assert set(errs) == {"StepPeriod", "StridePeriod", "Regularity", "SMNR"}
    assert list(vals) == list(FEATURES)


def _trial_signals(seed):
    rng = np.random.default_rng(seed)
    return {s: oracles.gait_like(rng)[0] for s in SIGNALS}


def test_extract_full_vector():
    fv = extract_features(_trial_signals(0), FS)
    assert len(fv) == 243 and np.all(np.isfinite(fv.values)) and fv.ok
    assert fv[SIGNALS[3], "MI"] == fv[f"{SIGNALS[3].name}_MI"]
    again = extract_features(_trial_signals(0), FS)
    assert again.values.tobytes() == fv.values.tobytes()


def test_extract_reports_every_failure():
    sig = _trial_signals(1)
    sig[SIGNALS[0]] = np.ones(1000)
    with pytest.raises(FeatureExtractionError) as info:
        extract_features(sig, FS)
    assert f"{SIGNALS[0].name}_PAF" in info.value.failures
    loose = extract_features(sig, FS, strict=False)
    assert math.isnan(loose[f"{SIGNALS[0].name}_PAF"]) and not loose.ok
    del sig[SIGNALS[1]]
    with pytest.raises(FeatureExtractionError):
        extract_features(sig, FS)


def test_windowed():
    x, _ = oracles.gait_like(np.random.default_rng(5), n=800)
    rows = windowed_features(x, FS, 400, 200)
    assert [r["start"] for r in rows] == [0, 200, 400]
    assert rows[1]["MI"] == pytest.approx(movement_intensity(x[200:600]))
    with pytest.raises(WindowTooLong):
        windowed_features(x, FS, 900, 100)
