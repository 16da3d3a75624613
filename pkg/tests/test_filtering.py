import numpy as np
import pytest

from gaitrehab.errors import UnsupportedRate
from gaitrehab.filtering import lowpass, lowpass7hz, magnitude_response


def analytic_gain(f, fs=100.0, fc=7.0, order=4):
    # bilinear-transformed Butterworth: prewarped frequency ratio
    ratio = np.tan(np.pi * np.asarray(f) / fs) / np.tan(np.pi * fc / fs)
    return 1.0 / np.sqrt(1.0 + ratio ** (2 * order))


def test_magnitude_matches_closed_form():
    f = np.linspace(0.0, 49.0, 99)
    np.testing.assert_allclose(magnitude_response(f), analytic_gain(f), atol=1e-10)


def test_cutoff_is_minus_3db_per_pass():
    db = 20 * np.log10(magnitude_response([7.0])[0])
    assert db == pytest.approx(-3.0103, abs=1e-3)


def test_zero_phase_keeps_sine_aligned():
    t = np.arange(2000) / 100.0
    x = np.sin(2 * np.pi * 1.0 * t)
    y = lowpass7hz(x)
    gain = analytic_gain(1.0) ** 2
    np.testing.assert_allclose(y[200:-200], gain * x[200:-200], atol=1e-3)


def test_causal_mode_delays():
    t = np.arange(2000) / 100.0
    x = np.sin(2 * np.pi * 2.0 * t)
    y = lowpass7hz(x, zero_phase=False)
    lag = np.argmax(np.correlate(y[500:1500], x[500:1500], "full")) - 999
    assert lag > 0


def test_multichannel_axis(rng):
    x = rng.normal(size=(500, 3))
    y = lowpass7hz(x)
    for k in range(3):
        np.testing.assert_allclose(y[:, k], lowpass7hz(x[:, k]), atol=1e-14)
    np.testing.assert_allclose(lowpass(x.T, 100.0, axis=1), y.T, atol=1e-14)


def test_other_rates_need_explicit_design():
    with pytest.raises(UnsupportedRate):
        lowpass7hz(np.zeros(100), fs=50.0)
    y = lowpass(np.ones(100), 50.0, cutoff_hz=5.0)
    np.testing.assert_allclose(y, 1.0, atol=1e-9)
