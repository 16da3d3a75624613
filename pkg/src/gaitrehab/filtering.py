"""Butterworth low-pass used on accelerations before feature extraction."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import signal

from .errors import UnsupportedRate

CUTOFF_HZ = 7.0
ORDER = 4
SUPPORTED_RATE = 100.0


@lru_cache(maxsize=16)
def butter_sos(cutoff_hz: float = CUTOFF_HZ, fs: float = SUPPORTED_RATE, order: int = ORDER) -> np.ndarray:
    sos = signal.butter(order, cutoff_hz, btype="low", fs=fs, output="sos")
    sos.setflags(write=False)
    return sos


def lowpass(x, fs: float, cutoff_hz: float = CUTOFF_HZ, order: int = ORDER,
            zero_phase: bool = True, axis: int = 0) -> np.ndarray:
    """Low-pass ``x`` along ``axis``.

    ``zero_phase`` runs the filter forward and backward (squared magnitude,
    no delay); otherwise a single causal pass, which is what a streaming
    window can afford.
    """
    x = np.asarray(x, dtype=float)
    sos = butter_sos(float(cutoff_hz), float(fs), int(order)).copy()
    if not zero_phase:
        # start from the steady state of the first sample to avoid a step transient
        xm = np.moveaxis(x, axis, 0)
        zi = signal.sosfilt_zi(sos).reshape(sos.shape[0], 2, *([1] * (xm.ndim - 1))) * xm[0]
        y, _ = signal.sosfilt(sos, xm, axis=0, zi=zi)
        return np.moveaxis(y, 0, axis)
    n = x.shape[axis]
    padlen = min(3 * (2 * sos.shape[0] + 1), n - 1)
    return signal.sosfiltfilt(sos, x, axis=axis, padlen=max(padlen, 0))


def lowpass7hz(x, fs: float = SUPPORTED_RATE, zero_phase: bool = True) -> np.ndarray:
    """The 7 Hz, 4th-order Butterworth of the pipeline; only defined at 100 Hz."""
    if fs != SUPPORTED_RATE:
        raise UnsupportedRate(f"lowpass7hz is defined for {SUPPORTED_RATE:g} Hz data, got {fs:g} Hz")
    return lowpass(x, fs, CUTOFF_HZ, ORDER, zero_phase=zero_phase)


def magnitude_response(freqs_hz, fs: float = SUPPORTED_RATE, cutoff_hz: float = CUTOFF_HZ,
                       order: int = ORDER) -> np.ndarray:
    """Single-pass |H(f)| of the designed filter."""
    _, h = signal.sosfreqz(butter_sos(float(cutoff_hz), float(fs), int(order)).copy(),
                           worN=np.asarray(freqs_hz, dtype=float), fs=fs)
    return np.abs(h)
