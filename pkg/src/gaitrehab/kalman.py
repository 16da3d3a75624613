"""Indirect (error-state) Kalman filter for gyro drift in sagittal angles.

The state is ``[angle error, gyro bias]`` with ``F = [[1, Ts], [0, 1]]`` and
``H = [1, 0]``. The measurement is the difference between the gyro-integrated
angle and the accelerometer inclination. After every update the estimates are
fed back: the angle error is subtracted from the integrated angle and the bias
is removed from the gyro rate before the next integration step, which resets
the error state to zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


@dataclass(frozen=True)
class KalmanConfig:
    q_angle: float = 1e-4   # deg^2 per step
    q_bias: float = 1e-6    # (deg/s)^2 per step
    r: float = 0.5          # deg^2
    p0_angle: float = 1.0
    p0_bias: float = 0.1

    @property
    def Q(self) -> np.ndarray:
        return np.diag([self.q_angle, self.q_bias])

    @property
    def P0(self) -> np.ndarray:
        return np.diag([self.p0_angle, self.p0_bias])

    def to_dict(self) -> dict:
        return {"q_angle": self.q_angle, "q_bias": self.q_bias, "r": self.r,
                "p0_angle": self.p0_angle, "p0_bias": self.p0_bias}


@dataclass(frozen=True)
class KalmanResult:
    corrected: np.ndarray   # drift-corrected angle, deg
    bias: np.ndarray        # running gyro-bias estimate, deg/s
    error: np.ndarray       # angle error removed at each step, deg
    P: np.ndarray           # (N, 2, 2) posterior covariances


def transition_matrix(ts: float) -> np.ndarray:
    return np.array([[1.0, ts], [0.0, 1.0]])


MEASUREMENT_MATRIX = np.array([[1.0, 0.0]])


def kf_joint_angle(theta_g, theta_a, ts: float, config: KalmanConfig = KalmanConfig(),
                   keep_covariance: bool = True) -> KalmanResult:
    """Correct a gyro-integrated angle series using accelerometer inclination.

    ``theta_g`` is the raw integrated gyro angle (deg); its first difference is
    taken as the per-step rotation so that bias feedback can be applied.
    """
    theta_g = np.asarray(theta_g, dtype=float)
    theta_a = np.asarray(theta_a, dtype=float)
    if theta_g.shape != theta_a.shape or theta_g.ndim != 1:
        raise ValueError("theta_g and theta_a must be 1-D series of equal length")
    corrected, bias_out, err_out, P_out = _kf_run(
        np.ascontiguousarray(theta_g), np.ascontiguousarray(theta_a), float(ts),
        config.q_angle, config.q_bias, config.r, config.p0_angle, config.p0_bias, keep_covariance,
    )
    return KalmanResult(corrected, bias_out, err_out, P_out)


@njit(cache=True)
def _kf_run(theta_g, theta_a, ts, q00, q11, r, p0_angle, p0_bias, keep_covariance):
    n = len(theta_g)
    corrected = np.empty(n)
    bias_out = np.empty(n)
    err_out = np.empty(n)
    P_out = np.empty((n, 2, 2)) if keep_covariance else np.empty((0, 2, 2))

    p00, p01, p11 = p0_angle, 0.0, p0_bias
    b = 0.0
    g = theta_g
    a = theta_a
    angle = g[0] if n > 0 else 0.0
    for i in range(n):
        if i > 0:
            angle += (g[i] - g[i - 1]) - b * ts
            # predict (error state is zero after the previous reset)
            p00 = p00 + 2.0 * ts * p01 + ts * ts * p11 + q00
            p01 = p01 + ts * p11
            p11 = p11 + q11
        z = angle - a[i]
        s = p00 + r
        k0 = p00 / s
        k1 = p01 / s
        e = k0 * z
        db = k1 * z
        # Joseph form keeps P symmetric positive semidefinite
        j = 1.0 - k0
        n00 = j * j * p00 + r * k0 * k0
        n01 = -j * k1 * p00 + j * p01 + r * k0 * k1
        n11 = k1 * k1 * p00 - 2.0 * k1 * p01 + p11 + r * k1 * k1
        p00, p01, p11 = n00, n01, n11
        angle -= e
        b += db
        corrected[i] = angle
        bias_out[i] = b
        err_out[i] = e
        if keep_covariance:
            P_out[i, 0, 0] = p00
            P_out[i, 0, 1] = P_out[i, 1, 0] = p01
            P_out[i, 1, 1] = p11
    return corrected, bias_out, err_out, P_out


def integrate_rate(rate, ts: float, initial: float = 0.0) -> np.ndarray:
    """Trapezoidal running integral of a rate series, starting at ``initial``."""
    rate = np.asarray(rate, dtype=float)
    out = np.empty_like(rate)
    if len(rate) == 0:
        return out
    out[0] = 0.0
    np.cumsum(0.5 * (rate[1:] + rate[:-1]) * ts, out=out[1:])
    return out + initial
