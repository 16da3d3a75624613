"""Gradient-descent orientation filter and sensor-to-global acceleration.

The filter follows Madgwick's IMU/MARG formulation: the gyroscope rate is
integrated as a quaternion derivative and a normalised gradient step pulls the
estimate toward the orientation that maps gravity (and optionally the
magnetic field) onto the measured directions. ``q`` is sensor-to-global.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import G_STANDARD, ImuSample
from .quaternion import IDENTITY, quat_rotate

DEFAULT_GAIN = 0.1
DEG2RAD = math.pi / 180.0


@dataclass(frozen=True)
class OrientationState:
    q: tuple = tuple(IDENTITY)
    gain: float = DEFAULT_GAIN


def _imu_step(qw, qx, qy, qz, gx, gy, gz, ax, ay, az, dt, gain):
    # quaternion derivative from the gyroscope, q_dot = 0.5 q * (0, w)
    dw = 0.5 * (-qx * gx - qy * gy - qz * gz)
    dx = 0.5 * (qw * gx + qy * gz - qz * gy)
    dy = 0.5 * (qw * gy - qx * gz + qz * gx)
    dz = 0.5 * (qw * gz + qx * gy - qy * gx)

    an = math.sqrt(ax * ax + ay * ay + az * az)
    if an > 0.0:
        ax /= an
        ay /= an
        az /= an
        f1 = 2.0 * (qx * qz - qw * qy) - ax
        f2 = 2.0 * (qw * qx + qy * qz) - ay
        f3 = 2.0 * (0.5 - qx * qx - qy * qy) - az
        # J^T f
        sw = -2.0 * qy * f1 + 2.0 * qx * f2
        sx = 2.0 * qz * f1 + 2.0 * qw * f2 - 4.0 * qx * f3
        sy = -2.0 * qw * f1 + 2.0 * qz * f2 - 4.0 * qy * f3
        sz = 2.0 * qx * f1 + 2.0 * qy * f2
        sn = math.sqrt(sw * sw + sx * sx + sy * sy + sz * sz)
        if sn > 0.0:
            dw -= gain * sw / sn
            dx -= gain * sx / sn
            dy -= gain * sy / sn
            dz -= gain * sz / sn

    qw += dw * dt
    qx += dx * dt
    qy += dy * dt
    qz += dz * dt
    n = math.sqrt(qw * qw + qx * qx + qy * qy + qz * qz)
    return qw / n, qx / n, qy / n, qz / n


def _marg_step(qw, qx, qy, qz, gx, gy, gz, ax, ay, az, mx, my, mz, dt, gain):
    an = math.sqrt(ax * ax + ay * ay + az * az)
    mn = math.sqrt(mx * mx + my * my + mz * mz)
    if an == 0.0 or mn == 0.0:
        return _imu_step(qw, qx, qy, qz, gx, gy, gz, ax, ay, az, dt, gain)
    ax, ay, az = ax / an, ay / an, az / an
    mx, my, mz = mx / mn, my / mn, mz / mn

    dw = 0.5 * (-qx * gx - qy * gy - qz * gz)
    dx = 0.5 * (qw * gx + qy * gz - qz * gy)
    dy = 0.5 * (qw * gy - qx * gz + qz * gx)
    dz = 0.5 * (qw * gz + qx * gy - qy * gx)

    # earth-frame reference direction of the magnetic field
    hx = mx * (qw * qw + qx * qx - qy * qy - qz * qz) + 2 * my * (qx * qy - qw * qz) + 2 * mz * (qx * qz + qw * qy)
    hy = 2 * mx * (qx * qy + qw * qz) + my * (qw * qw - qx * qx + qy * qy - qz * qz) + 2 * mz * (qy * qz - qw * qx)
    hz = 2 * mx * (qx * qz - qw * qy) + 2 * my * (qy * qz + qw * qx) + mz * (qw * qw - qx * qx - qy * qy + qz * qz)
    bx = math.sqrt(hx * hx + hy * hy)
    bz = hz

    f = (
        2.0 * (qx * qz - qw * qy) - ax,
        2.0 * (qw * qx + qy * qz) - ay,
        2.0 * (0.5 - qx * qx - qy * qy) - az,
        2.0 * bx * (0.5 - qy * qy - qz * qz) + 2.0 * bz * (qx * qz - qw * qy) - mx,
        2.0 * bx * (qx * qy - qw * qz) + 2.0 * bz * (qw * qx + qy * qz) - my,
        2.0 * bx * (qw * qy + qx * qz) + 2.0 * bz * (0.5 - qx * qx - qy * qy) - mz,
    )
    J = (
        (-2.0 * qy, 2.0 * qz, -2.0 * qw, 2.0 * qx),
        (2.0 * qx, 2.0 * qw, 2.0 * qz, 2.0 * qy),
        (0.0, -4.0 * qx, -4.0 * qy, 0.0),
        (-2.0 * bz * qy, 2.0 * bz * qz, -4.0 * bx * qy - 2.0 * bz * qw, -4.0 * bx * qz + 2.0 * bz * qx),
        (-2.0 * bx * qz + 2.0 * bz * qx, 2.0 * bx * qy + 2.0 * bz * qw, 2.0 * bx * qx + 2.0 * bz * qz,
         -2.0 * bx * qw + 2.0 * bz * qy),
        (2.0 * bx * qy, 2.0 * bx * qz - 4.0 * bz * qx, 2.0 * bx * qw - 4.0 * bz * qy, 2.0 * bx * qx),
    )
    s = [sum(J[r][c] * f[r] for r in range(6)) for c in range(4)]
    sn = math.sqrt(sum(v * v for v in s))
    if sn > 0.0:
        dw -= gain * s[0] / sn
        dx -= gain * s[1] / sn
        dy -= gain * s[2] / sn
        dz -= gain * s[3] / sn
    qw += dw * dt
    qx += dx * dt
    qy += dy * dt
    qz += dz * dt
    n = math.sqrt(qw * qw + qx * qx + qy * qy + qz * qz)
    return qw / n, qx / n, qy / n, qz / n


_imu_step_jit = njit(cache=True)(_imu_step)


@njit(cache=True)
def _imu_run(q0, gyro, accel, dt, gain):
    n = gyro.shape[0]
    out = np.empty((n, 4))
    qw, qx, qy, qz = q0[0], q0[1], q0[2], q0[3]
    for i in range(n):
        qw, qx, qy, qz = _imu_step_jit(qw, qx, qy, qz, gyro[i, 0], gyro[i, 1], gyro[i, 2],
                                       accel[i, 0], accel[i, 1], accel[i, 2], dt, gain)
        out[i, 0] = qw
        out[i, 1] = qx
        out[i, 2] = qy
        out[i, 3] = qz
    return out


def update_orientation(state: OrientationState, sample: ImuSample, dt: float,
                       use_mag: bool = False) -> OrientationState:
    """One fusion step. ``sample.gyro`` is in deg/s, accel in any consistent unit."""
    g = np.asarray(sample.gyro, dtype=float) * DEG2RAD
    a = np.asarray(sample.accel, dtype=float)
    if use_mag:
        m = np.asarray(sample.mag, dtype=float)
        q = _marg_step(*state.q, *g, *a, *m, dt, state.gain)
    else:
        q = _imu_step(*state.q, *g, *a, dt, state.gain)
    return OrientationState(q, state.gain)


def estimate_orientation(gyro_dps, accel, dt: float, q0=IDENTITY, gain: float = DEFAULT_GAIN,
                         mag=None) -> np.ndarray:
    """Run the filter over a whole stream; returns (N, 4) quaternions after each sample."""
    gyro = np.asarray(gyro_dps, dtype=float) * DEG2RAD
    accel = np.asarray(accel, dtype=float)
    n = len(gyro)
    out = np.empty((n, 4))
    q = tuple(float(v) for v in q0)
    if mag is None:
        return _imu_run(np.array(q, dtype=float), np.ascontiguousarray(gyro), np.ascontiguousarray(accel),
                        float(dt), float(gain))
    g_list = gyro.tolist()
    a_list = accel.tolist()
    m_list = np.asarray(mag, dtype=float).tolist()
    for i in range(n):
        q = _marg_step(*q, *g_list[i], *a_list[i], *m_list[i], dt, gain)
        out[i] = q
    return out


def to_global_accel(q, a_sensor, gravity: float = G_STANDARD, remove_gravity: bool = True) -> np.ndarray:
    """Rotate sensor-frame specific force into the global frame and remove gravity."""
    a = quat_rotate(q, a_sensor)
    if remove_gravity:
        a = a - np.array([0.0, 0.0, gravity])
    return a
