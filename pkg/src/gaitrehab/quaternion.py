"""Hamilton quaternions, scalar first (w, x, y, z).

Functions accept anything ``np.asarray`` turns into shape ``(..., 4)`` so the
same code serves single values and batches. A quaternion ``q`` describes the
sensor-to-global rotation: ``v_global = q * (0, v_sensor) * conj(q)``.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import NonUnitQuaternion

UNIT_TOL = 1e-6


class Quaternion(NamedTuple):
    w: float = 1.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0


IDENTITY = Quaternion()


def quat_multiply(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_conjugate(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_norm(q) -> np.ndarray:
    return np.linalg.norm(np.asarray(q, dtype=float), axis=-1)


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = quat_norm(q)
    if np.any(n == 0.0):
        raise NonUnitQuaternion("cannot normalize a zero quaternion")
    return q / n[..., None]


def _check_unit(q: np.ndarray, tol: float) -> None:
    dev = np.abs(quat_norm(q) - 1.0)
    if np.any(dev > tol):
        raise NonUnitQuaternion(f"quaternion norm deviates from 1 by {float(np.max(dev)):.3g}")


def quat_rotate(q, v, tol: float = UNIT_TOL) -> np.ndarray:
    """Rotate vector(s) ``v`` by unit quaternion(s) ``q``: q (0,v) q*."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_unit(q, tol)
    pure = np.concatenate([np.zeros(v.shape[:-1] + (1,)), v], axis=-1)
    out = quat_multiply(quat_multiply(q, pure), quat_conjugate(q))
    return out[..., 1:]


def rotation_matrix(q) -> np.ndarray:
    """Standard rotation matrix of a unit quaternion (used as an independent oracle)."""
    w, x, y, z = np.moveaxis(np.asarray(q, dtype=float), -1, 0)
    m = np.stack(
        [
            1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
            2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
            2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
        ],
        axis=-1,
    )
    return m.reshape(m.shape[:-1] + (3, 3))


def from_axis_angle(axis, angle_rad: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle_rad
    return np.concatenate([[math.cos(half)], math.sin(half) * axis])


def from_two_vectors(u, v) -> np.ndarray:
    """Shortest-arc unit quaternion rotating direction ``u`` onto direction ``v``."""
    u = np.asarray(u, dtype=float) / np.linalg.norm(u)
    v = np.asarray(v, dtype=float) / np.linalg.norm(v)
    d = float(np.dot(u, v))
    if d < -1.0 + 1e-12:
        # antiparallel: any perpendicular axis works
        perp = np.cross(u, [1.0, 0.0, 0.0])
        if np.linalg.norm(perp) < 1e-6:
            perp = np.cross(u, [0.0, 1.0, 0.0])
        return from_axis_angle(perp, math.pi)
    q = np.concatenate([[1.0 + d], np.cross(u, v)])
    return q / np.linalg.norm(q)


def random_unit(rng: np.random.Generator, n: int) -> np.ndarray:
    q = rng.normal(size=(n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)
