"""Minimal unit-quaternion helpers.

Quaternions are (w, x, y, z) tuples with the scalar part first. All
functions return plain tuples so they can live inside frozen dataclasses.
"""

from __future__ import annotations

import math

import numpy as np

Quat = tuple[float, float, float, float]

IDENTITY: Quat = (1.0, 0.0, 0.0, 0.0)


def norm(q: Quat) -> float:
    return math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])


def normalize(q) -> Quat:
    w, x, y, z = q
    n = math.sqrt(w * w + x * x + y * y + z * z)
    if n == 0.0:
        raise ValueError("cannot normalize a zero quaternion")
    return (w / n, x / n, y / n, z / n)


def multiply(a: Quat, b: Quat) -> Quat:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def from_axis_angle(axis, angle: float) -> Quat:
    ux, uy, uz = axis
    n = math.sqrt(ux * ux + uy * uy + uz * uz)
    if n == 0.0:
        raise ValueError("rotation axis must be nonzero")
    half = 0.5 * angle
    s = math.sin(half) / n
    return (math.cos(half), ux * s, uy * s, uz * s)


def to_matrix(q: Quat) -> np.ndarray:
    """Rotation matrix mapping body-frame vectors into the world frame."""
    w, x, y, z = q
    xx, yy, zz = x * x, y * y, z * z
    wx, wy, wz = w * x, w * y, w * z
    xy, xz, yz = x * y, x * z, y * z
    return np.array(
        [
            [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
            [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
            [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
        ]
    )


def slerp(a: Quat, b: Quat, alpha: float) -> Quat:
    """Spherical interpolation along the shorter arc, alpha in [0, 1]."""
    dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
    if dot < 0.0:
        b = (-b[0], -b[1], -b[2], -b[3])
        dot = -dot
    if dot > 1.0 - 1e-12:
        mixed = tuple((1.0 - alpha) * ai + alpha * bi for ai, bi in zip(a, b))
        return normalize(mixed)
    theta = math.acos(min(1.0, dot))
    s = math.sin(theta)
    ca = math.sin((1.0 - alpha) * theta) / s
    cb = math.sin(alpha * theta) / s
    return normalize(tuple(ca * ai + cb * bi for ai, bi in zip(a, b)))
