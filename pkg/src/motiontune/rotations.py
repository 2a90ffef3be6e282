"""Axis-angle and quaternion utilities.

Conventions used throughout the package:

* axis-angle vectors are ``theta * unit_axis`` with theta in radians,
* quaternions are ``(w, x, y, z)`` with unit norm,
* batched inputs carry the component axis last, e.g. ``(..., 3)``.

Canonical axis-angle form keeps the rotation magnitude in ``[0, 2*pi)``;
the zero vector encodes the identity rotation.
"""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


def canonicalize_axis_angle(v: np.ndarray) -> np.ndarray:
    """Wrap axis-angle magnitudes into [0, 2*pi), preserving the axis.

    A magnitude that lands exactly on 2*pi wraps to the identity (zero
    vector). Zero-magnitude inputs are returned as exact zeros.
    """
    v = np.asarray(v, dtype=np.float64)
    theta = np.linalg.norm(v, axis=-1, keepdims=True)
    wrapped = np.mod(theta, TWO_PI)
    # Where theta == 0 the axis is undefined; scale of 0 keeps the zero vector.
    scale = np.divide(wrapped, theta, out=np.zeros_like(theta), where=theta > 0)
    return v * scale


def axis_angle_to_quat(v: np.ndarray) -> np.ndarray:
    """Convert axis-angle vectors (..., 3) to unit quaternions (..., 4)."""
    v = np.asarray(v, dtype=np.float64)
    theta = np.linalg.norm(v, axis=-1, keepdims=True)
    w = np.cos(0.5 * theta)
    # sin(theta/2) / theta, finite at theta = 0: np.sinc(x) = sin(pi x)/(pi x).
    half_sinc = 0.5 * np.sinc(theta / TWO_PI)
    xyz = v * half_sinc
    return np.concatenate([w, xyz], axis=-1)


def quat_to_axis_angle(q: np.ndarray) -> np.ndarray:
    """Convert unit quaternions (..., 4) to canonical axis-angle (..., 3)."""
    q = np.asarray(q, dtype=np.float64)
    w = q[..., :1]
    xyz = q[..., 1:]
    s = np.linalg.norm(xyz, axis=-1, keepdims=True)
    theta = 2.0 * np.arctan2(s, w)
    axis = np.divide(xyz, s, out=np.zeros_like(xyz), where=s > 1e-12)
    return canonicalize_axis_angle(theta * axis)


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product of quaternions (..., 4), broadcasting."""
    aw, ax, ay, az = (a[..., i] for i in range(4))
    bw, bx, by, bz = (b[..., i] for i in range(4))
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Convert unit quaternions (..., 4) to rotation matrices (..., 3, 3)."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = (q[..., i] for i in range(4))
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    m = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    m[..., 0, 0] = 1.0 - 2.0 * (yy + zz)
    m[..., 0, 1] = 2.0 * (xy - wz)
    m[..., 0, 2] = 2.0 * (xz + wy)
    m[..., 1, 0] = 2.0 * (xy + wz)
    m[..., 1, 1] = 1.0 - 2.0 * (xx + zz)
    m[..., 1, 2] = 2.0 * (yz - wx)
    m[..., 2, 0] = 2.0 * (xz - wy)
    m[..., 2, 1] = 2.0 * (yz + wx)
    m[..., 2, 2] = 1.0 - 2.0 * (xx + yy)
    return m


def axis_angle_to_matrix(v: np.ndarray) -> np.ndarray:
    return quat_to_matrix(axis_angle_to_quat(v))


def rotate_vectors(q: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Rotate vectors (..., 3) by quaternions (..., 4)."""
    return np.einsum("...ij,...j->...i", quat_to_matrix(q), np.asarray(vec, dtype=np.float64))


def slerp(q0: np.ndarray, q1: np.ndarray, t: np.ndarray | float) -> np.ndarray:
    """Spherical linear interpolation between quaternion arrays (..., 4).

    Takes the shorter arc (q and -q encode the same rotation). Near-parallel
    pairs fall back to normalized linear interpolation.
    """
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)[..., None] if np.ndim(t) else float(t)

    dot = np.sum(q0 * q1, axis=-1, keepdims=True)
    q1 = np.where(dot < 0.0, -q1, q1)
    dot = np.abs(dot)

    dot = np.clip(dot, -1.0, 1.0)
    omega = np.arccos(dot)
    sin_omega = np.sin(omega)
    parallel = sin_omega < 1e-9

    w0 = np.where(parallel, 1.0 - t, np.sin((1.0 - t) * omega) / np.where(parallel, 1.0, sin_omega))
    w1 = np.where(parallel, t, np.sin(t * omega) / np.where(parallel, 1.0, sin_omega))
    out = w0 * q0 + w1 * q1
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def slerp_axis_angle(v0: np.ndarray, v1: np.ndarray, t: np.ndarray | float) -> np.ndarray:
    """Interpolate axis-angle rotations through quaternion slerp."""
    q = slerp(axis_angle_to_quat(v0), axis_angle_to_quat(v1), t)
    return quat_to_axis_angle(q)
