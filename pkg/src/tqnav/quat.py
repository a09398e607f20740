"""Quaternion primitives.

Conventions used throughout the package:

* scalar-first storage ``[w, x, y, z]``, Hamilton product
* a pose quaternion ``q_eb`` rotates body vectors into the earth frame,
  ``v_e = q o v_b o q*`` (passive body-to-earth attitude)
* 3-vectors entering quaternion products are promoted to vector
  quaternions with zero scalar part

All functions broadcast over leading dimensions, so the same code serves
single states and batched Monte-Carlo state arrays.
"""

from __future__ import annotations

import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product ``a o b``, broadcasting over leading axes."""
    aw, ax, ay, az = np.moveaxis(np.asarray(a, dtype=float), -1, 0)
    bw, bx, by, bz = np.moveaxis(np.asarray(b, dtype=float), -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_norm(q: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.asarray(q, dtype=float), axis=-1)


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def vecquat(v: np.ndarray) -> np.ndarray:
    """Promote a 3-vector to a vector quaternion ``[0, v]``."""
    v = np.asarray(v, dtype=float)
    zeros = np.zeros(v.shape[:-1] + (1,))
    return np.concatenate([zeros, v], axis=-1)


def quat_vec(q: np.ndarray) -> np.ndarray:
    return np.asarray(q, dtype=float)[..., 1:]


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate 3-vector(s): ``vec(q o v o q*)``, i.e. ``C(q) @ v``."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    qv = q[..., 1:]
    w = q[..., :1]
    t = 2.0 * np.cross(qv, v)
    return v + w * t + np.cross(qv, t)


def quat_exp_rotvec(phi: np.ndarray) -> np.ndarray:
    """Unit quaternion for a rotation vector (exact, small-angle safe)."""
    phi = np.asarray(phi, dtype=float)
    angle = np.linalg.norm(phi, axis=-1, keepdims=True)
    half = 0.5 * angle
    small = angle < 1e-8
    # sin(x/2)/x with series fallback near zero
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(small, 0.5 - angle**2 / 48.0, np.sin(half) / np.where(small, 1.0, angle))
    w = np.cos(half)
    return np.concatenate([w, k * phi], axis=-1)


def quat_log_rotvec(q: np.ndarray) -> np.ndarray:
    """Rotation vector of a unit quaternion, principal branch (|phi| <= pi)."""
    q = np.asarray(q, dtype=float)
    q = np.where(q[..., :1] < 0.0, -q, q)  # canonical hemisphere
    vn = np.linalg.norm(q[..., 1:], axis=-1, keepdims=True)
    w = np.clip(q[..., :1], -1.0, 1.0)
    angle = 2.0 * np.arctan2(vn, w)
    small = vn < 1e-12
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(small, 2.0, angle / np.where(small, 1.0, vn))
    return k * q[..., 1:]


def quat_to_dcm(q: np.ndarray) -> np.ndarray:
    """Direction cosine matrix C with ``C @ v == quat_rotate(q, v)``."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = np.moveaxis(q, -1, 0)
    row0 = np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], axis=-1)
    row1 = np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], axis=-1)
    row2 = np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], axis=-1)
    return np.stack([row0, row1, row2], axis=-2)


def dcm_to_quat(c: np.ndarray) -> np.ndarray:
    """Inverse of :func:`quat_to_dcm` (Shepperd's method, single matrix)."""
    c = np.asarray(c, dtype=float)
    if c.shape != (3, 3):
        return np.stack([dcm_to_quat(m) for m in c.reshape(-1, 3, 3)]).reshape(c.shape[:-2] + (4,))
    tr = np.trace(c)
    choices = [tr, c[0, 0], c[1, 1], c[2, 2]]
    i = int(np.argmax(choices))
    if i == 0:
        w = 0.5 * np.sqrt(1.0 + tr)
        s = 0.25 / w
        q = np.array([w, s * (c[2, 1] - c[1, 2]), s * (c[0, 2] - c[2, 0]), s * (c[1, 0] - c[0, 1])])
    elif i == 1:
        x = 0.5 * np.sqrt(1.0 + c[0, 0] - c[1, 1] - c[2, 2])
        s = 0.25 / x
        q = np.array([s * (c[2, 1] - c[1, 2]), x, s * (c[0, 1] + c[1, 0]), s * (c[0, 2] + c[2, 0])])
    elif i == 2:
        y = 0.5 * np.sqrt(1.0 - c[0, 0] + c[1, 1] - c[2, 2])
        s = 0.25 / y
        q = np.array([s * (c[0, 2] - c[2, 0]), s * (c[0, 1] + c[1, 0]), y, s * (c[1, 2] + c[2, 1])])
    else:
        z = 0.5 * np.sqrt(1.0 - c[0, 0] - c[1, 1] + c[2, 2])
        s = 0.25 / z
        q = np.array([s * (c[1, 0] - c[0, 1]), s * (c[0, 2] + c[2, 0]), s * (c[1, 2] + c[2, 1]), z])
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix, ``skew(a) @ b == cross(a, b)``."""
    v = np.asarray(v, dtype=float)
    x, y, z = np.moveaxis(v, -1, 0)
    zero = np.zeros_like(x)
    return np.stack(
        [
            np.stack([zero, -z, y], axis=-1),
            np.stack([z, zero, -x], axis=-1),
            np.stack([-y, x, zero], axis=-1),
        ],
        axis=-2,
    )


def dexp_quat(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Directional derivative of the quaternion exponential.

    ``d/ds exp([0, alpha] + s [0, beta])`` at ``s = 0`` for 3-vectors
    ``alpha``, ``beta``; equals ``int_0^1 exp(s a) b exp((1-s) a) ds``:

        [-sin(a) (ah.b),  sin(a)/a * b + (cos(a) - sin(a)/a) (ah.b) ah]

    with ``a = |alpha|``, ``ah = alpha/a``.  Exact for all magnitudes.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    a = np.linalg.norm(alpha, axis=-1, keepdims=True)
    small = a < 1e-12
    safe = np.where(small, 1.0, a)
    ah = alpha / safe
    dot = np.sum(ah * beta, axis=-1, keepdims=True)
    sinc = np.where(small, 1.0 - a**2 / 6.0, np.sin(a) / safe)
    w = -np.sin(a) * dot
    vec = sinc * beta + (np.cos(a) - sinc) * dot * ah
    return np.concatenate([w, vec], axis=-1)
