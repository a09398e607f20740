"""Trident quaternion algebra and pose packing.

A trident quaternion ``q~ = q + e1 q' + e2 q''`` extends a quaternion with
two nilpotent imaginary units (``e1^2 = e2^2 = e1 e2 = 0``).  A rigid-body
navigation state packs into one such object:

    q~_eb = q_eb + e1 (1/2) v' o q_eb + e2 (1/2) r_e o q_eb

where ``q_eb`` is the body-to-earth attitude, ``v' = v_e + w_ie x r_e`` the
earth-frame transformed velocity and ``r_e`` the ECEF position.  The pose
kinematics collapse to ``2 dq~/dt = q~ o W_b - W_e o q~`` for suitable
trident twists ``W_b``, ``W_e``.

Multiplicative left/right errors between an estimated and a true pose are
extracted and injected here; they are the coordinates the error-state
filters operate in.

All operations are pure and broadcast over leading batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quat import (
    dexp_quat,
    quat_conj,
    quat_exp_rotvec,
    quat_mul,
    quat_normalize,
    quat_rotate,
    quat_vec,
    vecquat,
)

UNIT_TOL = 1e-9


class InvalidPoseError(ValueError):
    """Raised when an input violates the pose-representing invariants."""


@dataclass(frozen=True)
class TridentQuaternion:
    """Three quaternion slots ``real + e1 eps1 + e2 eps2``."""

    real: np.ndarray
    eps1: np.ndarray
    eps2: np.ndarray

    @staticmethod
    def identity() -> "TridentQuaternion":
        return TridentQuaternion(
            np.array([1.0, 0, 0, 0]), np.zeros(4), np.zeros(4)
        )


@dataclass(frozen=True)
class TridentTwist:
    """Pure-vector trident twist ``w + e1 a + e2 b`` (3-vector slots)."""

    real: np.ndarray
    eps1: np.ndarray
    eps2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "real", np.asarray(self.real, dtype=float))
        object.__setattr__(self, "eps1", np.asarray(self.eps1, dtype=float))
        object.__setattr__(self, "eps2", np.asarray(self.eps2, dtype=float))


@dataclass(frozen=True)
class NavState:
    """Attitude quaternion, transformed velocity v', ECEF position, time.

    ``v_prime = v_e + w_ie x r_e`` is the propagated velocity quantity; the
    conventional earth-frame velocity is recovered via
    :func:`NavState.v_e`.
    """

    q_eb: np.ndarray
    v_prime: np.ndarray
    r_e: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "q_eb", np.asarray(self.q_eb, dtype=float))
        object.__setattr__(self, "v_prime", np.asarray(self.v_prime, dtype=float))
        object.__setattr__(self, "r_e", np.asarray(self.r_e, dtype=float))

    def v_e(self, omega_ie_e: np.ndarray) -> np.ndarray:
        return self.v_prime - np.cross(omega_ie_e, self.r_e)


ErrorTriple = tuple  # (att, vel, pos) 3-vectors


def tq_mul(a: TridentQuaternion, b: TridentQuaternion) -> TridentQuaternion:
    """Trident product; epsilon slots follow the nilpotent expansion."""
    return TridentQuaternion(
        quat_mul(a.real, b.real),
        quat_mul(a.real, b.eps1) + quat_mul(a.eps1, b.real),
        quat_mul(a.real, b.eps2) + quat_mul(a.eps2, b.real),
    )


def tq_conj(a: TridentQuaternion) -> TridentQuaternion:
    return TridentQuaternion(quat_conj(a.real), quat_conj(a.eps1), quat_conj(a.eps2))


def tq_exp(att: np.ndarray, vel: np.ndarray, pos: np.ndarray) -> TridentQuaternion:
    """Trident exponential of ``(att + e1 vel + e2 pos) / 2``.

    Exact retraction onto pose-representing trident quaternions; reduces to
    ``1 + (att + e1 vel + e2 pos)/2`` for small arguments.
    """
    att = 0.5 * np.asarray(att, dtype=float)
    return TridentQuaternion(
        quat_exp_rotvec(2.0 * att),
        dexp_quat(att, 0.5 * np.asarray(vel, dtype=float)),
        dexp_quat(att, 0.5 * np.asarray(pos, dtype=float)),
    )


def _check_pose(t: TridentQuaternion) -> None:
    if np.any(np.abs(np.linalg.norm(t.real, axis=-1) - 1.0) > UNIT_TOL):
        raise InvalidPoseError("real slot is not a unit quaternion")
    for eps in (t.eps1, t.eps2):
        s = quat_mul(eps, quat_conj(t.real))[..., 0]
        if np.any(np.abs(s) > UNIT_TOL):
            raise InvalidPoseError("eps o real* has a non-zero scalar part")


def tq_from_nav(s: NavState) -> TridentQuaternion:
    """Pack a navigation state, ``eps_i = (1/2) vec o q_eb``."""
    if np.any(np.abs(np.linalg.norm(s.q_eb, axis=-1) - 1.0) > UNIT_TOL):
        raise InvalidPoseError("attitude quaternion is not unit-norm")
    return TridentQuaternion(
        s.q_eb,
        0.5 * quat_mul(vecquat(s.v_prime), s.q_eb),
        0.5 * quat_mul(vecquat(s.r_e), s.q_eb),
    )


def tq_to_nav(t: TridentQuaternion, time: float = 0.0) -> NavState:
    """Unpack; inverse of :func:`tq_from_nav`."""
    _check_pose(t)
    qc = quat_conj(t.real)
    return NavState(
        q_eb=t.real,
        v_prime=2.0 * quat_vec(quat_mul(t.eps1, qc)),
        r_e=2.0 * quat_vec(quat_mul(t.eps2, qc)),
        time=time,
    )


def tq_renormalize(t: TridentQuaternion) -> TridentQuaternion:
    """Restore pose invariants: unit real slot, eps slots re-projected.

    The eps slots are projected so that ``eps_i o real*`` is a pure vector
    quaternion, which keeps packing/unpacking lossless.
    """
    real = quat_normalize(t.real)
    out = []
    for eps in (t.eps1, t.eps2):
        prod = quat_mul(eps, quat_conj(real))
        out.append(0.5 * quat_mul(vecquat(2.0 * quat_vec(prod)), real))
    return TridentQuaternion(real, out[0], out[1])


def tq_dot(
    t: TridentQuaternion, body_twist: TridentTwist, earth_twist: TridentTwist
) -> TridentQuaternion:
    """Kinematic derivative ``(q~ o W_b - W_e o q~) / 2``."""
    wb = TridentQuaternion(
        vecquat(body_twist.real), vecquat(body_twist.eps1), vecquat(body_twist.eps2)
    )
    we = TridentQuaternion(
        vecquat(earth_twist.real), vecquat(earth_twist.eps1), vecquat(earth_twist.eps2)
    )
    a = tq_mul(t, wb)
    b = tq_mul(we, t)
    return TridentQuaternion(
        0.5 * (a.real - b.real), 0.5 * (a.eps1 - b.eps1), 0.5 * (a.eps2 - b.eps2)
    )


def twists_first_type(
    omega_ib_b: np.ndarray,
    f_b: np.ndarray,
    g_e: np.ndarray,
    v_prime: np.ndarray,
    omega_ie_e: np.ndarray,
) -> tuple[TridentTwist, TridentTwist]:
    """First-type twist pair: body carries specific force, earth side
    carries gravity and the transformed velocity."""
    body = TridentTwist(omega_ib_b, f_b, np.zeros_like(np.asarray(f_b, dtype=float)))
    earth = TridentTwist(
        omega_ie_e,
        -np.asarray(g_e, dtype=float),
        -np.asarray(v_prime, dtype=float),
    )
    return body, earth


def twists_second_type(
    omega_ib_b: np.ndarray,
    f_b: np.ndarray,
    g_e: np.ndarray,
    v_prime: np.ndarray,
    q_eb: np.ndarray,
    omega_ie_e: np.ndarray,
) -> tuple[TridentTwist, TridentTwist]:
    """Second-type pair: the velocity rides the body twist instead,
    transported into the body frame (``q o (C_eb v') = v' o q``)."""
    v_b = quat_rotate(quat_conj(q_eb), v_prime)
    body = TridentTwist(omega_ib_b, f_b, v_b)
    earth = TridentTwist(omega_ie_e, -np.asarray(g_e, dtype=float), np.zeros(3))
    return body, earth


def _error_vecs(prod: TridentQuaternion) -> ErrorTriple:
    return (
        2.0 * quat_vec(prod.real),
        2.0 * quat_vec(prod.eps1),
        2.0 * quat_vec(prod.eps2),
    )


def tq_error_left(est: TridentQuaternion, truth: TridentQuaternion) -> ErrorTriple:
    """Left multiplicative error ``est* o truth`` as three 3-vectors.

    For small errors: att slot is the body-frame misalignment, vel/pos
    slots are ``-C_eb d(v')`` and ``-C_eb d(r_e)``.
    """
    _check_pose(est)
    _check_pose(truth)
    return _error_vecs(tq_mul(tq_conj(est), truth))


def tq_error_right(est: TridentQuaternion, truth: TridentQuaternion) -> ErrorTriple:
    """Right multiplicative error ``truth o est*``.

    Small-error slots: ``v' x att - d(v')`` and ``r_e x att - d(r_e)``.
    """
    _check_pose(est)
    _check_pose(truth)
    return _error_vecs(tq_mul(truth, tq_conj(est)))


def tq_inject(
    est: TridentQuaternion, delta: ErrorTriple, side: str
) -> TridentQuaternion:
    """Apply an extracted error to a pose estimate.

    ``side='left'`` composes ``est o exp(delta/2)``, ``side='right'``
    ``exp(delta/2) o est``; the exact trident exponential keeps the result
    on the pose manifold for arbitrarily large corrections.
    """
    d = tq_exp(*delta)
    if side == "left":
        out = tq_mul(est, d)
    elif side == "right":
        out = tq_mul(d, est)
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return tq_renormalize(out)
