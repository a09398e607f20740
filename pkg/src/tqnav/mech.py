"""Strapdown mechanization in the earth frame.

Two discrete-time propagators for the same continuous dynamics

    dq/dt  = (q o w_ib - w_ie o q) / 2
    dv'/dt = C_be f_b + g(r) - w_ie x v'
    dr/dt  = v' - w_ie x r

``mech_step_trident`` integrates the packed trident-quaternion form with
closed-form exponential increments on both sides; ``mech_step_classic`` is
an independent component-form oracle (exact two-sided attitude increments,
midpoint RK2 for velocity/position).  Both are second-order accurate and
broadcast over leading batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .earth import WGS84, EarthParams, gravitation_e
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
from .triquat import NavState, TridentQuaternion, tq_mul, tq_renormalize

try:  # numba kernels carry the per-sample hot loops; numpy path is the reference
    from . import _fastmech

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _fastmech = None
    _HAVE_NUMBA = False


@dataclass(frozen=True)
class ImuSample:
    """Average angular rate (rad/s) and specific force (m/s^2) over one
    sampling interval, stamped at the interval end."""

    t: float
    gyro: np.ndarray
    accel: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gyro", np.asarray(self.gyro, dtype=float))
        object.__setattr__(self, "accel", np.asarray(self.accel, dtype=float))


@dataclass(frozen=True)
class MechConfig:
    dt: float = 0.01
    integrator: str = "single-sample"  # or "two-sample"

    def __post_init__(self):
        if not 0.0 < self.dt <= 0.1:
            raise ValueError("dt must lie in (0, 0.1] s")
        if self.integrator not in ("single-sample", "two-sample"):
            raise ValueError(f"unknown integrator {self.integrator!r}")


def _increments(gyro, accel, dt, prev_gyro, prev_accel):
    """Angle/velocity increments, optionally with two-sample coning and
    sculling cross-corrections from the previous interval."""
    phi = gyro * dt
    dv = accel * dt
    if prev_gyro is not None:
        phi = phi + np.cross(prev_gyro * dt, gyro * dt) / 12.0
        dv = dv + (np.cross(prev_gyro * dt, accel * dt) + np.cross(prev_accel * dt, gyro * dt)) / 12.0
    return phi, dv


def _rot_integral(phi, u):
    """Average of rot(s*phi) @ u over s in [0, 1]; the exact body-frame
    velocity rotation compensation for a constant rate."""
    a = np.linalg.norm(phi, axis=-1, keepdims=True)
    small = a < 1e-8
    safe = np.where(small, 1.0, a)
    c1 = np.where(small, 0.5 - a**2 / 24.0, (1.0 - np.cos(a)) / safe**2)
    c2 = np.where(small, 1.0 / 6.0 - a**2 / 120.0, (a - np.sin(a)) / safe**3)
    return u + c1 * np.cross(phi, u) + c2 * np.cross(phi, np.cross(phi, u))


def _step_classic(q, v, r, gyro, accel, dt, earth, prev_gyro=None, prev_accel=None):
    phi, dv = _increments(gyro, accel, dt, prev_gyro, prev_accel)
    omega = earth.omega_vec
    e_half = quat_exp_rotvec(-omega * (0.5 * dt))
    b_half = quat_exp_rotvec(0.5 * phi)
    q_half = quat_mul(e_half, quat_mul(q, b_half))
    q_new = quat_normalize(quat_mul(e_half, quat_mul(q_half, b_half)))
    # interval-average specific force in the e-frame (rotation-compensated)
    a = quat_rotate(quat_mul(e_half, q), _rot_integral(phi, dv / dt))

    k1v = a + gravitation_e(r, earth) - np.cross(omega, v)
    k1r = v - np.cross(omega, r)
    v_m = v + 0.5 * dt * k1v
    r_m = r + 0.5 * dt * k1r
    v_new = v + dt * (a + gravitation_e(r_m, earth) - np.cross(omega, v_m))
    r_new = r + dt * (v_m - np.cross(omega, r_m))
    return q_new, v_new, r_new


def _tq_increment(att, vel, pos):
    """exp of the pure-vector trident ``(att + e1 vel + e2 pos)/2``."""
    half = 0.5 * att
    return TridentQuaternion(
        quat_exp_rotvec(att), dexp_quat(half, 0.5 * vel), dexp_quat(half, 0.5 * pos)
    )


def _step_trident(q, v, r, gyro, accel, dt, earth, prev_gyro=None, prev_accel=None):
    phi, dv = _increments(gyro, accel, dt, prev_gyro, prev_accel)
    omega = earth.omega_vec
    f_mid = dv / dt

    # midpoint predictors for the earth-side twist slots
    e_half = quat_exp_rotvec(-omega * (0.5 * dt))
    q_half = quat_mul(e_half, quat_mul(q, quat_exp_rotvec(0.5 * phi)))
    g0 = gravitation_e(r, earth)
    v_m = v + 0.5 * dt * (quat_rotate(q_half, f_mid) + g0 - np.cross(omega, v))
    r_m = r + 0.5 * dt * (v - np.cross(omega, r))
    g_m = gravitation_e(r_m, earth)

    t = TridentQuaternion(
        q, 0.5 * quat_mul(vecquat(v), q), 0.5 * quat_mul(vecquat(r), q)
    )
    inc_body = _tq_increment(phi, dt * f_mid, np.zeros_like(f_mid))
    inc_earth = _tq_increment(np.broadcast_to(-omega * dt, phi.shape), dt * g_m, dt * v_m)
    t_new = tq_renormalize(tq_mul(inc_earth, tq_mul(t, inc_body)))
    qc = quat_conj(t_new.real)
    return (
        t_new.real,
        2.0 * quat_vec(quat_mul(t_new.eps1, qc)),
        2.0 * quat_vec(quat_mul(t_new.eps2, qc)),
    )


def step_arrays(
    q: np.ndarray,
    v: np.ndarray,
    r: np.ndarray,
    gyro: np.ndarray,
    accel: np.ndarray,
    dt: float,
    earth: EarthParams = WGS84,
    scheme: str = "trident",
    prev_gyro: np.ndarray | None = None,
    prev_accel: np.ndarray | None = None,
    use_numba: bool = True,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Array-level propagation for single states (shape (4,)/(3,)) or
    batches (shape (B,4)/(B,3)); the Monte-Carlo runner calls this."""
    q = np.asarray(q, dtype=float)
    batched = q.ndim == 2
    if _HAVE_NUMBA and use_numba:
        kern = _fastmech.trident_kernel if scheme == "trident" else _fastmech.classic_kernel
        phi, dv = _increments(
            np.asarray(gyro, dtype=float), np.asarray(accel, dtype=float), dt, prev_gyro, prev_accel
        )
        args = [q, np.asarray(v, float), np.asarray(r, float), phi, dv]
        if not batched:
            args = [a[None, :] for a in args]
        out = kern(
            *(np.ascontiguousarray(a) for a in args),
            dt,
            earth.omega_vec,
            earth.gm,
            earth.semi_major,
            earth.j2,
        )
        return tuple(o if batched else o[0] for o in out)
    fn = _step_trident if scheme == "trident" else _step_classic
    return fn(q, np.asarray(v, float), np.asarray(r, float),
              np.asarray(gyro, float), np.asarray(accel, float), dt, earth,
              prev_gyro, prev_accel)


def _prev_increments(cfg, prev):
    if prev is not None and cfg.integrator == "two-sample":
        return prev.gyro, prev.accel
    return None, None


def mech_step_classic(
    state: NavState,
    imu: ImuSample,
    cfg: MechConfig,
    earth: EarthParams = WGS84,
    prev: ImuSample | None = None,
) -> NavState:
    """One component-form propagation step."""
    pg, pa = _prev_increments(cfg, prev)
    q, v, r = step_arrays(
        state.q_eb, state.v_prime, state.r_e, imu.gyro, imu.accel, cfg.dt, earth,
        scheme="classic", prev_gyro=pg, prev_accel=pa,
    )
    return NavState(q, v, r, state.time + cfg.dt)


def mech_step_trident(
    state: NavState,
    imu: ImuSample,
    cfg: MechConfig,
    earth: EarthParams = WGS84,
    prev: ImuSample | None = None,
) -> NavState:
    """One trident-quaternion propagation step (pack, exponential
    increments on both sides, renormalize, unpack)."""
    pg, pa = _prev_increments(cfg, prev)
    q, v, r = step_arrays(
        state.q_eb, state.v_prime, state.r_e, imu.gyro, imu.accel, cfg.dt, earth,
        scheme="trident", prev_gyro=pg, prev_accel=pa,
    )
    return NavState(q, v, r, state.time + cfg.dt)
