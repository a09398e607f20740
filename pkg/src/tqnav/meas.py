"""Measurement models: zero-velocity and odometer pulse velocity.

The zero-velocity model observes the earth-frame velocity of a parked
vehicle (static alignment).  The odometer model observes the wheel-point
velocity in the vehicle frame, with the forward slot scaled to pulses/s
and the lateral/vertical slots pinned to zero by the non-holonomic
constraints (in-motion alignment).  Both come with measurement Jacobians
in left, right and traditional error coordinates over the 21-state
layout; everything broadcasts over leading batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .earth import WGS84, EarthParams
from .errmodel import ATT, BG, KSCALE, LEVER, N_ERR, POS, PSI, THETA, VEL
from .mech import ImuSample
from .quat import quat_to_dcm, skew
from .triquat import NavState


@dataclass(frozen=True)
class OdoParams:
    """Odometer scale factor, IMU-to-vehicle mounting and lever arm.

    Scalar fields may be arrays of matching leading shape for batched
    filter states.
    """

    K: float | np.ndarray  # pulses per meter
    psi: float | np.ndarray = 0.0  # yaw mounting, rad
    theta: float | np.ndarray = 0.0  # pitch mounting, rad
    lever: np.ndarray = field(default_factory=lambda: np.zeros(3))  # m, body frame

    def __post_init__(self):
        if np.any(np.asarray(self.K) <= 0):
            raise ValueError("odometer scale factor must be positive")
        object.__setattr__(self, "lever", np.asarray(self.lever, dtype=float))


@dataclass(frozen=True)
class Measurement:
    z: np.ndarray
    R: np.ndarray
    kind: str  # "static" | "odometer"

    def __post_init__(self):
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float))
        r = np.asarray(self.R, dtype=float)
        if np.any(np.abs(r - np.swapaxes(r, -1, -2)) > 1e-12) or np.any(
            np.linalg.eigvalsh(r) < 0
        ):
            raise ValueError("measurement covariance must be symmetric PSD")
        object.__setattr__(self, "R", r)


def _rows(r0, r1, r2):
    return np.stack([np.stack(r0, -1), np.stack(r1, -1), np.stack(r2, -1)], -2)


def _m2(psi) -> np.ndarray:
    c, s = np.cos(psi), np.sin(psi)
    z, o = np.zeros_like(c), np.ones_like(c)
    return _rows((c, z, -s), (z, o, z), (s, z, c))


def _m3(theta) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    z, o = np.zeros_like(c), np.ones_like(c)
    return _rows((c, s, z), (-s, c, z), (z, z, o))


def _dm2(psi) -> np.ndarray:
    c, s = np.cos(psi), np.sin(psi)
    z = np.zeros_like(c)
    return _rows((-s, z, -c), (z, z, z), (c, z, -s))


def _dm3(theta) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    z = np.zeros_like(c)
    return _rows((-s, c, z), (-c, -s, z), (z, z, z))


def c_bm(psi, theta) -> np.ndarray:
    """Body-to-vehicle mounting rotation, 2-3-1 sequence with the roll
    angle omitted (unobservable): ``M3(theta) @ M2(psi)``."""
    return _m3(theta) @ _m2(psi)


def c_bm_partials(psi, theta) -> tuple[np.ndarray, np.ndarray]:
    """(dC/dpsi, dC/dtheta) of :func:`c_bm`."""
    return _m3(theta) @ _dm2(psi), _dm3(theta) @ _m2(psi)


def omega_eb_b(state: NavState, imu: ImuSample, earth: EarthParams = WGS84) -> np.ndarray:
    """Body rate relative to the earth frame, from the (bias-corrected)
    gyro and the attitude estimate."""
    ceb = np.swapaxes(quat_to_dcm(state.q_eb), -1, -2)
    return imu.gyro - (ceb @ earth.omega_vec[..., None])[..., 0]


def _kvec(p: OdoParams, batch) -> np.ndarray:
    k = np.broadcast_to(np.asarray(p.K, dtype=float), batch)
    return np.stack([k, np.ones_like(k), np.ones_like(k)], -1)


def predict_odometer(
    state: NavState, imu: ImuSample, p: OdoParams, earth: EarthParams = WGS84
) -> np.ndarray:
    """Predicted odometer triple [pulses/s, m/s, m/s].

    Wheel-point velocity in the vehicle frame: the IMU-point body velocity
    plus the lever-arm term, rotated through the mounting and scaled by K
    on the forward axis.
    """
    batch = np.asarray(state.q_eb).shape[:-1]
    ceb = np.swapaxes(quat_to_dcm(state.q_eb), -1, -2)
    v_e = state.v_e(earth.omega_vec)
    w_eb = omega_eb_b(state, imu, earth)
    v_wheel_b = (ceb @ v_e[..., None])[..., 0] + np.cross(w_eb, p.lever)
    y = (c_bm(p.psi, p.theta) @ v_wheel_b[..., None])[..., 0]
    return y * _kvec(p, batch)


def h_static(kind: str, state: NavState, earth: EarthParams = WGS84) -> np.ndarray:
    """Zero-velocity measurement matrix mapping the 21-state error to the
    predicted-minus-true earth-frame velocity."""
    batch = np.asarray(state.q_eb).shape[:-1]
    h = np.zeros(batch + (3, N_ERR))
    om = np.broadcast_to(earth.omega_vec, batch + (3,))
    if kind == "left":
        cbe = quat_to_dcm(state.q_eb)
        h[..., :, VEL] = -cbe
        h[..., :, POS] = skew(om) @ cbe
    elif kind == "right":
        v = np.broadcast_to(np.asarray(state.v_prime, float), batch + (3,))
        r = np.broadcast_to(np.asarray(state.r_e, float), batch + (3,))
        h[..., :, ATT] = skew(v) - skew(om) @ skew(r)
        h[..., :, VEL] = -np.eye(3)
        h[..., :, POS] = skew(om)
    elif kind == "traditional":
        h[..., :, VEL] = np.eye(3)
    else:
        raise ValueError(f"unknown measurement linearization kind {kind!r}")
    return h


def h_odometer(
    kind: str,
    state: NavState,
    imu: ImuSample,
    p: OdoParams,
    earth: EarthParams = WGS84,
) -> np.ndarray:
    """Odometer measurement matrix for the 21-state error layout.

    The shared parameter Jacobians (scale, mounting, lever, gyro bias)
    multiply the wheel-point velocity terms; the attitude/velocity/
    position columns depend on the error coordinates chosen.  The
    accelerometer-bias columns are identically zero.
    """
    batch = np.asarray(state.q_eb).shape[:-1]
    cbe = quat_to_dcm(state.q_eb)
    ceb = np.swapaxes(cbe, -1, -2)
    om = np.broadcast_to(earth.omega_vec, batch + (3,))
    v_e = state.v_e(earth.omega_vec)
    v_b = (ceb @ v_e[..., None])[..., 0]
    w_eb = omega_eb_b(state, imu, earth)
    v_wheel_b = v_b + np.cross(w_eb, p.lever)

    kv = _kvec(p, batch)[..., :, None]  # row scaling by diag([K, 1, 1])
    cm = np.broadcast_to(c_bm(p.psi, p.theta), batch + (3, 3))
    j_v = kv * cm
    j_b = j_v @ skew(np.broadcast_to(np.asarray(p.lever, float), batch + (3,)))
    dpsi, dtheta = c_bm_partials(p.psi, p.theta)
    j_psi = kv[..., 0] * (dpsi @ v_wheel_b[..., None])[..., 0]
    j_theta = kv[..., 0] * (dtheta @ v_wheel_b[..., None])[..., 0]
    j_lever = j_v @ skew(w_eb)
    cmv = (cm @ v_wheel_b[..., None])[..., 0]
    j_k = np.zeros(batch + (3,))
    j_k[..., 0] = cmv[..., 0]

    h = np.zeros(batch + (3, N_ERR))
    if kind == "left":
        h[..., :, ATT] = -j_v @ skew(v_b)
        h[..., :, VEL] = -j_v
        h[..., :, POS] = j_v @ skew((ceb @ om[..., None])[..., 0])
    elif kind == "right":
        r = np.broadcast_to(np.asarray(state.r_e, float), batch + (3,))
        h[..., :, ATT] = -j_v @ ceb @ skew(r) @ skew(om)
        h[..., :, VEL] = -j_v @ ceb
        h[..., :, POS] = j_v @ ceb @ skew(om)
    elif kind == "traditional":
        # d(C_eb v_e) = C_eb (v_e x) datt + C_eb dv  for the e-frame
        # multiplicative attitude error
        h[..., :, ATT] = j_v @ ceb @ skew(v_e)
        h[..., :, VEL] = j_v @ ceb
    else:
        raise ValueError(f"unknown measurement linearization kind {kind!r}")
    h[..., :, BG] = j_b
    h[..., :, PSI] = j_psi
    h[..., :, THETA] = j_theta
    h[..., :, LEVER] = j_lever
    h[..., :, KSCALE] = j_k
    return h


def zupt_measurement(sigma: float = 0.01) -> Measurement:
    """Zero-velocity pseudo measurement with per-axis noise sigma (m/s)."""
    return Measurement(np.zeros(3), np.eye(3) * sigma**2, "static")


def odometer_measurement(
    pulse_rate: float,
    sigma_pulse: float = 2.0,
    sigma_nhc: float = 0.05,
) -> Measurement:
    """Observed odometer triple: measured pulse rate plus the two zero
    non-holonomic pseudo observations."""
    pulse_rate = np.asarray(pulse_rate, dtype=float)
    z = np.zeros(pulse_rate.shape + (3,))
    z[..., 0] = pulse_rate
    return Measurement(
        z,
        np.diag([sigma_pulse**2, sigma_nhc**2, sigma_nhc**2]),
        "odometer",
    )
