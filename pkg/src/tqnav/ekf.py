"""Error-state extended Kalman filter over the 21-component state.

The filter tracks a full-state estimate (navigation state, IMU biases,
odometer parameters) plus the covariance of the error between estimate
and truth in the coordinates of the chosen error-model kind.  After each
measurement update the estimated error is folded back into the full state
and implicitly reset to zero.

All operations are functional (a new ``FilterState`` is returned) and
broadcast over leading batch dimensions, which is how the Monte-Carlo
harness runs a whole heading sweep as one vectorized filter bank.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .earth import WGS84, EarthParams
from .errmodel import (
    ATT,
    BA,
    BG,
    KSCALE,
    LEVER,
    N_ERR,
    POS,
    PSI,
    THETA,
    VEL,
    ErrorModelKind,
    NoisePsd,
    build_system,
    left_jacobian,
    nav_inject,
    right_jacobian,
)
from .meas import Measurement, OdoParams
from .mech import ImuSample, step_arrays
from .triquat import NavState


class FilterFault(RuntimeError):
    """Covariance or innovation became unusable (non-finite / singular)."""


@dataclass(frozen=True)
class InitStd:
    """Initial 1-sigma uncertainties, expressed in traditional coordinates
    (attitude angle in rad, velocity m/s, position m, biases SI, mounting
    rad, lever m, scale pulses/m)."""

    att: float = np.pi
    vel: float = 0.1
    pos: float = 10.0
    bg: float = 2.4240684055476793e-08  # 0.005 deg/h
    ba: float = 2.941995e-04  # 30 ug
    psi: float = np.deg2rad(5.0)
    theta: float = np.deg2rad(5.0)
    lever: float = 1.0
    k: float = 1.196  # 2 % of 59.8 p/m

    def diagonal(self) -> np.ndarray:
        d = np.empty(N_ERR)
        d[ATT] = self.att
        d[VEL] = self.vel
        d[POS] = self.pos
        d[BG] = self.bg
        d[BA] = self.ba
        d[PSI] = self.psi
        d[THETA] = self.theta
        d[LEVER] = self.lever
        d[KSCALE] = self.k
        return d**2


@dataclass(frozen=True)
class FilterState:
    nav: NavState
    params: OdoParams
    b_g: np.ndarray
    b_a: np.ndarray
    P: np.ndarray
    kind: ErrorModelKind

    def __post_init__(self):
        object.__setattr__(self, "b_g", np.asarray(self.b_g, dtype=float))
        object.__setattr__(self, "b_a", np.asarray(self.b_a, dtype=float))
        object.__setattr__(self, "P", np.asarray(self.P, dtype=float))


def init_covariance(
    kind: ErrorModelKind,
    std: InitStd,
    state: NavState,
    earth: EarthParams = WGS84,
) -> np.ndarray:
    """Initial covariance: diagonal in traditional coordinates, mapped
    into the coordinates of ``kind``."""
    batch = np.asarray(state.q_eb).shape[:-1]
    d = np.zeros(batch + (N_ERR, N_ERR))
    idx = np.arange(N_ERR)
    d[..., idx, idx] = std.diagonal()
    if kind is ErrorModelKind.TRADITIONAL:
        return d
    if kind in (ErrorModelKind.LEFT, ErrorModelKind.ROBO_RIGHT):
        j = left_jacobian(state, earth)
    else:
        j = right_jacobian(state, earth)
    if kind in (ErrorModelKind.ROBO_LEFT, ErrorModelKind.ROBO_RIGHT):
        s = np.ones(N_ERR)
        s[ATT] = -1.0  # attitude slot flips sign for the inverse pose
        j = s[:, None] * j
    return j @ d @ np.swapaxes(j, -1, -2)


def _symmetrize(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + np.swapaxes(p, -1, -2))


def _scales(p: np.ndarray) -> np.ndarray:
    """Per-coordinate equilibration scales from the covariance diagonal.

    Right-coordinate covariances legitimately span ~30 orders of magnitude
    (position slots carry r x attitude cross terms); doing the matrix
    products on the equilibrated (unit-diagonal) matrix preserves the
    cancellation structure that keeps unobservable directions unobserved.
    """
    d = np.diagonal(p, axis1=-2, axis2=-1)
    return np.sqrt(np.clip(d, 1e-30, None))


def corrected_imu(fs: FilterState, imu: ImuSample) -> ImuSample:
    return ImuSample(imu.t, imu.gyro - fs.b_g, imu.accel - fs.b_a)


def propagate(
    fs: FilterState,
    imu: ImuSample,
    dt: float,
    noise: NoisePsd,
    earth: EarthParams = WGS84,
    cov_dt: float | None = None,
) -> FilterState:
    """Propagate state and covariance over one IMU interval.

    The navigation state advances through the trident-quaternion
    mechanization with bias-corrected rates; the covariance uses the
    second-order transition ``I + F dt + (F dt)^2 / 2`` and first-order
    process noise ``G Q G^T dt``.  ``cov_dt`` overrides the covariance
    step length when the caller accumulates several IMU intervals.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    imu_c = corrected_imu(fs, imu)
    q, v, r = step_arrays(
        fs.nav.q_eb, fs.nav.v_prime, fs.nav.r_e, imu_c.gyro, imu_c.accel, dt, earth
    )
    nav = NavState(q, v, r, fs.nav.time + dt)
    p = propagate_cov(fs, imu_c, cov_dt if cov_dt is not None else dt, noise, earth)
    return replace(fs, nav=nav, P=p)


def propagate_cov(
    fs: FilterState,
    imu_corrected: ImuSample,
    dt: float,
    noise: NoisePsd,
    earth: EarthParams = WGS84,
) -> np.ndarray:
    """Covariance-only propagation over ``dt`` at the current estimate."""
    sysm = build_system(fs.kind, fs.nav, imu_corrected, earth, noise)
    fdt = sysm.F * dt
    eye = np.eye(N_ERR)
    phi = eye + fdt + 0.5 * (fdt @ fdt)
    qd = sysm.G @ sysm.Q @ np.swapaxes(sysm.G, -1, -2) * dt
    s = _scales(fs.P)
    ss = s[..., :, None] * s[..., None, :]
    phi_s = phi * (s[..., None, :] / s[..., :, None])
    p_s = _symmetrize(phi_s @ (fs.P / ss) @ np.swapaxes(phi_s, -1, -2) + qd / ss)
    p = p_s * ss
    if not np.all(np.isfinite(p)):
        raise FilterFault("covariance became non-finite during propagation")
    return p


def predict_static(fs: FilterState, earth: EarthParams = WGS84) -> np.ndarray:
    """Predicted zero-velocity observation: the earth-frame velocity."""
    return fs.nav.v_e(earth.omega_vec)


def update(
    fs: FilterState,
    m: Measurement,
    h: np.ndarray,
    z_pred: np.ndarray | None = None,
    earth: EarthParams = WGS84,
    gate_sigma: float | None = None,
) -> FilterState:
    """Joseph-form measurement update followed by error injection.

    ``z_pred`` defaults to the static-model prediction; odometer updates
    must pass the prediction explicitly (it depends on the IMU sample).
    """
    if z_pred is None:
        z_pred = predict_static(fs, earth)
    innov = z_pred - m.z
    if not np.all(np.isfinite(innov)):
        raise FilterFault("non-finite innovation")
    sc = _scales(fs.P)
    p_s = fs.P / (sc[..., :, None] * sc[..., None, :])
    h_s = h * sc[..., None, :]
    s_mat = h_s @ p_s @ np.swapaxes(h_s, -1, -2) + m.R
    try:
        s_inv_innov = np.linalg.solve(s_mat, innov[..., None])[..., 0]
        k_s = np.swapaxes(np.linalg.solve(s_mat, h_s @ p_s), -1, -2)
    except np.linalg.LinAlgError as exc:
        raise FilterFault("singular innovation covariance") from exc
    if gate_sigma is not None:
        m2 = np.sum(innov * s_inv_innov, axis=-1)
        if np.all(m2 > gate_sigma**2 * m.z.shape[-1]):
            return fs  # reject outlier, no state change
    dx = sc * (k_s @ innov[..., None])[..., 0]
    ikh = np.eye(N_ERR) - k_s @ h_s
    p_s = _symmetrize(
        ikh @ p_s @ np.swapaxes(ikh, -1, -2) + k_s @ m.R @ np.swapaxes(k_s, -1, -2)
    )
    p = p_s * (sc[..., :, None] * sc[..., None, :])
    if not np.all(np.isfinite(p)):
        raise FilterFault("covariance became non-finite during update")
    return inject_and_reset(replace(fs, P=p), dx, earth)


def inject_and_reset(fs: FilterState, dx: np.ndarray, earth: EarthParams = WGS84) -> FilterState:
    """Fold the estimated error into the full state (estimate-minus-truth
    convention: corrections subtract) and reset it to zero."""
    dx = np.asarray(dx, dtype=float)
    nav = nav_inject(fs.kind, fs.nav, dx[..., 0:9], earth)
    params = OdoParams(
        K=fs.params.K - dx[..., KSCALE],
        psi=fs.params.psi - dx[..., PSI],
        theta=fs.params.theta - dx[..., THETA],
        lever=fs.params.lever - dx[..., LEVER],
    )
    return replace(
        fs,
        nav=nav,
        params=params,
        b_g=fs.b_g - dx[..., BG],
        b_a=fs.b_a - dx[..., BA],
    )
