"""Continuous-time error-state models and covariance transformations.

Five linearizations of the same navigation error dynamics over the
21-component error state

    [att(3), vel(3), pos(3), b_g(3), b_a(3), psi, theta, lever(3), K]

The attitude/velocity/position block semantics depend on the model kind:

* ``LEFT``: multiplicative left trident error (body-frame slots).  The
  system matrix depends only on the measured body rates and specific
  force (plus the tiny gravity-gradient term), making the model
  estimate-invariant over the linearization interval.
* ``RIGHT``: right trident error (earth-frame slots).  Position and
  velocity estimates enter the Jacobians, so the model is only quasi
  estimate-invariant.
* ``ROBO_LEFT`` / ``ROBO_RIGHT``: the same construction applied to the
  inverse (earth-relative-to-body) pose.
* ``TRADITIONAL``: additive velocity/position errors with an earth-frame
  multiplicative attitude angle, the standard EKF baseline.

All builders broadcast over leading batch dimensions and are validated
column-by-column against finite differences of the nonlinear error
propagation in the test suite.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .earth import WGS84, EarthParams, gravitation_e, gravity_gradient
from .mech import ImuSample
from .quat import (
    quat_conj,
    quat_exp_rotvec,
    quat_log_rotvec,
    quat_mul,
    quat_rotate,
    quat_to_dcm,
    quat_vec,
    skew,
    vecquat,
)
from .triquat import (
    NavState,
    TridentQuaternion,
    tq_error_left,
    tq_error_right,
    tq_from_nav,
    tq_inject,
    tq_to_nav,
)

# error-state layout
ATT = slice(0, 3)
VEL = slice(3, 6)
POS = slice(6, 9)
BG = slice(9, 12)
BA = slice(12, 15)
PSI = 15
THETA = 16
LEVER = slice(17, 20)
KSCALE = 20
N_ERR = 21
N_NOISE = 12  # [w_g(3), w_a(3), w_grw(3), w_arw(3)]

_I3 = np.eye(3)


class ErrorModelKind(enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    ROBO_LEFT = "robo-left"
    ROBO_RIGHT = "robo-right"
    TRADITIONAL = "traditional"


@dataclass(frozen=True)
class NoisePsd:
    """Diagonal noise power spectral densities, SI units."""

    gyro_white: float = 0.0  # (rad/s)^2/Hz, i.e. ARW^2
    accel_white: float = 0.0  # (m/s^2)^2/Hz
    gyro_bias_rw: float = 0.0  # (rad/s)^2/Hz of the bias random walk
    accel_bias_rw: float = 0.0

    def matrix(self) -> np.ndarray:
        return np.diag(
            [self.gyro_white] * 3
            + [self.accel_white] * 3
            + [self.gyro_bias_rw] * 3
            + [self.accel_bias_rw] * 3
        )


@dataclass(frozen=True)
class SystemMatrices:
    F: np.ndarray  # (..., 21, 21)
    G: np.ndarray  # (..., 21, 12)
    Q: np.ndarray  # (12, 12) noise PSD


def build_system(
    kind: ErrorModelKind,
    state: NavState,
    imu: ImuSample,
    earth: EarthParams = WGS84,
    noise: NoisePsd | None = None,
) -> SystemMatrices:
    """Assemble F and G for one error-model kind at the current estimate.

    ``imu`` must carry bias-corrected rates.  Rows and columns of the
    augmented parameters (psi, theta, lever, K) are identically zero:
    they are modeled as random constants.
    """
    q = np.asarray(state.q_eb, dtype=float)
    batch = q.shape[:-1]
    w = np.broadcast_to(np.asarray(imu.gyro, dtype=float), batch + (3,))
    f = np.broadcast_to(np.asarray(imu.accel, dtype=float), batch + (3,))
    v = np.broadcast_to(np.asarray(state.v_prime, dtype=float), batch + (3,))
    r = np.broadcast_to(np.asarray(state.r_e, dtype=float), batch + (3,))
    om = np.broadcast_to(earth.omega_vec, batch + (3,))

    cbe = quat_to_dcm(q)
    ceb = np.swapaxes(cbe, -1, -2)
    dgdr = gravity_gradient(r, earth)

    F = np.zeros(batch + (N_ERR, N_ERR))
    G = np.zeros(batch + (N_ERR, N_NOISE))
    G[..., BG, 6:9] = _I3
    G[..., BA, 9:12] = _I3

    if kind is ErrorModelKind.LEFT:
        F[..., ATT, ATT] = -skew(w)
        F[..., ATT, BG] = _I3
        F[..., VEL, ATT] = -skew(f)
        F[..., VEL, VEL] = -skew(w)
        F[..., VEL, POS] = ceb @ dgdr @ cbe
        F[..., VEL, BA] = _I3
        F[..., POS, VEL] = _I3
        F[..., POS, POS] = -skew(w)
        G[..., ATT, 0:3] = -_I3
        G[..., VEL, 3:6] = -_I3
    elif kind is ErrorModelKind.RIGHT:
        g = gravitation_e(r, earth)
        F[..., ATT, ATT] = -skew(om)
        F[..., ATT, BG] = cbe
        F[..., VEL, ATT] = skew(g) - dgdr @ skew(r)
        F[..., VEL, VEL] = -skew(om)
        F[..., VEL, POS] = dgdr
        F[..., VEL, BG] = skew(v) @ cbe
        F[..., VEL, BA] = cbe
        F[..., POS, VEL] = _I3
        F[..., POS, POS] = -skew(om)
        F[..., POS, BG] = skew(r) @ cbe
        G[..., ATT, 0:3] = -cbe
        G[..., VEL, 0:3] = -skew(v) @ cbe
        G[..., VEL, 3:6] = -cbe
        G[..., POS, 0:3] = -skew(r) @ cbe
    elif kind is ErrorModelKind.ROBO_LEFT:
        # world-centric right dynamics re-expressed for the inverse pose:
        # the attitude slot flips sign, so every gyro coupling and the
        # gravity term change sign relative to the RIGHT block.
        g = gravitation_e(r, earth)
        F[..., ATT, ATT] = -skew(om)
        F[..., ATT, BG] = -cbe
        F[..., VEL, ATT] = -skew(g) + dgdr @ skew(r)
        F[..., VEL, VEL] = -skew(om)
        F[..., VEL, POS] = dgdr
        F[..., VEL, BG] = skew(v) @ cbe
        F[..., VEL, BA] = cbe
        F[..., POS, VEL] = _I3
        F[..., POS, POS] = -skew(om)
        F[..., POS, BG] = skew(r) @ cbe
        G[..., ATT, 0:3] = cbe
        G[..., VEL, 0:3] = -skew(v) @ cbe
        G[..., VEL, 3:6] = -cbe
        G[..., POS, 0:3] = -skew(r) @ cbe
    elif kind is ErrorModelKind.ROBO_RIGHT:
        F[..., ATT, ATT] = -skew(w)
        F[..., ATT, BG] = -_I3
        F[..., VEL, ATT] = skew(f)
        F[..., VEL, VEL] = -skew(w)
        F[..., VEL, POS] = ceb @ dgdr @ cbe
        F[..., VEL, BA] = _I3
        F[..., POS, VEL] = _I3
        F[..., POS, POS] = -skew(w)
        G[..., ATT, 0:3] = _I3
        G[..., VEL, 3:6] = -_I3
    elif kind is ErrorModelKind.TRADITIONAL:
        F[..., ATT, ATT] = -skew(om)
        F[..., ATT, BG] = -cbe
        F[..., VEL, ATT] = -skew((cbe @ f[..., None])[..., 0])
        F[..., VEL, VEL] = -2.0 * skew(om)
        F[..., VEL, POS] = dgdr - skew(om) @ skew(om)
        F[..., VEL, BA] = -cbe
        F[..., POS, VEL] = _I3
        G[..., ATT, 0:3] = cbe
        G[..., VEL, 3:6] = cbe
    else:  # pragma: no cover
        raise ValueError(f"unknown error model kind {kind!r}")

    Q = noise.matrix() if noise is not None else np.zeros((N_NOISE, N_NOISE))
    return SystemMatrices(F, G, Q)


# --- error extraction / injection over NavState pairs -----------------------


def _be_pose(t: TridentQuaternion) -> TridentQuaternion:
    """Inverse-perspective pose: attitude conjugated, translation slots
    re-expressed in the body frame."""
    nav = tq_to_nav(t)
    q_be = quat_conj(nav.q_eb)
    v_b = quat_rotate(q_be, nav.v_prime)
    r_b = quat_rotate(q_be, nav.r_e)
    return TridentQuaternion(
        q_be, 0.5 * quat_mul(vecquat(v_b), q_be), 0.5 * quat_mul(vecquat(r_b), q_be)
    )


def _eb_from_be(t: TridentQuaternion) -> TridentQuaternion:
    nav = tq_to_nav(t)  # here slots are (q_be, v_b, r_b)
    q_eb = quat_conj(nav.q_eb)
    v = quat_rotate(q_eb, nav.v_prime)
    r = quat_rotate(q_eb, nav.r_e)
    return tq_from_nav(NavState(q_eb, v, r))


def _sandwich_vec(a: np.ndarray, v: np.ndarray, b: np.ndarray) -> np.ndarray:
    """vec(a o [0, v] o b) for unit-ish quaternions a, b."""
    return quat_mul(a, quat_mul(vecquat(v), b))[..., 1:]


def nav_error(
    kind: ErrorModelKind, est: NavState, truth: NavState, earth: EarthParams = WGS84
) -> np.ndarray:
    """Nonlinear 9-vector nav error (att, vel, pos blocks) between an
    estimated and a true state, in the coordinates of ``kind``.

    Algebraically identical to extracting the slots of the trident error
    product, but regrouped difference-first so that earth-scale position
    magnitudes never cancel (the forms stay accurate for 1e-6-level
    perturbations of a 6.4e6 m state).
    """
    qe, qt = est.q_eb, truth.q_eb
    dv = truth.v_prime - est.v_prime  # == -(delta v')
    dr = truth.r_e - est.r_e
    if kind is ErrorModelKind.TRADITIONAL:
        datt = quat_log_rotvec(quat_mul(qe, quat_conj(qt)))
        om = earth.omega_vec
        return np.concatenate(
            [datt, -dv + np.cross(om, dr), -dr], axis=-1
        )
    if kind is ErrorModelKind.LEFT:
        dq = quat_mul(quat_conj(qe), qt)
        return np.concatenate(
            [
                2.0 * quat_vec(dq),
                _sandwich_vec(quat_conj(qe), dv, qt),
                _sandwich_vec(quat_conj(qe), dr, qt),
            ],
            axis=-1,
        )
    if kind is ErrorModelKind.RIGHT:
        dq = quat_mul(qt, quat_conj(qe))
        s = quat_vec(dq)
        vel = quat_mul(vecquat(dv), dq)[..., 1:] + 2.0 * np.cross(est.v_prime, s)
        pos = quat_mul(vecquat(dr), dq)[..., 1:] + 2.0 * np.cross(est.r_e, s)
        return np.concatenate([2.0 * s, vel, pos], axis=-1)
    # robocentric kinds: same construction on the inverse pose, whose
    # translation slots are the body-frame velocity/position
    dvb = quat_rotate(quat_conj(qt), dv) + _dcm_diff_apply(qt, qe, est.v_prime)
    drb = quat_rotate(quat_conj(qt), dr) + _dcm_diff_apply(qt, qe, est.r_e)
    if kind is ErrorModelKind.ROBO_LEFT:
        dq = quat_mul(qe, quat_conj(qt))  # conj(est_be) o truth_be
        return np.concatenate(
            [
                2.0 * quat_vec(dq),
                _sandwich_vec(qe, dvb, quat_conj(qt)),
                _sandwich_vec(qe, drb, quat_conj(qt)),
            ],
            axis=-1,
        )
    if kind is ErrorModelKind.ROBO_RIGHT:
        dq = quat_mul(quat_conj(qt), qe)  # truth_be o conj(est_be)
        s = quat_vec(dq)
        vb_est = quat_rotate(quat_conj(qe), est.v_prime)
        rb_est = quat_rotate(quat_conj(qe), est.r_e)
        vel = quat_mul(vecquat(dvb), dq)[..., 1:] + 2.0 * np.cross(vb_est, s)
        pos = quat_mul(vecquat(drb), dq)[..., 1:] + 2.0 * np.cross(rb_est, s)
        return np.concatenate([2.0 * s, vel, pos], axis=-1)
    raise ValueError(f"unknown error model kind {kind!r}")  # pragma: no cover


def _dcm_diff_apply(qt: np.ndarray, qe: np.ndarray, u: np.ndarray) -> np.ndarray:
    """(C(qt)^T - C(qe)^T) @ u computed difference-first."""
    dc = quat_to_dcm(qt) - quat_to_dcm(qe)
    return (np.swapaxes(dc, -1, -2) @ u[..., None])[..., 0]


def nav_inject(
    kind: ErrorModelKind, est: NavState, delta9: np.ndarray, earth: EarthParams = WGS84
) -> NavState:
    """Fold an estimated error back into the state (correction step).

    Returns the state whose error w.r.t. ``est`` reproduces ``delta9`` to
    second order, i.e. the truth implied by the error estimate.
    """
    delta9 = np.asarray(delta9, dtype=float)
    trip = (delta9[..., 0:3], delta9[..., 3:6], delta9[..., 6:9])
    if kind is ErrorModelKind.TRADITIONAL:
        q_new = quat_mul(quat_exp_rotvec(-trip[0]), est.q_eb)
        om = earth.omega_vec
        v_e = est.v_e(om) - trip[1]
        r_new = est.r_e - trip[2]
        return NavState(q_new, v_e + np.cross(om, r_new), r_new, est.time)
    t = tq_from_nav(est)
    if kind is ErrorModelKind.LEFT:
        out = tq_inject(t, trip, "left")
    elif kind is ErrorModelKind.RIGHT:
        out = tq_inject(t, trip, "right")
    elif kind is ErrorModelKind.ROBO_LEFT:
        out = _eb_from_be(tq_inject(_be_pose(t), trip, "left"))
    elif kind is ErrorModelKind.ROBO_RIGHT:
        out = _eb_from_be(tq_inject(_be_pose(t), trip, "right"))
    else:  # pragma: no cover
        raise ValueError(f"unknown error model kind {kind!r}")
    nav = tq_to_nav(out, est.time)
    return nav


# --- covariance transformations ---------------------------------------------


def _check_psd(p: np.ndarray) -> None:
    if np.any(np.abs(p - np.swapaxes(p, -1, -2)) > 1e-9 * np.abs(p).max()):
        raise ValueError("covariance is not symmetric")
    eig = np.linalg.eigvalsh(p)
    tr = np.trace(p, axis1=-2, axis2=-1)
    if np.any(eig[..., 0] < -1e-12 * tr):
        raise ValueError("covariance is not positive semidefinite")


def left_jacobian(state: NavState, earth: EarthParams = WGS84) -> np.ndarray:
    """Traditional-to-left coordinate map (identity on parameter blocks)."""
    ceb = np.swapaxes(quat_to_dcm(state.q_eb), -1, -2)
    batch = ceb.shape[:-2]
    j = np.zeros(batch + (N_ERR, N_ERR))
    idx = np.arange(N_ERR)
    j[..., idx, idx] = 1.0
    j[..., ATT, ATT] = _I3
    j[..., VEL, ATT] = ceb @ skew(np.broadcast_to(earth.omega_vec, batch + (3,)))
    j[..., VEL, VEL] = ceb
    j[..., POS, POS] = ceb
    return j


def right_jacobian(state: NavState, earth: EarthParams = WGS84) -> np.ndarray:
    """Traditional-to-right coordinate map."""
    batch = np.asarray(state.q_eb).shape[:-1]
    j = np.zeros(batch + (N_ERR, N_ERR))
    idx = np.arange(N_ERR)
    j[..., idx, idx] = 1.0
    j[..., VEL, ATT] = skew(np.broadcast_to(state.v_prime, batch + (3,)))
    j[..., VEL, POS] = skew(np.broadcast_to(earth.omega_vec, batch + (3,)))
    j[..., POS, ATT] = skew(np.broadcast_to(state.r_e, batch + (3,)))
    return j


def cov_transform_left(p_trad: np.ndarray, state: NavState, earth: EarthParams = WGS84) -> np.ndarray:
    _check_psd(p_trad)
    j = left_jacobian(state, earth)
    return j @ p_trad @ np.swapaxes(j, -1, -2)


def cov_transform_right(p_trad: np.ndarray, state: NavState, earth: EarthParams = WGS84) -> np.ndarray:
    _check_psd(p_trad)
    j = right_jacobian(state, earth)
    return j @ p_trad @ np.swapaxes(j, -1, -2)


def left_invariance_report(
    state_a: NavState, state_b: NavState, imu: ImuSample, earth: EarthParams = WGS84
) -> dict[str, float]:
    """Block-wise max |F_l(state_a) - F_l(state_b)| for a shared IMU input.

    Every block except the gravity-gradient coupling is built from measured
    quantities only, so the differences vanish to machine precision.
    """
    fa = build_system(ErrorModelKind.LEFT, state_a, imu, earth).F
    fb = build_system(ErrorModelKind.LEFT, state_b, imu, earth).F
    d = np.abs(fa - fb)
    blocks = {
        "att_att": d[ATT, ATT],
        "vel_att": d[VEL, ATT],
        "vel_vel": d[VEL, VEL],
        "vel_pos_gradient": d[VEL, POS],
        "pos_vel": d[POS, VEL],
        "pos_pos": d[POS, POS],
        "att_bg": d[ATT, BG],
        "vel_ba": d[VEL, BA],
    }
    return {k: float(v.max()) for k, v in blocks.items()}


# --- extended-pose (5x5 matrix group) cross-check ----------------------------


def _chi(state: NavState) -> np.ndarray:
    x = np.eye(5)
    x[:3, :3] = quat_to_dcm(state.q_eb)
    x[:3, 3] = state.v_prime
    x[:3, 4] = state.r_e
    return x


def _group_error_vec(eta: np.ndarray) -> np.ndarray:
    from .quat import dcm_to_quat

    att = quat_log_rotvec(dcm_to_quat(eta[:3, :3]))
    return np.concatenate([att, eta[:3, 3], eta[:3, 4]])


def se23_cross_check(est: NavState, truth: NavState) -> dict[str, np.ndarray]:
    """Compare trident error extraction with the extended-pose group errors.

    Builds the 5x5 extended-pose matrices, forms eta_l = inv(chi_est) chi
    and eta_r = chi inv(chi_est), and differences their error vectors
    against the trident products.  Both coincide to first order, so the
    returned discrepancies shrink as the squared error magnitude.
    """
    chi_e, chi_t = _chi(est), _chi(truth)
    inv_e = np.linalg.inv(chi_e)
    eta_l = inv_e @ chi_t
    eta_r = chi_t @ inv_e
    te, tt = tq_from_nav(est), tq_from_nav(truth)
    tri_l = np.concatenate(tq_error_left(te, tt))
    tri_r = np.concatenate(tq_error_right(te, tt))
    return {
        "left": np.abs(_group_error_vec(eta_l) - tri_l),
        "right": np.abs(_group_error_vec(eta_r) - tri_r),
    }
