"""Monte-Carlo alignment experiments: sweep driver, metrics and replay.

A heading-error sweep runs every Monte-Carlo case as one vectorized filter
bank (leading batch dimension = runs), recording per-epoch attitude errors
in the navigation frame.  The same bank with batch size one backs the
single-run alignment and the log-replay path, so replaying an exported
log reproduces the original run bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .earth import WGS84, EarthParams, GeoPosition, c_en, ecef_to_lla
from .ekf import FilterState, InitStd, init_covariance, propagate_cov, update
from .errmodel import ATT, ErrorModelKind, NoisePsd
from .meas import (
    OdoParams,
    h_odometer,
    h_static,
    odometer_measurement,
    predict_odometer,
    zupt_measurement,
)
from .mech import ImuSample, step_arrays
from .quat import (
    dcm_to_quat,
    quat_conj,
    quat_exp_rotvec,
    quat_log_rotvec,
    quat_mul,
    quat_to_dcm,
)
from .sim import (
    SensorSpec,
    TrajectoryProfile,
    canonical_motion_profile,
    gen_truth,
    static_profile,
    synth_imu,
    synth_odometer,
)
from .triquat import NavState

DEFAULT_FILTERS = (ErrorModelKind.TRADITIONAL, ErrorModelKind.RIGHT, ErrorModelKind.LEFT)


@dataclass(frozen=True)
class SweepConfig:
    """Heading-error Monte-Carlo sweep definition."""

    scenario: str = "static"  # "static" | "in-motion"
    heading_errors_deg: tuple[float, ...] = tuple(float(h) for h in range(-180, 181, 5))
    roll_pitch_error_deg: float = 5.0
    trials: int = 1
    filters: tuple[ErrorModelKind, ...] = DEFAULT_FILTERS
    duration: float = 150.0
    seed: int = 0
    start: GeoPosition = GeoPosition(np.deg2rad(30.0), np.deg2rad(120.0), 10.0)
    heading: float = 0.0
    sensors: SensorSpec = SensorSpec()
    init_std: InitStd = InitStd()
    meas_rate: float = 1.0  # Hz
    cov_rate: float = 10.0  # covariance propagation subcycle, Hz
    zupt_sigma: float = 0.01  # m/s
    odo_sigma_pulse: float = 2.0  # pulses/s
    odo_sigma_nhc: float = 0.05  # m/s
    chunk_runs: int = 32
    coarse_att_nav_deg: tuple[float, float, float] | None = None  # heading, pitch, roll

    def __post_init__(self):
        if not self.heading_errors_deg or not self.filters:
            raise ValueError("heading_errors_deg and filters must be non-empty")
        if self.duration <= 0 or self.trials < 1:
            raise ValueError("duration must be positive and trials >= 1")
        if self.scenario not in ("static", "in-motion"):
            raise ValueError(f"unknown scenario {self.scenario!r}")

    def profile(self) -> TrajectoryProfile:
        if self.scenario == "static":
            return static_profile(self.duration, self.start, self.heading)
        prof = canonical_motion_profile(self.start, self.heading)
        if abs(prof.duration - self.duration) > 1e-9:
            raise ValueError("in-motion scenario runs the canonical 600 s profile")
        return prof


@dataclass(frozen=True)
class McReport:
    """Per-epoch sweep statistics; angles in degrees."""

    epochs: np.ndarray  # (E,)
    filters: tuple[str, ...]
    rmse: dict  # name -> (E, 3) roll/pitch/yaw RMSE over runs
    convergence_time: dict  # name -> seconds to sustained 5 deg yaw RMSE (inf if never)
    heading_std: dict  # name -> (E,) std of yaw error over runs
    nees_yaw: dict  # name -> (E,) mean yaw NEES over runs
    yaw_err: dict  # name -> (E, R) per-run yaw error
    terminal_yaw: dict  # name -> (R,) mean |yaw error| over the last 20 s
    failed_runs: dict  # name -> count

    def terminal_rmse(self, name: str) -> np.ndarray:
        return self.rmse[name][-1]


@dataclass(frozen=True)
class BankInit:
    q: np.ndarray  # (B, 4)
    v: np.ndarray  # (B, 3)
    r: np.ndarray  # (B, 3)
    p0: np.ndarray  # (B, 21, 21)
    k_nominal: float


@dataclass(frozen=True)
class BankRecord:
    """Filter-bank trajectory sampled at measurement epochs."""

    t: np.ndarray  # (E,)
    q: np.ndarray  # (E, B, 4)
    v: np.ndarray
    r: np.ndarray
    b_g: np.ndarray
    b_a: np.ndarray
    psi: np.ndarray  # (E, B)
    theta: np.ndarray
    lever: np.ndarray  # (E, B, 3)
    k: np.ndarray  # (E, B)
    p_diag: np.ndarray  # (E, B, 21)
    p_att: np.ndarray  # (E, B, 3, 3) attitude covariance block

    def state(self, e: int, b: int = 0) -> NavState:
        return NavState(self.q[e, b], self.v[e, b], self.r[e, b], float(self.t[e]))


_MEAS_KIND = {
    ErrorModelKind.LEFT: "left",
    ErrorModelKind.RIGHT: "right",
    ErrorModelKind.TRADITIONAL: "traditional",
    ErrorModelKind.ROBO_LEFT: "right",
    ErrorModelKind.ROBO_RIGHT: "left",
}
_ROBO = (ErrorModelKind.ROBO_LEFT, ErrorModelKind.ROBO_RIGHT)


def measurement_matrix(
    kind: ErrorModelKind,
    meas_kind: str,
    state: NavState,
    imu: ImuSample | None = None,
    params: OdoParams | None = None,
    earth: EarthParams = WGS84,
) -> np.ndarray:
    """H for any error-model kind; robocentric coordinates reuse the
    world-centric matrices with the attitude columns sign-flipped."""
    base = _MEAS_KIND[kind]
    if meas_kind == "static":
        h = h_static(base, state, earth)
    else:
        h = h_odometer(base, state, imu, params, earth)
    if kind in _ROBO:
        h = h.copy()
        h[..., :, ATT] = -h[..., :, ATT]
    return h


def run_filter_bank(
    kind: ErrorModelKind,
    init: BankInit,
    gyro: np.ndarray,  # (B, N, 3)
    accel: np.ndarray,
    odo_rate: np.ndarray | None,  # (B, N) pulse rates, or None for zero-velocity
    dt: float,
    cfg: SweepConfig,
    earth: EarthParams = WGS84,
) -> BankRecord:
    """Run one vectorized error-state filter over B parallel cases."""
    b_runs, n = gyro.shape[0], gyro.shape[1]
    meas_stride = max(1, int(round(1.0 / (cfg.meas_rate * dt))))
    cov_stride = max(1, int(round(1.0 / (cfg.cov_rate * dt))))
    n_epochs = n // meas_stride + 1

    noise = NoisePsd(
        gyro_white=cfg.sensors.gyro_arw**2,
        accel_white=cfg.sensors.accel_vrw**2,
        gyro_bias_rw=cfg.sensors.gyro_bias_rw**2,
        accel_bias_rw=cfg.sensors.accel_bias_rw**2,
    )
    q, v, r = init.q.copy(), init.v.copy(), init.r.copy()
    p = init.p0.copy()
    b_g = np.zeros((b_runs, 3))
    b_a = np.zeros((b_runs, 3))
    psi = np.zeros(b_runs)
    theta = np.zeros(b_runs)
    lever = np.zeros((b_runs, 3))
    k_est = np.full(b_runs, init.k_nominal)

    rec = {
        name: np.empty((n_epochs,) + shape)
        for name, shape in [
            ("q", (b_runs, 4)), ("v", (b_runs, 3)), ("r", (b_runs, 3)),
            ("b_g", (b_runs, 3)), ("b_a", (b_runs, 3)), ("psi", (b_runs,)),
            ("theta", (b_runs,)), ("lever", (b_runs, 3)), ("k", (b_runs,)),
            ("p_diag", (b_runs, 21)), ("p_att", (b_runs, 3, 3)),
        ]
    }
    t_rec = np.empty(n_epochs)

    def record(e, t_now):
        t_rec[e] = t_now
        rec["q"][e] = q
        rec["v"][e] = v
        rec["r"][e] = r
        rec["b_g"][e] = b_g
        rec["b_a"][e] = b_a
        rec["psi"][e] = psi
        rec["theta"][e] = theta
        rec["lever"][e] = lever
        rec["k"][e] = k_est
        rec["p_diag"][e] = np.diagonal(p, axis1=-2, axis2=-1)
        rec["p_att"][e] = p[..., 0:3, 0:3]

    record(0, 0.0)
    acc_g = np.zeros((b_runs, 3))
    acc_a = np.zeros((b_runs, 3))
    acc_n = 0
    t_now = 0.0
    epoch = 1
    for s in range(n):
        g_c = gyro[:, s] - b_g
        a_c = accel[:, s] - b_a
        q, v, r = step_arrays(q, v, r, g_c, a_c, dt, earth)
        t_now += dt
        acc_g += g_c
        acc_a += a_c
        acc_n += 1
        at_meas = (s + 1) % meas_stride == 0
        if (s + 1) % cov_stride == 0 or at_meas:
            nav = NavState(q, v, r, t_now)
            params = OdoParams(k_est, psi, theta, lever)
            fs = FilterState(nav, params, b_g, b_a, p, kind)
            imu_mean = ImuSample(t_now, acc_g / acc_n, acc_a / acc_n)
            p = propagate_cov(fs, imu_mean, acc_n * dt, noise, earth)
            acc_g[:] = 0.0
            acc_a[:] = 0.0
            acc_n = 0
        if at_meas:
            nav = NavState(q, v, r, t_now)
            params = OdoParams(k_est, psi, theta, lever)
            fs = FilterState(nav, params, b_g, b_a, p, kind)
            imu_c = ImuSample(t_now, g_c, a_c)
            if odo_rate is None:
                m = zupt_measurement(cfg.zupt_sigma)
                h = measurement_matrix(kind, "static", nav, earth=earth)
                fs = update(fs, m, h, earth=earth)
            else:
                m = odometer_measurement(
                    odo_rate[:, s], cfg.odo_sigma_pulse, cfg.odo_sigma_nhc
                )
                h = measurement_matrix(kind, "odometer", nav, imu_c, params, earth)
                z_pred = predict_odometer(nav, imu_c, params, earth)
                fs = update(fs, m, h, z_pred, earth=earth)
            q, v, r = fs.nav.q_eb, fs.nav.v_prime, fs.nav.r_e
            b_g, b_a, p = fs.b_g, fs.b_a, fs.P
            psi, theta = np.asarray(fs.params.psi), np.asarray(fs.params.theta)
            lever, k_est = fs.params.lever, np.asarray(fs.params.K)
            record(epoch, t_now)
            epoch += 1

    return BankRecord(t=t_rec, **rec)


def attitude_error_nav(
    est: NavState, truth: NavState, earth: EarthParams = WGS84
) -> np.ndarray:
    """Roll/pitch/yaw attitude error in degrees, resolved about the
    north, east and up axes of the navigation frame at the true position.

    The error rotation log is exact up to 180 degrees; its up-axis
    component is the (wrapped) yaw error.
    """
    geo = ecef_to_lla(np.asarray(truth.r_e, dtype=float).reshape(-1, 3)[0], earth)
    q_en = dcm_to_quat(c_en(geo))
    q_nb_true = quat_mul(quat_conj(q_en), truth.q_eb)
    q_nb_est = quat_mul(quat_conj(q_en), est.q_eb)
    phi = quat_log_rotvec(quat_mul(q_nb_est, quat_conj(q_nb_true)))
    # components about N, U, E -> (roll, pitch, yaw)
    return np.rad2deg(np.stack([phi[..., 0], phi[..., 2], phi[..., 1]], axis=-1))


def _perturbed_attitude(
    q_true: np.ndarray,
    heading_err_deg: np.ndarray,
    roll_pitch_deg: float,
    r_true: np.ndarray,
    earth: EarthParams,
) -> np.ndarray:
    """Initial attitude estimates: truth rotated by the heading error about
    up plus fixed roll/pitch offsets, applied in the navigation frame."""
    geo = ecef_to_lla(r_true, earth)
    q_en = dcm_to_quat(c_en(geo))
    rp = np.deg2rad(roll_pitch_deg)
    err = np.deg2rad(np.asarray(heading_err_deg, dtype=float))
    up = np.zeros(err.shape + (3,))
    up[..., 1] = err  # nav-frame up axis
    q_err = quat_mul(
        quat_exp_rotvec(up),
        quat_mul(
            quat_exp_rotvec(np.array([rp, 0.0, 0.0])),
            quat_exp_rotvec(np.array([0.0, 0.0, rp])),
        ),
    )
    q_nb = quat_mul(quat_conj(q_en), q_true)
    return quat_mul(q_en, quat_mul(q_err, q_nb))


def _perturbed_attitude_full(q_true, errs_deg, r_true, earth):
    heading, pitch, roll = (np.deg2rad(float(x)) for x in errs_deg)
    geo = ecef_to_lla(r_true, earth)
    q_en = dcm_to_quat(c_en(geo))
    q_err = quat_mul(
        quat_exp_rotvec(np.array([0.0, heading, 0.0])),
        quat_mul(
            quat_exp_rotvec(np.array([roll, 0.0, 0.0])),
            quat_exp_rotvec(np.array([0.0, 0.0, pitch])),
        ),
    )
    q_nb = quat_mul(quat_conj(q_en), q_true)
    return quat_mul(q_en, quat_mul(q_err, q_nb))


def _yaw_variance(kind: ErrorModelKind, p_att, q_est, r_true, earth) -> np.ndarray:
    """Variance of the up-axis attitude error implied by the filter
    covariance, used for the consistency (NEES) statistics."""
    geo = ecef_to_lla(r_true, earth)
    u_e = c_en(geo)[:, 1]  # up axis in the e-frame
    if kind in (ErrorModelKind.LEFT, ErrorModelKind.ROBO_RIGHT):
        u = quat_to_dcm(quat_conj(q_est)) @ u_e  # body-frame error vector
    else:
        u = np.broadcast_to(u_e, q_est.shape[:-1] + (3,))
    return np.einsum("...i,...ij,...j->...", u, p_att, u)


def run_sweep(cfg: SweepConfig, earth: EarthParams = WGS84) -> McReport:
    """Monte-Carlo heading sweep; deterministic for a fixed config+seed."""
    dt = 1.0 / cfg.sensors.imu_rate
    truth = gen_truth(cfg.profile(), earth, dt, cfg.sensors.odo_params())
    n = len(truth) - 1
    meas_stride = max(1, int(round(1.0 / (cfg.meas_rate * dt))))
    epochs = truth.t[::meas_stride]

    headings = np.asarray(cfg.heading_errors_deg, dtype=float)
    runs = [
        (h_idx, trial)
        for trial in range(cfg.trials)
        for h_idx in range(headings.shape[0])
    ]
    n_runs = len(runs)

    q0_all = _perturbed_attitude(
        truth.q_eb[0],
        np.array([headings[h] for h, _ in runs]),
        cfg.roll_pitch_error_deg,
        truth.r_e[0],
        earth,
    )
    if cfg.coarse_att_nav_deg is not None:
        q_coarse = _perturbed_attitude_full(
            truth.q_eb[0], cfg.coarse_att_nav_deg, truth.r_e[0], earth
        )
        q0_all = np.broadcast_to(q_coarse, q0_all.shape).copy()

    names = [k.value for k in cfg.filters]
    yaw_err = {nm: np.empty((epochs.shape[0], n_runs)) for nm in names}
    all_err = {nm: np.empty((epochs.shape[0], n_runs, 3)) for nm in names}
    yaw_nees = {nm: np.empty((epochs.shape[0], n_runs)) for nm in names}
    failed = {nm: 0 for nm in names}

    for lo in range(0, n_runs, cfg.chunk_runs):
        hi = min(lo + cfg.chunk_runs, n_runs)
        gyro = np.empty((hi - lo, n, 3))
        accel = np.empty((hi - lo, n, 3))
        odo = np.empty((hi - lo, n)) if cfg.scenario == "in-motion" else None
        for i, (h_idx, trial) in enumerate(runs[lo:hi]):
            rng = np.random.default_rng(
                np.random.SeedSequence((cfg.seed, h_idx, trial))
            )
            stream = synth_imu(truth, cfg.sensors, earth, rng)
            gyro[i] = stream.gyro
            accel[i] = stream.accel
            if odo is not None:
                odo[i] = synth_odometer(truth, cfg.sensors, rng).pulse_rate

        for kind, nm in zip(cfg.filters, names):
            q0 = q0_all[lo:hi]
            nav0 = NavState(
                q0,
                np.broadcast_to(truth.v_prime[0], q0.shape[:-1] + (3,)),
                np.broadcast_to(truth.r_e[0], q0.shape[:-1] + (3,)),
                0.0,
            )
            init = BankInit(
                q=q0,
                v=np.array(nav0.v_prime),
                r=np.array(nav0.r_e),
                p0=init_covariance(kind, cfg.init_std, nav0, earth),
                k_nominal=cfg.sensors.odo_k,
            )
            record = run_filter_bank(kind, init, gyro, accel, odo, dt, cfg, earth)
            for e in range(epochs.shape[0]):
                tk = e * meas_stride
                st_true = truth.state(tk)
                est = NavState(record.q[e], record.v[e], record.r[e], st_true.time)
                err = attitude_error_nav(est, st_true, earth)
                all_err[nm][e, lo:hi] = err
                yaw_err[nm][e, lo:hi] = err[..., 2]
                var = _yaw_variance(kind, record.p_att[e], record.q[e], st_true.r_e, earth)
                yaw_nees[nm][e, lo:hi] = np.deg2rad(err[..., 2]) ** 2 / np.maximum(var, 1e-18)

    rmse = {nm: np.sqrt(np.mean(all_err[nm] ** 2, axis=1)) for nm in names}
    conv = {nm: _convergence_time(epochs, rmse[nm][:, 2], 5.0) for nm in names}
    h_std = {nm: yaw_err[nm].std(axis=1) for nm in names}
    nees = {nm: yaw_nees[nm].mean(axis=1) for nm in names}
    last20 = epochs >= epochs[-1] - 20.0
    terminal = {nm: np.abs(yaw_err[nm][last20]).mean(axis=0) for nm in names}
    return McReport(
        epochs=epochs,
        filters=tuple(names),
        rmse=rmse,
        convergence_time=conv,
        heading_std=h_std,
        nees_yaw=nees,
        yaw_err=yaw_err,
        terminal_yaw=terminal,
        failed_runs=failed,
    )


def _convergence_time(epochs: np.ndarray, yaw_rmse: np.ndarray, threshold: float) -> float:
    """First epoch after which the yaw RMSE stays below the threshold."""
    below = yaw_rmse <= threshold
    if not below[-1]:
        return float("inf")
    idx = np.where(~below)[0]
    first = 0 if idx.size == 0 else idx[-1] + 1
    return float(epochs[first])
