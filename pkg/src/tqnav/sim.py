"""Ground-truth trajectory generation and sensor synthesis.

Trajectories are described by a piecewise profile of wheel-point speed and
heading rate in the local north-up-east frame; ramps are cosine-smoothed
so that the synthesized path is twice differentiable and passes the
kinematic-consistency checks at every sample.  The IMU stream is obtained
by exact inversion of the classic mechanization step, which makes the
noiseless sensor-to-truth round trip close to integrator tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .earth import G0, WGS84, EarthParams, GeoPosition, gravitation_e, lla_to_ecef
from .meas import OdoParams, c_bm
from .quat import (
    dcm_to_quat,
    quat_conj,
    quat_exp_rotvec,
    quat_log_rotvec,
    quat_mul,
    quat_normalize,
    quat_rotate,
    skew,
)
from .triquat import NavState

DEG_H = np.deg2rad(1.0) / 3600.0  # deg/hour -> rad/s
DEG_SQRT_H = np.deg2rad(1.0) / 60.0  # deg/sqrt(hour) -> rad/sqrt(s)
UG = 1e-6 * G0  # micro-g -> m/s^2


@dataclass(frozen=True)
class SensorSpec:
    """Sensor error magnitudes (SI units) and the synthesis seed."""

    gyro_bias: float = 0.005 * DEG_H  # rad/s (1-sigma random constant)
    gyro_arw: float = 0.001 * DEG_SQRT_H  # rad/sqrt(s)
    accel_bias: float = 30.0 * UG  # m/s^2
    accel_vrw: float = 5.0 * UG  # m/s^2/sqrt(Hz)
    gyro_bias_rw: float = 0.0  # rad/s/sqrt(s); biases default to random constants
    accel_bias_rw: float = 0.0
    odo_k: float = 59.8  # pulses per meter
    odo_sigma: float = 2.0  # pulses/s white noise on the pulse rate
    mount_psi: float = np.deg2rad(3.0)
    mount_theta: float = np.deg2rad(2.0)
    lever: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.5, 0.8]))
    imu_rate: float = 100.0  # Hz
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lever", np.asarray(self.lever, dtype=float))
        for name in ("gyro_arw", "accel_vrw", "gyro_bias_rw", "accel_bias_rw", "odo_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def odo_params(self) -> OdoParams:
        return OdoParams(self.odo_k, self.mount_psi, self.mount_theta, self.lever)


@dataclass(frozen=True)
class Segment:
    """One motion segment; speeds are wheel-point speeds in m/s."""

    kind: str  # static | ramp | cruise | turn | sine
    duration: float
    v0: float = 0.0
    v1: float = 0.0
    dchi: float = 0.0  # total heading change over the segment, rad
    amp: float = 0.0  # sine speed amplitude
    period: float = 40.0  # sine speed period, s

    def speed(self, tau):
        if self.kind == "ramp":
            return self.v0 + (self.v1 - self.v0) * 0.5 * (1 - np.cos(np.pi * tau / self.duration))
        if self.kind == "sine":
            return self.v0 + self.amp * np.sin(2 * np.pi * tau / self.period)
        if self.kind == "static":
            return np.zeros_like(np.asarray(tau, dtype=float))
        return np.full_like(np.asarray(tau, dtype=float), self.v0)

    def chi_rate(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.kind == "turn":
            peak = 2.0 * self.dchi / self.duration
            return peak * 0.5 * (1 - np.cos(2 * np.pi * tau / self.duration))
        return np.zeros_like(tau)

    def chi_change(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.kind == "turn":
            peak = 2.0 * self.dchi / self.duration
            return peak * 0.5 * (tau - np.sin(2 * np.pi * tau / self.duration) * self.duration / (2 * np.pi))
        return np.zeros_like(tau)


@dataclass(frozen=True)
class TrajectoryProfile:
    kind: str  # "static" | "in-motion"
    duration: float
    start: GeoPosition = GeoPosition(np.deg2rad(30.0), np.deg2rad(120.0), 10.0)
    heading: float = 0.0  # initial heading, rad from north toward east
    segments: tuple[Segment, ...] = ()

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.kind == "in-motion":
            total = sum(s.duration for s in self.segments)
            if abs(total - self.duration) > 1e-9:
                raise ValueError(
                    f"segments cover {total} s but the profile lasts {self.duration} s"
                )
            for s in self.segments:
                if min(s.v0, s.v1) < 0 or (s.kind == "sine" and s.v0 - abs(s.amp) < 0):
                    raise ValueError("segment speeds must stay non-negative")


def static_profile(duration: float = 150.0, start: GeoPosition | None = None,
                   heading: float = 0.0) -> TrajectoryProfile:
    kwargs = {} if start is None else {"start": start}
    return TrajectoryProfile("static", duration, heading=heading, **kwargs)


def canonical_motion_profile(start: GeoPosition | None = None, heading: float = 0.0) -> TrajectoryProfile:
    """600 s drive: short standstill, smooth acceleration to 10 m/s, two
    90-degree turns between cruise legs, then a sinusoidally varying speed
    to keep the odometer scale observable."""
    segs = (
        Segment("static", 10.0),
        Segment("ramp", 20.0, v0=0.0, v1=10.0),
        Segment("cruise", 100.0, v0=10.0),
        Segment("turn", 15.0, v0=10.0, dchi=np.deg2rad(90.0)),
        Segment("cruise", 100.0, v0=10.0),
        Segment("turn", 15.0, v0=10.0, dchi=np.deg2rad(90.0)),
        Segment("sine", 340.0, v0=10.0, amp=3.0, period=40.0),
    )
    kwargs = {} if start is None else {"start": start}
    return TrajectoryProfile("in-motion", 600.0, heading=heading, segments=segs, **kwargs)


@dataclass(frozen=True)
class TruthSeries:
    """IMU-point navigation truth plus the wheel-point quantities the
    odometer sees; arrays are sampled at the IMU rate (N+1 epochs)."""

    t: np.ndarray
    q_eb: np.ndarray
    v_prime: np.ndarray
    r_e: np.ndarray
    wheel_speed: np.ndarray
    w_eb_b: np.ndarray
    start: GeoPosition

    def state(self, k: int) -> NavState:
        return NavState(self.q_eb[k], self.v_prime[k], self.r_e[k], float(self.t[k]))

    def __len__(self) -> int:
        return self.t.shape[0]


def _profile_samples(profile: TrajectoryProfile, t: np.ndarray):
    """Speed, heading and heading rate at arbitrary times (closed form)."""
    s = np.zeros_like(t)
    chi = np.full_like(t, profile.heading)
    chidot = np.zeros_like(t)
    if profile.kind == "static":
        return s, chi, chidot
    t0 = 0.0
    chi0 = profile.heading
    for seg in profile.segments:
        mask = (t >= t0 - 1e-12) & (t < t0 + seg.duration)
        tau = t[mask] - t0
        s[mask] = seg.speed(tau)
        chi[mask] = chi0 + seg.chi_change(tau)
        chidot[mask] = seg.chi_rate(tau)
        t0 += seg.duration
        chi0 += seg.chi_change(seg.duration) if seg.kind == "turn" else 0.0
    last = t >= t0 - 1e-12
    if np.any(last):
        seg = profile.segments[-1]
        s[last] = seg.speed(seg.duration)
        chi[last] = chi0
    return s, chi, chidot


def _radii(lat: np.ndarray, earth: EarthParams):
    e2 = earth.ecc_sq
    den = 1.0 - e2 * np.sin(lat) ** 2
    rn = earth.semi_major / np.sqrt(den)
    rm = earth.semi_major * (1.0 - e2) / den**1.5
    return rm, rn


def _c_mn(chi):
    """Vehicle-to-navigation rotation for a heading chi (north toward east,
    about the up axis)."""
    c, s = np.cos(chi), np.sin(chi)
    z, o = np.zeros_like(c), np.ones_like(c)
    return np.stack(
        [
            np.stack([c, z, -s], -1),
            np.stack([z, o, z], -1),
            np.stack([s, z, c], -1),
        ],
        -2,
    )


def _c_ne(lat, lon):
    sphi, cphi = np.sin(lat), np.cos(lat)
    slam, clam = np.sin(lon), np.cos(lon)
    z = np.zeros_like(lat)
    north = np.stack([-sphi * clam, -sphi * slam, cphi], -1)
    up = np.stack([cphi * clam, cphi * slam, sphi], -1)
    east = np.stack([-slam, clam, z], -1)
    return np.stack([north, up, east], -1)


def gen_truth(
    profile: TrajectoryProfile,
    earth: EarthParams = WGS84,
    dt: float = 0.01,
    odo: OdoParams | None = None,
) -> TruthSeries:
    """Integrate the profile into an IMU-point truth series.

    The wheel point follows the profile exactly (non-holonomic by
    construction); the IMU pose is offset by the mounting rotation and
    lever arm in ``odo`` (identity/zero if omitted).
    """
    n = int(round(profile.duration / dt))
    t = np.arange(n + 1) * dt
    th = np.arange(2 * n + 1) * (dt / 2.0)  # half grid for RK stages
    s_h, chi_h, chidot_h = _profile_samples(profile, th)

    # integrate geodetic wheel position with RK4 (height is constant)
    lat = np.empty(n + 1)
    lon = np.empty(n + 1)
    lat[0], lon[0] = profile.start.latitude, profile.start.longitude
    h = profile.start.height

    def rates(lat_v, k_half):
        vn = s_h[k_half] * np.cos(chi_h[k_half])
        ve = s_h[k_half] * np.sin(chi_h[k_half])
        rm, rn = _radii(lat_v, earth)
        return vn / (rm + h), ve / ((rn + h) * np.cos(lat_v))

    if profile.kind == "static":
        lat[:] = lat[0]
        lon[:] = lon[0]
    else:
        for k in range(n):
            k2 = 2 * k
            d1lat, d1lon = rates(lat[k], k2)
            d2lat, d2lon = rates(lat[k] + 0.5 * dt * d1lat, k2 + 1)
            d3lat, d3lon = rates(lat[k] + 0.5 * dt * d2lat, k2 + 1)
            d4lat, d4lon = rates(lat[k] + dt * d3lat, k2 + 2)
            lat[k + 1] = lat[k] + dt / 6.0 * (d1lat + 2 * d2lat + 2 * d3lat + d4lat)
            lon[k + 1] = lon[k] + dt / 6.0 * (d1lon + 2 * d2lon + 2 * d3lon + d4lon)

    s = s_h[::2]
    chi = chi_h[::2]
    chidot = chidot_h[::2]

    # wheel-point ECEF position and velocity
    e2 = earth.ecc_sq
    sphi = np.sin(lat)
    nrad = earth.semi_major / np.sqrt(1.0 - e2 * sphi**2)
    cphi = np.cos(lat)
    r_w = np.stack(
        [
            (nrad + h) * cphi * np.cos(lon),
            (nrad + h) * cphi * np.sin(lon),
            (nrad * (1.0 - e2) + h) * sphi,
        ],
        -1,
    )
    cne = _c_ne(lat, lon)
    v_n = np.stack([s * np.cos(chi), np.zeros_like(s), s * np.sin(chi)], -1)
    v_w = (cne @ v_n[..., None])[..., 0]

    # body attitude and earth-relative body rate
    mount = odo if odo is not None else OdoParams(1.0)
    cbm = c_bm(mount.psi, mount.theta)
    cbn = _c_mn(chi) @ cbm
    cbe = cne @ cbn
    q_eb = dcm_to_quat(cbe)

    rm, rn = _radii(lat, earth)
    latdot = v_n[..., 0] / (rm + h)
    londot = v_n[..., 2] / ((rn + h) * cphi)
    w_en_n = np.stack([londot * cphi, londot * sphi, -latdot], -1)
    w_nm_n = np.stack([np.zeros_like(chidot), -chidot, np.zeros_like(chidot)], -1)
    w_eb_b = (np.swapaxes(cbn, -1, -2) @ (w_en_n + w_nm_n)[..., None])[..., 0]

    # IMU point: r_imu = r_wheel - C_be l,  v_imu = v_wheel - C_be (w x l)
    lever = np.asarray(mount.lever, dtype=float)
    r_imu = r_w - (cbe @ np.broadcast_to(lever, r_w.shape[:-1] + (3,))[..., None])[..., 0]
    v_imu = v_w - (cbe @ np.cross(w_eb_b, lever)[..., None])[..., 0]
    v_prime = v_imu + np.cross(earth.omega_vec, r_imu)

    return TruthSeries(t, q_eb, v_prime, r_imu, s, w_eb_b, profile.start)


@dataclass(frozen=True)
class ImuStream:
    t: np.ndarray  # interval-end timestamps
    gyro: np.ndarray
    accel: np.ndarray
    dt: float
    true_b_g: np.ndarray
    true_b_a: np.ndarray

    def sample(self, k: int):
        from .mech import ImuSample

        return ImuSample(float(self.t[k]), self.gyro[k], self.accel[k])

    def __len__(self) -> int:
        return self.t.shape[0]


@dataclass(frozen=True)
class OdoSample:
    t: float
    pulse_rate: float


@dataclass(frozen=True)
class OdoStream:
    t: np.ndarray
    pulse_rate: np.ndarray

    def __len__(self) -> int:
        return self.t.shape[0]


def synth_imu(
    truth: TruthSeries,
    spec: SensorSpec,
    earth: EarthParams = WGS84,
    rng: np.random.Generator | None = None,
    noiseless: bool = False,
) -> ImuStream:
    """Synthesize gyro/accel rate samples from a truth series.

    The clean rates invert the classic mechanization step exactly, so a
    noiseless stream propagates back to the truth within integrator
    tolerance.  Noise model per axis: random-constant bias (drawn from the
    spec magnitude) plus white noise scaled to the sampling rate, plus an
    optional bias random walk.
    """
    q, v, r = truth.q_eb, truth.v_prime, truth.r_e
    n = len(truth) - 1
    dt = float(truth.t[1] - truth.t[0])
    omega = earth.omega_vec

    # attitude increments: q_{k+1} = E_e o q_k o E_b
    e_full = quat_exp_rotvec(-omega * dt)
    eb = quat_mul(quat_conj(quat_mul(e_full, q[:-1])), q[1:])
    phi = quat_log_rotvec(eb)
    gyro = phi / dt

    # specific force from the velocity transition (exact inversion of the
    # RK2 midpoint step used by the classic mechanization)
    omx = skew(omega)
    lhs = np.linalg.inv(np.eye(3) - 0.5 * dt * omx)
    r0, v0 = r[:-1], v[:-1]
    g0 = gravitation_e(r0, earth)
    r_m = r0 + 0.5 * dt * (v0 - np.cross(omega, r0))
    g_m = gravitation_e(r_m, earth)
    rhs = (
        (v[1:] - v0) / dt
        - g_m
        + np.cross(omega, v0)
        + 0.5 * dt * (omx @ (g0 - np.cross(omega, v0))[..., None])[..., 0]
    )
    a_e = (lhs @ rhs[..., None])[..., 0]
    e_half = quat_exp_rotvec(-omega * (0.5 * dt))
    a_body = quat_rotate(quat_conj(quat_mul(e_half, q[:-1])), a_e)
    # invert the rotation-compensation integral M(phi) f = a_body
    an = np.linalg.norm(phi, axis=-1, keepdims=True)
    small = an < 1e-8
    safe = np.where(small, 1.0, an)
    c1 = np.where(small, 0.5 - an**2 / 24.0, (1.0 - np.cos(an)) / safe**2)
    c2 = np.where(small, 1.0 / 6.0 - an**2 / 120.0, (an - np.sin(an)) / safe**3)
    px = skew(phi)
    m_rot = np.eye(3) + c1[..., None] * px + c2[..., None] * (px @ px)
    accel = np.linalg.solve(m_rot, a_body[..., None])[..., 0]

    if noiseless:
        b_g = np.zeros(3)
        b_a = np.zeros(3)
    else:
        rng = rng if rng is not None else np.random.default_rng(spec.seed)
        b_g = rng.normal(0.0, spec.gyro_bias, size=3)
        b_a = rng.normal(0.0, spec.accel_bias, size=3)
        gyro = gyro + b_g + spec.gyro_arw / np.sqrt(dt) * rng.standard_normal((n, 3))
        accel = accel + b_a + spec.accel_vrw / np.sqrt(dt) * rng.standard_normal((n, 3))
        if spec.gyro_bias_rw > 0:
            gyro = gyro + np.cumsum(
                spec.gyro_bias_rw * np.sqrt(dt) * rng.standard_normal((n, 3)), axis=0
            )
        if spec.accel_bias_rw > 0:
            accel = accel + np.cumsum(
                spec.accel_bias_rw * np.sqrt(dt) * rng.standard_normal((n, 3)), axis=0
            )
    return ImuStream(truth.t[1:], gyro, accel, dt, b_g, b_a)


def synth_odometer(
    truth: TruthSeries,
    spec: SensorSpec,
    rng: np.random.Generator | None = None,
    noiseless: bool = False,
) -> OdoStream:
    """Pulse-rate stream at the IMU cadence; the lateral/vertical wheel
    velocities are zero by construction of the truth."""
    rate = spec.odo_k * truth.wheel_speed[1:]
    if not noiseless and spec.odo_sigma > 0:
        rng = rng if rng is not None else np.random.default_rng(spec.seed + 1)
        rate = rate + spec.odo_sigma * rng.standard_normal(rate.shape)
    return OdoStream(truth.t[1:], rate)
