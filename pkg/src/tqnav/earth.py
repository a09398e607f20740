"""Earth constants, gravitation model and frame utilities.

Gravitation is a central + J2 ellipsoidal model in ECEF coordinates (mass
attraction only; centrifugal effects are handled explicitly by the
mechanization equations).  The navigation frame is north-up-east.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

G0 = 9.80665  # standard gravity, for unit conversion of accelerometer specs


class DomainError(ValueError):
    """Input outside the model's validity region (e.g. near-singular radius)."""


@dataclass(frozen=True)
class EarthParams:
    """WGS-84 style constants; all overridable through the config file."""

    omega_ie: float = 7.292115e-5  # rad/s
    semi_major: float = 6378137.0  # m
    flattening: float = 1.0 / 298.257223563
    gm: float = 3.986004418e14  # m^3/s^2
    j2: float = 1.082626683e-3

    def __post_init__(self):
        if not self.omega_ie > 0:
            raise ValueError("omega_ie must be positive")
        if not self.semi_major > 6e6:
            raise ValueError("semi_major must exceed 6e6 m")

    @property
    def semi_minor(self) -> float:
        return self.semi_major * (1.0 - self.flattening)

    @property
    def ecc_sq(self) -> float:
        return self.flattening * (2.0 - self.flattening)

    @property
    def omega_vec(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.omega_ie])


WGS84 = EarthParams()


@dataclass(frozen=True)
class GeoPosition:
    """Geodetic latitude/longitude (rad) and ellipsoidal height (m)."""

    latitude: float
    longitude: float
    height: float = 0.0

    def __post_init__(self):
        if abs(self.latitude) > np.pi / 2:
            raise ValueError("latitude must lie in [-pi/2, pi/2]")


def gravitation_e(r_e: np.ndarray, earth: EarthParams = WGS84) -> np.ndarray:
    """Gravitational (mass-attraction) acceleration in the e-frame.

    Central term plus the J2 oblateness correction; no centrifugal term.
    """
    r_e = np.asarray(r_e, dtype=float)
    r = np.linalg.norm(r_e, axis=-1, keepdims=True)
    if np.any(r <= 1e6):
        raise DomainError("position too close to the geocenter for the gravity model")
    x, y, z = np.moveaxis(r_e, -1, 0)
    zr2 = (z / r[..., 0]) ** 2
    k = 1.5 * earth.j2 * (earth.semi_major / r[..., 0]) ** 2
    cxy = 1.0 + k * (1.0 - 5.0 * zr2)
    cz = 1.0 + k * (3.0 - 5.0 * zr2)
    scale = -earth.gm / r[..., 0] ** 3
    return np.stack([scale * cxy * x, scale * cxy * y, scale * cz * z], axis=-1)


def geocentric_radius(r_e: np.ndarray, earth: EarthParams = WGS84) -> np.ndarray:
    """Ellipsoid surface radius along the geocentric direction of ``r_e``."""
    r_e = np.asarray(r_e, dtype=float)
    r = np.linalg.norm(r_e, axis=-1)
    sin_psi = r_e[..., 2] / r
    cos2 = 1.0 - sin_psi**2
    a, b = earth.semi_major, earth.semi_minor
    return a * b / np.sqrt(a**2 * sin_psi**2 + b**2 * cos2)


def gravity_gradient(r_e: np.ndarray, earth: EarthParams = WGS84) -> np.ndarray:
    """Rank-1 approximation ``-2 g r^T / (r_s |r|)`` of d(g)/d(r).

    Captures the dominant radial variation (2g/r); the tangential part of
    the exact gradient is deliberately dropped, keeping every entry below
    ~3.1e-6 1/s^2 near the surface.
    """
    r_e = np.asarray(r_e, dtype=float)
    r = np.linalg.norm(r_e, axis=-1)
    if np.any(r <= 1e6):
        raise DomainError("position too close to the geocenter for the gravity model")
    g = gravitation_e(r_e, earth)
    r_s = geocentric_radius(r_e, earth)
    denom = (r_s * r)[..., None, None]
    return -2.0 * g[..., :, None] * r_e[..., None, :] / denom


def c_en(geo: GeoPosition) -> np.ndarray:
    """North-up-east navigation frame to ECEF rotation (columns N, U, E)."""
    sphi, cphi = np.sin(geo.latitude), np.cos(geo.latitude)
    slam, clam = np.sin(geo.longitude), np.cos(geo.longitude)
    north = np.array([-sphi * clam, -sphi * slam, cphi])
    up = np.array([cphi * clam, cphi * slam, sphi])
    east = np.array([-slam, clam, 0.0])
    return np.stack([north, up, east], axis=-1)


def lla_to_ecef(geo: GeoPosition, earth: EarthParams = WGS84) -> np.ndarray:
    sphi, cphi = np.sin(geo.latitude), np.cos(geo.latitude)
    n = earth.semi_major / np.sqrt(1.0 - earth.ecc_sq * sphi**2)
    return np.array(
        [
            (n + geo.height) * cphi * np.cos(geo.longitude),
            (n + geo.height) * cphi * np.sin(geo.longitude),
            (n * (1.0 - earth.ecc_sq) + geo.height) * sphi,
        ]
    )


def ecef_to_lla(r_e: np.ndarray, earth: EarthParams = WGS84) -> GeoPosition:
    """Iterative inverse of :func:`lla_to_ecef` (converges to < 1e-9 m)."""
    x, y, z = np.asarray(r_e, dtype=float)
    lon = np.arctan2(y, x)
    p = np.hypot(x, y)
    lat = np.arctan2(z, p * (1.0 - earth.ecc_sq))
    h = 0.0
    for _ in range(8):
        sphi = np.sin(lat)
        n = earth.semi_major / np.sqrt(1.0 - earth.ecc_sq * sphi**2)
        h = p / np.cos(lat) - n if abs(lat) < 1.4 else z / sphi - n * (1.0 - earth.ecc_sq)
        lat = np.arctan2(z, p * (1.0 - earth.ecc_sq * n / (n + h)))
    return GeoPosition(float(lat), float(lon), float(h))
