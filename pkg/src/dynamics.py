"""
orbit propagation: the analytic J2 secular model, the numerical force model
with its embedded runge-kutta integrator, and covariance propagation under
state noise compensation
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from src.astro import AltEquinoctialState, CartesianState, altequi_to_cart, cart_to_altequi, norm
from src.constants import (
    ASTRONOMICAL_UNIT,
    DEFAULT_ACCEL_SIGMA,
    EARTH_RADIUS,
    EARTH_ROTATION_RATE,
    HF_TOL_POLY,
    HF_TOL_REAL,
    INITIAL_STEP,
    J2,
    J3,
    J4,
    MIN_STEP,
    MU_EARTH,
    MU_MOON,
    MU_SUN,
    SECONDS_PER_CENTURY,
    SOLAR_PRESSURE,
    SUBTERRANEAN_RADIUS,
)
from src.dapoly import AlgebraSpec, PolyOrReal, TaylorPoly, as_array, cos, cst, exp, make_variable, sin, sqrt
from src.exceptions import StepUnderflowError, SubterraneanError
from src.validations import validate_psd

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForceConfig:
    """perturbations enabled in the numerical force model"""
    # highest zonal harmonic: 0 (two-body), 2, 3 or 4
    zonal_degree: int = 2
    # analytic sun and moon point masses
    sun_moon: bool = False
    # exponential atmosphere
    drag: bool = False
    # cannonball solar radiation pressure with a cylindrical shadow
    srp: bool = False
    cd: float = 2.2
    cr: float = 1.3
    # m^2/kg
    drag_area_to_mass: float = 0.01
    srp_area_to_mass: float = 0.01

    def __post_init__(self) -> None:
        if self.zonal_degree not in (0, 2, 3, 4):
            raise ValueError(f"zonal degree must be 0, 2, 3 or 4, got {self.zonal_degree}")
        if self.drag_area_to_mass < 0.0 or self.srp_area_to_mass < 0.0:
            raise ValueError("area-to-mass ratios must be non-negative")
        if not all(math.isfinite(x) for x in (self.cd, self.cr, self.drag_area_to_mass, self.srp_area_to_mass)):
            raise ValueError("force coefficients must be finite")


def _default_psd() -> np.ndarray:
    return np.eye(3) * DEFAULT_ACCEL_SIGMA ** 2


@dataclass(frozen=True, eq=False)
class NoiseConfig:
    """white-noise acceleration power spectral density, (km/s^2)^2 s, acting on the velocity"""
    q: np.ndarray = field(default_factory=_default_psd)

    def __post_init__(self) -> None:
        q = np.asarray(self.q, dtype=float)
        if q.shape != (3, 3):
            raise ValueError(f"noise spectral density must be 3x3, got {q.shape}")
        if not validate_psd(q):
            raise ValueError("noise spectral density must be symmetric positive semi-definite")
        object.__setattr__(self, "q", q)


# low-fidelity model

def j2_secular_rates(state: Sequence[PolyOrReal], mu: float = MU_EARTH):
    """secular drift of the node, the argument of perigee and the mean anomaly, rad/s"""
    n, f, g, h, k, _ = state
    e2 = f * f + g * g
    a = (mu / (n * n)) ** (1.0 / 3.0)
    p = a * (1.0 - e2)
    tan2 = h * h + k * k
    cos_i = (1.0 - tan2) / (1.0 + tan2)
    factor = J2 * n * (EARTH_RADIUS / p) ** 2
    raan_rate = -1.5 * factor * cos_i
    argp_rate = 0.75 * factor * (5.0 * cos_i * cos_i - 1.0)
    mean_anomaly_rate = 0.75 * factor * (3.0 * cos_i * cos_i - 1.0) * sqrt(1.0 - e2)
    return raan_rate, argp_rate, mean_anomaly_rate


def lf_propagate(
        state: Sequence[PolyOrReal],
        t0: float,
        t1: float,
        zonal_degree: int = 2,
        mu: float = MU_EARTH,
) -> AltEquinoctialState:
    """
    two-body motion plus the first-order secular effect of J2, written in
    alternate equinoctial elements: the secular drifts of the node and the
    perigee act as rotations of (h, k) and (f, g)
    """
    n, f, g, h, k, lam = state
    dt = t1 - t0
    if zonal_degree == 0 or dt == 0.0:
        return AltEquinoctialState(n, f, g, h, k, lam + n * dt)
    raan_rate, argp_rate, mean_anomaly_rate = j2_secular_rates(state, mu)
    node_turn = raan_rate * dt
    perigee_turn = (raan_rate + argp_rate) * dt
    c_node, s_node = cos(node_turn), sin(node_turn)
    c_peri, s_peri = cos(perigee_turn), sin(perigee_turn)
    return AltEquinoctialState(
        n=n,
        f=f * c_peri - g * s_peri,
        g=f * s_peri + g * c_peri,
        h=h * c_node - k * s_node,
        k=h * s_node + k * c_node,
        lam=lam + (n + mean_anomaly_rate + argp_rate + raan_rate) * dt,
    )


# high-fidelity force model

def sun_position(epoch: float) -> np.ndarray:
    """low-precision geocentric sun position, km"""
    centuries = epoch / SECONDS_PER_CENTURY
    mean_longitude = math.radians(280.460 + 36000.771 * centuries)
    anomaly = math.radians(357.5291092 + 35999.05034 * centuries)
    ecliptic_longitude = mean_longitude + math.radians(
        1.914666471 * math.sin(anomaly) + 0.019994643 * math.sin(2.0 * anomaly)
    )
    distance = (1.000140612 - 0.016708617 * math.cos(anomaly) - 0.000139589 * math.cos(2.0 * anomaly)) \
        * ASTRONOMICAL_UNIT
    obliquity = math.radians(23.439291 - 0.0130042 * centuries)
    return distance * np.array([
        math.cos(ecliptic_longitude),
        math.cos(obliquity) * math.sin(ecliptic_longitude),
        math.sin(obliquity) * math.sin(ecliptic_longitude),
    ])


def moon_position(epoch: float) -> np.ndarray:
    """low-precision geocentric moon position, km"""
    t = epoch / SECONDS_PER_CENTURY

    def deg_sin(x: float) -> float:
        return math.sin(math.radians(x))

    def deg_cos(x: float) -> float:
        return math.cos(math.radians(x))

    longitude = math.radians(
        218.32 + 481267.8813 * t
        + 6.29 * deg_sin(134.9 + 477198.85 * t)
        - 1.27 * deg_sin(259.2 - 413335.38 * t)
        + 0.66 * deg_sin(235.7 + 890534.23 * t)
        + 0.21 * deg_sin(269.9 + 954397.70 * t)
        - 0.19 * deg_sin(357.5 + 35999.05 * t)
        - 0.11 * deg_sin(186.6 + 966404.05 * t)
    )
    latitude = math.radians(
        5.13 * deg_sin(93.3 + 483202.03 * t)
        + 0.28 * deg_sin(228.2 + 960400.87 * t)
        - 0.28 * deg_sin(318.3 + 6003.18 * t)
        - 0.17 * deg_sin(217.6 - 407332.20 * t)
    )
    parallax = math.radians(
        0.9508
        + 0.0518 * deg_cos(134.9 + 477198.85 * t)
        + 0.0095 * deg_cos(259.2 - 413335.38 * t)
        + 0.0078 * deg_cos(235.7 + 890534.23 * t)
        + 0.0028 * deg_cos(269.9 + 954397.70 * t)
    )
    obliquity = math.radians(23.439291 - 0.0130042 * t)
    distance = EARTH_RADIUS / math.sin(parallax)
    c_lat, s_lat = math.cos(latitude), math.sin(latitude)
    c_lon, s_lon = math.cos(longitude), math.sin(longitude)
    c_obl, s_obl = math.cos(obliquity), math.sin(obliquity)
    return distance * np.array([
        c_lat * c_lon,
        c_obl * c_lat * s_lon - s_obl * s_lat,
        s_obl * c_lat * s_lon + c_obl * s_lat,
    ])


# lower altitude km, reference density kg/m^3, scale height km
_ATMOSPHERE_BANDS = (
    (100.0, 5.297e-7, 5.877),
    (110.0, 9.661e-8, 7.263),
    (120.0, 2.438e-8, 9.473),
    (130.0, 8.484e-9, 12.636),
    (140.0, 3.845e-9, 16.149),
    (150.0, 2.070e-9, 22.523),
    (180.0, 5.464e-10, 29.740),
    (200.0, 2.789e-10, 37.105),
    (250.0, 7.248e-11, 45.546),
    (300.0, 2.418e-11, 53.628),
    (350.0, 9.518e-12, 53.298),
    (400.0, 3.725e-12, 58.515),
    (450.0, 1.585e-12, 60.828),
    (500.0, 6.967e-13, 63.822),
    (600.0, 1.454e-13, 71.835),
    (700.0, 3.614e-14, 88.667),
    (800.0, 1.170e-14, 124.64),
    (900.0, 5.245e-15, 181.05),
    (1000.0, 3.019e-15, 268.00),
)


def atmosphere_density(altitude: PolyOrReal) -> PolyOrReal:
    """exponential atmosphere, kg/m^3; the band is chosen on the constant part"""
    h0 = cst(altitude)
    if h0 <= _ATMOSPHERE_BANDS[0][0]:
        # re-entered
        return 0.0
    base, rho0, scale = _ATMOSPHERE_BANDS[0]
    for band in _ATMOSPHERE_BANDS:
        if h0 >= band[0]:
            base, rho0, scale = band
    return rho0 * exp(-(altitude - base) / scale)


def _zonal_acceleration(r: Sequence[PolyOrReal], radius: PolyOrReal, degree: int, mu: float) -> list[PolyOrReal]:
    x, y, z = r
    r2 = radius * radius
    z2_r2 = z * z / r2
    acc: list[PolyOrReal] = [0.0, 0.0, 0.0]
    if degree >= 2:
        scale = -1.5 * J2 * mu * EARTH_RADIUS ** 2 / (r2 * r2 * radius)
        planar = scale * (1.0 - 5.0 * z2_r2)
        acc = [acc[0] + planar * x, acc[1] + planar * y, acc[2] + scale * z * (3.0 - 5.0 * z2_r2)]
    if degree >= 3:
        scale = -2.5 * J3 * mu * EARTH_RADIUS ** 3 / (r2 * r2 * r2 * radius)
        planar = scale * (3.0 * z - 7.0 * z * z2_r2)
        axial = scale * (6.0 * z * z - 7.0 * z * z * z2_r2 - 0.6 * r2)
        acc = [acc[0] + planar * x, acc[1] + planar * y, acc[2] + axial]
    if degree >= 4:
        scale = 1.875 * J4 * mu * EARTH_RADIUS ** 4 / (r2 * r2 * r2 * radius)
        planar = scale * (1.0 - 14.0 * z2_r2 + 21.0 * z2_r2 * z2_r2)
        axial = scale * z * (5.0 - 70.0 / 3.0 * z2_r2 + 21.0 * z2_r2 * z2_r2)
        acc = [acc[0] + planar * x, acc[1] + planar * y, acc[2] + axial]
    return acc


def _third_body(r: Sequence[PolyOrReal], body: np.ndarray, mu_body: float) -> list[PolyOrReal]:
    relative = [float(body[j]) - r[j] for j in range(3)]
    distance = norm(relative)
    body_distance3 = float(np.linalg.norm(body)) ** 3
    distance3 = distance * distance * distance
    return [mu_body * (relative[j] / distance3 - float(body[j]) / body_distance3) for j in range(3)]


def _in_shadow(r: Sequence[PolyOrReal], sun: np.ndarray) -> bool:
    position = np.array([cst(c) for c in r])
    sun_direction = sun / np.linalg.norm(sun)
    along = float(position @ sun_direction)
    if along >= 0.0:
        return False
    return float(np.linalg.norm(position - along * sun_direction)) < EARTH_RADIUS


def hf_derivative(x: Sequence[PolyOrReal], t: float, cfg: ForceConfig, mu: float = MU_EARTH) -> np.ndarray:
    """time derivative of a cartesian state under the configured force model"""
    r = x[0], x[1], x[2]
    v = x[3], x[4], x[5]
    radius = norm(r)
    if cst(radius) < SUBTERRANEAN_RADIUS:
        raise SubterraneanError(f"state at radius {cst(radius):.3f} km is below the surface")
    radius3 = radius * radius * radius
    acc = [-mu * r[j] / radius3 for j in range(3)]
    if cfg.zonal_degree:
        zonal = _zonal_acceleration(r, radius, cfg.zonal_degree, mu)
        acc = [acc[j] + zonal[j] for j in range(3)]
    sun: Optional[np.ndarray] = None
    if cfg.sun_moon:
        sun = sun_position(t)
        solar = _third_body(r, sun, MU_SUN)
        lunar = _third_body(r, moon_position(t), MU_MOON)
        acc = [acc[j] + solar[j] + lunar[j] for j in range(3)]
    if cfg.drag:
        density = atmosphere_density(radius - EARTH_RADIUS)
        if cst(density) > 0.0:
            relative = [
                v[0] + EARTH_ROTATION_RATE * r[1],
                v[1] - EARTH_ROTATION_RATE * r[0],
                v[2],
            ]
            speed = norm(relative)
            # kg/m^3 * m^2/kg * (km/s)^2 gives 1e3 km/s^2
            scale = -0.5e3 * cfg.cd * cfg.drag_area_to_mass * density * speed
            acc = [acc[j] + scale * relative[j] for j in range(3)]
    if cfg.srp:
        sun = sun_position(t) if sun is None else sun
        if not _in_shadow(r, sun):
            away = [r[j] - float(sun[j]) for j in range(3)]
            distance = norm(away)
            # N/m^2 * m^2/kg gives m/s^2
            pressure = SOLAR_PRESSURE * (ASTRONOMICAL_UNIT / distance) ** 2
            scale = 1e-3 * cfg.cr * cfg.srp_area_to_mass * pressure / distance
            acc = [acc[j] + scale * away[j] for j in range(3)]
    return as_array([v[0], v[1], v[2], acc[0], acc[1], acc[2]])


# embedded runge-kutta integrator

_DP_C = (0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0)
_DP_A = (
    (),
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0),
)
_DP_B = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0)
_DP_B_LOW = (5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0)
_DP_E = tuple(b - bl for b, bl in zip(_DP_B, _DP_B_LOW))


class DormandPrince:
    """
    dormand-prince 5(4) integrator over float arrays or object arrays of
    taylor polynomials. step control only looks at constant parts, so a
    polynomial state follows the same steps as its center trajectory
    """

    def __init__(
            self,
            rhs: Callable[[float, np.ndarray], np.ndarray],
            tol: float = HF_TOL_REAL,
            min_step: float = MIN_STEP,
            initial_step: float = INITIAL_STEP,
            max_steps: int = 1_000_000,
            post_step: Optional[Callable[[float, np.ndarray], np.ndarray]] = None,
    ) -> None:
        if tol <= 0.0:
            raise ValueError(f"tolerance must be positive, got {tol}")
        self.rhs = rhs
        self.tol = tol
        self.min_step = min_step
        self.initial_step = initial_step
        self.max_steps = max_steps
        self.post_step = post_step
        self.steps = 0
        self.rejected = 0

    def _error_norm(self, y: np.ndarray, error: np.ndarray) -> float:
        y0 = np.array([cst(c) for c in y])
        e0 = np.array([cst(c) for c in error])
        scale = self.tol * (1.0 + np.abs(y0))
        return float(np.sqrt(np.mean((e0 / scale) ** 2)))

    def integrate(self, y0: np.ndarray, t0: float, t1: float) -> np.ndarray:
        y = y0
        if t1 == t0:
            return y
        direction = 1.0 if t1 > t0 else -1.0
        t = t0
        h = min(self.initial_step, abs(t1 - t0))
        k1 = self.rhs(t, y)
        while direction * (t1 - t) > 0.0:
            if self.steps >= self.max_steps:
                raise StepUnderflowError(f"more than {self.max_steps} steps between {t0} and {t1}")
            h = min(h, abs(t1 - t))
            last = h == abs(t1 - t)
            signed = direction * h
            stages = [k1]
            for i in range(1, 7):
                increment = sum(a * k for a, k in zip(_DP_A[i], stages) if a != 0.0)
                stages.append(self.rhs(t + _DP_C[i] * signed, y + signed * increment))
            error = signed * sum(e * k for e, k in zip(_DP_E, stages) if e != 0.0)
            # the seventh stage is evaluated at the propagated state (first same as last)
            y_new = y + signed * sum(b * k for b, k in zip(_DP_A[6], stages) if b != 0.0)
            err = self._error_norm(y_new, error)
            if err <= 1.0:
                t = t1 if last else t + signed
                y = y_new
                k1 = stages[6]
                if self.post_step is not None:
                    y = self.post_step(t, y)
                    k1 = self.rhs(t, y)
                self.steps += 1
                growth = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            else:
                self.rejected += 1
                growth = max(0.2, 0.9 * err ** -0.2)
            h = h * growth
            if h < self.min_step and direction * (t1 - t) > self.min_step:
                raise StepUnderflowError(f"step {h:.3e} s below the minimum at t = {t:.3f}")
        return y


def hf_propagate(
        x0: Sequence[PolyOrReal],
        t0: float,
        t1: float,
        cfg: ForceConfig,
        tol: Optional[float] = None,
) -> np.ndarray:
    """numerical propagation of a cartesian state, floats or polynomials"""
    y0 = as_array(x0)
    if tol is None:
        tol = HF_TOL_POLY if y0.dtype == object else HF_TOL_REAL
    integrator = DormandPrince(lambda t, y: hf_derivative(y, t, cfg), tol=tol)
    result = integrator.integrate(y0, t0, t1)
    logger.debug("hf propagation over %.1f s: %d steps, %d rejected", t1 - t0, integrator.steps, integrator.rejected)
    return result


# covariance propagation

def state_jacobian(x: Sequence[float], t: float, cfg: ForceConfig) -> np.ndarray:
    """jacobian of the force model from a first-order polynomial state"""
    spec = AlgebraSpec(order=1, nvars=6)
    state = [make_variable(spec, i, center=float(x[i])) for i in range(6)]
    derivative = hf_derivative(state, t, cfg)
    return np.array([d.gradient if isinstance(d, TaylorPoly) else np.zeros(6) for d in derivative])


def _noise_mapping() -> np.ndarray:
    mapping = np.zeros((6, 3))
    mapping[3:, :] = np.eye(3)
    return mapping


def snc_propagate(
        x0: Sequence[float],
        P0: np.ndarray,
        t0: float,
        t1: float,
        cfg: ForceConfig,
        noise: NoiseConfig,
        jacobian: Optional[Callable[[np.ndarray, float], np.ndarray]] = None,
        tol: float = HF_TOL_REAL,
) -> tuple[np.ndarray, np.ndarray]:
    """
    joint propagation of a state and of its covariance under white-noise
    accelerations, P' = A P + P A^T + B Q B^T
    jacobian overrides the force-model jacobian A(x, t)
    """
    P0 = np.asarray(P0, dtype=float)
    if not validate_psd(P0):
        raise ValueError("initial covariance must be symmetric positive semi-definite")
    jacobian = jacobian or (lambda x, t: state_jacobian(x, t, cfg))
    mapping = _noise_mapping()
    diffusion = mapping @ noise.q @ mapping.T

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        x = y[:6]
        P = y[6:].reshape(6, 6)
        A = jacobian(x, t)
        P_dot = A @ P + P @ A.T + diffusion
        return np.concatenate([hf_derivative(x, t, cfg), P_dot.ravel()])

    def symmetrize(t: float, y: np.ndarray) -> np.ndarray:
        P = y[6:].reshape(6, 6)
        return np.concatenate([y[:6], (0.5 * (P + P.T)).ravel()])

    integrator = DormandPrince(rhs, tol=tol, post_step=symmetrize)
    y0 = np.concatenate([np.asarray(x0, dtype=float), P0.ravel()])
    y1 = integrator.integrate(y0, t0, t1)
    return y1[:6], y1[6:].reshape(6, 6)


def _first_order_jacobian(f: Callable[[list], Sequence[PolyOrReal]], x: Sequence[float]) -> np.ndarray:
    spec = AlgebraSpec(order=1, nvars=6)
    state = [make_variable(spec, i, center=float(x[i])) for i in range(6)]
    return np.array([c.gradient if isinstance(c, TaylorPoly) else np.zeros(6) for c in f(state)])


def cart_to_altequi_covariance(x: Sequence[float], P: np.ndarray, mu: float = MU_EARTH) -> np.ndarray:
    """maps a cartesian covariance into alternate equinoctial elements at state x"""
    J = _first_order_jacobian(lambda s: cart_to_altequi(CartesianState(*s), mu), x)
    result = J @ P @ J.T
    return 0.5 * (result + result.T)


def altequi_to_cart_covariance(ae: Sequence[float], P: np.ndarray, mu: float = MU_EARTH) -> np.ndarray:
    J = _first_order_jacobian(lambda s: altequi_to_cart(AltEquinoctialState(*s), mu), ae)
    result = J @ P @ J.T
    return 0.5 * (result + result.T)


__all__ = [
    "ForceConfig",
    "NoiseConfig",
    "j2_secular_rates",
    "lf_propagate",
    "sun_position",
    "moon_position",
    "atmosphere_density",
    "hf_derivative",
    "DormandPrince",
    "hf_propagate",
    "state_jacobian",
    "snc_propagate",
    "cart_to_altequi_covariance",
    "altequi_to_cart_covariance",
]
