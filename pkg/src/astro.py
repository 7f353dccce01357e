"""
time, frames, element sets, two-body motion and the lambert problem

element-level maps are written with the generic helpers of dapoly so they
can be evaluated over floats or over taylor polynomials alike. angles are
returned in (-pi, pi], except mean longitude which is left unwrapped by the
propagators so polynomial expansions stay smooth.
"""
from __future__ import annotations

import logging
import math
from datetime import datetime, timedelta
from typing import NamedTuple, Sequence

import numpy as np

from src.constants import (
    EARTH_RADIUS,
    EARTH_ROTATION_RATE,
    J2000_ISO,
    KEPLER_MAX_ITER,
    KEPLER_TOL,
    LAMBERT_COLLINEAR_TOL,
    LAMBERT_MAX_ITER,
    MU_EARTH,
    SECONDS_PER_CENTURY,
    SECONDS_PER_DAY,
    SUBTERRANEAN_RADIUS,
    WGS84_FLATTENING,
)
from src.custom_typing import Epoch
from src.dapoly import (
    PolyOrReal,
    TaylorPoly,
    atan,
    atan2,
    cos,
    cosh,
    cst,
    sin,
    sinh,
    sqrt,
    wrap_angle,
)
from src.data_classes import Site
from src.exceptions import DomainError, KeplerConvergenceError, LambertError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


class KeplerianState(NamedTuple):
    # semi-major axis km, eccentricity, inclination rad
    a: PolyOrReal
    e: PolyOrReal
    i: PolyOrReal
    # right ascension of the ascending node, argument of perigee, mean anomaly, rad
    raan: PolyOrReal
    argp: PolyOrReal
    mean_anomaly: PolyOrReal


class AltEquinoctialState(NamedTuple):
    # mean motion rad/s
    n: PolyOrReal
    # eccentricity vector e (cos, sin)(argp + raan)
    f: PolyOrReal
    g: PolyOrReal
    # node vector tan(i/2) (cos, sin)(raan)
    h: PolyOrReal
    k: PolyOrReal
    # mean longitude rad
    lam: PolyOrReal


class CartesianState(NamedTuple):
    # inertial position km and velocity km/s
    x: PolyOrReal
    y: PolyOrReal
    z: PolyOrReal
    vx: PolyOrReal
    vy: PolyOrReal
    vz: PolyOrReal

    @property
    def r(self) -> tuple[PolyOrReal, PolyOrReal, PolyOrReal]:
        return self.x, self.y, self.z

    @property
    def v(self) -> tuple[PolyOrReal, PolyOrReal, PolyOrReal]:
        return self.vx, self.vy, self.vz

    @classmethod
    def from_rv(cls, r: Sequence[PolyOrReal], v: Sequence[PolyOrReal]) -> CartesianState:
        return cls(r[0], r[1], r[2], v[0], v[1], v[2])


# vector helpers over floats or polynomials

def dot(a: Sequence[PolyOrReal], b: Sequence[PolyOrReal]) -> PolyOrReal:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def cross(a: Sequence[PolyOrReal], b: Sequence[PolyOrReal]) -> tuple[PolyOrReal, PolyOrReal, PolyOrReal]:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def norm(a: Sequence[PolyOrReal]) -> PolyOrReal:
    return sqrt(dot(a, a))


def _check_elliptic(e: PolyOrReal, i: PolyOrReal) -> None:
    if not 0.0 <= cst(e) < 1.0:
        raise DomainError(f"only elliptic orbits are supported, got e = {cst(e)}")
    if cst(i) >= math.pi:
        raise DomainError("inclination of pi is singular for equinoctial elements")


def kep_to_altequi(kep: KeplerianState, mu: float = MU_EARTH) -> AltEquinoctialState:
    if cst(kep.a) <= 0.0:
        raise DomainError(f"semi-major axis must be positive, got {cst(kep.a)}")
    _check_elliptic(kep.e, kep.i)
    periapsis_longitude = kep.argp + kep.raan
    node_scale = sin(kep.i * 0.5) / cos(kep.i * 0.5)
    return AltEquinoctialState(
        n=sqrt(mu / (kep.a * kep.a * kep.a)),
        f=kep.e * cos(periapsis_longitude),
        g=kep.e * sin(periapsis_longitude),
        h=node_scale * cos(kep.raan),
        k=node_scale * sin(kep.raan),
        lam=kep.raan + kep.argp + kep.mean_anomaly,
    )


def altequi_to_kep(ae: AltEquinoctialState, mu: float = MU_EARTH) -> KeplerianState:
    a = (mu / (ae.n * ae.n)) ** (1.0 / 3.0)
    e = sqrt(ae.f * ae.f + ae.g * ae.g)
    periapsis_longitude = atan2(ae.g, ae.f)
    raan = atan2(ae.k, ae.h)
    i = 2.0 * atan(sqrt(ae.h * ae.h + ae.k * ae.k))
    return KeplerianState(
        a=a,
        e=e,
        i=i,
        raan=wrap_angle(raan),
        argp=wrap_angle(periapsis_longitude - raan),
        mean_anomaly=wrap_angle(ae.lam - periapsis_longitude),
    )


def _equinoctial_frame(h: PolyOrReal, k: PolyOrReal):
    """unit vectors f and g of the equinoctial frame"""
    s2 = 1.0 + h * h + k * k
    f_hat = ((1.0 - k * k + h * h) / s2, (2.0 * h * k) / s2, (-2.0 * k) / s2)
    g_hat = ((2.0 * h * k) / s2, (1.0 + k * k - h * h) / s2, (2.0 * h) / s2)
    return f_hat, g_hat


def solve_equinoctial_kepler(lam: PolyOrReal, f: PolyOrReal, g: PolyOrReal) -> PolyOrReal:
    """
    solves lam = F - f sin F + g cos F for the eccentric longitude F
    by newton iteration, first on constant parts then over the polynomials
    """
    lam0, f0, g0 = cst(lam), cst(f), cst(g)
    ecc_longitude = lam0
    for _ in range(KEPLER_MAX_ITER):
        residual = ecc_longitude - f0 * math.sin(ecc_longitude) + g0 * math.cos(ecc_longitude) - lam0
        slope = 1.0 - f0 * math.cos(ecc_longitude) - g0 * math.sin(ecc_longitude)
        step = residual / slope
        ecc_longitude -= step
        if abs(step) < KEPLER_TOL:
            break
    else:
        raise KeplerConvergenceError(f"kepler's equation did not converge for lam={lam0}, f={f0}, g={g0}")
    polys = [p for p in (lam, f, g) if isinstance(p, TaylorPoly)]
    if not polys:
        return ecc_longitude
    # each newton pass over polynomials fixes at least one more order
    result: PolyOrReal = TaylorPoly.constant(polys[0].spec, ecc_longitude)
    for _ in range(polys[0].spec.order + 1):
        residual = result - f * sin(result) + g * cos(result) - lam
        slope = 1.0 - f * cos(result) - g * sin(result)
        result = result - residual / slope
    return result


def altequi_to_cart(ae: AltEquinoctialState, mu: float = MU_EARTH) -> CartesianState:
    if cst(ae.n) <= 0.0:
        raise DomainError(f"mean motion must be positive, got {cst(ae.n)}")
    if cst(ae.f) ** 2 + cst(ae.g) ** 2 >= 1.0:
        raise DomainError("only elliptic orbits are supported")
    a = (mu / (ae.n * ae.n)) ** (1.0 / 3.0)
    f, g = ae.f, ae.g
    ecc_longitude = solve_equinoctial_kepler(ae.lam, f, g)
    cos_f, sin_f = cos(ecc_longitude), sin(ecc_longitude)
    beta = 1.0 / (1.0 + sqrt(1.0 - f * f - g * g))
    x1 = a * ((1.0 - g * g * beta) * cos_f + f * g * beta * sin_f - f)
    y1 = a * ((1.0 - f * f * beta) * sin_f + f * g * beta * cos_f - g)
    radius = a * (1.0 - f * cos_f - g * sin_f)
    rate = a * a * ae.n / radius
    vx1 = rate * (f * g * beta * cos_f - (1.0 - g * g * beta) * sin_f)
    vy1 = rate * ((1.0 - f * f * beta) * cos_f - f * g * beta * sin_f)
    f_hat, g_hat = _equinoctial_frame(ae.h, ae.k)
    r = [x1 * f_hat[j] + y1 * g_hat[j] for j in range(3)]
    v = [vx1 * f_hat[j] + vy1 * g_hat[j] for j in range(3)]
    return CartesianState.from_rv(r, v)


def cart_to_altequi(cart: CartesianState, mu: float = MU_EARTH) -> AltEquinoctialState:
    r, v = cart.r, cart.v
    radius = norm(r)
    energy_term = 2.0 / radius - dot(v, v) / mu
    if cst(energy_term) <= 0.0:
        raise DomainError("only elliptic orbits are supported")
    a = 1.0 / energy_term
    momentum = cross(r, v)
    momentum_norm = norm(momentum)
    w = [c / momentum_norm for c in momentum]
    if cst(w[2]) <= -1.0 + 1e-12:
        raise DomainError("retrograde equatorial orbits are singular for equinoctial elements")
    k = w[0] / (1.0 + w[2])
    h = -w[1] / (1.0 + w[2])
    f_hat, g_hat = _equinoctial_frame(h, k)
    v_cross_h = cross(v, momentum)
    ecc_vector = [v_cross_h[j] / mu - r[j] / radius for j in range(3)]
    f = dot(ecc_vector, f_hat)
    g = dot(ecc_vector, g_hat)
    x1 = dot(r, f_hat)
    y1 = dot(r, g_hat)
    beta = 1.0 / (1.0 + sqrt(1.0 - f * f - g * g))
    denominator = a * sqrt(1.0 - f * f - g * g)
    cos_f = f + ((1.0 - f * f * beta) * x1 - f * g * beta * y1) / denominator
    sin_f = g + ((1.0 - g * g * beta) * y1 - f * g * beta * x1) / denominator
    ecc_longitude = atan2(sin_f, cos_f)
    lam = ecc_longitude - f * sin_f + g * cos_f
    return AltEquinoctialState(
        n=sqrt(mu / (a * a * a)),
        f=f,
        g=g,
        h=h,
        k=k,
        lam=wrap_angle(lam),
    )


def kep_to_cart(kep: KeplerianState, mu: float = MU_EARTH) -> CartesianState:
    cart = altequi_to_cart(kep_to_altequi(kep, mu), mu)
    radius = cst(norm(cart.r))
    if radius < SUBTERRANEAN_RADIUS:
        logger.warning("cartesian state at radius %.3f km is below the earth surface", radius)
    return cart


def cart_to_kep(cart: CartesianState, mu: float = MU_EARTH) -> KeplerianState:
    return altequi_to_kep(cart_to_altequi(cart, mu), mu)


def kepler_propagate(cart: CartesianState, dt: float, mu: float = MU_EARTH) -> CartesianState:
    """unperturbed two-body motion over dt seconds"""
    if dt == 0.0:
        return cart
    ae = cart_to_altequi(cart, mu)
    return altequi_to_cart(ae._replace(lam=ae.lam + ae.n * dt), mu)


# lambert problem, universal variables

def _stumpff(z: PolyOrReal) -> tuple[PolyOrReal, PolyOrReal]:
    z0 = cst(z)
    if z0 > 0.1:
        s = sqrt(z)
        return (1.0 - cos(s)) / z, (s - sin(s)) / (s * s * s)
    if z0 < -0.1:
        s = sqrt(-z)
        return (cosh(s) - 1.0) / (-z), (sinh(s) - s) / (s * s * s)
    # series in -z, truncation well below rounding for |z| <= 0.1
    c_value: PolyOrReal = 1.0 / math.factorial(22)
    s_value: PolyOrReal = 1.0 / math.factorial(23)
    for k in range(9, -1, -1):
        c_value = c_value * (-z) + 1.0 / math.factorial(2 * k + 2)
        s_value = s_value * (-z) + 1.0 / math.factorial(2 * k + 3)
    return c_value, s_value


def _time_of_flight(z, r1n, r2n, big_a, mu, dt):
    """returns y(z), F(z) = sqrt(mu) * (tof(z) - dt) and dF/dz"""
    c_value, s_value = _stumpff(z)
    y = r1n + r2n + big_a * (z * s_value - 1.0) / sqrt(c_value)
    ratio = y / c_value
    chi3 = ratio ** 1.5
    residual = chi3 * s_value + big_a * sqrt(y) - math.sqrt(mu) * dt
    if abs(cst(z)) > 1e-6:
        slope = chi3 * ((c_value - 1.5 * s_value / c_value) / (2.0 * z) + 0.75 * s_value * s_value / c_value) \
            + (big_a / 8.0) * (3.0 * s_value / c_value * sqrt(y) + big_a * sqrt(c_value / y))
    else:
        slope = (math.sqrt(2.0) / 40.0) * y ** 1.5 + (big_a / 8.0) * (sqrt(y) + big_a * sqrt(1.0 / (2.0 * y)))
    return y, residual, slope


def _y_only(z: float, r1n: float, r2n: float, big_a: float) -> float:
    c_value, s_value = _stumpff(z)
    return r1n + r2n + big_a * (z * s_value - 1.0) / math.sqrt(c_value)


def _solve_universal(r1n: float, r2n: float, big_a: float, mu: float, dt: float) -> float:
    """safeguarded newton on the universal variable over constant parts"""
    z_high = 4.0 * math.pi ** 2 - 1e-9
    z_low = -4.0 * math.pi ** 2
    # make the lower end feasible: y(z) grows with z
    if _y_only(z_low, r1n, r2n, big_a) <= 0.0:
        lo, hi = z_low, z_high
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if _y_only(mid, r1n, r2n, big_a) > 0.0:
                hi = mid
            else:
                lo = mid
        z_low = hi
    else:
        for _ in range(60):
            if _time_of_flight(z_low, r1n, r2n, big_a, mu, dt)[1] <= 0.0:
                break
            z_low *= 2.0
        else:
            raise LambertError("could not bracket the universal variable")
    z = 0.0 if z_low < 0.0 < z_high else 0.5 * (z_low + z_high)
    scale = math.sqrt(mu) * dt
    for _ in range(LAMBERT_MAX_ITER):
        _, residual, slope = _time_of_flight(z, r1n, r2n, big_a, mu, dt)
        if abs(residual) < 1e-13 * scale:
            return z
        if residual < 0.0:
            z_low = z
        else:
            z_high = z
        candidate = z - residual / slope if slope > 0.0 else z_low - 1.0
        z = candidate if z_low < candidate < z_high else 0.5 * (z_low + z_high)
        if z_high - z_low < 1e-15 * (1.0 + abs(z)):
            return z
    raise LambertError(f"universal variable did not converge in {LAMBERT_MAX_ITER} iterations")


def lambert(
        r1: Sequence[PolyOrReal],
        r2: Sequence[PolyOrReal],
        dt: float,
        mu: float = MU_EARTH,
        prograde: bool = True,
) -> tuple[list[PolyOrReal], list[PolyOrReal]]:
    """
    single-revolution lambert problem between r1 and r2 in dt seconds,
    returns the velocities at both ends. positions may be polynomials, in which
    case the solution is expanded by newton passes over the polynomials
    """
    if dt <= 0.0:
        raise LambertError(f"time of flight must be positive, got {dt}")
    r1n, r2n = norm(r1), norm(r2)
    normal = cross(r1, r2)
    cos_angle = dot(r1, r2) / (r1n * r2n)
    sin_magnitude = norm(normal) / (r1n * r2n)
    if cst(sin_magnitude) < math.sin(LAMBERT_COLLINEAR_TOL):
        raise LambertError("positions are collinear, the transfer plane is undefined")
    short_way = cst(normal[2]) >= 0.0 if prograde else cst(normal[2]) < 0.0
    sin_angle = sin_magnitude if short_way else -sin_magnitude
    big_a = sin_angle * sqrt(r1n * r2n / (1.0 - cos_angle))

    z0 = _solve_universal(cst(r1n), cst(r2n), cst(big_a), mu, dt)
    polys = [c for c in list(r1) + list(r2) if isinstance(c, TaylorPoly)]
    z: PolyOrReal = z0
    if polys:
        z = TaylorPoly.constant(polys[0].spec, z0)
        for _ in range(polys[0].spec.order + 2):
            _, residual, slope = _time_of_flight(z, r1n, r2n, big_a, mu, dt)
            z = z - residual / slope
    y, _, _ = _time_of_flight(z, r1n, r2n, big_a, mu, dt)
    f = 1.0 - y / r1n
    g = big_a * sqrt(y / mu)
    g_dot = 1.0 - y / r2n
    v1 = [(r2[j] - f * r1[j]) / g for j in range(3)]
    v2 = [(g_dot * r2[j] - r1[j]) / g for j in range(3)]
    return v1, v2


# time and ground sites

_J2000 = datetime.fromisoformat(J2000_ISO)


def epoch_from_iso(text: str) -> Epoch:
    """seconds past J2000 of an ISO-8601 timestamp (uniform time scale)"""
    stamp = datetime.fromisoformat(text.strip().rstrip("Z"))
    return Epoch((stamp - _J2000) / timedelta(microseconds=1) * 1e-6)


def iso_from_epoch(epoch: float) -> str:
    stamp = _J2000 + timedelta(microseconds=round(epoch * 1e6))
    return stamp.isoformat(timespec="microseconds")


def gmst(epoch: float) -> float:
    """greenwich mean sidereal time (IAU-1982), rad in [0, 2 pi)"""
    centuries = epoch / SECONDS_PER_CENTURY
    # the linear term of the series equals the elapsed seconds exactly
    seconds = (
        67310.54841
        + epoch
        + 8640184.812866 * centuries
        + 0.093104 * centuries ** 2
        - 6.2e-6 * centuries ** 3
    )
    return (seconds % SECONDS_PER_DAY) / SECONDS_PER_DAY * TWO_PI


def site_ecef(site: Site) -> np.ndarray:
    e2 = WGS84_FLATTENING * (2.0 - WGS84_FLATTENING)
    sin_lat, cos_lat = math.sin(site.lat), math.cos(site.lat)
    normal_radius = EARTH_RADIUS / math.sqrt(1.0 - e2 * sin_lat ** 2)
    return np.array([
        (normal_radius + site.height) * cos_lat * math.cos(site.lon),
        (normal_radius + site.height) * cos_lat * math.sin(site.lon),
        (normal_radius * (1.0 - e2) + site.height) * sin_lat,
    ])


def site_inertial(site: Site, epoch: float) -> tuple[np.ndarray, np.ndarray]:
    """inertial position and velocity of a ground site"""
    theta = gmst(epoch)
    c, s = math.cos(theta), math.sin(theta)
    fixed = site_ecef(site)
    r = np.array([c * fixed[0] - s * fixed[1], s * fixed[0] + c * fixed[1], fixed[2]])
    v = np.array([-EARTH_ROTATION_RATE * r[1], EARTH_ROTATION_RATE * r[0], 0.0])
    return r, v


def site_zenith(site: Site, epoch: float) -> np.ndarray:
    """inertial unit vector along the geodetic vertical"""
    angle = gmst(epoch) + site.lon
    return np.array([
        math.cos(site.lat) * math.cos(angle),
        math.cos(site.lat) * math.sin(angle),
        math.sin(site.lat),
    ])


def elevation(r: Sequence[float], site: Site, epoch: float) -> float:
    r_site, _ = site_inertial(site, epoch)
    line = np.asarray(r, dtype=float)[:3] - r_site
    return math.asin(float(line @ site_zenith(site, epoch)) / float(np.linalg.norm(line)))


__all__ = [
    "KeplerianState",
    "AltEquinoctialState",
    "CartesianState",
    "dot",
    "cross",
    "norm",
    "kep_to_altequi",
    "altequi_to_kep",
    "altequi_to_cart",
    "cart_to_altequi",
    "kep_to_cart",
    "cart_to_kep",
    "solve_equinoctial_kepler",
    "kepler_propagate",
    "lambert",
    "epoch_from_iso",
    "iso_from_epoch",
    "gmst",
    "site_ecef",
    "site_inertial",
    "site_zenith",
    "elevation",
]
