"""
angles-only initial orbit determination from three observations of one pass

the chain is: the classical gauss solution seeds the three topocentric
ranges, a newton iteration on the ranges makes the two lambert arcs agree on
the velocity at the middle epoch, and a shooting correction then accounts for
J2 with the analytic propagator. iod_expand runs the same chain over
polynomials of the six measured angles inside the automatic domain splitting.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from src.astro import CartesianState, altequi_to_cart, cart_to_altequi, cart_to_kep, lambert, site_inertial
from src.constants import (
    DEFAULT_MAX_DEPTH,
    DEFAULT_NLI_THRESHOLD,
    DEFAULT_ORDER,
    EARTH_RADIUS,
    IOD_MAX_ITER,
    IOD_RESIDUAL_TOL,
    IOD_SHOOTING_TOL,
    MIN_PERIGEE_ALTITUDE,
    MU_EARTH,
)
from src.custom_typing import Epoch
from src.dapoly import AlgebraSpec, PolyOrReal, TaylorPoly, constants, make_variable
from src.data_classes import Domain, IodSolution, IodTriplet, Manifold, Observation, Site
from src.dynamics import lf_propagate
from src.exceptions import DomainError, IodConvergenceError, IodGeometryError
from src.manifold import adaptive_eval
from src.obs import line_of_sight, los_to_position

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class _Geometry:
    """epochs and site of a triplet, the angles are passed separately"""
    epochs: tuple[float, float, float]
    site: Site
    zonal_degree: int = 2


def select_triplet(observations: Sequence[Observation]) -> IodTriplet:
    """first, middle and last observation of a pass"""
    if len(observations) < 3:
        raise IodGeometryError(f"a pass needs at least three observations, got {len(observations)}")
    middle = math.ceil(len(observations) / 2) - 1
    return IodTriplet(observations=(observations[0], observations[middle], observations[-1]))


def _angles(triplet: IodTriplet) -> np.ndarray:
    """(ra1, ra2, ra3, dec1, dec2, dec3)"""
    return np.array([o.ra for o in triplet.observations] + [o.dec for o in triplet.observations])


def _geometry(triplet: IodTriplet, site: Site, zonal_degree: int = 2) -> _Geometry:
    if site.site_id != triplet.site_id:
        raise IodGeometryError(f"triplet observed from {triplet.site_id}, got site {site.site_id}")
    return _Geometry(epochs=triplet.epochs, site=site, zonal_degree=zonal_degree)


# gauss

def _gauss_ranges(angles: np.ndarray, geo: _Geometry) -> tuple[float, float, float]:
    t1, t2, t3 = geo.epochs
    tau1, tau3 = t1 - t2, t3 - t2
    tau = tau3 - tau1
    los = [np.array(line_of_sight(angles[i], angles[3 + i])) for i in range(3)]
    sites = [site_inertial(geo.site, t)[0] for t in geo.epochs]
    p = [np.cross(los[1], los[2]), np.cross(los[0], los[2]), np.cross(los[0], los[1])]
    d0 = float(los[0] @ p[0])
    if abs(d0) < 1e-12:
        raise IodGeometryError("lines of sight are coplanar, the gauss solution is undefined")
    # d[i][j] = R_i . p_j
    d = np.array([[float(sites[i] @ p[j]) for j in range(3)] for i in range(3)])
    big_a = (-d[0, 1] * tau3 / tau + d[1, 1] + d[2, 1] * tau1 / tau) / d0
    big_b = (d[0, 1] * (tau3 ** 2 - tau ** 2) * tau3 / tau + d[2, 1] * (tau ** 2 - tau1 ** 2) * tau1 / tau) / (6.0 * d0)
    big_e = float(sites[1] @ los[1])
    r2_site = float(sites[1] @ sites[1])
    mu = MU_EARTH
    octic = [
        1.0, 0.0,
        -(big_a ** 2 + 2.0 * big_a * big_e + r2_site),
        0.0, 0.0,
        -2.0 * mu * big_b * (big_a + big_e),
        0.0, 0.0,
        -(mu ** 2) * big_b ** 2,
    ]
    roots = np.roots(octic)
    real_roots = sorted(
        float(root.real) for root in roots
        if abs(root.imag) <= 1e-9 * max(abs(root), 1.0) and root.real > 0.0
    )
    if not real_roots:
        raise IodGeometryError("the gauss octic has no positive real root")
    admissible = []
    for r2 in real_roots:
        f1 = 1.0 - 0.5 * mu * tau1 ** 2 / r2 ** 3
        f3 = 1.0 - 0.5 * mu * tau3 ** 2 / r2 ** 3
        g1 = tau1 - mu * tau1 ** 3 / (6.0 * r2 ** 3)
        g3 = tau3 - mu * tau3 ** 3 / (6.0 * r2 ** 3)
        det = f1 * g3 - f3 * g1
        c1, c3 = g3 / det, -g1 / det
        rho1 = (-c1 * d[0, 0] + d[1, 0] - c3 * d[2, 0]) / (c1 * d0)
        rho2 = (-c1 * d[0, 1] + d[1, 1] - c3 * d[2, 1]) / d0
        rho3 = (-c1 * d[0, 2] + d[1, 2] - c3 * d[2, 2]) / (c3 * d0)
        if min(rho1, rho2, rho3) <= 0.0:
            continue
        r1_vec = sites[0] + rho1 * los[0]
        r2_vec = sites[1] + rho2 * los[1]
        r3_vec = sites[2] + rho3 * los[2]
        v2_vec = (-f3 * r1_vec + f1 * r3_vec) / det
        try:
            kep = cart_to_kep(CartesianState.from_rv(r2_vec, v2_vec))
        except DomainError:
            continue
        if kep.a * (1.0 - kep.e) <= EARTH_RADIUS + MIN_PERIGEE_ALTITUDE:
            continue
        admissible.append((float(np.linalg.norm(r2_vec)), (rho1, rho2, rho3)))
    if not admissible:
        raise IodGeometryError(f"none of the {len(real_roots)} gauss roots gives an admissible orbit")
    if len(admissible) > 1:
        logger.warning(
            "gauss octic has %d admissible roots, keeping the largest radius %.3f km",
            len(admissible), max(admissible)[0],
        )
    return max(admissible)[1]


def gauss_seed(triplet: IodTriplet, site: Site) -> tuple[float, float, float]:
    """classical gauss ranges of the three observations, km"""
    return _gauss_ranges(_angles(triplet), _geometry(triplet, site))


# double lambert range refinement

def _positions(ranges: Sequence[PolyOrReal], angles: Sequence[PolyOrReal], geo: _Geometry):
    return [
        los_to_position(geo.site, geo.epochs[i], ranges[i], angles[i], angles[3 + i])
        for i in range(3)
    ]


def _velocity_mismatch(ranges: Sequence[PolyOrReal], angles: Sequence[PolyOrReal], geo: _Geometry):
    """velocity jump at the middle epoch between the two lambert arcs, and the state at the first epoch"""
    t1, t2, t3 = geo.epochs
    r1, r2, r3 = _positions(ranges, angles, geo)
    v1, v2_before = lambert(r1, r2, t2 - t1)
    v2_after, _ = lambert(r2, r3, t3 - t2)
    return [v2_before[j] - v2_after[j] for j in range(3)], r1, v1


def _linearize(f, center: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """value and jacobian of a vector function from a first-order expansion at center"""
    spec = AlgebraSpec(order=1, nvars=len(center))
    variables = [make_variable(spec, i, center=float(center[i])) for i in range(len(center))]
    image = f(variables)
    value = constants(image)
    jacobian = np.array([c.gradient if isinstance(c, TaylorPoly) else np.zeros(len(center)) for c in image])
    return value, jacobian


def _refine(angles: np.ndarray, geo: _Geometry, seed: Sequence[float]):
    ranges = np.array(seed, dtype=float)
    if np.any(ranges <= 0.0):
        raise IodGeometryError(f"seed ranges must be positive, got {ranges}")
    for iteration in range(1, IOD_MAX_ITER + 1):
        residual, jacobian = _linearize(lambda rho: _velocity_mismatch(rho, angles, geo)[0], ranges)
        logger.debug("range refinement %d: |dv| = %.3e km/s", iteration, np.linalg.norm(residual))
        if np.linalg.norm(residual) < IOD_RESIDUAL_TOL:
            return ranges, jacobian, iteration
        try:
            step = np.linalg.solve(jacobian, -residual)
        except np.linalg.LinAlgError as exc:
            raise IodConvergenceError("singular range jacobian") from exc
        ranges = ranges + step
        if np.any(ranges <= 0.0):
            raise IodConvergenceError(f"range refinement left the physical domain: {ranges}")
    raise IodConvergenceError(f"range refinement did not converge in {IOD_MAX_ITER} iterations")


def refine_ranges(triplet: IodTriplet, site: Site, seed_ranges: Sequence[float]) -> IodSolution:
    """newton iteration on the ranges until both lambert arcs share the middle velocity"""
    angles = _angles(triplet)
    geo = _geometry(triplet, site)
    ranges, _, iterations = _refine(angles, geo, seed_ranges)
    _, r1, v1 = _velocity_mismatch(ranges, angles, geo)
    return IodSolution(
        state=np.concatenate([r1, v1]).astype(float),
        ranges=tuple(float(r) for r in ranges),
        epoch=Epoch(geo.epochs[0]),
        iterations=iterations,
    )


# J2 shooting

def _shooting_residual(unknowns: Sequence[PolyOrReal], angles: Sequence[PolyOrReal], geo: _Geometry):
    """
    unknowns are the three ranges and the velocity at the first epoch, the
    residual is the mismatch at the later epochs between the propagated
    position and the position along the line of sight
    """
    t1, t2, t3 = geo.epochs
    ranges = unknowns[:3]
    r1, r2, r3 = _positions(ranges, angles, geo)
    elements = cart_to_altequi(CartesianState.from_rv(r1, unknowns[3:6]))
    residual = []
    for t, target in ((t2, r2), (t3, r3)):
        propagated = altequi_to_cart(lf_propagate(elements, t1, t, geo.zonal_degree))
        residual.extend(propagated[j] - target[j] for j in range(3))
    return residual


def _shoot(angles: np.ndarray, geo: _Geometry, ranges: Sequence[float], v1: Sequence[float]):
    unknowns = np.concatenate([np.asarray(ranges, dtype=float), np.asarray(v1, dtype=float)])
    for iteration in range(IOD_MAX_ITER + 1):
        residual, jacobian = _linearize(lambda u: _shooting_residual(u, angles, geo), unknowns)
        logger.debug("j2 shooting %d: |dr| = %.3e km", iteration, np.linalg.norm(residual))
        if np.linalg.norm(residual) < IOD_SHOOTING_TOL:
            return unknowns, jacobian, iteration
        try:
            unknowns = unknowns + np.linalg.solve(jacobian, -residual)
        except np.linalg.LinAlgError as exc:
            raise IodConvergenceError("singular shooting jacobian") from exc
    raise IodConvergenceError(f"j2 shooting did not converge in {IOD_MAX_ITER} iterations")


def j2_shooting_correction(
        solution: IodSolution,
        triplet: IodTriplet,
        site: Site,
        zonal_degree: int = 2,
) -> IodSolution:
    """corrects a two-body solution so the analytic J2 arcs pass through the three lines of sight"""
    if zonal_degree == 0:
        # the two-body arcs already meet every line of sight
        return solution
    angles = _angles(triplet)
    geo = _geometry(triplet, site, zonal_degree)
    unknowns, _, iterations = _shoot(angles, geo, solution.ranges, solution.state[3:])
    r1 = los_to_position(site, geo.epochs[0], unknowns[0], angles[0], angles[3])
    return IodSolution(
        state=np.concatenate([np.asarray(r1, dtype=float), unknowns[3:]]),
        ranges=tuple(float(r) for r in unknowns[:3]),
        epoch=solution.epoch,
        iterations=solution.iterations + iterations,
    )


# polynomial expansion

def _chord(f, start: Sequence[PolyOrReal], jacobian: np.ndarray, passes: int) -> list[PolyOrReal]:
    """chord newton passes with a frozen jacobian, each pass fixes one more order"""
    inverse = np.linalg.inv(jacobian)
    current = list(start)
    size = len(current)
    for _ in range(passes):
        residual = f(current)
        current = [
            current[i] - sum(inverse[i, j] * residual[j] for j in range(size))
            for i in range(size)
        ]
    return current


def _solve_chain(angles: Sequence[PolyOrReal], geo: _Geometry) -> list[PolyOrReal]:
    """cartesian state at the first epoch for the given (possibly polynomial) angles"""
    nominal = constants(angles)
    ranges, range_jacobian, _ = _refine(nominal, geo, _gauss_ranges(nominal, geo))
    _, _, v1 = _velocity_mismatch(ranges, nominal, geo)
    unknowns, shooting_jacobian, _ = _shoot(nominal, geo, ranges, v1)
    polys = [a for a in angles if isinstance(a, TaylorPoly)]
    if not polys:
        r1 = los_to_position(geo.site, geo.epochs[0], unknowns[0], angles[0], angles[3])
        return list(r1) + list(unknowns[3:])
    spec = polys[0].spec
    passes = spec.order + 2
    range_polys = _chord(
        lambda rho: _velocity_mismatch(rho, angles, geo)[0],
        [TaylorPoly.constant(spec, r) for r in ranges],
        range_jacobian,
        passes,
    )
    _, _, v1_poly = _velocity_mismatch(range_polys, angles, geo)
    # the shooting starts from the two-body expansion, shifted onto the J2 solution
    start = [
        p + (u - p.cst)
        for p, u in zip(list(range_polys) + list(v1_poly), unknowns)
    ]
    solution = _chord(lambda u: _shooting_residual(u, angles, geo), start, shooting_jacobian, passes)
    r1 = los_to_position(geo.site, geo.epochs[0], solution[0], angles[0], angles[3])
    return list(r1) + list(solution[3:])


def iod_expand(
        triplet: IodTriplet,
        site: Site,
        c: float,
        eps: float = DEFAULT_NLI_THRESHOLD,
        max_depth: int = DEFAULT_MAX_DEPTH,
        order: int = DEFAULT_ORDER,
        zonal_degree: int = 2,
) -> IodSolution:
    """
    expands the initial orbit over the confidence boxes of the six measured
    angles (c standard deviations each) and returns it as a manifold of
    cartesian polynomials at the first epoch
    """
    if c <= 0.0:
        raise ValueError(f"z-score must be positive, got {c}")
    geo = _geometry(triplet, site, zonal_degree)
    spec = AlgebraSpec(order=order, nvars=6)
    observations = triplet.observations
    angles = tuple(
        [make_variable(spec, i, center=o.ra, scale=c * o.sigma_ra) for i, o in enumerate(observations)]
        + [make_variable(spec, 3 + i, center=o.dec, scale=c * o.sigma_dec) for i, o in enumerate(observations)]
    )
    root = Domain(state=angles, epoch=Epoch(geo.epochs[0]))
    manifold, _ = adaptive_eval(
        lambda state: _solve_chain(state, geo),
        Manifold(domains=(root,), epoch=Epoch(geo.epochs[0])),
        eps=eps,
        max_depth=max_depth,
    )
    nominal = _angles(triplet)
    ranges, _, iterations = _refine(nominal, geo, _gauss_ranges(nominal, geo))
    _, _, v1 = _velocity_mismatch(ranges, nominal, geo)
    unknowns, _, shots = _shoot(nominal, geo, ranges, v1)
    r1 = los_to_position(site, geo.epochs[0], unknowns[0], nominal[0], nominal[3])
    logger.info("initial orbit expanded over %d domain(s)", len(manifold))
    return IodSolution(
        state=np.concatenate([np.asarray(r1, dtype=float), unknowns[3:]]),
        ranges=tuple(float(r) for r in unknowns[:3]),
        epoch=Epoch(geo.epochs[0]),
        manifold=manifold,
        iterations=iterations + shots,
    )


__all__ = [
    "select_triplet",
    "gauss_seed",
    "refine_ranges",
    "j2_shooting_correction",
    "iod_expand",
]
