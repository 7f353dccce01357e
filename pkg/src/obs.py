"""
optical measurements: projection of states onto right ascension and
declination, confidence boxes, synthetic campaigns and the csv files they
are exchanged through
"""
from __future__ import annotations

import csv
import logging
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from src.astro import KeplerianState, elevation, epoch_from_iso, iso_from_epoch, kep_to_cart, norm, site_inertial
from src.constants import DEFAULT_PASS_GAP_HOURS, FLOAT_FORMAT, SECONDS_PER_HOUR
from src.custom_typing import Epoch, SiteId
from src.dapoly import AlgebraSpec, PolyOrReal, RangeBound, TaylorPoly, asin, atan2, cos, cst, make_variable, sin, wrap_angle
from src.data_classes import MeasurementBox, Observation, Site, TruthTag
from src.dynamics import ForceConfig, hf_propagate
from src.exceptions import DomainError
from src.validations import validate_observation_angles, validate_site

logger = logging.getLogger(__name__)

OBSERVATION_HEADER = ["epoch_iso8601", "site_id", "ra_rad", "dec_rad", "sigma_ra_rad", "sigma_dec_rad", "truth_tag"]
SITE_HEADER = ["site_id", "lat_deg", "lon_deg", "height_km"]


def project(x: Sequence[PolyOrReal], site: Site, epoch: float) -> tuple[PolyOrReal, PolyOrReal, PolyOrReal]:
    """topocentric range, right ascension and declination of a cartesian state"""
    r_site, _ = site_inertial(site, epoch)
    line = [x[j] - float(r_site[j]) for j in range(3)]
    rho = norm(line)
    if cst(rho) == 0.0:
        raise DomainError("zero range: the object sits on the observer")
    return rho, atan2(line[1], line[0]), asin(line[2] / rho)


def line_of_sight(ra: PolyOrReal, dec: PolyOrReal) -> tuple[PolyOrReal, PolyOrReal, PolyOrReal]:
    return cos(ra) * cos(dec), sin(ra) * cos(dec), sin(dec)


def los_to_position(site: Site, epoch: float, rho: PolyOrReal, ra: PolyOrReal, dec: PolyOrReal) -> list[PolyOrReal]:
    """inertial position at a given range along the line of sight"""
    r_site, _ = site_inertial(site, epoch)
    direction = line_of_sight(ra, dec)
    return [float(r_site[j]) + rho * direction[j] for j in range(3)]


def measurement_box(obs: Observation, c: float) -> MeasurementBox:
    if c < 0.0:
        raise ValueError(f"z-score must be non-negative, got {c}")
    return MeasurementBox(
        ra_interval=RangeBound(obs.ra - c * obs.sigma_ra, obs.ra + c * obs.sigma_ra),
        dec_interval=RangeBound(obs.dec - c * obs.sigma_dec, obs.dec + c * obs.sigma_dec),
    )


def lift(obs: Observation, c: float) -> tuple[TaylorPoly, TaylorPoly]:
    """the measured angles as first-order polynomials spanning c standard deviations"""
    if c < 0.0:
        raise ValueError(f"z-score must be non-negative, got {c}")
    spec = AlgebraSpec(order=1, nvars=2)
    return (
        make_variable(spec, 0, center=obs.ra, scale=c * obs.sigma_ra),
        make_variable(spec, 1, center=obs.dec, scale=c * obs.sigma_dec),
    )


def synthesize(
        truth: KeplerianState,
        t0: float,
        passes: Sequence[tuple[Site, Sequence[float]]],
        cfg: ForceConfig,
        sigmas: tuple[float, float],
        seed: int,
        truth_tag: TruthTag = TruthTag.target,
) -> list[Observation]:
    """
    propagates the truth to every scheduled epoch, projects it and adds
    gaussian noise drawn from a generator seeded with seed
    """
    sigma_ra, sigma_dec = sigmas
    if sigma_ra < 0.0 or sigma_dec < 0.0:
        raise ValueError("standard deviations must be non-negative")
    schedule = sorted(
        ((float(epoch), site) for site, epochs in passes for epoch in epochs),
        key=lambda item: item[0],
    )
    if schedule and schedule[0][0] < t0:
        raise ValueError("scheduled epochs must not precede the truth epoch")
    rng = np.random.default_rng(seed)
    state = np.array(kep_to_cart(truth), dtype=float)
    t = t0
    observations = []
    for epoch, site in schedule:
        state = hf_propagate(state, t, epoch, cfg)
        t = epoch
        # noise is drawn for every scheduled epoch so the stream does not depend on visibility
        noise = rng.standard_normal(2)
        if elevation(state, site, epoch) < 0.0:
            logger.warning("object below the horizon of %s at %s, measurement dropped", site.site_id, iso_from_epoch(epoch))
            continue
        _, ra, dec = project(state, site, epoch)
        observations.append(
            Observation(
                epoch=Epoch(epoch),
                site_id=site.site_id,
                ra=float(wrap_angle(ra + sigma_ra * noise[0])),
                dec=float(dec + sigma_dec * noise[1]),
                sigma_ra=sigma_ra,
                sigma_dec=sigma_dec,
                truth_tag=truth_tag,
            )
        )
    logger.info("synthesized %d %s measurements", len(observations), truth_tag.value)
    return observations


def group_passes(observations: Sequence[Observation], gap_hours: float = DEFAULT_PASS_GAP_HOURS) -> list[list[int]]:
    """indices of the observations grouped in passes, a new pass starting after a gap or a site change"""
    passes: list[list[int]] = []
    for index, obs in enumerate(observations):
        if passes:
            previous = observations[passes[-1][-1]]
            same_pass = (
                    obs.site_id == previous.site_id
                    and obs.epoch - previous.epoch <= gap_hours * SECONDS_PER_HOUR
            )
            if same_pass:
                passes[-1].append(index)
                continue
        passes.append([index])
    return passes


# csv files

def _fmt(value: float) -> str:
    return format(float(value), FLOAT_FORMAT)


def write_observations(path: Path, observations: Iterable[Observation]) -> None:
    with open(path, "w", newline="") as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(OBSERVATION_HEADER)
        for obs in observations:
            writer.writerow([
                iso_from_epoch(obs.epoch),
                obs.site_id,
                _fmt(obs.ra),
                _fmt(obs.dec),
                _fmt(obs.sigma_ra),
                _fmt(obs.sigma_dec),
                obs.truth_tag.value,
            ])


def read_observations(path: Path) -> list[Observation]:
    """reads an observation file, sorted by epoch"""
    observations = []
    with open(path, newline="") as stream:
        reader = csv.DictReader(stream)
        if reader.fieldnames != OBSERVATION_HEADER:
            raise ValueError(f"unexpected observation header {reader.fieldnames} in {path}")
        for line, row in enumerate(reader, start=2):
            obs = Observation(
                epoch=epoch_from_iso(row["epoch_iso8601"]),
                site_id=SiteId(row["site_id"]),
                ra=float(row["ra_rad"]),
                dec=float(row["dec_rad"]),
                sigma_ra=float(row["sigma_ra_rad"]),
                sigma_dec=float(row["sigma_dec_rad"]),
                truth_tag=TruthTag(row["truth_tag"] or TruthTag.unknown.value),
            )
            if not validate_observation_angles(obs.dec, obs.sigma_ra, obs.sigma_dec):
                raise ValueError(f"invalid measurement on line {line} of {path}")
            observations.append(obs)
    return sorted(observations, key=lambda o: o.epoch)


def write_sites(path: Path, sites: Iterable[Site]) -> None:
    with open(path, "w", newline="") as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(SITE_HEADER)
        for site in sites:
            writer.writerow([site.site_id, _fmt(math.degrees(site.lat)), _fmt(math.degrees(site.lon)), _fmt(site.height)])


def read_sites(path: Path) -> dict[SiteId, Site]:
    sites = {}
    with open(path, newline="") as stream:
        reader = csv.DictReader(stream)
        if reader.fieldnames != SITE_HEADER:
            raise ValueError(f"unexpected site header {reader.fieldnames} in {path}")
        for row in reader:
            site = Site.from_degrees(row["site_id"], float(row["lat_deg"]), float(row["lon_deg"]), float(row["height_km"]))
            if not validate_site(site.lat, site.lon, site.height):
                raise ValueError(f"site {site.site_id} has out-of-range coordinates")
            sites[site.site_id] = site
    return sites


__all__ = [
    "OBSERVATION_HEADER",
    "SITE_HEADER",
    "project",
    "line_of_sight",
    "los_to_position",
    "measurement_box",
    "lift",
    "synthesize",
    "group_passes",
    "write_observations",
    "read_observations",
    "write_sites",
    "read_sites",
]
