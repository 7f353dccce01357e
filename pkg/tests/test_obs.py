import math
from pathlib import Path

import numpy as np
import pytest

from src.astro import KeplerianState
from src.config import ScenarioConfig
from src.constants import ARCSEC, SECONDS_PER_HOUR
from src.dapoly import AlgebraSpec, make_variable
from src.data_classes import Observation, Site, TruthTag
from src.custom_typing import Epoch, SiteId
from src.dynamics import hf_propagate
from src.exceptions import DomainError
from src.obs import (
    group_passes,
    lift,
    los_to_position,
    measurement_box,
    project,
    read_observations,
    read_sites,
    synthesize,
    write_observations,
    write_sites,
)


def _observation(epoch: float, site_id: str = "la_reunion") -> Observation:
    return Observation(
        epoch=Epoch(epoch),
        site_id=SiteId(site_id),
        ra=1.0,
        dec=0.2,
        sigma_ra=2.0 * ARCSEC,
        sigma_dec=3.0 * ARCSEC,
    )


def test_projection_and_back(truth_state: np.ndarray, la_reunion: Site, scenario: ScenarioConfig) -> None:
    epoch = scenario.truth.t0
    rho, ra, dec = project(truth_state, la_reunion, epoch)
    assert rho > 0.0
    assert -math.pi / 2.0 <= dec <= math.pi / 2.0
    np.testing.assert_allclose(los_to_position(la_reunion, epoch, rho, ra, dec), truth_state[:3], atol=1e-7)


def test_polynomial_projection(truth_state: np.ndarray, la_reunion: Site, scenario: ScenarioConfig) -> None:
    spec = AlgebraSpec(order=2, nvars=3)
    epoch = scenario.truth.t0
    state = [make_variable(spec, j, center=truth_state[j], scale=10.0) for j in range(3)] + list(truth_state[3:])
    rho, ra, dec = project(state, la_reunion, epoch)
    exact = project(truth_state, la_reunion, epoch)
    assert (rho.cst, ra.cst, dec.cst) == pytest.approx(exact, rel=1e-12)
    shifted = truth_state.copy()
    shifted[:3] += [10.0, -5.0, 2.0]
    _, ra_near, dec_near = project(shifted, la_reunion, epoch)
    assert ra.eval([1.0, -0.5, 0.2]) == pytest.approx(ra_near, abs=1e-7)
    assert dec.eval([1.0, -0.5, 0.2]) == pytest.approx(dec_near, abs=1e-7)


def test_projection_from_the_site_itself_fails(la_reunion: Site) -> None:
    epoch = 1e6
    position = los_to_position(la_reunion, epoch, 0.0, 0.3, 0.1)
    with pytest.raises(DomainError):
        project(position, la_reunion, epoch)


def test_boxes_and_lifted_angles() -> None:
    obs = _observation(0.0)
    box = measurement_box(obs, 3.0)
    assert box.ra_interval.upper - box.ra_interval.lower == pytest.approx(12.0 * ARCSEC)
    assert box.dec_interval.lower == pytest.approx(0.2 - 9.0 * ARCSEC)
    ra, dec = lift(obs, 3.0)
    for poly, interval in ((ra, box.ra_interval), (dec, box.dec_interval)):
        assert poly.bound().lower == pytest.approx(interval.lower, abs=1e-15)
        assert poly.bound().upper == pytest.approx(interval.upper, abs=1e-15)
    with pytest.raises(ValueError):
        measurement_box(obs, -1.0)
    with pytest.raises(ValueError):
        lift(obs, -1.0)


def test_group_passes() -> None:
    hour = SECONDS_PER_HOUR
    observations = [
        _observation(0.0),
        _observation(30.0),
        _observation(5.0 * hour),
        _observation(20.0 * hour),
        _observation(20.0 * hour + 30.0, "calern"),
        _observation(20.0 * hour + 60.0, "calern"),
    ]
    assert group_passes(observations) == [[0, 1, 2], [3], [4, 5]]
    assert group_passes(observations, gap_hours=1.0) == [[0, 1], [2], [3], [4, 5]]
    assert group_passes([]) == []


def test_synthesis_is_reproducible(scenario: ScenarioConfig) -> None:
    schedule = scenario.schedule()[:2]
    args = (scenario.truth.target(), scenario.truth.t0, schedule, scenario.force, scenario.noise.sigmas())
    first = synthesize(*args, seed=3)
    assert first == synthesize(*args, seed=3)
    assert first != synthesize(*args, seed=4)
    assert all(obs.truth_tag is TruthTag.target for obs in first)
    outlier = synthesize(scenario.truth.outlier(), *args[1:], seed=3, truth_tag=TruthTag.outlier)
    assert all(obs.truth_tag is TruthTag.outlier for obs in outlier)


def test_synthesis_rejects_early_epochs(gto: KeplerianState, scenario: ScenarioConfig, la_reunion: Site) -> None:
    t0 = scenario.truth.t0
    with pytest.raises(ValueError):
        synthesize(gto, t0, [(la_reunion, [t0 - 1.0])], scenario.force, (ARCSEC, ARCSEC), seed=0)
    with pytest.raises(ValueError):
        synthesize(gto, t0, [(la_reunion, [t0])], scenario.force, (-ARCSEC, ARCSEC), seed=0)


def test_quiet_measurements_follow_the_truth(
        quiet_campaign: list[Observation],
        campaign: list[Observation],
        scenario: ScenarioConfig,
        truth_state: np.ndarray,
) -> None:
    assert len(quiet_campaign) == len(campaign) > 0
    assert [o.epoch for o in campaign] == sorted(o.epoch for o in campaign)
    sites = scenario.site_map()
    obs = quiet_campaign[-1]
    state = hf_propagate(truth_state, scenario.truth.t0, obs.epoch, scenario.force)
    _, ra, dec = project(state, sites[obs.site_id], obs.epoch)
    assert math.remainder(obs.ra - ra, 2.0 * math.pi) == pytest.approx(0.0, abs=2e-6)
    assert obs.dec == pytest.approx(dec, abs=2e-6)


def test_observation_files(tmp_path: Path, campaign: list[Observation]) -> None:
    path = tmp_path / "observations.csv"
    write_observations(path, campaign)
    assert read_observations(path) == campaign
    assert path.read_text().splitlines()[0] == "epoch_iso8601,site_id,ra_rad,dec_rad,sigma_ra_rad,sigma_dec_rad,truth_tag"


def test_unknown_truth_tags_and_bad_rows(tmp_path: Path) -> None:
    path = tmp_path / "observations.csv"
    header = "epoch_iso8601,site_id,ra_rad,dec_rad,sigma_ra_rad,sigma_dec_rad,truth_tag\n"
    path.write_text(header + "2019-02-26T00:00:00,calern,1.0,0.5,1e-5,1e-5,\n")
    assert read_observations(path)[0].truth_tag is TruthTag.unknown
    path.write_text(header + "2019-02-26T00:00:00,calern,1.0,0.5,0.0,1e-5,target\n")
    with pytest.raises(ValueError):
        read_observations(path)
    path.write_text("epoch,site\n")
    with pytest.raises(ValueError):
        read_observations(path)


def test_site_files(tmp_path: Path, scenario: ScenarioConfig) -> None:
    path = tmp_path / "sites.csv"
    sites = scenario.site_map()
    write_sites(path, sites.values())
    loaded = read_sites(path)
    assert loaded.keys() == sites.keys()
    for site_id, site in sites.items():
        assert loaded[site_id].lat == pytest.approx(site.lat, abs=1e-15)
        assert loaded[site_id].height == site.height
