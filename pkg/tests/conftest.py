import math

import numpy as np
import pytest

from src.astro import KeplerianState, kep_to_cart
from src.cli import initial_orbit
from src.config import ScenarioConfig
from src.constants import ARCSEC
from src.dapoly import AlgebraSpec
from src.data_classes import IodSolution, Observation, Site
from src.dynamics import ForceConfig
from src.obs import synthesize


def pytest_configure(config) -> None:
    config.addinivalue_line("markers", "slow: long end-to-end scenario checks")


@pytest.fixture
def spec2() -> AlgebraSpec:
    return AlgebraSpec(order=2, nvars=2)


@pytest.fixture
def spec3() -> AlgebraSpec:
    return AlgebraSpec(order=3, nvars=3)


@pytest.fixture(scope="session")
def scenario() -> ScenarioConfig:
    return ScenarioConfig()


@pytest.fixture(scope="session")
def gto(scenario: ScenarioConfig) -> KeplerianState:
    return scenario.truth.target()


@pytest.fixture
def leo() -> KeplerianState:
    return KeplerianState(7000.0, 0.01, math.radians(51.6), 0.3, 0.7, 1.1)


@pytest.fixture(scope="session")
def la_reunion(scenario: ScenarioConfig) -> Site:
    return scenario.site_map()["la_reunion"]


@pytest.fixture(scope="session")
def two_body() -> ForceConfig:
    return ForceConfig(zonal_degree=0)


@pytest.fixture(scope="session")
def campaign(scenario: ScenarioConfig) -> list[Observation]:
    """noisy target measurements of the default passes"""
    return synthesize(
        scenario.truth.target(),
        scenario.truth.t0,
        scenario.schedule(),
        scenario.force,
        scenario.noise.sigmas(),
        seed=7,
    )


@pytest.fixture(scope="session")
def quiet_campaign(scenario: ScenarioConfig) -> list[Observation]:
    """target measurements of the default passes with (almost) no noise"""
    return synthesize(
        scenario.truth.target(),
        scenario.truth.t0,
        scenario.schedule(),
        scenario.force,
        (1e-6 * ARCSEC, 1e-6 * ARCSEC),
        seed=7,
    )


@pytest.fixture(scope="session")
def truth_state(scenario: ScenarioConfig) -> np.ndarray:
    return np.array(kep_to_cart(scenario.truth.target()), dtype=float)


@pytest.fixture(scope="session")
def campaign_iod(scenario: ScenarioConfig, campaign: list[Observation]) -> IodSolution:
    return initial_orbit(scenario, campaign)
