from pathlib import Path

import numpy as np
import pytest

from src.config import (
    PassConfig,
    ScenarioConfig,
    config_from_dict,
    config_to_dict,
    dump_config,
    load_config,
    with_overrides,
)
from src.constants import ARCSEC
from src.exceptions import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_defaults(scenario: ScenarioConfig) -> None:
    assert [s.site_id for s in scenario.sites] == ["la_reunion", "calern"]
    assert len(scenario.passes) == 5
    assert scenario.estimator.names == ("ls", "lsar")
    assert scenario.loads.pruning
    assert scenario.noise.sigmas()[0] == pytest.approx(1.285 * ARCSEC)
    q = scenario.noise.process_noise().q
    np.testing.assert_allclose(q, np.eye(3) * scenario.noise.accel_sigma ** 2)
    assert load_config(None) == scenario


def test_unknown_keys_name_their_path() -> None:
    with pytest.raises(ConfigError, match="loads.prunning"):
        config_from_dict({"loads": {"prunning": True}})
    with pytest.raises(ConfigError, match="passes\\[0\\].sites"):
        config_from_dict({"passes": [{"sites": "calern", "start_hours": 0.0, "offsets": [0.0]}]})


def test_values_are_type_checked() -> None:
    with pytest.raises(ConfigError, match="seed"):
        config_from_dict({"seed": "one"})
    with pytest.raises(ConfigError, match="estimator.estimator"):
        config_from_dict({"estimator": {"estimator": "l2"}})
    with pytest.raises(ConfigError, match="pruning"):
        config_from_dict({"loads": {"pruning": "yes"}})
    with pytest.raises(ConfigError):
        config_from_dict({"outlier_passes": [9]})
    with pytest.raises(ConfigError):
        config_from_dict({"loads": {"order": 0}})
    with pytest.raises(ConfigError):
        config_from_dict(["seed", 1])


def test_nested_sections() -> None:
    config = config_from_dict({
        "passes": [{"site": "calern", "start_hours": 1, "offsets": [0, 30]}],
        "force": {"zonal_degree": 4, "drag": True},
    })
    assert config.passes == (PassConfig("calern", 1.0, (0.0, 30.0)),)
    assert config.force.zonal_degree == 4 and config.force.drag
    assert config.truth == ScenarioConfig().truth


def test_dump_and_load(tmp_path: Path) -> None:
    config = config_from_dict({"seed": 9, "outlier_passes": [2], "loads": {"max_depth": 4}})
    path = tmp_path / "scenario.yaml"
    path.write_text(dump_config(config))
    assert load_config(path) == config
    assert config_to_dict(config)["outlier_passes"] == [2]
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


def test_shipped_scenarios() -> None:
    scenarios = {p.stem: load_config(p) for p in sorted(CONFIGS.glob("*.yaml"))}
    assert set(scenarios) == {"scenario_a", "scenario_b", "scenario_c", "scenario_d"}
    assert not scenarios["scenario_a"].loads.pruning
    assert scenarios["scenario_b"].loads.pruning
    assert scenarios["scenario_c"].outlier_passes == (3,)
    assert scenarios["scenario_d"].estimator.compare_lf_pruning


def test_overrides() -> None:
    config = with_overrides(ScenarioConfig(), seed=5, pruning=False, estimator="ls")
    assert config.seed == 5
    assert not config.loads.pruning
    assert config.estimator.names == ("ls",)
    assert with_overrides(config) == config


def test_schedule_splits_outlier_passes() -> None:
    config = ScenarioConfig(outlier_passes=(3,))
    regular = config.schedule()
    outlier = config.schedule(outlier=True)
    assert len(regular) == 4 and len(outlier) == 1
    site, epochs = outlier[0]
    assert site.site_id == "la_reunion"
    assert epochs[0] == pytest.approx(config.truth.t0 + 78.7817813888889 * 3600.0, abs=2e-6)
    assert epochs == sorted(epochs)


def test_pass_validation() -> None:
    with pytest.raises(ValueError):
        PassConfig("calern", 0.0, ())
    with pytest.raises(ValueError):
        PassConfig("calern", 0.0, (10.0, 5.0))
    with pytest.raises(ValueError):
        ScenarioConfig(passes=(PassConfig("nowhere", 0.0, (0.0,)),))
