"""
scenario files

a scenario is a yaml document mapped onto the frozen dataclasses below. keys
left out take their defaults, unknown keys are rejected with their dotted path
"""
from __future__ import annotations

import dataclasses
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
import yaml

from src import dynamics
from src.astro import KeplerianState, epoch_from_iso, iso_from_epoch
from src.constants import (
    ARCSEC,
    DEFAULT_ACCEL_SIGMA,
    DEFAULT_MAX_DEPTH,
    DEFAULT_NLI_THRESHOLD,
    DEFAULT_ORDER,
    DEFAULT_SIGMA_DEC_ARCSEC,
    DEFAULT_SIGMA_RA_ARCSEC,
    DEFAULT_Z_SCORE,
    EPS_OPT,
    EPS_RES,
    EPS_STEP,
    ESTIMATOR_MAX_ITER,
    LM_LAMBDA0,
    MAX_ORDER,
    SECONDS_PER_HOUR,
)
from src.custom_typing import Epoch, SiteId
from src.data_classes import Site
from src.estimate import EstimatorTolerances
from src.exceptions import ConfigError
from src.validations import validate_elliptic, validate_site, validate_sorted


@dataclass(frozen=True)
class TruthConfig:
    """osculating elements of the simulated target at the reference epoch"""
    epoch: str = "2019-02-25T18:49:01.148"
    a: float = 22953.852669768778
    e: float = 0.707854612716
    i_deg: float = 3.387521317683
    raan_deg: float = -168.891499315499
    argp_deg: float = 172.980213527756
    mean_anomaly_deg: float = 60.742995057860
    # eccentricity offset of the object producing the outlier passes
    outlier_delta_e: float = -0.02

    def __post_init__(self) -> None:
        epoch_from_iso(self.epoch)
        if not validate_elliptic(self.a, self.e) or not validate_elliptic(self.a, self.e + self.outlier_delta_e):
            raise ValueError("target and outlier orbits must be elliptic")

    @property
    def t0(self) -> Epoch:
        return epoch_from_iso(self.epoch)

    def target(self) -> KeplerianState:
        return KeplerianState(
            self.a,
            self.e,
            math.radians(self.i_deg),
            math.radians(self.raan_deg),
            math.radians(self.argp_deg),
            math.radians(self.mean_anomaly_deg),
        )

    def outlier(self) -> KeplerianState:
        return self.target()._replace(e=self.e + self.outlier_delta_e)


@dataclass(frozen=True)
class NoiseConfig:
    """measurement noise in arcseconds and process noise per axis in km/s^2"""
    sigma_ra_arcsec: float = DEFAULT_SIGMA_RA_ARCSEC
    sigma_dec_arcsec: float = DEFAULT_SIGMA_DEC_ARCSEC
    accel_sigma: float = DEFAULT_ACCEL_SIGMA

    def __post_init__(self) -> None:
        if self.sigma_ra_arcsec <= 0.0 or self.sigma_dec_arcsec <= 0.0:
            raise ValueError("measurement standard deviations must be positive")
        if self.accel_sigma < 0.0:
            raise ValueError("process noise must be non-negative")

    def sigmas(self) -> tuple[float, float]:
        return self.sigma_ra_arcsec * ARCSEC, self.sigma_dec_arcsec * ARCSEC

    def process_noise(self) -> dynamics.NoiseConfig:
        return dynamics.NoiseConfig(q=np.eye(3) * self.accel_sigma ** 2)


@dataclass(frozen=True)
class SiteConfig:
    site_id: str
    lat_deg: float
    lon_deg: float
    height_km: float = 0.0

    def __post_init__(self) -> None:
        if not validate_site(math.radians(self.lat_deg), math.radians(self.lon_deg), self.height_km):
            raise ValueError(f"site {self.site_id} has out-of-range coordinates")

    def to_site(self) -> Site:
        return Site.from_degrees(self.site_id, self.lat_deg, self.lon_deg, self.height_km)


@dataclass(frozen=True)
class PassConfig:
    """one pass: a site, its start in hours after the reference epoch and the measurement offsets in seconds"""
    site: str
    start_hours: float
    offsets: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.offsets:
            raise ValueError(f"pass at {self.start_hours} h has no measurement")
        if self.start_hours < 0.0 or min(self.offsets) < 0.0 or not validate_sorted(self.offsets):
            raise ValueError(f"pass at {self.start_hours} h must start after the epoch with sorted offsets")

    def epochs(self, t0: float) -> list[Epoch]:
        # rounded like the csv files so a written campaign reads back identically
        start = t0 + self.start_hours * SECONDS_PER_HOUR
        return [epoch_from_iso(iso_from_epoch(start + offset)) for offset in self.offsets]


@dataclass(frozen=True)
class LoadsConfig:
    z_score: float = DEFAULT_Z_SCORE
    nli_threshold: float = DEFAULT_NLI_THRESHOLD
    max_depth: int = DEFAULT_MAX_DEPTH
    order: int = DEFAULT_ORDER
    # zonal degree of the analytic propagator
    lf_zonal_degree: int = 2
    pruning: bool = True
    pruning_dynamics: Literal["mf", "lf"] = "mf"

    def __post_init__(self) -> None:
        if self.z_score <= 0.0 or self.nli_threshold <= 0.0:
            raise ValueError("z-score and nonlinearity threshold must be positive")
        if self.max_depth < 0:
            raise ValueError("maximum split depth must be non-negative")
        if not 1 <= self.order <= MAX_ORDER:
            raise ValueError(f"order must lie in [1, {MAX_ORDER}]")
        if self.lf_zonal_degree not in (0, 2, 3, 4):
            raise ValueError(f"zonal degree must be 0, 2, 3 or 4, got {self.lf_zonal_degree}")


@dataclass(frozen=True)
class EstimatorConfig:
    estimator: Literal["ls", "lsar", "both"] = "both"
    eps_res: float = EPS_RES
    eps_opt: float = EPS_OPT
    eps_step: float = EPS_STEP
    max_iter: int = ESTIMATOR_MAX_ITER
    lambda0: float = LM_LAMBDA0
    # also run the sequence with the analytic model and tabulate both detections
    compare_lf_pruning: bool = False

    def tolerances(self) -> EstimatorTolerances:
        return EstimatorTolerances(
            eps_res=self.eps_res,
            eps_opt=self.eps_opt,
            eps_step=self.eps_step,
            max_iter=self.max_iter,
            lambda0=self.lambda0,
        )

    @property
    def names(self) -> tuple[str, ...]:
        return ("ls", "lsar") if self.estimator == "both" else (self.estimator,)


@dataclass(frozen=True)
class ValidationConfig:
    """propagation comparison from the initial orbit determination manifold"""
    span_days: float = 5.0
    samples: int = 500

    def __post_init__(self) -> None:
        if self.span_days <= 0.0 or self.samples < 1:
            raise ValueError("the comparison needs a positive span and at least one sample")


def _default_sites() -> tuple[SiteConfig, ...]:
    return (
        SiteConfig("la_reunion", -21.1991, 55.4103, 0.991),
        SiteConfig("calern", 43.7522, 6.9225, 1.27),
    )


def _default_passes() -> tuple[PassConfig, ...]:
    return (
        PassConfig("la_reunion", 0.0, (0.0, 24.026, 47.973, 15816.164, 15840.174, 18742.231, 18766.196, 18790.189)),
        PassConfig("la_reunion", 52.6387119444444, (0.0, 23.979, 48.972)),
        PassConfig("la_reunion", 78.7817813888889, (0.0, 24.026, 48.019)),
        PassConfig("la_reunion", 100.366146944444, (0.0, 24.011)),
        PassConfig("calern", 101.157182777778, (0.0, 24.926)),
    )


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "default"
    seed: int = 0
    truth: TruthConfig = field(default_factory=TruthConfig)
    force: dynamics.ForceConfig = field(default_factory=dynamics.ForceConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    sites: tuple[SiteConfig, ...] = field(default_factory=_default_sites)
    passes: tuple[PassConfig, ...] = field(default_factory=_default_passes)
    # 1-based passes whose measurements come from the outlier object
    outlier_passes: tuple[int, ...] = ()
    loads: LoadsConfig = field(default_factory=LoadsConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    validation: ValidationConfig = field(default_factory=ValidationConfig)

    def __post_init__(self) -> None:
        known = {s.site_id for s in self.sites}
        if len(known) != len(self.sites):
            raise ValueError("site ids must be unique")
        for p in self.passes:
            if p.site not in known:
                raise ValueError(f"pass at {p.start_hours} h refers to unknown site {p.site}")
        for index in self.outlier_passes:
            if not 1 <= index <= len(self.passes):
                raise ValueError(f"outlier pass {index} outside 1..{len(self.passes)}")

    def site_map(self) -> dict[SiteId, Site]:
        return {SiteId(s.site_id): s.to_site() for s in self.sites}

    def schedule(self, outlier: bool = False) -> list[tuple[Site, list[Epoch]]]:
        """passes of the target, or of the outlier object"""
        sites = self.site_map()
        t0 = self.truth.t0
        return [
            (sites[SiteId(p.site)], p.epochs(t0))
            for number, p in enumerate(self.passes, start=1)
            if (number in self.outlier_passes) == outlier
        ]


def _key(path: str, name: str) -> str:
    return f"{path}.{name}" if path else name


def _coerce(hint: Any, value: Any, path: str) -> Any:
    origin = typing.get_origin(hint)
    if dataclasses.is_dataclass(hint):
        return _section(hint, value, path)
    if origin is tuple:
        if not isinstance(value, list):
            raise ConfigError(f"{path} must be a list")
        item = typing.get_args(hint)[0]
        return tuple(_coerce(item, v, f"{path}[{i}]") for i, v in enumerate(value))
    if origin is Literal:
        if value not in typing.get_args(hint):
            raise ConfigError(f"{path} must be one of {list(typing.get_args(hint))}, got {value!r}")
        return value
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path} must be true or false")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path} must be an integer")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path} must be a number")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path} must be a string")
        return value
    raise ConfigError(f"{path} has an unsupported type {hint}")


def _section(cls: type, data: Any, path: str) -> Any:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'scenario'} must be a mapping")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for name in data:
        if name not in names:
            raise ConfigError(f"unknown key {_key(path, str(name))}")
    kwargs = {name: _coerce(hints[name], value, _key(path, name)) for name, value in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path or 'scenario'}: {e}") from e


def config_from_dict(data: Optional[dict]) -> ScenarioConfig:
    return _section(ScenarioConfig, data, "")


def load_config(path: Optional[Path] = None) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    try:
        with open(path) as stream:
            data = yaml.safe_load(stream)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read scenario file {path}: {e}") from e
    return config_from_dict(data)


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def config_to_dict(config: ScenarioConfig) -> dict:
    return _plain(dataclasses.asdict(config))


def dump_config(config: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=False)


def with_overrides(
        config: ScenarioConfig,
        seed: Optional[int] = None,
        pruning: Optional[bool] = None,
        estimator: Optional[str] = None,
) -> ScenarioConfig:
    """command-line values replace the file values"""
    loads = config.loads if pruning is None else dataclasses.replace(config.loads, pruning=pruning)
    est = config.estimator if estimator is None else dataclasses.replace(config.estimator, estimator=estimator)
    return dataclasses.replace(
        config,
        seed=config.seed if seed is None else seed,
        loads=loads,
        estimator=est,
    )


__all__ = [
    "TruthConfig",
    "NoiseConfig",
    "SiteConfig",
    "PassConfig",
    "LoadsConfig",
    "EstimatorConfig",
    "ValidationConfig",
    "ScenarioConfig",
    "config_from_dict",
    "load_config",
    "config_to_dict",
    "dump_config",
    "with_overrides",
]
