from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator, Optional

import numpy as np

from src.custom_typing import Epoch, ObservationIndex, SiteId
from src.dapoly import AlgebraSpec, PolyOrReal, RangeBound, TaylorPoly, constants, spec_of


@dataclass(frozen=True, order=True)
class SplitRecord:
    """one trisection step: the split variable and which third (1, 2 or 3) was kept"""
    direction: int
    third: int

    def __post_init__(self) -> None:
        if self.third not in (1, 2, 3):
            raise ValueError(f"split third must be 1, 2 or 3, got {self.third}")
        if self.direction < 0:
            raise ValueError(f"split direction must be non-negative, got {self.direction}")


def _zero_covariance() -> np.ndarray:
    return np.zeros((6, 6))


@dataclass(frozen=True, eq=False)
class Domain:
    """
    a polynomial patch of an uncertainty set together with the path
    of trisections that led to it and its process-noise covariance
    """
    # polynomial state components, all in one algebra
    state: tuple[PolyOrReal, ...]
    # trisections applied to the root deviation box, oldest first
    history: tuple[SplitRecord, ...] = ()
    # accumulated process-noise covariance, in the units of the state
    pn_cov: np.ndarray = field(default_factory=_zero_covariance)
    # seconds past J2000
    epoch: Epoch = Epoch(0.0)
    # set when the domain reached the maximal split depth without meeting the threshold
    flagged: bool = False

    @property
    def depth(self) -> int:
        return len(self.history)

    @property
    def spec(self) -> Optional[AlgebraSpec]:
        return spec_of(self.state)

    def center(self) -> np.ndarray:
        """constant parts of the state"""
        return constants(self.state)

    def bounds(self) -> list[RangeBound]:
        return [
            c.bound() if isinstance(c, TaylorPoly) else RangeBound(float(c), float(c))
            for c in self.state
        ]

    def evolve(self, **changes) -> Domain:
        """returns a copy of this domain with the given fields replaced"""
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class Manifold:
    """an ordered set of domains jointly covering one uncertainty set"""
    domains: tuple[Domain, ...]
    epoch: Epoch = Epoch(0.0)

    def __len__(self) -> int:
        return len(self.domains)

    def __iter__(self) -> Iterator[Domain]:
        return iter(self.domains)

    def __getitem__(self, item: int) -> Domain:
        return self.domains[item]

    @property
    def spec(self) -> Optional[AlgebraSpec]:
        return self.domains[0].spec if self.domains else None

    def histories(self) -> list[tuple[SplitRecord, ...]]:
        return [d.history for d in self.domains]

    def flagged_count(self) -> int:
        return sum(1 for d in self.domains if d.flagged)


@dataclass(frozen=True)
class Site:
    """an optical sensor on the ground"""
    site_id: SiteId
    # geodetic latitude and longitude, rad
    lat: float
    lon: float
    # height above the ellipsoid, km
    height: float = 0.0

    @classmethod
    def from_degrees(cls, site_id: str, lat_deg: float, lon_deg: float, height_km: float = 0.0) -> Site:
        return cls(
            site_id=SiteId(site_id),
            lat=math.radians(lat_deg),
            lon=math.radians(lon_deg),
            height=height_km,
        )


class TruthTag(str, Enum):
    target = "target"
    outlier = "outlier"
    unknown = "unknown"


@dataclass(frozen=True)
class Observation:
    """a time-tagged right ascension and declination pair"""
    epoch: Epoch
    site_id: SiteId
    # angles and their standard deviations, rad
    ra: float
    dec: float
    sigma_ra: float
    sigma_dec: float
    # only used for diagnostics, never by the estimation chain
    truth_tag: TruthTag = TruthTag.unknown


@dataclass(frozen=True)
class MeasurementBox:
    """the confidence rectangle of one observation"""
    ra_interval: RangeBound
    dec_interval: RangeBound


@dataclass(frozen=True)
class PruneReport:
    """what happened to the projected domains at one observation epoch"""
    epoch: Epoch
    observation: ObservationIndex
    projected_count: int
    retained_count: int
    outlier: bool
    # projected (ra, dec) bounds of each observable domain and whether it survived
    ra_bounds: tuple[RangeBound, ...] = ()
    dec_bounds: tuple[RangeBound, ...] = ()
    range_bounds: tuple[RangeBound, ...] = ()
    retained: tuple[bool, ...] = ()
    box: Optional[MeasurementBox] = None


@dataclass(frozen=True)
class HistoryRecord:
    """domain counts after each of the four steps at one epoch"""
    epoch: Epoch
    propagation: int
    projection: int
    pruning: int
    merging: int


@dataclass
class PipelineState:
    """
    data structure holding the running state of the sequential pruning
    """
    # alternate equinoctial polynomial domains at the current epoch
    manifold: Manifold
    # indices of observations correlated with the target
    correlated: list[ObservationIndex] = field(default_factory=list)
    # indices of observations flagged as outliers
    outliers: list[ObservationIndex] = field(default_factory=list)
    # counts per processed epoch
    history_log: list[HistoryRecord] = field(default_factory=list)
    # epoch the history log is counted from
    reference_epoch: Epoch = Epoch(0.0)

    @property
    def epoch(self) -> Epoch:
        return self.manifold.epoch

    def evolve(self, **changes) -> PipelineState:
        """
        returns a new state with the given fields replaced,
        list fields are copied so the two states never share them
        """
        fields = dict(
            manifold=self.manifold,
            correlated=list(self.correlated),
            outliers=list(self.outliers),
            history_log=list(self.history_log),
            reference_epoch=self.reference_epoch,
        )
        fields.update(changes)
        return PipelineState(**fields)


@dataclass(frozen=True)
class IodTriplet:
    """first, middle and last observation of one pass"""
    observations: tuple[Observation, Observation, Observation]

    def __post_init__(self) -> None:
        first, middle, last = self.observations
        if not first.epoch < middle.epoch < last.epoch:
            raise ValueError("triplet epochs must be strictly increasing")
        if len({o.site_id for o in self.observations}) != 1:
            raise ValueError("triplet observations must come from a single site")

    @property
    def epochs(self) -> tuple[float, float, float]:
        return tuple(o.epoch for o in self.observations)

    @property
    def site_id(self) -> SiteId:
        return self.observations[0].site_id


@dataclass(frozen=True, eq=False)
class IodSolution:
    """cartesian state at the first triplet epoch, pointwise and optionally as a manifold"""
    # nominal cartesian state at the first epoch, km and km/s
    state: np.ndarray
    # topocentric ranges at the three epochs, km
    ranges: tuple[float, float, float]
    epoch: Epoch
    # polynomial form over the six angle deviations, when expanded
    manifold: Optional[Manifold] = None
    iterations: int = 0


@dataclass(frozen=True, eq=False)
class DesignSystem:
    """linearized measurement model of a batch at the current estimate"""
    # predicted measurements, stacked (ra, dec) per observation
    h: np.ndarray
    # jacobian of the predictions with respect to the epoch state
    H: np.ndarray
    # measured minus predicted, right ascension wrapped to (-pi, pi]
    dy: np.ndarray
    # least-squares weights 1 / sigma^2
    weights: np.ndarray
    # lsar weights 1 / (1.24 sigma)
    lsar_weights: np.ndarray


class Termination(str, Enum):
    residual_tol = "residual_tol"
    optimality_tol = "optimality_tol"
    step_tol = "step_tol"
    max_iter = "max_iter"


@dataclass(frozen=True, eq=False)
class EstimationResult:
    """outcome of a batch estimator"""
    estimator: str
    # cartesian state at epoch and its covariance
    x0: np.ndarray
    P0: np.ndarray
    epoch: Epoch
    iterations: int
    termination: Termination
    cost_history: tuple[float, ...]
    # weighted residuals of the final design, stacked (ra, dec)
    residuals: np.ndarray
    # lp slack of each residual, lsar only
    slacks: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class LpProblem:
    """min c^T z subject to Q z <= k with z free"""
    c: np.ndarray
    Q: np.ndarray
    k: np.ndarray

    def __post_init__(self) -> None:
        rows, cols = np.shape(self.Q)
        if np.shape(self.c) != (cols,) or np.shape(self.k) != (rows,):
            raise ValueError("lp dimensions are inconsistent")


@dataclass(frozen=True, eq=False)
class LpSolution:
    z: np.ndarray
    objective: float
    # reduced costs of the standard-form columns at the optimal basis
    reduced_costs: np.ndarray
    pivots: int


__all__ = [
    "SplitRecord",
    "Domain",
    "Manifold",
    "Site",
    "TruthTag",
    "Observation",
    "MeasurementBox",
    "PruneReport",
    "HistoryRecord",
    "PipelineState",
    "IodTriplet",
    "IodSolution",
    "DesignSystem",
    "Termination",
    "EstimationResult",
    "LpProblem",
    "LpSolution",
]
