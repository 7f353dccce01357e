"""
sequential pruning of an uncertainty manifold against incoming measurements

each measurement epoch goes through four steps:
    - propagation of the manifold with the multifidelity scheme
    - inflation by the process noise and projection onto (ra, dec)
    - pruning of the domains whose projection misses the measurement box
    - merging of sibling domains that became linear enough again
a measurement that no domain can explain is flagged as an outlier and leaves
the manifold untouched.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from src.astro import AltEquinoctialState, CartesianState, altequi_to_cart, cart_to_altequi
from src.constants import DEFAULT_MAX_DEPTH, DEFAULT_NLI_THRESHOLD, DEFAULT_ORDER, EIGEN_CLAMP, OVERLAP_SLACK
from src.custom_typing import Epoch, ObservationIndex, SiteId
from src.dapoly import AlgebraSpec, RangeBound, TaylorPoly, cst, embed
from src.data_classes import (
    Domain,
    HistoryRecord,
    IodSolution,
    Manifold,
    MeasurementBox,
    Observation,
    PipelineState,
    PruneReport,
    Site,
    SplitRecord,
    TruthTag,
)
from src.dynamics import (
    ForceConfig,
    NoiseConfig,
    altequi_to_cart_covariance,
    cart_to_altequi_covariance,
    hf_propagate,
    lf_propagate,
    snc_propagate,
)
from src.exceptions import DomainEvaluationError, OrbitDeterminationError
from src.manifold import adaptive_eval, evaluate_manifold, history_box, is_prefix, merge, refine
from src.obs import measurement_box, project
from src.validations import validate_disjoint

logger = logging.getLogger(__name__)

Dynamics = Literal["mf", "lf"]
History = tuple[SplitRecord, ...]

TWO_PI = 2.0 * math.pi
STATE_VARIABLES = 6


def scaled_eigenbasis(P: np.ndarray, c: float) -> np.ndarray:
    """
    columns V_j * c * sqrt(lambda_j) of the eigendecomposition of P,
    eigenvalues below a fraction of the trace are clamped to zero
    """
    P = np.asarray(P, dtype=float)
    if P.shape != (STATE_VARIABLES, STATE_VARIABLES) or not np.all(np.isfinite(P)):
        raise ValueError(f"expected a finite 6x6 covariance, got shape {P.shape}")
    # merged covariances are element-wise maxima and may carry small negative eigenvalues
    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (P + P.T))
    floor = EIGEN_CLAMP * max(float(np.trace(P)), 0.0)
    eigenvalues = np.where(eigenvalues <= floor, 0.0, eigenvalues)
    return eigenvectors * (c * np.sqrt(eigenvalues))[None, :]


def gaussian_domain(
        x0: Sequence[float],
        P0: np.ndarray,
        c: float,
        order: int = DEFAULT_ORDER,
        epoch: float = 0.0,
) -> Domain:
    """one domain of first-order polynomials x0 + V (c sqrt(lambda) dx)"""
    basis = scaled_eigenbasis(P0, c)
    spec = AlgebraSpec(order=order, nvars=STATE_VARIABLES)
    state = []
    for i in range(STATE_VARIABLES):
        coeffs = np.zeros(spec.size)
        coeffs[0] = x0[i]
        coeffs[1:1 + STATE_VARIABLES] = basis[i]
        state.append(TaylorPoly(spec, coeffs))
    return Domain(state=tuple(state), epoch=Epoch(epoch))


def _to_altequi(man: Manifold, eps: float, max_depth: int) -> Manifold:
    manifold, _ = adaptive_eval(
        lambda s: cart_to_altequi(CartesianState(*s)),
        man,
        eps=eps,
        max_depth=max_depth,
    )
    return manifold


def init_from_iod(
        iod: IodSolution,
        eps: float = DEFAULT_NLI_THRESHOLD,
        max_depth: int = DEFAULT_MAX_DEPTH,
) -> PipelineState:
    """converts the cartesian iod manifold to alternate equinoctial elements, no process noise yet"""
    if iod.manifold is None or not len(iod.manifold):
        raise ValueError("the initial orbit has no manifold form")
    manifold = _to_altequi(iod.manifold, eps, max_depth)
    return PipelineState(manifold=manifold, reference_epoch=iod.epoch)


def init_from_estimate(
        x0: Sequence[float],
        P0: np.ndarray,
        c: float,
        epoch: float,
        order: int = DEFAULT_ORDER,
        eps: float = DEFAULT_NLI_THRESHOLD,
        max_depth: int = DEFAULT_MAX_DEPTH,
) -> PipelineState:
    """starts the sequence from a gaussian estimate instead of an initial orbit"""
    root = gaussian_domain(x0, P0, c, order, epoch)
    manifold = _to_altequi(Manifold(domains=(root,), epoch=Epoch(epoch)), eps, max_depth)
    return PipelineState(manifold=manifold, reference_epoch=Epoch(epoch))


# propagation

def _clamped(P: np.ndarray) -> np.ndarray:
    """nearest positive semi-definite matrix, negative eigenvalues set to zero"""
    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (P + P.T))
    result = (eigenvectors * np.clip(eigenvalues, 0.0, None)[None, :]) @ eigenvectors.T
    return 0.5 * (result + result.T)


def _recentered(lf_domain: Domain, hf_elements: Sequence[float], pn_cov: np.ndarray) -> Domain:
    state = tuple(
        p - p.cst + value if isinstance(p, TaylorPoly) else value
        for p, value in zip(lf_domain.state, hf_elements)
    )
    return lf_domain.evolve(state=state, pn_cov=pn_cov)


def mf_step(
        state: PipelineState,
        t_next: float,
        hf_cfg: ForceConfig,
        noise: NoiseConfig,
        lf_zonal_degree: int = 2,
        eps: float = DEFAULT_NLI_THRESHOLD,
        max_depth: int = DEFAULT_MAX_DEPTH,
        dynamics: Dynamics = "mf",
) -> PipelineState:
    """
    propagates the manifold to t_next: the polynomial part with the analytic
    model under domain splitting, the center of every domain and its process
    noise covariance with the numerical model
    """
    t0 = float(state.epoch)
    if t_next < t0:
        raise ValueError(f"cannot propagate backwards from {t0} to {t_next}")
    if t_next == t0:
        return state
    lf_manifold, refined = adaptive_eval(
        lambda s: lf_propagate(s, t0, t_next, lf_zonal_degree),
        state.manifold,
        eps=eps,
        max_depth=max_depth,
        epoch=Epoch(t_next),
    )
    if dynamics == "lf":
        return state.evolve(manifold=lf_manifold)
    if dynamics != "mf":
        raise ValueError(f"unknown pruning dynamics {dynamics}")
    domains = []
    for lf_domain, start in zip(lf_manifold.domains, refined.domains):
        center = start.center()
        try:
            x_cart = np.array(altequi_to_cart(AltEquinoctialState(*center)), dtype=float)
            P_cart = altequi_to_cart_covariance(center, _clamped(start.pn_cov))
            x_hf, P_hf = snc_propagate(x_cart, P_cart, t0, t_next, hf_cfg, noise)
            elements = np.array(cart_to_altequi(CartesianState(*x_hf)), dtype=float)
        except OrbitDeterminationError as exc:
            raise DomainEvaluationError(str(exc), start.history) from exc
        # the numerical mean longitude comes back wrapped, the analytic one is not
        lam_lf = cst(lf_domain.state[5])
        elements[5] += TWO_PI * round((lam_lf - elements[5]) / TWO_PI)
        domains.append(_recentered(lf_domain, elements, cart_to_altequi_covariance(x_hf, P_hf)))
    return state.evolve(manifold=Manifold(domains=tuple(domains), epoch=Epoch(t_next)))


# projection and pruning

@dataclass(frozen=True, eq=False)
class Projection:
    """observable domains and, for each, the state-level history it comes from"""
    observables: Manifold
    links: tuple[History, ...]


def _inflated(dom: Domain, spec: AlgebraSpec, c: float) -> tuple[TaylorPoly, ...]:
    basis = scaled_eigenbasis(dom.pn_cov, c)
    state = []
    for i, p in enumerate(dom.state):
        p12 = embed(p, spec, 0) if isinstance(p, TaylorPoly) else TaylorPoly.constant(spec, float(p))
        coeffs = np.zeros(spec.size)
        coeffs[1 + STATE_VARIABLES:1 + 2 * STATE_VARIABLES] = basis[i]
        state.append(p12 + TaylorPoly(spec, coeffs, clean=False))
    return tuple(state)


def inflate_and_project(
        state: PipelineState,
        obs: Observation,
        site: Site,
        c: float,
        eps: float = DEFAULT_NLI_THRESHOLD,
        max_depth: int = DEFAULT_MAX_DEPTH,
) -> Projection:
    """
    adds the process noise on six fresh variables and maps every domain onto
    (ra, dec, range) under domain splitting, the index being measured on the
    two angles only
    """
    if state.epoch != obs.epoch:
        raise ValueError(f"state at {state.epoch} but measurement at {obs.epoch}")
    spec = state.manifold.spec
    order = spec.order if spec is not None else DEFAULT_ORDER
    spec12 = AlgebraSpec(order=order, nvars=2 * STATE_VARIABLES)
    inflated = Manifold(
        domains=tuple(d.evolve(state=_inflated(d, spec12, c)) for d in state.manifold.domains),
        epoch=state.epoch,
    )

    def observe(s):
        rho, ra, dec = project(altequi_to_cart(AltEquinoctialState(*s)), site, obs.epoch)
        return ra, dec, rho

    observables, _ = adaptive_eval(
        observe,
        inflated,
        eps=eps,
        max_depth=max_depth,
        measured=lambda image: image[:2],
    )
    links = tuple(
        tuple(r for r in d.history if r.direction < STATE_VARIABLES)
        for d in observables.domains
    )
    return Projection(observables=observables, links=links)


def _overlaps(bound: RangeBound, interval: RangeBound, slack: float = OVERLAP_SLACK) -> bool:
    return bound.lower <= interval.upper + slack and interval.lower <= bound.upper + slack


def _overlaps_on_circle(bound: RangeBound, interval: RangeBound, slack: float = OVERLAP_SLACK) -> bool:
    if bound.width >= TWO_PI:
        return True
    turns = round((bound.center - interval.center) / TWO_PI)
    shifted = RangeBound(bound.lower - TWO_PI * turns, bound.upper - TWO_PI * turns)
    return any(
        _overlaps(RangeBound(shifted.lower + k * TWO_PI, shifted.upper + k * TWO_PI), interval, slack)
        for k in (-1, 0, 1)
    )


def retains(ra: RangeBound, dec: RangeBound, box: MeasurementBox) -> bool:
    """a domain survives when its bound rectangle touches the measurement box"""
    return _overlaps_on_circle(ra, box.ra_interval) and _overlaps(dec, box.dec_interval)


def _minimal_histories(histories: Sequence[History]) -> list[History]:
    """unique histories, dropping those that extend another one of the set"""
    unique = sorted(set(histories), key=len)
    kept: list[History] = []
    for history in unique:
        if not any(is_prefix(k, history) for k in kept):
            kept.append(history)
    return sorted(kept)


def prune(
        state: PipelineState,
        projection: Projection,
        obs: Observation,
        obs_index: int,
        c: float,
) -> tuple[PipelineState, PruneReport]:
    if not validate_disjoint([obs_index], state.correlated + state.outliers):
        raise ValueError(f"measurement {obs_index} was already processed")
    box = measurement_box(obs, c)
    observables = projection.observables
    bounds = [d.bounds() for d in observables.domains]
    retained = tuple(retains(b[0], b[1], box) for b in bounds)
    report = dict(
        epoch=obs.epoch,
        observation=ObservationIndex(obs_index),
        projected_count=len(observables),
        ra_bounds=tuple(b[0] for b in bounds),
        dec_bounds=tuple(b[1] for b in bounds),
        range_bounds=tuple(b[2] for b in bounds),
        box=box,
    )
    if not any(retained):
        logger.info("measurement %d matches no domain, flagged as outlier", obs_index)
        outliers = state.outliers + [ObservationIndex(obs_index)]
        # the manifold is handed over as is
        return (
            state.evolve(outliers=outliers),
            PruneReport(retained_count=len(observables), outlier=True, retained=(True,) * len(observables), **report),
        )
    kept = _minimal_histories([link for link, keep in zip(projection.links, retained) if keep])
    domains = []
    for history in kept:
        parent = next(d for d in state.manifold.domains if is_prefix(d.history, history))
        domains.append(refine(parent, history[len(parent.history):]))
    manifold = Manifold(domains=tuple(domains), epoch=state.epoch)
    return (
        state.evolve(manifold=manifold, correlated=state.correlated + [ObservationIndex(obs_index)]),
        PruneReport(retained_count=sum(retained), outlier=False, retained=retained, **report),
    )


def run_sequence(
        state0: PipelineState,
        observations: Sequence[Observation],
        sites: dict[SiteId, Site],
        hf_cfg: ForceConfig,
        noise: NoiseConfig,
        c: float,
        eps: float = DEFAULT_NLI_THRESHOLD,
        max_depth: int = DEFAULT_MAX_DEPTH,
        lf_zonal_degree: int = 2,
        dynamics: Dynamics = "mf",
        indices: Optional[Sequence[int]] = None,
) -> tuple[PipelineState, list[PruneReport]]:
    """
    processes the measurements one by one; indices gives the index recorded for
    each measurement (its position in the full campaign), defaulting to its
    position in the sequence
    """
    indices = list(range(len(observations))) if indices is None else list(indices)
    if len(indices) != len(observations):
        raise ValueError("one index per measurement is needed")
    if len(set(indices)) != len(indices) or not validate_disjoint(indices, state0.correlated + state0.outliers):
        raise ValueError("every measurement index must be new to the sequence")
    state = state0
    reports = []
    for index, obs in zip(indices, observations):
        if obs.epoch < state.epoch:
            raise ValueError(f"measurement {index} precedes the current epoch")
        state = mf_step(state, obs.epoch, hf_cfg, noise, lf_zonal_degree, eps, max_depth, dynamics)
        propagated = len(state.manifold)
        projection = inflate_and_project(state, obs, sites[obs.site_id], c, eps, max_depth)
        state, report = prune(state, projection, obs, index, c)
        if not report.outlier:
            state = state.evolve(manifold=merge(state.manifold, eps=eps))
        record = HistoryRecord(
            epoch=obs.epoch,
            propagation=propagated,
            projection=report.projected_count,
            pruning=report.retained_count,
            merging=len(state.manifold),
        )
        state.history_log.append(record)
        reports.append(report)
        logger.info(
            "measurement %d: %d propagated, %d projected, %d retained, %d after merging%s",
            index, record.propagation, record.projection, record.pruning, record.merging,
            " (outlier)" if report.outlier else "",
        )
    return state, reports


# initial guess

def weighted_rms(
        x0: Sequence[float],
        t0: float,
        observations: Sequence[Observation],
        sites: dict[SiteId, Site],
        cfg: ForceConfig,
) -> float:
    """root mean square of the angle residuals, each divided by its standard deviation"""
    if not observations:
        raise ValueError("no measurement to compare with")
    state = np.asarray(x0, dtype=float)
    t = t0
    squares = []
    for obs in sorted(observations, key=lambda o: o.epoch):
        state = hf_propagate(state, t, obs.epoch, cfg)
        t = obs.epoch
        _, ra, dec = project(state, sites[obs.site_id], obs.epoch)
        d_ra = (obs.ra - ra + math.pi) % TWO_PI - math.pi
        squares.extend([(d_ra / obs.sigma_ra) ** 2, ((obs.dec - dec) / obs.sigma_dec) ** 2])
    return math.sqrt(sum(squares) / len(squares))


def reconstruct_guess(
        state_final: PipelineState,
        initial: Manifold,
        observations: Sequence[Observation],
        sites: dict[SiteId, Site],
        cfg: ForceConfig,
) -> np.ndarray:
    """
    replays every final domain onto the initial manifold and keeps the center
    that best fits the correlated measurements
    """
    if not len(state_final.manifold):
        raise ValueError("the final manifold is empty")
    nvars = initial.spec.nvars if initial.spec is not None else STATE_VARIABLES
    best, best_rms = None, math.inf
    for dom in state_final.manifold.domains:
        lower, upper = history_box(dom.history, nvars)
        candidate = evaluate_manifold(initial, 0.5 * (lower + upper))
        if len(state_final.manifold) == 1:
            return candidate
        rms = weighted_rms(candidate, initial.epoch, observations, sites, cfg)
        logger.debug("candidate %s: weighted rms %.4f", dom.history, rms)
        if rms < best_rms:
            best, best_rms = candidate, rms
    logger.info("initial guess picked among %d candidates, weighted rms %.4f", len(state_final.manifold), best_rms)
    return best


def retained_boxes(state: PipelineState, nvars: int = STATE_VARIABLES) -> list[tuple[np.ndarray, np.ndarray]]:
    return [history_box(d.history, nvars) for d in state.manifold.domains]


def most_informative_epoch(state: PipelineState) -> Optional[HistoryRecord]:
    """correlated epoch at which pruning removed the largest share of the projected domains"""
    pruned = [r for r in state.history_log if r.pruning < r.projection]
    if not pruned:
        return None
    return max(pruned, key=lambda r: r.projection / max(r.pruning, 1))


def outlier_confusion(
        observations: Sequence[Observation],
        correlated: Sequence[int],
        outliers: Sequence[int],
) -> dict[str, int]:
    """confusion counts of the outlier detection against the truth tags"""
    counts = dict(true_positives=0, false_negatives=0, false_positives=0, true_negatives=0)
    for index in correlated:
        tag = observations[index].truth_tag
        if tag == TruthTag.target:
            counts["true_positives"] += 1
        elif tag == TruthTag.outlier:
            counts["false_positives"] += 1
    for index in outliers:
        tag = observations[index].truth_tag
        if tag == TruthTag.target:
            counts["false_negatives"] += 1
        elif tag == TruthTag.outlier:
            counts["true_negatives"] += 1
    return counts


# uncertainty propagation comparison

@dataclass(frozen=True)
class UpRow:
    method: str
    # per-component root mean square error against per-sample numerical propagation
    rmse: tuple[float, ...]
    seconds: float


def _rmse(estimates: np.ndarray, truth: np.ndarray) -> tuple[float, ...]:
    return tuple(float(x) for x in np.sqrt(np.mean((estimates - truth) ** 2, axis=0)))


def compare_propagations(
        iod: IodSolution,
        t_end: float,
        hf_cfg: ForceConfig,
        n_samples: int,
        seed: int,
        lf_zonal_degree: int = 2,
        eps: float = DEFAULT_NLI_THRESHOLD,
        max_depth: int = DEFAULT_MAX_DEPTH,
) -> list[UpRow]:
    """
    propagates the iod manifold to t_end with the analytic, the multifidelity
    and the numerical polynomial schemes and scores them on uniform samples of
    the initial box against per-sample numerical propagation
    """
    if iod.manifold is None:
        raise ValueError("the initial orbit has no manifold form")
    t0 = float(iod.epoch)
    rng = np.random.default_rng(seed)
    samples = rng.uniform(-1.0, 1.0, size=(n_samples, STATE_VARIABLES))

    start = time.perf_counter()
    truth = np.array([
        hf_propagate(evaluate_manifold(iod.manifold, s), t0, t_end, hf_cfg) for s in samples
    ])
    mc_seconds = time.perf_counter() - start

    def sampled_elements(man: Manifold) -> np.ndarray:
        return np.array([
            np.array(altequi_to_cart(AltEquinoctialState(*evaluate_manifold(man, s))), dtype=float)
            for s in samples
        ])

    start = time.perf_counter()
    initial = init_from_iod(iod, eps, max_depth)
    conversion_seconds = time.perf_counter() - start
    quiet = NoiseConfig(q=np.zeros((3, 3)))

    start = time.perf_counter()
    lf_state = mf_step(initial, t_end, hf_cfg, quiet, lf_zonal_degree, eps, max_depth, "lf")
    lf_seconds = time.perf_counter() - start + conversion_seconds

    start = time.perf_counter()
    mf_state = mf_step(initial, t_end, hf_cfg, quiet, lf_zonal_degree, eps, max_depth, "mf")
    mf_seconds = time.perf_counter() - start + conversion_seconds

    start = time.perf_counter()
    hf_manifold, _ = adaptive_eval(
        lambda s: hf_propagate(s, t0, t_end, hf_cfg),
        iod.manifold,
        eps=eps,
        max_depth=max_depth,
        epoch=Epoch(t_end),
    )
    hf_seconds = time.perf_counter() - start
    hf_estimates = np.array([evaluate_manifold(hf_manifold, s) for s in samples])

    return [
        UpRow("lf", _rmse(sampled_elements(lf_state.manifold), truth), lf_seconds),
        UpRow("mf", _rmse(sampled_elements(mf_state.manifold), truth), mf_seconds),
        UpRow("hf", _rmse(hf_estimates, truth), hf_seconds),
        UpRow("mc", (0.0,) * STATE_VARIABLES, mc_seconds),
    ]


__all__ = [
    "Projection",
    "UpRow",
    "scaled_eigenbasis",
    "gaussian_domain",
    "init_from_iod",
    "init_from_estimate",
    "mf_step",
    "inflate_and_project",
    "retains",
    "prune",
    "run_sequence",
    "weighted_rms",
    "reconstruct_guess",
    "retained_boxes",
    "most_informative_epoch",
    "outlier_confusion",
    "compare_propagations",
]
