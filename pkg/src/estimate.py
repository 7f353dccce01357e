"""
batch estimators of the epoch state

    - least squares solved with levenberg-marquardt damping
    - least sum of absolute residuals (lsar) solved as a linear program

both work on design systems built with first-order polynomials: the state at
the reference epoch is expanded around the current estimate and propagated to
every measurement epoch, so the jacobian of the predicted angles comes out of
the linear coefficients without any variational equation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np

from src.astro import iso_from_epoch
from src.constants import (
    CONDITION_LIMIT,
    EPS_OPT,
    EPS_RES,
    EPS_STEP,
    ESTIMATOR_MAX_ITER,
    LM_FACTOR,
    LM_LAMBDA0,
    LM_LAMBDA_MAX,
    LSAR_WEIGHT_FACTOR,
    SIMPLEX_TOL,
)
from src.custom_typing import Epoch, SiteId
from src.dapoly import AlgebraSpec, TaylorPoly, cst, make_variable
from src.data_classes import DesignSystem, EstimationResult, LpProblem, LpSolution, Observation, Site, Termination
from src.dynamics import ForceConfig, hf_propagate
from src.exceptions import EstimationError, InfeasibleError, OrbitDeterminationError, UnboundedError
from src.obs import project
from src.validations import validate_sorted

logger = logging.getLogger(__name__)

STATE_SIZE = 6
TWO_PI = 2.0 * math.pi
# an lsar step is halved at most this many times before the iteration gives up
MAX_HALVINGS = 20


@dataclass(frozen=True)
class EstimatorTolerances:
    eps_res: float = EPS_RES
    eps_opt: float = EPS_OPT
    eps_step: float = EPS_STEP
    max_iter: int = ESTIMATOR_MAX_ITER
    lambda0: float = LM_LAMBDA0
    lambda_factor: float = LM_FACTOR
    lambda_max: float = LM_LAMBDA_MAX

    def __post_init__(self) -> None:
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        if min(self.eps_res, self.eps_opt, self.eps_step) < 0.0:
            raise ValueError("tolerances must be non-negative")
        if self.lambda0 <= 0.0 or self.lambda_factor <= 1.0:
            raise ValueError("damping must start positive and grow by a factor above one")


class MeasurementModel(Protocol):
    """anything able to linearize its predictions around a state"""

    def design(self, x: np.ndarray) -> DesignSystem:
        ...

    def residual(self, x: np.ndarray) -> np.ndarray:
        ...


def _wrapped(d_ra: float) -> float:
    return (d_ra + math.pi) % TWO_PI - math.pi


class OrbitBatch:
    """
    a batch of angle measurements and the high-fidelity model predicting them
    from a cartesian state at the reference epoch
    """

    def __init__(
            self,
            t0: float,
            observations: Sequence[Observation],
            sites: dict[SiteId, Site],
            cfg: ForceConfig,
    ) -> None:
        if not observations:
            raise ValueError("a batch needs at least one measurement")
        if not validate_sorted([o.epoch for o in observations]):
            raise ValueError("measurements must be sorted by epoch")
        missing = {o.site_id for o in observations} - set(sites)
        if missing:
            raise ValueError(f"unknown sites {sorted(missing)}")
        self.t0 = t0
        self.observations = list(observations)
        self.sites = sites
        self.cfg = cfg
        sigmas = np.array([[o.sigma_ra, o.sigma_dec] for o in self.observations]).ravel()
        if np.any(sigmas <= 0.0):
            raise ValueError("standard deviations must be positive")
        self.measured = np.array([[o.ra, o.dec] for o in self.observations]).ravel()
        self.weights = sigmas ** -2
        self.lsar_weights = 1.0 / (LSAR_WEIGHT_FACTOR * sigmas)

    def __len__(self) -> int:
        return len(self.measured)

    def _predict(self, state: np.ndarray) -> list:
        t = self.t0
        predicted = []
        for obs in self.observations:
            state = hf_propagate(state, t, obs.epoch, self.cfg)
            t = obs.epoch
            _, ra, dec = project(state, self.sites[obs.site_id], obs.epoch)
            predicted.extend([ra, dec])
        return predicted

    def _difference(self, h: np.ndarray) -> np.ndarray:
        dy = self.measured - h
        dy[0::2] = [_wrapped(d) for d in dy[0::2]]
        return dy

    def design(self, x: np.ndarray) -> DesignSystem:
        spec = AlgebraSpec(order=1, nvars=STATE_SIZE)
        state = np.empty(STATE_SIZE, dtype=object)
        for i in range(STATE_SIZE):
            state[i] = make_variable(spec, i, center=float(x[i]))
        predicted = self._predict(state)
        h = np.array([cst(p) for p in predicted])
        H = np.array([p.gradient if isinstance(p, TaylorPoly) else np.zeros(STATE_SIZE) for p in predicted])
        return DesignSystem(h=h, H=H, dy=self._difference(h), weights=self.weights, lsar_weights=self.lsar_weights)

    def residual(self, x: np.ndarray) -> np.ndarray:
        h = np.array(self._predict(np.asarray(x, dtype=float)), dtype=float)
        return self._difference(h)


def build_design(
        x0: Sequence[float],
        t0: float,
        observations: Sequence[Observation],
        sites: dict[SiteId, Site],
        cfg: ForceConfig,
) -> DesignSystem:
    return OrbitBatch(t0, observations, sites, cfg).design(np.asarray(x0, dtype=float))


# linear algebra helpers

def _normal_equations(design: DesignSystem, weights: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    w = design.weights if weights is None else weights
    weighted = design.H * w[:, None]
    return design.H.T @ weighted, weighted.T @ design.dy


def _well_conditioned(normal: np.ndarray) -> bool:
    condition = np.linalg.cond(normal)
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        logger.warning("normal matrix condition number %.3e above %.1e", condition, CONDITION_LIMIT)
        return False
    return True


def _covariance(design: DesignSystem, weights: np.ndarray) -> np.ndarray:
    normal, _ = _normal_equations(design, weights)
    try:
        P = np.linalg.inv(normal)
    except np.linalg.LinAlgError as e:
        raise EstimationError("singular normal matrix, the state is not observable from this batch") from e
    return 0.5 * (P + P.T)


def _small_step(step: np.ndarray, x: np.ndarray, eps: float) -> bool:
    return bool(np.all(np.abs(step) <= eps * np.maximum(np.abs(x), 1.0)))


def _ls_cost(dy: np.ndarray, weights: np.ndarray) -> float:
    return 0.5 * float(np.sum(weights * dy ** 2))


def _lsar_cost(dy: np.ndarray, weights: np.ndarray) -> float:
    return float(np.sum(weights * np.abs(dy)))


# least squares

def levenberg_marquardt(
        model: MeasurementModel,
        x0: Sequence[float],
        tols: EstimatorTolerances = EstimatorTolerances(),
) -> tuple[np.ndarray, DesignSystem, int, Termination, list[float]]:
    """
    damped gauss-newton iterations. a step is kept only when it lowers the
    weighted cost; the damping shrinks after a kept step and grows after a
    refused one
    """
    x = np.array(x0, dtype=float)
    design = model.design(x)
    weights = design.weights
    cost = _ls_cost(design.dy, weights)
    history = [cost]
    damping = tols.lambda0
    iterations = 0
    termination = Termination.max_iter
    while iterations < tols.max_iter:
        normal, gradient = _normal_equations(design)
        _well_conditioned(normal)
        scale = np.sqrt(np.diag(normal))
        scale[scale == 0.0] = 1.0
        if iterations and np.max(np.abs(gradient / scale)) < tols.eps_opt:
            termination = Termination.optimality_tol
            break
        iterations += 1
        while True:
            try:
                step = np.linalg.solve(normal + damping * np.eye(len(x)), gradient)
                trial_dy = model.residual(x + step)
                trial_cost = _ls_cost(trial_dy, weights)
            except (np.linalg.LinAlgError, OrbitDeterminationError) as e:
                logger.debug("trial step failed: %s", e)
                trial_cost = math.inf
            if trial_cost < cost:
                break
            damping *= tols.lambda_factor
            logger.debug("step refused, damping raised to %.1e", damping)
            if damping > tols.lambda_max:
                if len(history) > 1:
                    return x, design, iterations, Termination.step_tol, history
                raise EstimationError(f"no step lowers the cost, damping reached {damping:.1e}")
        change = float(np.linalg.norm(np.sqrt(weights) * (trial_dy - design.dy)))
        small = _small_step(step, x, tols.eps_step)
        x = x + step
        cost = trial_cost
        history.append(cost)
        damping /= tols.lambda_factor
        design = model.design(x)
        logger.debug("lm iteration %d: cost %.6e, damping %.1e", iterations, cost, damping)
        if change < tols.eps_res:
            termination = Termination.residual_tol
            break
        if small:
            termination = Termination.step_tol
            break
    return x, design, max(iterations, 1), termination, history


def ls_solve(
        guess: Sequence[float],
        batch: MeasurementModel,
        tols: EstimatorTolerances = EstimatorTolerances(),
        epoch: float = 0.0,
) -> EstimationResult:
    if len(batch) < STATE_SIZE:
        raise EstimationError(f"{len(batch)} scalar measurements cannot determine {STATE_SIZE} state components")
    x, design, iterations, termination, history = levenberg_marquardt(batch, guess, tols)
    logger.info("least squares: %d iterations, %s, cost %.6e", iterations, termination.value, history[-1])
    return EstimationResult(
        estimator="ls",
        x0=x,
        P0=_covariance(design, design.weights),
        epoch=Epoch(getattr(batch, "t0", epoch)),
        iterations=iterations,
        termination=termination,
        cost_history=tuple(history),
        residuals=np.sqrt(design.weights) * design.dy,
    )


# linear programming

def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])


def _entering(tableau: np.ndarray, allowed: int, tol: float) -> Optional[int]:
    # bland: lowest index with a negative reduced cost
    candidates = np.flatnonzero(tableau[-1, :allowed] < -tol)
    return int(candidates[0]) if len(candidates) else None


def _leaving(tableau: np.ndarray, col: int, basis: list[int], tol: float) -> Optional[int]:
    column = tableau[:-1, col]
    rows = np.flatnonzero(column > tol)
    if not len(rows):
        return None
    ratios = tableau[rows, -1] / column[rows]
    best = ratios.min()
    ties = rows[ratios <= best + tol * max(1.0, abs(best))]
    return int(min(ties, key=lambda r: basis[r]))


def _run_simplex(tableau: np.ndarray, basis: list[int], allowed: int, tol: float, max_pivots: int) -> int:
    pivots = 0
    while True:
        col = _entering(tableau, allowed, tol)
        if col is None:
            return pivots
        row = _leaving(tableau, col, basis, tol)
        if row is None:
            raise UnboundedError(f"the objective decreases without bound along column {col}")
        _pivot(tableau, row, col)
        basis[row] = col
        pivots += 1
        if pivots > max_pivots:
            raise EstimationError(f"simplex did not finish within {max_pivots} pivots")


def _price(tableau: np.ndarray, basis: list[int], costs: np.ndarray) -> None:
    basic = costs[basis]
    tableau[-1, :-1] = costs - basic @ tableau[:-1, :-1]
    tableau[-1, -1] = -basic @ tableau[:-1, -1]


def lp_solve(problem: LpProblem, tol: float = SIMPLEX_TOL) -> LpSolution:
    """
    min c^T z subject to Q z <= k for a free z, solved with a dense two-phase
    simplex. the free variables are split into nonnegative parts and every
    row gets a slack; rows with a negative bound get an artificial variable
    for the first phase
    """
    Q, k, c = (np.asarray(a, dtype=float) for a in (problem.Q, problem.k, problem.c))
    if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(k)) and np.all(np.isfinite(c))):
        raise ValueError("lp data must be finite")
    rows, free = Q.shape
    n = 2 * free + rows
    negative = np.flatnonzero(k < 0.0)
    width = n + len(negative)
    tableau = np.zeros((rows + 1, width + 1))
    tableau[:rows, :free] = Q
    tableau[:rows, free:2 * free] = -Q
    tableau[:rows, 2 * free:n] = np.eye(rows)
    tableau[:rows, -1] = k
    tableau[negative, :n] *= -1.0
    tableau[negative, -1] *= -1.0
    basis = [2 * free + r for r in range(rows)]
    for j, r in enumerate(negative):
        tableau[r, n + j] = 1.0
        basis[r] = n + j
    max_pivots = 50 * (rows + width)

    pivots = 0
    if len(negative):
        phase_one = np.zeros(width)
        phase_one[n:] = 1.0
        _price(tableau, basis, phase_one)
        pivots += _run_simplex(tableau, basis, width, tol, max_pivots)
        infeasibility = -tableau[-1, -1]
        if infeasibility > tol * (1.0 + float(np.abs(k).max(initial=0.0))):
            raise InfeasibleError(f"no point satisfies the constraints, phase one ends at {infeasibility:.3e}")
        for r, var in enumerate(basis):
            if var < n:
                continue
            candidates = np.flatnonzero(np.abs(tableau[r, :n]) > tol)
            # a row without candidates is redundant and keeps its artificial at zero
            if len(candidates):
                _pivot(tableau, r, int(candidates[0]))
                basis[r] = int(candidates[0])
                pivots += 1

    costs = np.zeros(width)
    costs[:free] = c
    costs[free:2 * free] = -c
    _price(tableau, basis, costs)
    pivots += _run_simplex(tableau, basis, n, tol, max_pivots)

    standard = np.zeros(width)
    standard[basis] = tableau[:-1, -1]
    z = standard[:free] - standard[free:2 * free]
    logger.debug("simplex: %d rows, %d free variables, %d pivots", rows, free, pivots)
    return LpSolution(z=z, objective=float(c @ z), reduced_costs=tableau[-1, :n].copy(), pivots=pivots)


def lsar_lp(H: np.ndarray, dy: np.ndarray, weights: np.ndarray) -> LpProblem:
    """
    minimum weighted l1 correction of a linearized batch. the unknowns are the
    state correction followed by one slack per residual, each slack bounding
    the absolute residual from above
    """
    rows, cols = H.shape
    identity = np.eye(rows)
    return LpProblem(
        c=np.concatenate([np.zeros(cols), weights]),
        Q=np.block([[-H, -identity], [H, -identity]]),
        k=np.concatenate([-dy, dy]),
    )


# least sum of absolute residuals

def _lsar_step(design: DesignSystem) -> tuple[np.ndarray, np.ndarray, float]:
    """lp correction on rows whitened by the lsar weights and columns scaled to unit norm"""
    w = design.lsar_weights
    whitened = design.H * w[:, None]
    norms = np.linalg.norm(whitened, axis=0)
    norms[norms == 0.0] = 1.0
    solution = lp_solve(lsar_lp(whitened / norms, w * design.dy, np.ones(len(w))))
    cols = design.H.shape[1]
    return solution.z[:cols] / norms, solution.z[cols:] / w, solution.objective


def lsar_iterate(
        model: MeasurementModel,
        x0: Sequence[float],
        tols: EstimatorTolerances = EstimatorTolerances(),
) -> tuple[np.ndarray, DesignSystem, int, Termination, list[float], Optional[np.ndarray]]:
    x = np.array(x0, dtype=float)
    design = model.design(x)
    w = design.lsar_weights
    cost = _lsar_cost(design.dy, w)
    history = [cost]
    slacks = None
    iterations = 0
    termination = Termination.max_iter
    while iterations < tols.max_iter:
        iterations += 1
        normal, gradient = _normal_equations(design)
        if _well_conditioned(normal):
            step, slacks, predicted = _lsar_step(design)
            if cost - predicted <= tols.eps_opt * (1.0 + cost):
                termination = Termination.optimality_tol
                break
        else:
            logger.warning("lsar iteration %d falls back to a damped least-squares step", iterations)
            step = np.linalg.solve(normal + tols.lambda0 * np.eye(len(x)), gradient)
        for _ in range(MAX_HALVINGS):
            try:
                trial_dy = model.residual(x + step)
                trial_cost = _lsar_cost(trial_dy, w)
            except OrbitDeterminationError as e:
                logger.debug("trial step failed: %s", e)
                trial_cost = math.inf
            if trial_cost <= cost:
                break
            step = 0.5 * step
        else:
            termination = Termination.step_tol
            break
        change = float(np.linalg.norm(np.sqrt(design.weights) * (trial_dy - design.dy)))
        small = _small_step(step, x, tols.eps_step)
        x = x + step
        cost = trial_cost
        history.append(cost)
        design = model.design(x)
        logger.debug("lsar iteration %d: cost %.6e", iterations, cost)
        if change < tols.eps_res:
            termination = Termination.residual_tol
            break
        if small:
            termination = Termination.step_tol
            break
    return x, design, iterations, termination, history, slacks


def lsar_solve(
        guess: Sequence[float],
        batch: MeasurementModel,
        tols: EstimatorTolerances = EstimatorTolerances(),
        epoch: float = 0.0,
) -> EstimationResult:
    if len(batch) < STATE_SIZE:
        raise EstimationError(f"{len(batch)} scalar measurements cannot determine {STATE_SIZE} state components")
    x, design, iterations, termination, history, slacks = lsar_iterate(batch, guess, tols)
    logger.info("lsar: %d iterations, %s, cost %.6e", iterations, termination.value, history[-1])
    return EstimationResult(
        estimator="lsar",
        x0=x,
        P0=_covariance(design, design.weights / LSAR_WEIGHT_FACTOR ** 2),
        epoch=Epoch(getattr(batch, "t0", epoch)),
        iterations=iterations,
        termination=termination,
        cost_history=tuple(history),
        residuals=np.sqrt(design.weights) * design.dy,
        slacks=slacks,
    )


def estimation_report(result: EstimationResult, observations: Sequence[Observation]) -> dict:
    """json-ready summary of an estimate with its residuals per measurement"""
    if len(result.residuals) != 2 * len(observations):
        raise ValueError("residuals and measurements do not match")
    residuals = []
    for i, obs in enumerate(observations):
        row = {
            "epoch": iso_from_epoch(obs.epoch),
            "site_id": obs.site_id,
            "ra_weighted": float(result.residuals[2 * i]),
            "dec_weighted": float(result.residuals[2 * i + 1]),
        }
        if result.slacks is not None:
            row["ra_slack"] = float(result.slacks[2 * i])
            row["dec_slack"] = float(result.slacks[2 * i + 1])
        residuals.append(row)
    return {
        "estimator": result.estimator,
        "epoch": iso_from_epoch(result.epoch),
        "estimate": [float(v) for v in result.x0],
        "covariance": [[float(v) for v in row] for row in result.P0],
        "sigma3": [float(3.0 * math.sqrt(max(v, 0.0))) for v in np.diag(result.P0)],
        "iterations": result.iterations,
        "termination": result.termination.value,
        "cost_history": list(result.cost_history),
        "residuals": residuals,
    }


__all__ = [
    "EstimatorTolerances",
    "MeasurementModel",
    "OrbitBatch",
    "build_design",
    "levenberg_marquardt",
    "ls_solve",
    "lp_solve",
    "lsar_lp",
    "lsar_iterate",
    "lsar_solve",
    "estimation_report",
]
