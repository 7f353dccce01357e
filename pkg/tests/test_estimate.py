import numpy as np
import pytest

from src.config import ScenarioConfig
from src.constants import ARCSEC, LSAR_WEIGHT_FACTOR
from src.custom_typing import Epoch, SiteId
from src.data_classes import DesignSystem, EstimationResult, LpProblem, Observation, Termination
from src.estimate import (
    EstimatorTolerances,
    OrbitBatch,
    build_design,
    estimation_report,
    lp_solve,
    ls_solve,
    lsar_lp,
    lsar_solve,
)
from src.exceptions import EstimationError, InfeasibleError, UnboundedError


class LinearBatch:
    """y = A x measured with a common standard deviation"""

    def __init__(self, A: np.ndarray, y: np.ndarray, sigma: float) -> None:
        self.A = A
        self.y = y
        self.weights = np.full(len(y), sigma ** -2)
        self.lsar_weights = np.full(len(y), 1.0 / (LSAR_WEIGHT_FACTOR * sigma))

    def __len__(self) -> int:
        return len(self.y)

    def design(self, x: np.ndarray) -> DesignSystem:
        h = self.A @ x
        return DesignSystem(h=h, H=self.A, dy=self.y - h, weights=self.weights, lsar_weights=self.lsar_weights)

    def residual(self, x: np.ndarray) -> np.ndarray:
        return self.y - self.A @ x


@pytest.fixture
def linear_problem() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rng = np.random.default_rng(21)
    A = rng.normal(size=(24, 6))
    x_true = rng.normal(size=6)
    y = A @ x_true + 0.01 * rng.standard_normal(24)
    return A, x_true, y


def test_tolerance_validation() -> None:
    with pytest.raises(ValueError):
        EstimatorTolerances(max_iter=0)
    with pytest.raises(ValueError):
        EstimatorTolerances(eps_res=-1.0)
    with pytest.raises(ValueError):
        EstimatorTolerances(lambda_factor=1.0)


def test_least_squares_on_a_linear_model(linear_problem: tuple) -> None:
    A, _, y = linear_problem
    result = ls_solve(np.zeros(6), LinearBatch(A, y, 0.01), epoch=5.0)
    expected, *_ = np.linalg.lstsq(A, y, rcond=None)
    np.testing.assert_allclose(result.x0, expected, rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(result.P0, np.linalg.inv(A.T @ A) * 1e-4, rtol=1e-8)
    assert result.estimator == "ls"
    assert result.epoch == 5.0
    assert result.cost_history[-1] <= result.cost_history[0]
    assert list(result.cost_history) == sorted(result.cost_history, reverse=True)
    assert result.iterations >= 1
    np.testing.assert_allclose(result.residuals, (y - A @ result.x0) / 0.01, atol=1e-6)


def test_too_few_measurements(linear_problem: tuple) -> None:
    A, _, y = linear_problem
    batch = LinearBatch(A[:5], y[:5], 0.01)
    with pytest.raises(EstimationError):
        ls_solve(np.zeros(6), batch)
    with pytest.raises(EstimationError):
        lsar_solve(np.zeros(6), batch)


def test_lsar_resists_a_gross_error(linear_problem: tuple) -> None:
    A, x_true, y = linear_problem
    y = y.copy()
    y[3] += 5.0
    batch = LinearBatch(A, y, 0.01)
    robust = lsar_solve(np.zeros(6), batch)
    plain = ls_solve(np.zeros(6), batch)
    assert np.linalg.norm(robust.x0 - x_true) < 0.1
    assert np.linalg.norm(plain.x0 - x_true) > 3.0 * np.linalg.norm(robust.x0 - x_true)
    assert robust.estimator == "lsar"
    assert int(np.argmax(robust.slacks)) == 3
    assert robust.slacks[3] == pytest.approx(5.0, abs=0.2)
    np.testing.assert_allclose(robust.P0, plain.P0 * LSAR_WEIGHT_FACTOR ** 2, rtol=1e-8)
    assert robust.cost_history[-1] <= robust.cost_history[0]


def test_lp_bound() -> None:
    solution = lp_solve(LpProblem(c=np.array([1.0]), Q=np.array([[-1.0]]), k=np.array([-1.0])))
    assert solution.z[0] == pytest.approx(1.0)
    assert solution.objective == pytest.approx(1.0)


def test_lp_vertex() -> None:
    problem = LpProblem(
        c=np.array([-1.0, -1.0]),
        Q=np.array([[1.0, 2.0], [3.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]),
        k=np.array([4.0, 6.0, 0.0, 0.0]),
    )
    solution = lp_solve(problem)
    np.testing.assert_allclose(solution.z, [1.6, 1.2], atol=1e-12)
    assert solution.objective == pytest.approx(-2.8)
    assert np.all(solution.reduced_costs >= -1e-9)
    assert solution.pivots >= 2


def test_lp_failures() -> None:
    with pytest.raises(InfeasibleError):
        lp_solve(LpProblem(c=np.array([1.0]), Q=np.array([[1.0], [-1.0]]), k=np.array([-1.0, -1.0])))
    with pytest.raises(UnboundedError):
        lp_solve(LpProblem(c=np.array([1.0]), Q=np.array([[1.0]]), k=np.array([1.0])))
    with pytest.raises(ValueError):
        LpProblem(c=np.array([1.0, 2.0]), Q=np.array([[1.0]]), k=np.array([1.0]))
    with pytest.raises(ValueError):
        lp_solve(LpProblem(c=np.array([np.nan]), Q=np.array([[1.0]]), k=np.array([1.0])))


def test_weighted_median() -> None:
    values = np.array([1.0, 2.0, 7.0, 10.0, 3.0])
    solution = lp_solve(lsar_lp(np.ones((5, 1)), values, np.ones(5)))
    assert solution.z[0] == pytest.approx(3.0)
    assert solution.objective == pytest.approx(np.abs(values - 3.0).sum())
    # a heavy weight drags the median onto its value
    heavy = lp_solve(lsar_lp(np.ones((5, 1)), values, np.array([1.0, 1.0, 1.0, 10.0, 1.0])))
    assert heavy.z[0] == pytest.approx(10.0)


def _weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    order = np.argsort(values)
    cumulative = np.cumsum(weights[order])
    return float(values[order][np.searchsorted(cumulative, 0.5 * cumulative[-1])])


def test_one_dimensional_lsar_is_a_weighted_median() -> None:
    rng = np.random.default_rng(5)
    for _ in range(1000):
        size = int(rng.integers(1, 16))
        values = rng.normal(scale=10.0, size=size)
        # integer weights make ties between two medians common
        weights = rng.integers(1, 4, size=size).astype(float)
        solution = lp_solve(lsar_lp(np.ones((size, 1)), values, weights))
        z = solution.z[0]
        median = _weighted_median(values, weights)
        best = float(weights @ np.abs(values - median))
        # any point of the minimizing interval will do
        assert float(weights @ np.abs(values - z)) == pytest.approx(best, rel=1e-9, abs=1e-9)
        assert solution.objective == pytest.approx(best, rel=1e-9, abs=1e-9)
        assert values.min() - 1e-9 <= z <= values.max() + 1e-9


def test_lsar_slacks_are_the_absolute_residuals(linear_problem: tuple) -> None:
    A, _, y = linear_problem
    solution = lp_solve(lsar_lp(A, y, np.ones(len(y))))
    correction, slacks = solution.z[:6], solution.z[6:]
    np.testing.assert_allclose(slacks, np.abs(y - A @ correction), atol=1e-9)
    assert np.all(solution.reduced_costs >= -1e-9)


def test_batch_validation(campaign: list[Observation], scenario: ScenarioConfig) -> None:
    sites = scenario.site_map()
    t0 = scenario.truth.t0
    with pytest.raises(ValueError):
        OrbitBatch(t0, [], sites, scenario.force)
    with pytest.raises(ValueError):
        OrbitBatch(t0, list(reversed(campaign[:3])), sites, scenario.force)
    with pytest.raises(ValueError):
        OrbitBatch(t0, campaign[:3], {}, scenario.force)
    broken = Observation(campaign[0].epoch, campaign[0].site_id, 0.1, 0.1, 0.0, ARCSEC)
    with pytest.raises(ValueError):
        OrbitBatch(t0, [broken], sites, scenario.force)
    batch = OrbitBatch(t0, campaign, sites, scenario.force)
    assert len(batch) == 2 * len(campaign)
    np.testing.assert_allclose(batch.lsar_weights, np.sqrt(batch.weights) / LSAR_WEIGHT_FACTOR)


def test_design_matches_finite_differences(
        quiet_campaign: list[Observation],
        scenario: ScenarioConfig,
        truth_state: np.ndarray,
) -> None:
    observations = quiet_campaign[:4]
    t0 = scenario.truth.t0
    design = build_design(truth_state, t0, observations, scenario.site_map(), scenario.force)
    assert design.H.shape == (8, 6)
    assert np.abs(design.dy).max() < 1e-8
    batch = OrbitBatch(t0, observations, scenario.site_map(), scenario.force)
    steps = [1e-3, 1e-3, 1e-3, 1e-6, 1e-6, 1e-6]
    numeric = np.empty((8, 6))
    for j, step in enumerate(steps):
        delta = np.zeros(6)
        delta[j] = step
        # residuals are measured minus predicted
        numeric[:, j] = -(batch.residual(truth_state + delta) - batch.residual(truth_state - delta)) / (2.0 * step)
    for j in range(6):
        np.testing.assert_allclose(design.H[:, j], numeric[:, j], rtol=1e-3, atol=1e-3 * np.abs(numeric[:, j]).max())


@pytest.mark.slow
def test_estimators_on_the_campaign(
        campaign: list[Observation],
        scenario: ScenarioConfig,
        truth_state: np.ndarray,
) -> None:
    t0 = scenario.truth.t0
    batch = OrbitBatch(t0, campaign, scenario.site_map(), scenario.force)
    guess = truth_state + np.array([2.0, -1.0, 1.5, 1e-4, -2e-4, 1e-4])
    ls = ls_solve(guess, batch, scenario.estimator.tolerances())
    sigma = np.sqrt(np.diag(ls.P0))
    assert np.all(np.abs(ls.x0 - truth_state) < 5.0 * sigma)
    assert 0.3 < np.sqrt(np.mean(ls.residuals ** 2)) < 2.5
    lsar = lsar_solve(guess, batch, scenario.estimator.tolerances())
    assert np.linalg.norm(lsar.x0[:3] - truth_state[:3]) < 10.0 * np.linalg.norm(sigma[:3])
    report = estimation_report(lsar, campaign)
    assert len(report["residuals"]) == len(campaign)
    assert "ra_slack" in report["residuals"][0]


def test_estimation_report() -> None:
    observations = [
        Observation(Epoch(0.0), SiteId("calern"), 0.1, 0.2, ARCSEC, ARCSEC),
        Observation(Epoch(60.0), SiteId("calern"), 0.1, 0.2, ARCSEC, ARCSEC),
    ]
    result = EstimationResult(
        estimator="ls",
        x0=np.arange(6.0),
        P0=np.diag([4.0, 1.0, 1.0, 1.0, 1.0, 1.0]),
        epoch=Epoch(0.0),
        iterations=3,
        termination=Termination.residual_tol,
        cost_history=(3.0, 1.0),
        residuals=np.array([0.5, -0.5, 1.0, 0.0]),
    )
    report = estimation_report(result, observations)
    assert report["termination"] == "residual_tol"
    assert report["sigma3"][0] == pytest.approx(6.0)
    assert report["residuals"][1]["ra_weighted"] == 1.0
    assert "ra_slack" not in report["residuals"][0]
    with pytest.raises(ValueError):
        estimation_report(result, observations[:1])
