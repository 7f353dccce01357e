from __future__ import annotations

from typing import Sequence


class OrbitDeterminationError(Exception):
    """root of every error raised by the package"""


class DomainError(OrbitDeterminationError, ValueError):
    """
    raised when a function is asked for a value outside its domain,
    e.g. sqrt of a polynomial whose constant part is not positive,
    or when two polynomials of different algebras are mixed
    """


class DegenerateMapError(OrbitDeterminationError, ValueError):
    """the constant jacobian of a map vanishes, its nonlinearity index is undefined"""


class DomainEvaluationError(OrbitDeterminationError, RuntimeError):
    """
    wraps a failure of the target function inside a single domain,
    the split history of that domain is kept so the failing subregion can be found
    """

    def __init__(self, message: str, history: Sequence) -> None:
        self.history = tuple(history)
        path = ",".join(f"{r.direction}:{r.third}" for r in self.history) or "root"
        super().__init__(f"{message} (domain {path})")


class KeplerConvergenceError(OrbitDeterminationError, RuntimeError):
    """newton iteration on kepler's equation did not converge"""


class LambertError(OrbitDeterminationError, RuntimeError):
    """the lambert problem has no usable solution for the given geometry"""


class SubterraneanError(OrbitDeterminationError, ValueError):
    """a state vector lies below the surface of the earth"""


class StepUnderflowError(OrbitDeterminationError, RuntimeError):
    """the adaptive integrator needed a step smaller than its minimum"""


class IodGeometryError(OrbitDeterminationError, ValueError):
    """the observation triplet cannot produce an initial orbit"""


class IodConvergenceError(OrbitDeterminationError, RuntimeError):
    """the range refinement did not converge"""


class InfeasibleError(OrbitDeterminationError, ValueError):
    """the linear program has no feasible point"""


class UnboundedError(OrbitDeterminationError, ValueError):
    """the linear program objective is unbounded below"""


class EstimationError(OrbitDeterminationError, RuntimeError):
    """a batch estimator could not produce an estimate"""


class ConfigError(OrbitDeterminationError, ValueError):
    """the scenario file does not match the expected schema"""


__all__ = [
    "OrbitDeterminationError",
    "DomainError",
    "DegenerateMapError",
    "DomainEvaluationError",
    "KeplerConvergenceError",
    "LambertError",
    "SubterraneanError",
    "StepUnderflowError",
    "IodGeometryError",
    "IodConvergenceError",
    "InfeasibleError",
    "UnboundedError",
    "EstimationError",
    "ConfigError",
]
