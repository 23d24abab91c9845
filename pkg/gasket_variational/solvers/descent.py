import dataclasses
import logging
import typing

import numpy as np
import numpy.typing as npt
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from ..data_types import SolverConfig
from ..errors import NonCoerciveError

logger = logging.getLogger(__name__)

# objectives below -DIVERGENCE_BOUND * (1 + |I(x0)|) count as unbounded
DIVERGENCE_BOUND = 1e12
# diagonal shift relative to the largest metric entry
REGULARIZATION = 1e-14
# width cap of the epsilon-active set of the two-metric projection
ACTIVE_WIDTH = 1e-3


class Metric:
    """Variable metric K + rho a a^T, solved on subsets of the dofs"""

    def __init__(
        self,
        matrix: sparse.csr_matrix,
        rank_one: tuple[float, npt.NDArray[np.float64]] | None = None,
    ):
        self.matrix = sparse.csr_matrix(matrix)
        self.rank_one = rank_one

    def diagonal(self) -> npt.NDArray[np.float64]:
        diagonal = self.matrix.diagonal()
        if self.rank_one is not None:
            rho, vector = self.rank_one
            diagonal = diagonal + rho * vector * vector
        return diagonal

    def solve(
        self, index: npt.NDArray[np.int64], rhs: npt.NDArray[np.float64]
    ) -> npt.NDArray[np.float64]:
        sub = self.matrix[index][:, index]
        shift = REGULARIZATION * max(float(np.abs(sub.diagonal()).max(initial=0.0)), 1.0)
        sub = (sub + shift * sparse.identity(len(index))).tocsc()
        lu = sparse_linalg.splu(sub)
        result = lu.solve(rhs)
        if self.rank_one is not None:
            # Sherman-Morrison for the rank one penalty curvature
            rho, vector = self.rank_one
            local = vector[index]
            correction = lu.solve(local)
            result = result - (
                rho * (local @ result) / (1.0 + rho * (local @ correction))
            ) * correction
        return result


@dataclasses.dataclass(frozen=True)
class DescentProblem:
    objective: typing.Callable[[npt.NDArray[np.float64]], float]
    gradient: typing.Callable[[npt.NDArray[np.float64]], npt.NDArray[np.float64]]
    metric: typing.Callable[[npt.NDArray[np.float64]], Metric]
    # ids of the free dofs, every other dof stays fixed
    free: npt.NDArray[np.int64]
    # multiplies the free gradient entries before taking the residual max
    residual_weights: npt.NDArray[np.float64]
    # pointwise lower bound over all dofs, None when unconstrained
    lower: npt.NDArray[np.float64] | None = None


@dataclasses.dataclass(frozen=True, eq=False)
class DescentOutcome:
    x: npt.NDArray[np.float64]
    objective: float
    residual: float
    status: str
    iterations: int
    trace: tuple[float, ...]
    residual_trace: tuple[float, ...]


def projected_gradient(
    gradient: npt.NDArray[np.float64],
    x: npt.NDArray[np.float64],
    lower: npt.NDArray[np.float64] | None,
) -> npt.NDArray[np.float64]:
    """Gradient with the components pushing into an active bound removed"""
    if lower is None:
        return gradient
    blocked = (x <= lower) & (gradient > 0)
    return np.where(blocked, 0.0, gradient)


def residual_of(problem: DescentProblem, x: npt.NDArray[np.float64], gradient) -> float:
    free = problem.free
    lower = None if problem.lower is None else problem.lower[free]
    projected = projected_gradient(gradient[free], x[free], lower)
    if not len(projected):
        return 0.0
    return float(np.abs(projected * problem.residual_weights).max())


def _arc_search(
    problem: DescentProblem,
    x: npt.NDArray[np.float64],
    value: float,
    gradient_free: npt.NDArray[np.float64],
    direction: npt.NDArray[np.float64],
    config: SolverConfig,
) -> tuple[npt.NDArray[np.float64], float] | None:
    """Armijo backtracking along the projected arc max(h, x + t d)"""
    free = problem.free
    x_free = x[free]
    lower = None if problem.lower is None else problem.lower[free]
    step = 1.0
    for _ in range(config.max_backtracks + 1):
        candidate_free = x_free + step * direction
        if lower is not None:
            candidate_free = np.maximum(candidate_free, lower)
        change = candidate_free - x_free
        decrease = float(gradient_free @ change)
        if not decrease < 0:
            return None
        candidate = x.copy()
        candidate[free] = candidate_free
        candidate_value = problem.objective(candidate)
        if np.isfinite(candidate_value) and (
            candidate_value <= value + config.armijo * decrease
        ):
            return candidate, candidate_value
        step *= config.backtrack
    return None


def _two_metric_direction(
    problem: DescentProblem,
    x: npt.NDArray[np.float64],
    gradient_free: npt.NDArray[np.float64],
    metric: Metric,
) -> npt.NDArray[np.float64]:
    free = problem.free
    x_free = x[free]
    diagonal = np.maximum(metric.diagonal()[free], np.finfo(float).tiny)
    active = np.zeros(len(free), dtype=bool)
    if problem.lower is not None:
        lower = problem.lower[free]
        width = min(
            ACTIVE_WIDTH,
            float(np.abs(x_free - np.maximum(lower, x_free - gradient_free)).max()),
        )
        active = (x_free - lower <= width) & (gradient_free > 0)
    direction = np.zeros(len(free))
    direction[active] = -gradient_free[active] / diagonal[active]
    if np.any(~active):
        direction[~active] = -metric.solve(free[~active], gradient_free[~active])
    return direction


def descend(
    problem: DescentProblem,
    x0: npt.NDArray[np.float64],
    config: SolverConfig,
    tolerance: float,
    max_iterations: int,
) -> DescentOutcome:
    """Projected variable-metric descent with Armijo backtracking

    Every accepted step strictly decreases the objective. The run stops once
    the weighted projected gradient is within tolerance.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    if problem.lower is not None:
        x[problem.free] = np.maximum(x[problem.free], problem.lower[problem.free])
    value = problem.objective(x)
    if not np.isfinite(value):
        raise NonCoerciveError(f"Objective is not finite at the start point: {value}")
    bound = -DIVERGENCE_BOUND * (1.0 + abs(value))
    trace = [value]
    residual_trace = []
    status = "max_iterations"
    residual = np.inf
    iterations = 0
    while True:
        gradient = problem.gradient(x)
        residual = residual_of(problem, x, gradient)
        residual_trace.append(residual)
        if residual <= tolerance:
            status = "converged"
            break
        if iterations >= max_iterations:
            status = "max_iterations"
            break
        gradient_free = gradient[problem.free]
        metric = problem.metric(x)
        step = None
        try:
            direction = _two_metric_direction(problem, x, gradient_free, metric)
            step = _arc_search(problem, x, value, gradient_free, direction, config)
        except RuntimeError as exc:
            logger.debug("Metric solve failed, falling back to a gradient step: %s", exc)
        if step is None:
            diagonal = np.maximum(metric.diagonal()[problem.free], np.finfo(float).tiny)
            step = _arc_search(
                problem, x, value, gradient_free, -gradient_free / diagonal, config
            )
        if step is None:
            status = "stalled"
            break
        x, value = step
        iterations += 1
        if not np.isfinite(value) or value < bound:
            raise NonCoerciveError(
                f"Objective diverges along the descent, reached {value:.6g} "
                f"after {iterations} iterations"
            )
        trace.append(value)
        logger.debug(
            "Iteration %s objective %.12g residual %.3e", iterations, value, residual
        )
    return DescentOutcome(
        x=x,
        objective=value,
        residual=residual,
        status=status,
        iterations=iterations,
        trace=tuple(trace),
        residual_trace=tuple(residual_trace),
    )
