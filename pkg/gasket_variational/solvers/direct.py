import dataclasses
import logging

import numpy as np
import numpy.typing as npt

from ..data_types import DiscreteFunction
from ..data_types import SolverConfig
from ..data_types import SolverResult
from ..models.base import EnergyModel
from ..models.base import RegionLike
from ..utils import make_rng
from .descent import DescentProblem
from .descent import Metric
from .descent import descend
from .integrands import ConvexIntegrand
from .poincare import poincare_constant

logger = logging.getLogger(__name__)


def test_basis(
    model: EnergyModel,
    region: RegionLike = None,
    cap: int = 500,
    seed: int | None = 0,
) -> npt.NDArray[np.int64]:
    """Free dof ids whose hat functions serve as residual test functions"""
    free = np.flatnonzero(model.region_mask(region))
    if len(free) <= cap:
        return free
    return np.sort(make_rng(seed).choice(free, size=cap, replace=False))


# keeps pytest from collecting the function when tests import it
test_basis.__test__ = False


def euler_lagrange_residual(
    model: EnergyModel,
    u: npt.ArrayLike,
    p: float,
    region: RegionLike = None,
    load: npt.ArrayLike | None = None,
    cap: int = 500,
    seed: int | None = 0,
    eps: float = 0.0,
) -> float:
    """max over test hats phi_i of |E^(p)(u, phi_i) - <load, phi_i>| / ||phi_i||"""
    u = model.function(u, name="u")
    basis = test_basis(model, region, cap=cap, seed=seed)
    pairings = model.functional_gradient(u, p, eps) / p
    if load is not None:
        pairings = pairings - model.function(load, name="load")
    return float((np.abs(pairings[basis]) / model.hat_norms(p)[basis]).max())


def objective_problem(
    model: EnergyModel,
    integrand: ConvexIntegrand,
    free: npt.NDArray[np.int64],
    source: DiscreteFunction | None = None,
    lower: DiscreteFunction | None = None,
) -> DescentProblem:
    """I[w] = sum_x m_x f_x(dw) - sum_i mu_i source_i w_i over the free dofs"""
    load = None if source is None else model.dof_mass * source

    def objective(x):
        value = integrand.evaluate(model, x)
        if load is not None:
            value -= float(load @ x)
        return value

    def gradient(x):
        result = integrand.gradient(model, x)
        if load is not None:
            result = result - load
        return result

    def metric(x):
        return Metric(integrand.dof_metric(model, x))

    hat_norms = model.hat_norms(integrand.p)[free]
    return DescentProblem(
        objective=objective,
        gradient=gradient,
        metric=metric,
        free=free,
        residual_weights=1.0 / (integrand.residual_scale * hat_norms),
        lower=lower,
    )


def run_continuation(
    model: EnergyModel,
    integrand: ConvexIntegrand,
    start: DiscreteFunction,
    free: npt.NDArray[np.int64],
    config: SolverConfig,
    source: DiscreteFunction | None = None,
    lower: DiscreteFunction | None = None,
) -> SolverResult:
    """Warm-started descent over the smoothing schedule of the config"""
    tolerance = config.effective_tolerance
    remaining = config.max_iterations
    trace: list[float] = []
    residual_trace: list[float] = []
    u = start
    outcome = None
    schedule = config.schedule()
    for stage, eps in enumerate(schedule):
        problem = objective_problem(
            model, integrand.with_eps(eps), free, source=source, lower=lower
        )
        stage_tolerance = max(tolerance, eps) if eps > 0 else tolerance
        outcome = descend(problem, u, config, stage_tolerance, remaining)
        u = outcome.x
        trace.extend(outcome.trace)
        residual_trace.extend(outcome.residual_trace)
        remaining -= outcome.iterations
        logger.debug(
            "Stage %s/%s eps=%.3g status=%s iterations=%s residual=%.3e",
            stage + 1,
            len(schedule),
            eps,
            outcome.status,
            outcome.iterations,
            outcome.residual,
        )
        if remaining <= 0:
            break
    assert outcome is not None
    status = outcome.status
    if stage < len(schedule) - 1 and status == "converged":
        status = "max_iterations"
    objective = integrand.evaluate(model, u)
    if source is not None:
        objective -= float((model.dof_mass * source) @ u)
    logger.info(
        "%s minimization finished with status %s after %s iterations, residual %.3e",
        integrand.NAME,
        status,
        config.max_iterations - remaining,
        outcome.residual,
    )
    return SolverResult(
        u=u,
        objective=objective,
        residual=outcome.residual,
        status=status,
        iterations=config.max_iterations - remaining,
        trace=tuple(trace),
        residual_trace=tuple(residual_trace),
        diagnostics=dict(schedule=list(schedule), integrand=integrand.NAME),
    )


def prepare_config(config: SolverConfig | None, p: float) -> SolverConfig:
    if config is None:
        return SolverConfig(p=p)
    if config.p != p:
        return dataclasses.replace(config, p=p)
    return config


def minimize_convex(
    model: EnergyModel,
    integrand: ConvexIntegrand,
    g: npt.ArrayLike | float | None = None,
    region: RegionLike = None,
    config: SolverConfig | None = None,
    source: npt.ArrayLike | float | None = None,
) -> SolverResult:
    """Direct method over g + H_0^{1,p}(region)

    Dofs outside the region keep the values of g, g may be given on the
    boundary dofs only.
    """
    config = prepare_config(config, integrand.p)
    free = np.flatnonzero(model.region_mask(region))
    start = model.boundary_datum(g)
    integrand.validate(model, seed=config.seed)
    diagnostics = {}
    if config.verify_poincare:
        diagnostics["poincare_constant"] = poincare_constant(model, region, integrand.p)
    source_values = None
    if source is not None:
        source_values = np.broadcast_to(
            np.asarray(source, dtype=np.float64), (model.dof_count,)
        ).copy()
        source_values = model.function(source_values, name="source")
    result = run_continuation(
        model, integrand, start, free, config, source=source_values
    )
    result.diagnostics.update(diagnostics)
    return result
