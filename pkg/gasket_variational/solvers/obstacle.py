import dataclasses
import logging

import numpy as np
import numpy.typing as npt

from ..data_types import DiscreteFunction
from ..data_types import SolverConfig
from ..data_types import SolverResult
from ..errors import InfeasibleProblemError
from ..models.base import EnergyModel
from ..models.base import RegionLike
from ..utils import make_rng
from .direct import prepare_config
from .direct import run_continuation
from .integrands import QuadraticIntegrand

logger = logging.getLogger(__name__)

FEASIBILITY_TOLERANCE = 1e-12


@dataclasses.dataclass(frozen=True, eq=False)
class ObstacleSpec:
    # obstacle h, a dof vector or a constant
    obstacle: npt.ArrayLike | float
    # source f, a dof vector or a constant
    source: npt.ArrayLike | float = 0.0
    # Dirichlet datum g, on the boundary dofs or on all dofs
    boundary: npt.ArrayLike | float | None = None

    def resolve(
        self, model: EnergyModel
    ) -> tuple[DiscreteFunction, DiscreteFunction, DiscreteFunction]:
        def expand(values, name):
            array = np.broadcast_to(
                np.asarray(values, dtype=np.float64), (model.dof_count,)
            )
            return model.function(array.copy(), name=name)

        return (
            expand(self.obstacle, "obstacle"),
            expand(self.source, "source"),
            model.boundary_datum(self.boundary),
        )


def admissible_start(
    model: EnergyModel,
    spec: ObstacleSpec,
    region: RegionLike = None,
    initial: npt.ArrayLike | None = None,
) -> DiscreteFunction:
    """A member of {w = g off the region, w >= h}, raising when the set is empty"""
    obstacle, _, datum = spec.resolve(model)
    free = model.region_mask(region)
    fixed = ~free
    violation = obstacle[fixed] - datum[fixed]
    if violation.size and violation.max() > FEASIBILITY_TOLERANCE * (
        1.0 + np.abs(obstacle[fixed]).max()
    ):
        worst = int(np.flatnonzero(fixed)[violation.argmax()])
        raise InfeasibleProblemError(
            f"Boundary datum lies below the obstacle at dof {worst} "
            f"by {violation.max():.6g}"
        )
    start = datum.copy()
    if initial is not None:
        start[free] = model.function(initial, name="initial")[free]
    start[free] = np.maximum(start[free], obstacle[free])
    return start


def solve_obstacle(
    model: EnergyModel,
    spec: ObstacleSpec,
    region: RegionLike = None,
    config: SolverConfig | None = None,
    initial: npt.ArrayLike | None = None,
) -> SolverResult:
    """Minimize 1/2 sum_x m_x |dw|^2 - sum_i mu_i f_i w_i over w >= h"""
    config = prepare_config(config, 2.0)
    obstacle, source, _ = spec.resolve(model)
    start = admissible_start(model, spec, region, initial)
    free = np.flatnonzero(model.region_mask(region))
    result = run_continuation(
        model,
        QuadraticIntegrand(),
        start,
        free,
        config,
        source=source,
        lower=obstacle,
    )
    contact = np.flatnonzero(result.u[free] <= obstacle[free])
    result.diagnostics["contact_dofs"] = free[contact].tolist()
    result.diagnostics["variational_inequality_margin"] = (
        variational_inequality_margin(model, spec, result.u, region, seed=config.seed)
    )
    logger.info("Obstacle solve has %s contact dofs", len(contact))
    return result


def variational_inequality_margin(
    model: EnergyModel,
    spec: ObstacleSpec,
    u: npt.ArrayLike,
    region: RegionLike = None,
    samples: int = 100,
    seed: int | None = 0,
) -> float:
    """Smallest value of E(u, w - u) - sum_i mu_i f_i (w - u)_i over sampled
    admissible w, normalized by the Sobolev size of w - u
    """
    u = model.function(u, name="u")
    obstacle, source, _ = spec.resolve(model)
    free = model.region_mask(region)
    rng = make_rng(seed)
    residual = model.stiffness @ u - model.dof_mass * source
    scale = max(1.0, float(np.abs(u).max()))
    worst = np.inf
    for _ in range(samples):
        w = u.copy()
        noise = rng.standard_normal(int(free.sum())) * scale * rng.exponential()
        w[free] = np.maximum(obstacle[free], u[free] + noise)
        direction = w - u
        size = model.sobolev_norm(direction, 2.0)
        if size == 0.0:
            continue
        worst = min(worst, float(residual @ direction) / size)
    return 0.0 if worst == np.inf else worst
