import numpy.typing as npt

from ..data_types import SolverConfig
from ..data_types import SolverResult
from ..models.base import EnergyModel
from ..models.base import RegionLike
from .direct import euler_lagrange_residual
from .direct import minimize_convex
from .direct import prepare_config
from .integrands import PowerIntegrand


def solve_p_dirichlet(
    model: EnergyModel,
    p: float,
    g: npt.ArrayLike | float | None = None,
    region: RegionLike = None,
    config: SolverConfig | None = None,
) -> SolverResult:
    """Minimize E^(p) over g + H_0^{1,p}(region), the weak p-Laplace Dirichlet problem"""
    config = prepare_config(config, p)
    result = minimize_convex(model, PowerIntegrand(p=p), g, region, config)
    result.diagnostics["euler_lagrange_residual"] = euler_lagrange_residual(
        model,
        result.u,
        p,
        region,
        cap=config.test_basis_cap,
        seed=config.seed,
    )
    return result
