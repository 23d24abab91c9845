import numpy.typing as npt

from ..data_types import SolverConfig
from ..data_types import SolverResult
from ..models.base import EnergyModel
from ..models.base import RegionLike
from ..utils import safe_power
from .direct import minimize_convex
from .integrands import AnisotropicIntegrand


def solve_anisotropic(
    model: EnergyModel,
    p: float,
    g: npt.ArrayLike | float | None = None,
    region: RegionLike = None,
    config: SolverConfig | None = None,
) -> SolverResult:
    """Minimize sum_x m_x (|du|^p + |<du, eta_x>|^p) over fibers of dimension >= 2"""
    result = minimize_convex(model, AnisotropicIntegrand(p=p), g, region, config)
    active = model.dims >= 2
    densities = safe_power(model.carre(result.u), p / 2.0)
    isotropic = float(model.weights[active] @ densities[active])
    # isotropic p-energy over the fibers the integrand acts on
    result.diagnostics["isotropic_energy"] = isotropic
    result.diagnostics["anisotropic_excess"] = result.objective - isotropic
    result.diagnostics["active_fibers"] = int(active.sum())
    return result
