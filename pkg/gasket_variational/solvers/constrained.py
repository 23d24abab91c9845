import dataclasses
import logging
import typing

import numpy as np
import numpy.typing as npt
from scipy import optimize
from scipy import sparse

from ..data_types import DiscreteFunction
from ..data_types import SolverConfig
from ..data_types import SolverResult
from ..errors import InfeasibleProblemError
from ..errors import InvalidIntegrandError
from ..models.base import EnergyModel
from ..models.base import RegionLike
from ..utils import check_exponent
from ..utils import make_rng
from .descent import DescentProblem
from .descent import Metric
from .descent import descend
from .direct import euler_lagrange_residual
from .direct import prepare_config
from .direct import test_basis
from .integrands import PowerIntegrand

logger = logging.getLogger(__name__)

ScalarMap = typing.Callable[[npt.NDArray[np.float64]], npt.NDArray[np.float64]]

# feasibility bracket grows up to this half width before giving up
MAX_BRACKET = 2.0**10
# smallest |sum_i mu_i G'(u_i) w_i| accepted as the multiplier quotient denominator
QUOTIENT_THRESHOLD = 1e-8
INITIAL_PENALTY = 10.0
PENALTY_GROWTH = 10.0
MAX_OUTER_ITERATIONS = 50


@dataclasses.dataclass(frozen=True, eq=False)
class ConstraintSpec:
    # G, applied elementwise
    value: ScalarMap
    # G'
    derivative: ScalarMap
    # C with |G'(z)| <= C (|z|^(p-1) + 1)
    growth: float
    name: str = "custom"
    # G'', used for metric curvature only
    second: ScalarMap | None = None

    def constraint_value(self, model: EnergyModel, w: npt.ArrayLike) -> float:
        """J[w] = sum_i mu_i G(w_i)"""
        w = model.function(w, name="w")
        return float(model.dof_mass @ self.value(w))

    def constraint_gradient(
        self, model: EnergyModel, w: npt.ArrayLike
    ) -> DiscreteFunction:
        w = model.function(w, name="w")
        return model.dof_mass * self.derivative(w)

    def check_growth(
        self, p: float, bound: float, samples: int = 64, seed: int | None = 0
    ):
        """Sample the growth bound on [-bound, bound]"""
        z = make_rng(seed).uniform(-bound, bound, size=samples)
        z = np.concatenate([z, [0.0, bound, -bound]])
        lhs = np.abs(self.derivative(z))
        rhs = self.growth * (np.abs(z) ** (p - 1.0) + 1.0)
        if np.any(lhs > rhs * (1.0 + 1e-12)):
            worst = float(z[np.argmax(lhs - rhs)])
            raise InvalidIntegrandError(
                f"Constraint {self.name!r} violates its growth bound at z = {worst:.6g}"
            )


def linear(offset: float = 0.0) -> ConstraintSpec:
    """G(z) = z - offset, the mean value constraint"""
    return ConstraintSpec(
        value=lambda z: np.asarray(z, dtype=np.float64) - offset,
        derivative=lambda z: np.ones_like(z, dtype=np.float64),
        second=lambda z: np.zeros_like(z, dtype=np.float64),
        growth=1.0,
        name="linear",
    )


def cubic(c: float, growth: float | None = None) -> ConstraintSpec:
    """G(z) = z^3 / 3 - c z

    The default growth constant covers p >= 3, smaller p need an explicit one.
    """
    return ConstraintSpec(
        value=lambda z: np.asarray(z, dtype=np.float64) ** 3 / 3.0 - c * z,
        derivative=lambda z: np.asarray(z, dtype=np.float64) ** 2 - c,
        second=lambda z: 2.0 * np.asarray(z, dtype=np.float64),
        growth=1.0 + abs(c) if growth is None else growth,
        name="cubic",
    )


def feasible_point(
    model: EnergyModel,
    spec: ConstraintSpec,
    start: DiscreteFunction,
    free: npt.NDArray[np.int64],
    tolerance: float,
) -> DiscreteFunction:
    """Solve J[g + t bump] = 0 for t, bump being the indicator of the free dofs"""
    bump = np.zeros(model.dof_count)
    bump[free] = 1.0

    def shifted(t):
        return spec.constraint_value(model, start + t * bump)

    base = shifted(0.0)
    if abs(base) <= tolerance:
        return start.copy()
    half_width = 1.0
    while half_width <= MAX_BRACKET:
        for low, high in ((0.0, half_width), (-half_width, 0.0)):
            if shifted(low) * shifted(high) <= 0.0:
                t = optimize.brentq(shifted, low, high, xtol=1e-15)
                logger.debug("Feasible shift t=%.12g found in [%s, %s]", t, low, high)
                return start + t * bump
        half_width *= 2.0
    raise InfeasibleProblemError(
        f"No root of J along the interior bump in [-{MAX_BRACKET:g}, {MAX_BRACKET:g}],"
        f" J[g] = {base:.6g}"
    )


def multiplier_quotient(
    model: EnergyModel,
    u: npt.ArrayLike,
    p: float,
    spec: ConstraintSpec,
    region: RegionLike = None,
) -> tuple[float | None, int | None]:
    """lambda = E^(p)(u, w) / sum_i mu_i G'(u_i) w_i for the first interior hat w
    with a denominator above threshold, (None, None) when there is none
    """
    u = model.function(u, name="u")
    free = np.flatnonzero(model.region_mask(region))
    denominators = spec.constraint_gradient(model, u)[free]
    usable = np.flatnonzero(np.abs(denominators) > QUOTIENT_THRESHOLD)
    if not len(usable):
        return None, None
    dof = int(free[usable[0]])
    numerator = model.functional_gradient(u, p)[dof] / p
    return float(numerator / denominators[usable[0]]), dof


def constraint_residual(
    model: EnergyModel,
    u: npt.ArrayLike,
    p: float,
    spec: ConstraintSpec,
    lam: float,
    region: RegionLike = None,
    cap: int = 500,
    seed: int | None = 0,
) -> float:
    """max over test hats phi_i of
    |E^(p)(u, phi_i) - lam sum_j mu_j G'(u_j) phi_i(j)| / ||phi_i||
    """
    load = lam * spec.constraint_gradient(model, u)
    return euler_lagrange_residual(
        model, u, p, region, load=load, cap=cap, seed=seed
    )


def augmented_problem(
    model: EnergyModel,
    integrand: PowerIntegrand,
    spec: ConstraintSpec,
    free: npt.NDArray[np.int64],
    multiplier: float,
    penalty: float,
) -> DescentProblem:
    """L[w] = I[w] + y J[w] + rho/2 J[w]^2"""

    def objective(x):
        constraint = spec.constraint_value(model, x)
        return (
            integrand.evaluate(model, x)
            + multiplier * constraint
            + 0.5 * penalty * constraint * constraint
        )

    def gradient(x):
        estimate = multiplier + penalty * spec.constraint_value(model, x)
        return integrand.gradient(model, x) + estimate * spec.constraint_gradient(
            model, x
        )

    def metric(x):
        matrix = integrand.dof_metric(model, x)
        if spec.second is not None:
            estimate = multiplier + penalty * spec.constraint_value(model, x)
            curvature = np.maximum(estimate * model.dof_mass * spec.second(x), 0.0)
            matrix = matrix + sparse.diags(curvature)
        return Metric(matrix, rank_one=(penalty, spec.constraint_gradient(model, x)))

    return DescentProblem(
        objective=objective,
        gradient=gradient,
        metric=metric,
        free=free,
        residual_weights=1.0 / (integrand.p * model.hat_norms(integrand.p)[free]),
    )


def solve_constrained_poisson(
    model: EnergyModel,
    p: float,
    spec: ConstraintSpec,
    g: npt.ArrayLike | float | None = None,
    region: RegionLike = None,
    config: SolverConfig | None = None,
) -> SolverResult:
    """Minimize E^(p) over g + H_0^{1,p}(region) subject to J[w] = 0

    Runs an augmented Lagrangian loop. The multiplier of the weak equation
    E^(p)(u, v) = lambda sum_i mu_i G'(u_i) v_i comes from the quotient formula at
    the first interior dof with a usable denominator. The augmented Lagrangian
    estimate cross-checks it and replaces it when every denominator vanishes.
    """
    p = check_exponent(p)
    config = prepare_config(config, p)
    tolerance = config.effective_tolerance
    free = np.flatnonzero(model.region_mask(region))
    integrand = PowerIntegrand(p=p)
    integrand.validate(model, seed=config.seed)
    start = feasible_point(model, spec, model.boundary_datum(g), free, tolerance)
    spec.check_growth(p, 1.0 + 2.0 * float(np.abs(start).max()), seed=config.seed)

    u = start
    multiplier = 0.0
    penalty = INITIAL_PENALTY
    feasibility = penalty**-0.1
    optimality = 1.0 / penalty
    remaining = config.max_iterations
    status = "max_iterations"
    outcome = None
    stages = config.schedule()
    for outer in range(MAX_OUTER_ITERATIONS):
        inner_tolerance = max(optimality, tolerance)
        for eps in stages if outer == 0 else stages[-1:]:
            problem = augmented_problem(
                model, integrand.with_eps(eps), spec, free, multiplier, penalty
            )
            stage_tolerance = max(inner_tolerance, eps)
            outcome = descend(problem, u, config, stage_tolerance, remaining)
            u = outcome.x
            remaining -= outcome.iterations
        constraint = spec.constraint_value(model, u)
        logger.debug(
            "Outer iteration %s: J=%.3e y=%.6g rho=%.3g residual=%.3e",
            outer,
            constraint,
            multiplier,
            penalty,
            outcome.residual,
        )
        if (
            abs(constraint) <= tolerance
            and outcome.residual <= tolerance
            and outcome.status == "converged"
        ):
            multiplier += penalty * constraint
            status = "converged"
            break
        if outcome.status == "stalled" or remaining <= 0:
            multiplier += penalty * constraint
            status = outcome.status
            break
        if abs(constraint) <= feasibility:
            multiplier += penalty * constraint
            feasibility /= penalty**0.9
            optimality /= penalty
        else:
            penalty *= PENALTY_GROWTH
            feasibility = penalty**-0.1
            optimality = 1.0 / penalty
    assert outcome is not None

    lambda_al = -multiplier / p
    quotient, quotient_dof = multiplier_quotient(model, u, p, spec, region)
    lam = lambda_al if quotient is None else quotient
    residual = constraint_residual(
        model, u, p, spec, lam, region, cap=config.test_basis_cap, seed=config.seed
    )
    diagnostics = dict(
        schedule=list(stages),
        integrand=integrand.NAME,
        constraint=spec.name,
        constraint_value=spec.constraint_value(model, u),
        penalty=penalty,
        lambda_al=lambda_al,
        lambda_quotient=quotient,
        test_basis_size=len(test_basis(model, region, config.test_basis_cap, config.seed)),
    )
    if quotient is None:
        diagnostics["multiplier_source"] = "augmented_lagrangian"
        diagnostics["degenerate_multiplier"] = (
            f"every interior denominator is below {QUOTIENT_THRESHOLD:g}"
        )
    else:
        diagnostics["multiplier_source"] = "quotient"
        diagnostics["quotient_dof"] = quotient_dof
        diagnostics["multiplier_agreement"] = abs(quotient - lambda_al)
    logger.info(
        "Constrained minimization finished with status %s, J=%.3e, lambda=%.12g",
        status,
        diagnostics["constraint_value"],
        lam,
    )
    return SolverResult(
        u=u,
        objective=integrand.evaluate(model, u),
        residual=residual,
        status=status,
        iterations=config.max_iterations - remaining,
        trace=outcome.trace,
        residual_trace=outcome.residual_trace,
        lam=lam,
        diagnostics=diagnostics,
    )
