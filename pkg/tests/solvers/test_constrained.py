import numpy as np
import pytest

from gasket_variational.data_types import SolverConfig
from gasket_variational.errors import InfeasibleProblemError
from gasket_variational.errors import InvalidIntegrandError
from gasket_variational.models import build_model
from gasket_variational.models.base import EnergyModel
from gasket_variational.solvers import ConstraintSpec
from gasket_variational.solvers import constraint_residual
from gasket_variational.solvers import cubic
from gasket_variational.solvers import linear
from gasket_variational.solvers import multiplier_quotient
from gasket_variational.solvers import solve_constrained_poisson
from gasket_variational.solvers import solve_p_dirichlet
from gasket_variational.solvers.constrained import feasible_point


def bordered_oracle(
    model: EnergyModel, g: np.ndarray, offset: float
) -> tuple[np.ndarray, float]:
    """Minimizer of the base energy with sum_i mu_i (u_i - offset) = 0 and its multiplier"""
    matrix = model.stiffness.toarray()
    interior = model.interior
    boundary = model.boundary
    mass = model.dof_mass
    size = len(interior)
    system = np.zeros((size + 1, size + 1))
    system[:size, :size] = matrix[np.ix_(interior, interior)]
    system[:size, size] = -mass[interior]
    system[size, :size] = mass[interior]
    rhs = np.zeros(size + 1)
    rhs[:size] = -matrix[np.ix_(interior, boundary)] @ g[boundary]
    rhs[size] = offset * model.total_mass - mass[boundary] @ g[boundary]
    solution = np.linalg.solve(system, rhs)
    u = g.copy()
    u[interior] = solution[:size]
    return u, float(solution[size])


def test_linear_constraint_helpers(sierpinski_model: EnergyModel):
    spec = linear(0.25)
    w = np.full(sierpinski_model.dof_count, 1.25)
    assert spec.constraint_value(sierpinski_model, w) == pytest.approx(2.0)
    np.testing.assert_allclose(
        spec.constraint_gradient(sierpinski_model, w), sierpinski_model.dof_mass
    )
    spec.check_growth(1.5, 100.0)



def test_quotient_uses_first_interior_dof(sierpinski_model: EnergyModel):
    model = sierpinski_model
    u = model.sample(lambda x, y: x * y)
    quotient, dof = multiplier_quotient(model, u, 3.0, linear())
    assert dof == model.interior[0]
    expected = model.functional_gradient(u, 3.0)[dof] / 3.0 / model.dof_mass[dof]
    assert quotient == pytest.approx(expected)


def test_zero_solution(sierpinski_model: EnergyModel):
    result = solve_constrained_poisson(sierpinski_model, 3.0, linear())
    assert result.converged
    np.testing.assert_allclose(result.u, 0.0, atol=1e-12)
    assert result.lam == 0.0
    assert result.objective == 0.0
    assert result.diagnostics["lambda_quotient"] == 0.0


@pytest.mark.parametrize(
    "model",
    [
        pytest.lazy_fixture("sierpinski_model"),
        pytest.lazy_fixture("interval_model"),
        pytest.lazy_fixture("degenerate_model"),
        pytest.lazy_fixture("superposition_model"),
        pytest.lazy_fixture("product_model"),
    ],
)
def test_quadratic_matches_bordered_system(model: EnergyModel):
    g = model.boundary_datum(
        np.random.default_rng(1).uniform(-1.0, 1.0, size=len(model.boundary))
    )
    result = solve_constrained_poisson(
        model, 2.0, linear(0.3), g, config=SolverConfig(tolerance=1e-10)
    )
    assert result.converged
    expected, lam = bordered_oracle(model, g, 0.3)
    np.testing.assert_allclose(result.u, expected, atol=1e-7)
    assert result.lam == pytest.approx(lam, rel=1e-6, abs=1e-8)
    assert abs(result.diagnostics["constraint_value"]) <= 1e-10
    assert result.diagnostics["multiplier_source"] == "quotient"
    assert result.lam == result.diagnostics["lambda_quotient"]
    assert result.diagnostics["multiplier_agreement"] <= 1e-6
    assert result.residual <= 1e-8


@pytest.mark.parametrize(
    "model",
    [
        pytest.lazy_fixture("sierpinski_model"),
        pytest.lazy_fixture("interval_model"),
        pytest.lazy_fixture("degenerate_model"),
        pytest.lazy_fixture("superposition_model"),
        pytest.lazy_fixture("product_model"),
    ],
)
def test_mean_zero_with_random_datum(model: EnergyModel):
    g = model.boundary_datum(
        np.random.default_rng(7).uniform(-1.0, 1.0, size=len(model.boundary))
    )
    assert linear().constraint_value(model, g) != 0.0
    free = model.interior
    start = feasible_point(model, linear(), g, free, 1e-12)
    assert linear().constraint_value(model, start) == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_array_equal(start[model.boundary], g[model.boundary])

    result = solve_constrained_poisson(
        model, 2.0, linear(), g, config=SolverConfig(tolerance=1e-10)
    )
    assert result.converged
    expected, lam = bordered_oracle(model, g, 0.0)
    np.testing.assert_allclose(result.u, expected, atol=1e-7)
    assert result.lam == pytest.approx(lam, rel=1e-6, abs=1e-8)


def test_cubic_constraint(sierpinski_model: EnergyModel):
    model = sierpinski_model
    spec = cubic(0.5, growth=10.0)
    config = SolverConfig(p=3.0, tolerance=1e-9, test_basis_cap=20)
    result = solve_constrained_poisson(model, 3.0, spec, [1.0, 0.5, -0.2], config=config)
    assert result.converged
    assert abs(spec.constraint_value(model, result.u)) <= 1e-8
    assert result.residual <= 1e-6
    assert result.diagnostics["test_basis_size"] == len(model.interior)
    assert constraint_residual(
        model, result.u, 3.0, spec, result.lam, cap=20
    ) == pytest.approx(result.residual)
    quotient, dof = multiplier_quotient(model, result.u, 3.0, spec)
    assert dof == result.diagnostics["quotient_dof"]
    assert quotient == result.diagnostics["lambda_quotient"]
    assert result.lam == quotient
    assert result.diagnostics["multiplier_agreement"] == pytest.approx(
        abs(quotient - result.diagnostics["lambda_al"])
    )


def test_infeasible_constraint(interval_model: EnergyModel):
    spec = ConstraintSpec(
        value=lambda z: np.asarray(z) ** 2 + 1.0,
        derivative=lambda z: 2.0 * np.asarray(z),
        growth=2.0,
        name="positive",
    )
    with pytest.raises(InfeasibleProblemError, match="No root"):
        solve_constrained_poisson(interval_model, 2.0, spec)


def test_degenerate_constraint(sierpinski_model: EnergyModel):
    spec = ConstraintSpec(
        value=np.zeros_like,
        derivative=np.zeros_like,
        growth=1.0,
        name="zero",
    )
    g = [1.0, 0.0, -1.0]
    result = solve_constrained_poisson(sierpinski_model, 3.0, spec, g)
    assert result.converged
    assert result.lam == 0.0
    assert result.diagnostics["lambda_quotient"] is None
    assert "degenerate_multiplier" in result.diagnostics
    assert result.diagnostics["multiplier_source"] == "augmented_lagrangian"
    assert result.lam == result.diagnostics["lambda_al"]
    unconstrained = solve_p_dirichlet(sierpinski_model, 3.0, g)
    np.testing.assert_allclose(result.u, unconstrained.u, atol=1e-4)


def test_growth_violation(sierpinski_model: EnergyModel):
    with pytest.raises(InvalidIntegrandError, match="growth"):
        solve_constrained_poisson(sierpinski_model, 2.0, cubic(0.0), [1.0, 1.0, 1.0])


def test_cubic_default_growth():
    spec = cubic(0.5)
    assert spec.growth == 1.5
    spec.check_growth(3.0, 50.0)
    with pytest.raises(InvalidIntegrandError):
        spec.check_growth(2.0, 50.0)


def test_feasible_start_on_region():
    model = build_model("sierpinski", level=3)
    result = solve_constrained_poisson(
        model,
        2.0,
        linear(0.1),
        0.0,
        region="cell:2",
        config=SolverConfig(tolerance=1e-10),
    )
    assert result.converged
    mask = model.region_mask("cell:2")
    np.testing.assert_array_equal(result.u[~mask], 0.0)
    assert linear(0.1).constraint_value(model, result.u) == pytest.approx(0.0, abs=1e-10)
