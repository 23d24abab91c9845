import numpy as np
import pytest
from scipy import sparse

from gasket_variational.models.base import EnergyModel
from gasket_variational.solvers import solve_anisotropic

from .oracles import dirichlet_oracle


def anisotropic_matrix(model: EnergyModel) -> np.ndarray:
    """Matrix of sum over fibers of dim >= 2 of m_x (|du|^2 + <du, eta_x>^2)"""
    active = (model.dims >= 2).astype(np.float64)
    rows = sparse.diags(model.row_weights * active[model.row_fiber])
    gradient = model.gradient_matrix
    projection = (
        model.aggregation @ sparse.diags(model.first_frame_components()) @ gradient
    )
    matrix = gradient.T @ rows @ gradient + projection.T @ sparse.diags(
        model.weights * active
    ) @ projection
    return matrix.toarray()


def test_interval_has_no_active_fibers(interval_model: EnergyModel):
    g = interval_model.boundary_datum([1.0, 3.0])
    result = solve_anisotropic(interval_model, 3.0, g)
    assert result.converged
    assert result.objective == 0.0
    np.testing.assert_array_equal(result.u, g)
    assert result.diagnostics["active_fibers"] == 0


@pytest.mark.parametrize(
    "model",
    [
        pytest.lazy_fixture("sierpinski_model"),
        pytest.lazy_fixture("superposition_model"),
    ],
)
def test_quadratic_matches_linear_solve(model: EnergyModel):
    g = model.boundary_datum(
        np.random.default_rng(0).uniform(-1.0, 1.0, size=len(model.boundary))
    )
    result = solve_anisotropic(model, 2.0, g)
    assert result.converged
    np.testing.assert_allclose(
        result.u, dirichlet_oracle(model, anisotropic_matrix(model), g), atol=1e-8
    )
    assert result.diagnostics["anisotropic_excess"] >= -1e-12


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_time_coordinate_on_product(product_model: EnergyModel, p: float):
    t = product_model.coordinates[:, 2]
    result = solve_anisotropic(product_model, p, t)
    assert result.converged
    np.testing.assert_allclose(result.u, t, atol=1e-7)
    assert result.objective == pytest.approx(2.0, rel=1e-8)
    assert result.objective == pytest.approx(
        result.diagnostics["isotropic_energy"], rel=1e-8
    )
    assert abs(result.diagnostics["anisotropic_excess"]) <= 1e-8


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_vertical_coordinate_on_superposition(
    superposition_model: EnergyModel, p: float
):
    y = superposition_model.coordinates[:, 1]
    result = solve_anisotropic(superposition_model, p, y)
    assert result.converged
    np.testing.assert_allclose(result.u, y, atol=1e-7)
    assert result.objective == pytest.approx(4.0, rel=1e-8)
    assert result.objective == pytest.approx(
        result.diagnostics["isotropic_energy"], rel=1e-8
    )
