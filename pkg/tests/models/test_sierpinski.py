import numpy as np
import pytest

from gasket_variational import sg_core
from gasket_variational.errors import InputError
from gasket_variational.models import build_model
from gasket_variational.models.sierpinski import cell_gradients
from gasket_variational.solvers import AnisotropicIntegrand


@pytest.mark.parametrize("level", [0, 1, 2, 3, 4])
def test_energy_matches_graph_energy(level: int):
    model = build_model("sierpinski", level=level)
    rng = np.random.default_rng(level)
    f = rng.standard_normal(model.dof_count)
    assert model.base_energy(f) == pytest.approx(
        sg_core.graph_energy(f, f, level), rel=1e-10
    )


@pytest.mark.parametrize("level", [1, 3])
def test_harmonic_energy_is_level_independent(level: int):
    model = build_model("sierpinski", level=level)
    h = sg_core.harmonic_extension([1.0, 0.0, 0.0], level)
    assert model.p_energy(h, 2.0) == pytest.approx(2.0, rel=1e-12)


def test_fiber_weights_are_kusuoka_masses():
    model = build_model("sierpinski", level=3)
    np.testing.assert_allclose(model.weights, sg_core.kusuoka_cells(3).nu, rtol=1e-12)
    assert model.fiber_count == 27
    assert model.dof_count == 42


def test_normalized_measure():
    model = build_model("sierpinski", level=2, normalize=True)
    assert model.total_mass == pytest.approx(1.0)
    raw = build_model("sierpinski", level=2)
    f = np.random.default_rng(0).standard_normal(raw.dof_count)
    assert model.base_energy(f) == pytest.approx(raw.base_energy(f), rel=1e-10)


def test_rank_tolerance_drops_components():
    gradients = cell_gradients(4)
    model = build_model("sierpinski", level=4, rank_tol=0.2)
    expected = 1 + (gradients.eigenvalues[:, 1] > 0.2)
    np.testing.assert_array_equal(model.dims, expected)
    assert np.any(model.dims == 1)
    np.testing.assert_array_equal(gradients.eigenvalues[:, 0] >= gradients.eigenvalues[:, 1], True)



def test_rank_one_fibers():
    model = build_model("sierpinski", level=3, rank=1)
    np.testing.assert_array_equal(model.dims, 1)
    assert model.fiber_count == 27
    assert model.metadata["fiber_rank"] == 1
    assert not model.difference_fibers
    np.testing.assert_array_equal(build_model("sierpinski", level=3).dims, 2)
    # one row per cell cannot pin the interior values
    interior = model.interior
    block = model.stiffness.toarray()[np.ix_(interior, interior)]
    assert np.linalg.matrix_rank(block) < len(interior)


def test_anisotropic_term_vanishes_on_rank_one_fibers():
    model = build_model("sierpinski", level=2, rank=1)
    f = np.random.default_rng(5).standard_normal(model.dof_count)
    assert AnisotropicIntegrand(p=3.0).evaluate(model, f) == 0.0
    assert build_model("sierpinski", level=2).difference_fibers


def test_cell_regions():
    model = build_model("sierpinski", level=2)
    mask = model.region_mask("cell:0")
    # the cell K_0 holds the level-1 vertices 3 and 4 and is cut off at the corner 0
    assert mask[3] and mask[4]
    assert not mask[0] and not mask[5]
    assert mask.sum() == 2 + 3
    with pytest.raises(InputError):
        model.region_mask("cell:012")
    with pytest.raises(InputError):
        model.region_mask("cell:7")


@pytest.mark.parametrize(
    "params",
    [
        dict(level=1.5),
        dict(level=2, rank_tol=1.0),
        dict(level=2, rank=3),
        dict(level=2, rank=True),
        dict(level=2, weights="uniform"),
    ],
)
def test_invalid_sierpinski(params: dict):
    with pytest.raises(InputError):
        build_model("sierpinski", **params)
