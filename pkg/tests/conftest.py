import pathlib

import pytest

from gasket_variational.models import build_model
from gasket_variational.models.base import EnergyModel

TEST_PACKAGE_FOLDER = pathlib.Path(__file__).parent
FIXTURE_FOLDER = TEST_PACKAGE_FOLDER / "fixtures"


@pytest.fixture
def fixtures_folder() -> pathlib.Path:
    return FIXTURE_FOLDER


@pytest.fixture
def sierpinski_model() -> EnergyModel:
    return build_model("sierpinski", level=2)


@pytest.fixture
def interval_model() -> EnergyModel:
    return build_model("interval", cells=8)


@pytest.fixture
def degenerate_model() -> EnergyModel:
    return build_model("degenerate", cells=4)


@pytest.fixture
def superposition_model() -> EnergyModel:
    return build_model("superposition", cells=4)


@pytest.fixture
def product_model() -> EnergyModel:
    return build_model("product", level=1, steps=2)
