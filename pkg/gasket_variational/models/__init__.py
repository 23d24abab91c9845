import typing

from ..data_types import ModelSpec
from ..errors import InputError
from .base import EnergyModel
from .degenerate import DegenerateModel
from .interval import IntervalModel
from .product import ProductModel
from .sierpinski import SierpinskiModel
from .superposition import SuperpositionModel

ALL_MODELS: dict[str, typing.Type[EnergyModel]] = {
    SierpinskiModel.MODEL_NAME: SierpinskiModel,
    IntervalModel.MODEL_NAME: IntervalModel,
    DegenerateModel.MODEL_NAME: DegenerateModel,
    SuperpositionModel.MODEL_NAME: SuperpositionModel,
    ProductModel.MODEL_NAME: ProductModel,
}


def build_model(spec: ModelSpec | str, **params: typing.Any) -> EnergyModel:
    if isinstance(spec, str):
        spec = ModelSpec(name=spec, params=params)
    elif params:
        spec = ModelSpec(name=spec.name, params={**spec.params, **params})
    model_cls = ALL_MODELS.get(spec.name)
    if model_cls is None:
        raise InputError(
            f"Unknown model {spec.name!r}, expected one of {sorted(ALL_MODELS)}"
        )
    return model_cls(**spec.params)
