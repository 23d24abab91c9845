import typing

import numpy as np
from scipy import sparse

from ..data_types import ModelAssembly
from ..errors import BoundedResourceError
from ..errors import InputError
from .base import EnergyModel

MAX_CELLS = 2**16


class IntervalModel(EnergyModel):
    """Classical energy on an interval, one fiber per cell"""

    MODEL_NAME = "interval"
    COORDINATE_NAMES = ("x",)
    DIFFERENCE_FIBERS = True

    def validate(self, params: dict[str, typing.Any]) -> dict[str, typing.Any]:
        cells = int(params.pop("cells", 64))
        start = float(params.pop("start", 0.0))
        stop = float(params.pop("stop", 1.0))
        if params:
            raise InputError(f"Unknown interval parameters {sorted(params)}")
        if not 1 <= cells <= MAX_CELLS:
            raise BoundedResourceError(
                f"Interval cells {cells} out of the supported range 1..{MAX_CELLS}"
            )
        if not stop > start:
            raise InputError(f"Interval ({start}, {stop}) is empty")
        return dict(cells=cells, start=start, stop=stop)

    @property
    def step(self) -> float:
        return (self.params["stop"] - self.params["start"]) / self.params["cells"]

    def assemble(self) -> ModelAssembly:
        cells = self.params["cells"]
        step = self.step
        nodes = self.params["start"] + step * np.arange(cells + 1)
        fiber_ids = np.arange(cells)
        gradient = sparse.csr_matrix(
            (
                np.concatenate([-np.ones(cells), np.ones(cells)]) / step,
                (
                    np.concatenate([fiber_ids, fiber_ids]),
                    np.concatenate([fiber_ids, fiber_ids + 1]),
                ),
            ),
            shape=(cells, cells + 1),
        )
        middle = (self.params["start"] + self.params["stop"]) / 2.0
        return ModelAssembly(
            gradient=gradient,
            dims=np.ones(cells, dtype=np.int64),
            weights=np.full(cells, step),
            coordinates=nodes,
            boundary=np.array([0, cells]),
            regions=dict(left=nodes < middle, right=nodes > middle),
        )
