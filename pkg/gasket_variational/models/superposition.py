import typing

import numpy as np

from ..data_types import ModelAssembly
from ..errors import InputError
from .grid import GridModel
from .grid import node_id


class SuperpositionModel(GridModel):
    """Area energy on the square plus a line energy on the segment x2 = 0

    Area fibers are two dimensional with weight dx1 dx2, line fibers carry
    weight dx1 and the one dimensional gradient df/dx1.
    """

    MODEL_NAME = "superposition"

    def validate(self, params: dict[str, typing.Any]) -> dict[str, typing.Any]:
        params = super().validate(params)
        if params["cells"] % 2:
            raise InputError(
                f"Superposition cells must be even to resolve x2 = 0, got {params['cells']}"
            )
        return params

    def assemble(self) -> ModelAssembly:
        cells = self.cells
        step = self.step
        i, j = self.cell_indices()
        area_count = cells * cells
        area_rows = 2 * np.arange(area_count)
        line_i = np.arange(cells)
        line_j = np.full(cells, cells // 2)
        line_rows = 2 * area_count + line_i
        gradient = self.stack_triplets(
            [
                self.difference_rows(i, j, axis=0, rows=area_rows),
                self.difference_rows(i, j, axis=1, rows=area_rows + 1),
                self.difference_rows(line_i, line_j, axis=0, rows=line_rows),
            ],
            shape=(2 * area_count + cells, (cells + 1) ** 2),
        )
        dof_mass = self.cell_dof_mass()
        for shift in (0, 1):
            np.add.at(dof_mass, node_id(line_i + shift, line_j, cells), step / 2.0)
        return ModelAssembly(
            gradient=gradient,
            dims=np.concatenate(
                [np.full(area_count, 2), np.ones(cells)]
            ).astype(np.int64),
            weights=np.concatenate(
                [np.full(area_count, step * step), np.full(cells, step)]
            ),
            coordinates=self.node_coordinates(),
            boundary=self.frame_nodes(),
            regions=self.half_regions(),
            dof_mass=dof_mass,
            metadata=dict(
                area_fibers=area_count, line_fibers=cells, line="x2 = 0"
            ),
        )
