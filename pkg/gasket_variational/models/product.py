import typing

import numpy as np
from scipy import sparse

from .. import sg_core
from ..data_types import ModelAssembly
from ..errors import BoundedResourceError
from ..errors import InputError
from .base import EnergyModel
from .sierpinski import cell_gradients
from .sierpinski import parse_level
from .sierpinski import parse_rank

MAX_STEPS = 512
MAX_DOFS = 2**22


class ProductModel(EnergyModel):
    """Product of the Kusuoka gasket with the time interval [0, 1]

    Dofs are the values f(v, t_j). Every (cell, corner slot, step) triple is a
    fiber of weight nu_w dt / 3 whose gradient stacks the gasket components of
    f(., t_j) on the cell and the time difference at the slot corner, so that
    the fibers of a cell and step sum to the product energy density.
    """

    MODEL_NAME = "product"
    COORDINATE_NAMES = ("x", "y", "t")

    def validate(self, params: dict[str, typing.Any]) -> dict[str, typing.Any]:
        level = parse_level(params)
        steps = int(params.pop("steps", 8))
        rank, rank_tol = parse_rank(params)
        if params:
            raise InputError(f"Unknown product parameters {sorted(params)}")
        if not 1 <= steps <= MAX_STEPS:
            raise BoundedResourceError(
                f"Product steps {steps} out of the supported range 1..{MAX_STEPS}"
            )
        vertices = 3 * (3**level + 1) // 2
        if vertices * (steps + 1) > MAX_DOFS:
            raise BoundedResourceError(
                f"Product model with {vertices * (steps + 1)} dofs exceeds {MAX_DOFS}"
            )
        return dict(level=level, steps=steps, rank=rank, rank_tol=rank_tol)

    @property
    def time_step(self) -> float:
        return 1.0 / self.params["steps"]

    @property
    def difference_fibers(self) -> bool:
        return self.params["rank"] == 2 and self.params["rank_tol"] == 0.0

    def assemble(self) -> ModelAssembly:
        steps = self.params["steps"]
        dt = self.time_step
        graph = sg_core.build_level_graph(self.params["level"])
        gradients = cell_gradients(
            self.params["level"], self.params["rank_tol"], rank=self.params["rank"]
        )
        vertex_count = graph.vertex_count
        cell_count = len(gradients.cells)

        fiber_ids = np.arange(steps * cell_count * 3)
        step, rest = np.divmod(fiber_ids, 3 * cell_count)
        cell, slot = np.divmod(rest, 3)
        dims = gradients.dims[cell] + 1
        offsets = np.concatenate([[0], np.cumsum(dims)[:-1]])

        rows, cols, values = [], [], []
        for component in (0, 1):
            selected = gradients.kept[cell, component]
            local_cells = cell[selected]
            rows.append(np.repeat(offsets[selected] + component, 3))
            shifts = vertex_count * step[selected, None]
            cols.append((gradients.cells[local_cells] + shifts).ravel())
            values.append(gradients.maps[local_cells, component].ravel())
        corner = gradients.cells[cell, slot]
        time_rows = offsets + dims - 1
        rows.extend([time_rows, time_rows])
        cols.extend([step * vertex_count + corner, (step + 1) * vertex_count + corner])
        difference = np.full(len(fiber_ids), 1.0 / dt)
        values.extend([-difference, difference])
        gradient = sparse.csr_matrix(
            (np.concatenate(values), (np.concatenate(rows), np.concatenate(cols))),
            shape=(int(dims.sum()), vertex_count * (steps + 1)),
        )

        times = dt * np.arange(steps + 1)
        coordinates = np.concatenate(
            [
                np.tile(np.asarray(graph.coordinates), (steps + 1, 1)),
                np.repeat(times, vertex_count)[:, None],
            ],
            axis=1,
        )
        corners = np.zeros(vertex_count, dtype=bool)
        corners[list(graph.boundary)] = True
        boundary = np.tile(corners, steps + 1)
        boundary[:vertex_count] = True
        boundary[-vertex_count:] = True

        sg_mass = np.zeros(vertex_count)
        np.add.at(
            sg_mass, gradients.cells.ravel(), np.repeat(gradients.weights / 3.0, 3)
        )
        time_mass = np.full(steps + 1, dt)
        time_mass[[0, -1]] = dt / 2.0
        t = coordinates[:, 2]
        return ModelAssembly(
            gradient=gradient,
            dims=dims.astype(np.int64),
            weights=gradients.weights[cell] * dt / 3.0,
            coordinates=coordinates,
            boundary=np.flatnonzero(boundary),
            regions=dict(early=t < 0.5, late=t > 0.5),
            dof_mass=np.outer(time_mass, sg_mass).ravel(),
            metadata=dict(
                measure="kusuoka x lebesgue",
                fiber_layout="(step, cell, corner slot)",
                fiber_rank=self.params["rank"],
                d_basis_dependent=True,
            ),
        )
