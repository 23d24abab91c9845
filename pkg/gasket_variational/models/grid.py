import typing

import numpy as np
import numpy.typing as npt
from scipy import sparse

from ..errors import BoundedResourceError
from ..errors import InputError
from .base import EnergyModel

MAX_CELLS = 512


def node_id(i: npt.ArrayLike, j: npt.ArrayLike, cells: int) -> npt.NDArray[np.int64]:
    return np.asarray(j, dtype=np.int64) * (cells + 1) + np.asarray(i, dtype=np.int64)


class GridModel(EnergyModel):
    """Node grid on the square (-1, 1)^2 with one fiber per cell

    Frame nodes carry the Dirichlet data. Cell gradients are forward
    differences from the lower left node of the cell.
    """

    COORDINATE_NAMES = ("x", "y")
    DIFFERENCE_FIBERS = True
    EXTRA_PARAMS: dict[str, typing.Any] = {}

    def validate(self, params: dict[str, typing.Any]) -> dict[str, typing.Any]:
        cells = int(params.pop("cells", 16))
        extra = {
            key: type(default)(params.pop(key, default))
            for key, default in self.EXTRA_PARAMS.items()
        }
        if params:
            raise InputError(f"Unknown {self.MODEL_NAME} parameters {sorted(params)}")
        if not 2 <= cells <= MAX_CELLS:
            raise BoundedResourceError(
                f"Grid cells {cells} out of the supported range 2..{MAX_CELLS}"
            )
        return dict(cells=cells, **extra)

    @property
    def cells(self) -> int:
        return self.params["cells"]

    @property
    def step(self) -> float:
        return 2.0 / self.cells

    def node_coordinates(self) -> npt.NDArray[np.float64]:
        axis = -1.0 + self.step * np.arange(self.cells + 1)
        x, y = np.meshgrid(axis, axis)
        return np.stack([x.ravel(), y.ravel()], axis=1)

    def cell_centers(self) -> npt.NDArray[np.float64]:
        axis = -1.0 + self.step * (np.arange(self.cells) + 0.5)
        x, y = np.meshgrid(axis, axis)
        return np.stack([x.ravel(), y.ravel()], axis=1)

    def cell_indices(self) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.int64]]:
        """(i, j) of every cell, cell id = j * cells + i"""
        j, i = np.divmod(np.arange(self.cells * self.cells), self.cells)
        return i, j

    def frame_nodes(self) -> npt.NDArray[np.int64]:
        coordinates = self.node_coordinates()
        on_frame = np.isclose(np.abs(coordinates), 1.0).any(axis=1)
        return np.flatnonzero(on_frame)

    def difference_rows(
        self,
        i: npt.NDArray[np.int64],
        j: npt.NDArray[np.int64],
        axis: int,
        rows: npt.NDArray[np.int64],
        scale: npt.NDArray[np.float64] | float = 1.0,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """COO triplets of scale * forward difference along axis from node (i, j)"""
        tail = node_id(i, j, self.cells)
        head = node_id(i + (axis == 0), j + (axis == 1), self.cells)
        values = np.broadcast_to(np.asarray(scale, dtype=np.float64), rows.shape)
        values = values / self.step
        return (
            np.concatenate([rows, rows]),
            np.concatenate([tail, head]),
            np.concatenate([-values, values]),
        )

    def cell_dof_mass(self) -> npt.NDArray[np.float64]:
        """Every cell hands a quarter of its area to each of its corners"""
        i, j = self.cell_indices()
        mass = np.zeros((self.cells + 1) ** 2)
        quarter = self.step * self.step / 4.0
        for di, dj in ((0, 0), (1, 0), (0, 1), (1, 1)):
            np.add.at(mass, node_id(i + di, j + dj, self.cells), quarter)
        return mass

    def half_regions(self) -> dict[str, npt.NDArray[np.bool_]]:
        x, y = self.node_coordinates().T
        return dict(upper=y > 0, lower=y < 0, left=x < 0, right=x > 0)

    @staticmethod
    def stack_triplets(
        triplets: list[tuple[np.ndarray, np.ndarray, np.ndarray]], shape: tuple[int, int]
    ) -> sparse.csr_matrix:
        rows = np.concatenate([t[0] for t in triplets])
        cols = np.concatenate([t[1] for t in triplets])
        values = np.concatenate([t[2] for t in triplets])
        return sparse.csr_matrix((values, (rows, cols)), shape=shape)
