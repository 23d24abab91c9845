import numpy as np

from ..data_types import ModelAssembly
from .grid import GridModel


class DegenerateModel(GridModel):
    """Square with Gamma(f) = (df/dx1)^2 + (x2 v 0)^exponent (df/dx2)^2

    Below the x1 axis diffusion only moves horizontally, so those fibers are
    one dimensional.
    """

    MODEL_NAME = "degenerate"
    EXTRA_PARAMS = dict(exponent=1.0)

    def degeneracy_weight(self, y: np.ndarray) -> np.ndarray:
        return np.maximum(y, 0.0) ** self.params["exponent"] * (y > 0)

    def assemble(self) -> ModelAssembly:
        i, j = self.cell_indices()
        centers = self.cell_centers()
        weight = self.degeneracy_weight(centers[:, 1])
        upper = centers[:, 1] > 0
        dims = np.where(upper, 2, 1).astype(np.int64)
        offsets = np.concatenate([[0], np.cumsum(dims)[:-1]])
        horizontal = self.difference_rows(i, j, axis=0, rows=offsets)
        vertical = self.difference_rows(
            i[upper],
            j[upper],
            axis=1,
            rows=offsets[upper] + 1,
            scale=np.sqrt(weight[upper]),
        )
        nodes = (self.cells + 1) ** 2
        gradient = self.stack_triplets(
            [horizontal, vertical], shape=(int(dims.sum()), nodes)
        )
        return ModelAssembly(
            gradient=gradient,
            dims=dims,
            weights=np.full(len(dims), self.step * self.step),
            coordinates=self.node_coordinates(),
            boundary=self.frame_nodes(),
            regions=self.half_regions(),
            dof_mass=self.cell_dof_mass(),
            metadata=dict(degeneracy="(x2 v 0)^exponent at cell centers"),
        )
