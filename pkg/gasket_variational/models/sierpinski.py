import dataclasses
import typing

import numpy as np
import numpy.typing as npt
from scipy import sparse

from .. import sg_core
from ..data_types import ModelAssembly
from ..data_types import Word
from ..errors import InputError
from .base import EnergyModel

MAX_LEVEL = 9


@dataclasses.dataclass(frozen=True, eq=False)
class CellGradients:
    # vertex ids of every cell
    cells: npt.NDArray[np.int64]
    # local gradient maps from cell corner values, shape (3^n, 2, 3)
    maps: npt.NDArray[np.float64]
    # which of the two Z eigencomponents every cell keeps, the first always
    kept: npt.NDArray[np.bool_]
    # measure mass of every cell
    weights: npt.NDArray[np.float64]
    # Z eigenvalues of every cell, descending
    eigenvalues: npt.NDArray[np.float64]

    @property
    def dims(self) -> npt.NDArray[np.int64]:
        return self.kept.sum(axis=1).astype(np.int64)


FIBER_RANKS = (1, 2)


def parse_level(params: dict[str, typing.Any]) -> int:
    level = params.pop("level", 3)
    if isinstance(level, bool) or int(level) != float(level):
        raise InputError(f"Level must be an integer, got {level!r}")
    return sg_core.check_level(int(level), max_level=MAX_LEVEL)


def parse_rank(params: dict[str, typing.Any]) -> tuple[int, float]:
    """Fiber rank and the eigenvalue tolerance of the second Z component"""
    rank = params.pop("rank", 2)
    rank_tol = float(params.pop("rank_tol", 0.0))
    if isinstance(rank, bool) or float(rank) not in FIBER_RANKS:
        raise InputError(f"rank must be one of {list(FIBER_RANKS)}, got {rank!r}")
    if not 0.0 <= rank_tol < 1.0:
        raise InputError(f"rank_tol must lie in [0, 1), got {rank_tol}")
    return int(float(rank)), rank_tol


def cell_gradients(
    level: int, rank_tol: float = 0.0, normalize: bool = False, rank: int = 2
) -> CellGradients:
    """Gradient maps of the Kusuoka cell fibers

    A cell restriction b equals a constant plus H a, H = A_w [h1 h2]. Its
    renormalized energy is a^T D_w a = nu_w a^T Z_w a, so with Z_w = E L E^T the
    components sqrt(L) E^T a reproduce the cell energy density.
    rank = 1 keeps the leading component only, the rank one Z limit.
    """
    graph = sg_core.build_level_graph(level)
    kusuoka = sg_core.kusuoka_cells(level, normalize=normalize)
    values = kusuoka.boundary_values
    laplacian = sg_core.LEVEL0_LAPLACIAN
    gram = np.einsum("cim,ij,cjk->cmk", values, laplacian, values)
    projection = np.linalg.solve(gram, np.einsum("cim,ij->cmj", values, laplacian))
    eigenvalues, eigenvectors = np.linalg.eigh(kusuoka.z)
    eigenvalues = eigenvalues[:, ::-1]
    eigenvectors = eigenvectors[:, :, ::-1]
    # sign convention: the largest entry of every eigenvector is positive
    largest = np.take_along_axis(
        eigenvectors, np.abs(eigenvectors).argmax(axis=1)[:, None, :], axis=1
    )
    eigenvectors = eigenvectors * np.where(largest < 0, -1.0, 1.0)
    # raw energy over mass, a no-op unless the measure is normalized
    density_scale = (
        sg_core.RENORMALIZATION**level * np.trace(gram, axis1=1, axis2=2) / kusuoka.nu
    )
    maps = np.einsum(
        "ck,cmk,cmj->ckj",
        np.sqrt(np.clip(eigenvalues, 0.0, None) * density_scale[:, None]),
        eigenvectors,
        projection,
    )
    kept = eigenvalues > rank_tol
    kept[:, 0] = True
    if rank == 1:
        kept[:, 1] = False
    return CellGradients(
        cells=np.asarray(graph.cells),
        maps=maps,
        kept=kept,
        weights=kusuoka.nu,
        eigenvalues=eigenvalues,
    )


class SierpinskiModel(EnergyModel):
    """Sierpinski gasket with Kusuoka measure, one fiber per level-n cell

    Fibers keep both Z eigencomponents by default, which reproduces the graph
    energy. rank = 1 keeps the leading one, its interior stiffness is singular.
    """

    MODEL_NAME = "sierpinski"
    COORDINATE_NAMES = ("x", "y")

    def validate(self, params: dict[str, typing.Any]) -> dict[str, typing.Any]:
        level = parse_level(params)
        rank, rank_tol = parse_rank(params)
        normalize = bool(params.pop("normalize", False))
        if params:
            raise InputError(f"Unknown sierpinski parameters {sorted(params)}")
        return dict(level=level, rank=rank, rank_tol=rank_tol, normalize=normalize)

    @property
    def level(self) -> int:
        return self.params["level"]

    @property
    def graph(self):
        return sg_core.build_level_graph(self.level)

    @property
    def difference_fibers(self) -> bool:
        return self.params["rank"] == 2 and self.params["rank_tol"] == 0.0

    def assemble(self) -> ModelAssembly:
        gradients = cell_gradients(
            self.level,
            self.params["rank_tol"],
            self.params["normalize"],
            rank=self.params["rank"],
        )
        cell_ids, components = np.nonzero(gradients.kept)
        rows = np.repeat(np.arange(len(cell_ids)), 3)
        cols = gradients.cells[cell_ids].ravel()
        values = gradients.maps[cell_ids, components].ravel()
        graph = self.graph
        gradient = sparse.csr_matrix(
            (values, (rows, cols)), shape=(len(cell_ids), graph.vertex_count)
        )
        return ModelAssembly(
            gradient=gradient,
            dims=gradients.dims,
            weights=gradients.weights,
            coordinates=np.asarray(graph.coordinates),
            boundary=np.array(graph.boundary),
            metadata=dict(
                measure="kusuoka",
                normalized=self.params["normalize"],
                # raw D_w matrices depend on the choice of (h1, h2)
                d_basis_dependent=True,
                fiber_frame="Z eigenvectors, descending eigenvalues",
                fiber_rank=self.params["rank"],
            ),
        )

    def named_region(self, name: str) -> npt.NDArray[np.bool_] | None:
        if not name.startswith("cell:"):
            return None
        word = Word.parse(name[len("cell:") :])
        if word.level > self.level:
            raise InputError(f"Word {word} is finer than level {self.level}")
        span = 3 ** (self.level - word.level)
        cells = self.graph.cells[word.index * span : (word.index + 1) * span]
        mask = np.zeros(self.dof_count, dtype=bool)
        mask[cells.ravel()] = True
        return mask
