import functools
import logging

import numpy as np
import numpy.typing as npt
from scipy import sparse

from .data_types import CellEnergyData
from .data_types import DiscreteFunction
from .data_types import HarmonicMatrices
from .data_types import KusuokaCells
from .data_types import LevelGraph
from .data_types import Word
from .errors import BoundedResourceError
from .errors import InputError
from .utils import as_function

logger = logging.getLogger(__name__)

# resistance renormalization factor of the gasket harmonic structure
RENORMALIZATION = 5.0 / 3.0
MAX_LEVEL = 12
# corners p0, p1, p2 in the lattice basis (p1, p2)
CORNER_LATTICE = np.array([[0, 0], [1, 0], [0, 1]], dtype=np.int64)
CORNERS = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0]])
LEVEL0_LAPLACIAN = np.array(
    [[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]]
)
# cell-local corner pairs of the three cell edges
EDGE_HEADS = np.array([0, 0, 1])
EDGE_TAILS = np.array([1, 2, 2])
BASIS_TOLERANCE = 1e-12


def check_level(level: int, max_level: int = MAX_LEVEL) -> int:
    if isinstance(level, bool) or int(level) != level:
        raise InputError(f"Level must be an integer, got {level!r}")
    level = int(level)
    if not 0 <= level <= max_level:
        raise BoundedResourceError(
            f"Level {level} is out of the supported range 0..{max_level}"
        )
    return level


def word_symbols(level: int) -> npt.NDArray[np.int64]:
    """Symbols of all words of the given length, row = Word.index"""
    index = np.arange(3**level, dtype=np.int64)
    powers = 3 ** np.arange(level - 1, -1, -1, dtype=np.int64)
    return (index[:, None] // powers[None, :]) % 3


@functools.lru_cache(maxsize=16)
def _build_level_graph(level: int) -> LevelGraph:
    scale = 2**level
    ids: dict[tuple[int, int], int] = {}
    cells = np.zeros((1, 3), dtype=np.int64)
    for k in range(level + 1):
        symbols = word_symbols(k)
        weights = 2 ** (level - 1 - np.arange(k, dtype=np.int64))
        offsets = (CORNER_LATTICE[symbols] * weights[None, :, None]).sum(axis=1)
        keys = offsets[:, None, :] + CORNER_LATTICE[None, :, :] * 2 ** (level - k)
        flat = [tuple(key) for key in keys.reshape(-1, 2).tolist()]
        for key in flat:
            if key not in ids:
                ids[key] = len(ids)
        cells = np.array([ids[key] for key in flat], dtype=np.int64).reshape(-1, 3)

    lattice = np.zeros((len(ids), 2), dtype=np.float64)
    for (a, b), vertex_id in ids.items():
        lattice[vertex_id] = (a, b)
    coordinates = lattice @ CORNERS[1:] / scale
    edges = np.stack([cells[:, EDGE_HEADS], cells[:, EDGE_TAILS]], axis=-1).reshape(
        -1, 2
    )
    for array in (coordinates, edges, cells):
        array.flags.writeable = False
    logger.debug(
        "Built level %s graph with %s vertices and %s edges",
        level,
        len(coordinates),
        len(edges),
    )
    return LevelGraph(level=level, coordinates=coordinates, edges=edges, cells=cells)


def build_level_graph(level: int) -> LevelGraph:
    return _build_level_graph(check_level(level))


def graph_laplacian(graph: LevelGraph) -> sparse.csr_matrix:
    """Combinatorial Laplacian D - W of the level graph, without renormalization"""
    size = graph.vertex_count
    heads = graph.edges[:, 0]
    tails = graph.edges[:, 1]
    ones = np.ones(len(heads))
    rows = np.concatenate([heads, tails])
    cols = np.concatenate([tails, heads])
    adjacency = sparse.coo_matrix(
        (np.concatenate([ones, ones]), (rows, cols)),
        shape=(size, size),
    ).tocsr()
    degree = np.asarray(adjacency.sum(axis=1)).ravel()
    return (sparse.diags(degree) - adjacency).tocsr()


@functools.lru_cache(maxsize=1)
def harmonic_matrices() -> HarmonicMatrices:
    graph = build_level_graph(1)
    laplacian = graph_laplacian(graph).toarray()
    boundary = np.array(graph.boundary)
    interior = np.setdiff1d(np.arange(graph.vertex_count), boundary)
    interior_values = -np.linalg.solve(
        laplacian[np.ix_(interior, interior)], laplacian[np.ix_(interior, boundary)]
    )
    extension = np.zeros((graph.vertex_count, 3))
    extension[boundary] = np.eye(3)
    extension[interior] = interior_values
    matrices = [extension[graph.cells[symbol]] for symbol in range(3)]
    for matrix in matrices:
        matrix.flags.writeable = False
    return HarmonicMatrices(*matrices)


def descend_cells(values: npt.ArrayLike, level: int) -> npt.NDArray[np.float64]:
    """Cell boundary values of every level-n cell for the harmonic extension of
    corner values, which may carry extra trailing columns (shape (3, m))

    Returns an array of shape (3^n, 3, m), row = Word.index
    """
    level = check_level(level)
    values = np.asarray(values, dtype=np.float64)
    squeeze = values.ndim == 1
    current = values.reshape(1, 3, -1)
    matrices = np.stack(harmonic_matrices().matrices)
    for _ in range(level):
        children = np.einsum("sij,cjm->csim", matrices, current)
        current = children.reshape(-1, 3, current.shape[-1])
    if squeeze:
        return current[:, :, 0]
    return current


def word_matrix(word: Word) -> npt.NDArray[np.float64]:
    """A_{w_n} ... A_{w_1}, maps corner values to the corner values of K_w"""
    matrices = harmonic_matrices()
    result = np.eye(3)
    for symbol in word.symbols:
        result = matrices[symbol] @ result
    return result


def cell_matrices(level: int) -> npt.NDArray[np.float64]:
    """The products A_w for every level-n cell, shape (3^n, 3, 3)"""
    return descend_cells(np.eye(3), level)


def harmonic_extension(boundary: npt.ArrayLike, level: int) -> DiscreteFunction:
    boundary = as_function(boundary, 3, name="boundary")
    graph = build_level_graph(level)
    values = np.zeros(graph.vertex_count)
    values[graph.cells] = descend_cells(boundary, graph.level)
    return values


def graph_energy(f: npt.ArrayLike, g: npt.ArrayLike, level: int) -> float:
    graph = build_level_graph(level)
    f = as_function(f, graph.vertex_count, name="f")
    g = as_function(g, graph.vertex_count, name="g")
    heads = graph.edges[:, 0]
    tails = graph.edges[:, 1]
    total = np.dot(f[heads] - f[tails], g[heads] - g[tails])
    return float(RENORMALIZATION**graph.level * total)


def cell_energies(f: npt.ArrayLike, level: int) -> npt.NDArray[np.float64]:
    """Renormalized E_0 energy of the restriction of f to every level-n cell"""
    graph = build_level_graph(level)
    f = as_function(f, graph.vertex_count, name="f")
    local = f[graph.cells]
    diffs = local[:, EDGE_HEADS] - local[:, EDGE_TAILS]
    return RENORMALIZATION**graph.level * (diffs * diffs).sum(axis=1)


def energy_measure(f: npt.ArrayLike, level: int, word: Word) -> float:
    """Discrete energy measure of K_w for a level-n function"""
    level = check_level(level)
    if word.level > level:
        raise InputError(f"Word {word} is finer than level {level}")
    span = 3 ** (level - word.level)
    start = word.index * span
    return float(cell_energies(f, level)[start : start + span].sum())


def energy_gram(basis: npt.ArrayLike) -> npt.NDArray[np.float64]:
    basis = np.asarray(basis, dtype=np.float64)
    return basis @ LEVEL0_LAPLACIAN @ basis.T


def check_basis(h_basis: npt.ArrayLike) -> npt.NDArray[np.float64]:
    h_basis = np.asarray(h_basis, dtype=np.float64)
    if h_basis.shape != (2, 3):
        raise InputError(f"Basis has shape {h_basis.shape}, expected (2, 3)")
    defect = float(np.abs(energy_gram(h_basis) - np.eye(2)).max())
    if defect > BASIS_TOLERANCE:
        raise InputError(
            f"Basis is not energy orthonormal, Gram matrix deviates from identity by {defect:.3e}"
        )
    return h_basis


def energy_orthonormal_basis() -> npt.NDArray[np.float64]:
    """Gram-Schmidt of the boundary seeds (0,1,1) and (0,1,-1) in E_0"""
    seeds = np.array([[0.0, 1.0, 1.0], [0.0, 1.0, -1.0]])
    basis = []
    for seed in seeds:
        vector = seed.copy()
        for previous in basis:
            vector -= (vector @ LEVEL0_LAPLACIAN @ previous) * previous
        basis.append(vector / np.sqrt(vector @ LEVEL0_LAPLACIAN @ vector))
    return np.array(basis)


def cell_energy_data(
    word: Word, h_basis: npt.ArrayLike | None = None
) -> CellEnergyData:
    if h_basis is None:
        h_basis = energy_orthonormal_basis()
    h_basis = check_basis(h_basis)
    values = word_matrix(word) @ h_basis.T
    d = RENORMALIZATION**word.level * values.T @ LEVEL0_LAPLACIAN @ values
    d = (d + d.T) / 2.0
    nu = float(np.trace(d))
    return CellEnergyData(word=word, d=d, nu=nu, z=d / nu)


def kusuoka_cells(
    level: int, h_basis: npt.ArrayLike | None = None, normalize: bool = False
) -> KusuokaCells:
    level = check_level(level)
    if h_basis is None:
        h_basis = energy_orthonormal_basis()
    h_basis = check_basis(h_basis)
    values = descend_cells(h_basis.T, level)
    d = RENORMALIZATION**level * np.einsum(
        "cim,ij,cjk->cmk", values, LEVEL0_LAPLACIAN, values
    )
    d = (d + np.swapaxes(d, 1, 2)) / 2.0
    nu = np.trace(d, axis1=1, axis2=2)
    z = d / nu[:, None, None]
    if normalize:
        total = nu.sum()
        d = d / total
        nu = nu / total
    return KusuokaCells(
        level=level, boundary_values=values, d=d, nu=nu, z=z, normalized=normalize
    )


def z_eigenvalues(level: int) -> npt.NDArray[np.float64]:
    """Ascending eigenvalues of every Z_w at the given level, shape (3^n, 2)"""
    return np.linalg.eigvalsh(kusuoka_cells(level).z)
