import dataclasses
import typing

import numpy as np
import numpy.typing as npt
from scipy import sparse

from .errors import ConfigError
from .errors import InputError
from .utils import jsonable

# real values indexed by the degrees of freedom of a model
DiscreteFunction = npt.NDArray[np.float64]


@dataclasses.dataclass(frozen=True)
class Word:
    # symbols over {0, 1, 2}, the first symbol selects the top level cell
    symbols: tuple[int, ...] = ()

    def __post_init__(self):
        symbols = tuple(int(symbol) for symbol in self.symbols)
        for symbol in symbols:
            if symbol not in (0, 1, 2):
                raise InputError(f"Word symbol {symbol} is not in {{0, 1, 2}}")
        object.__setattr__(self, "symbols", symbols)

    @classmethod
    def parse(cls, text: str) -> "Word":
        text = text.strip()
        if text in ("", "-"):
            return cls(())
        if not text.isdigit():
            raise InputError(f"Invalid word {text!r}")
        return cls(tuple(map(int, text)))

    @classmethod
    def from_index(cls, index: int, level: int) -> "Word":
        if not 0 <= index < 3**level:
            raise InputError(f"Cell index {index} out of range for level {level}")
        symbols = []
        for _ in range(level):
            index, symbol = divmod(index, 3)
            symbols.append(symbol)
        return cls(tuple(reversed(symbols)))

    @property
    def level(self) -> int:
        return len(self.symbols)

    @property
    def index(self) -> int:
        """Lexicographic ordinal among the words of the same length"""
        value = 0
        for symbol in self.symbols:
            value = value * 3 + symbol
        return value

    def children(self) -> tuple["Word", "Word", "Word"]:
        return tuple(Word(self.symbols + (i,)) for i in range(3))

    def startswith(self, prefix: "Word") -> bool:
        return self.symbols[: prefix.level] == prefix.symbols

    def __str__(self) -> str:
        return "".join(map(str, self.symbols)) or "-"


@dataclasses.dataclass(frozen=True, eq=False)
class LevelGraph:
    level: int
    # planar coordinates, one row per vertex id
    coordinates: npt.NDArray[np.float64]
    # unordered vertex pairs, three per cell in the order (0,1), (0,2), (1,2)
    edges: npt.NDArray[np.int64]
    # vertex ids of every cell, row = Word.index, column j = image of corner j
    cells: npt.NDArray[np.int64]
    # the 3 corner vertex ids
    boundary: tuple[int, int, int] = (0, 1, 2)

    @property
    def vertex_count(self) -> int:
        return len(self.coordinates)

    @property
    def edge_count(self) -> int:
        return len(self.edges)


@dataclasses.dataclass(frozen=True, eq=False)
class HarmonicMatrices:
    a0: npt.NDArray[np.float64]
    a1: npt.NDArray[np.float64]
    a2: npt.NDArray[np.float64]

    @property
    def matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.a0, self.a1, self.a2

    def __getitem__(self, symbol: int) -> np.ndarray:
        return self.matrices[symbol]


@dataclasses.dataclass(frozen=True, eq=False)
class CellEnergyData:
    word: Word
    # mutual energy measures nu_{h_i, h_j}(K_w), depends on the (h1, h2) choice
    d: npt.NDArray[np.float64]
    # Kusuoka mass of the cell, trace of d
    nu: float
    # d / trace(d)
    z: npt.NDArray[np.float64]

    @property
    def z_eigenvalues(self) -> npt.NDArray[np.float64]:
        return np.linalg.eigvalsh(self.z)


@dataclasses.dataclass(frozen=True, eq=False)
class Fiber:
    id: int
    # dimension of H_x
    dim: int
    # measure mass m_x
    weight: float
    # sparse linear map from dof values to R^dim
    gradient_map: sparse.csr_matrix
    # dim orthonormal vectors in R^dim, one per row
    frame: npt.NDArray[np.float64]


@dataclasses.dataclass(frozen=True, eq=False)
class FiberVectorField:
    # all fiber vectors concatenated
    components: npt.NDArray[np.float64]
    # dimension of every fiber
    dims: npt.NDArray[np.int64]

    def __post_init__(self):
        components = np.asarray(self.components, dtype=np.float64)
        dims = np.asarray(self.dims, dtype=np.int64)
        if components.ndim != 1 or components.size != int(dims.sum()):
            raise InputError(
                f"Field has {components.size} components, fibers need {int(dims.sum())}"
            )
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "dims", dims)

    @property
    def offsets(self) -> npt.NDArray[np.int64]:
        return np.concatenate([[0], np.cumsum(self.dims)[:-1]]).astype(np.int64)

    def vector(self, fiber_id: int) -> npt.NDArray[np.float64]:
        start = int(self.offsets[fiber_id])
        return self.components[start : start + int(self.dims[fiber_id])]

    def __add__(self, other: "FiberVectorField") -> "FiberVectorField":
        return FiberVectorField(self.components + other.components, self.dims)

    def __sub__(self, other: "FiberVectorField") -> "FiberVectorField":
        return FiberVectorField(self.components - other.components, self.dims)

    def __mul__(self, scalar: float) -> "FiberVectorField":
        return FiberVectorField(self.components * scalar, self.dims)

    __rmul__ = __mul__


@dataclasses.dataclass(frozen=True)
class ModelSpec:
    # one of the registered model names
    name: str
    # model parameters, such as level, cells or steps
    params: dict[str, typing.Any] = dataclasses.field(default_factory=dict)


@dataclasses.dataclass(frozen=True, eq=False)
class CoercivityCertificate:
    # per-fiber summable offsets a(x), or a single value for every fiber
    a: npt.NDArray[np.float64] | float
    # growth constant b(x) >= 0 per fiber, or a single value
    b: npt.NDArray[np.float64] | float
    # growth exponent
    p: float


@dataclasses.dataclass(frozen=True)
class SolverConfig:
    # energy exponent
    p: float = 2.0
    # optimality residual tolerance, defaults to 1e-8 when p = 2 and 1e-6 otherwise
    tolerance: float | None = None
    # iteration limit, summed over all continuation stages
    max_iterations: int = 100_000
    # Armijo sufficient decrease parameter
    armijo: float = 1e-4
    # step shrink factor of the backtracking line search
    backtrack: float = 0.5
    # maximum number of step shrinks before a run is declared stalled
    max_backtracks: int = 60
    # first smoothing parameter of the continuation used for p < 2
    eps0: float = 0.1
    # number of positive continuation stages before the final eps = 0 stage
    eps_stages: int = 12
    # explicit continuation schedule, overrides eps0 and eps_stages
    eps_schedule: tuple[float, ...] | None = None
    # seed for test-basis sampling and random starts
    seed: int = 0
    # cap on the number of hat functions in residual checks
    test_basis_cap: int = 500
    # compute the Poincare constant of the region before minimizing
    verify_poincare: bool = False

    def __post_init__(self):
        if not self.p > 1.0 or not np.isfinite(self.p):
            raise ConfigError(f"p must lie in (1, inf), got {self.p}", field="solver.p")
        if self.tolerance is not None and not self.tolerance > 0:
            raise ConfigError("tolerance must be positive", field="solver.tolerance")
        if self.max_iterations < 1:
            raise ConfigError(
                "max_iterations must be positive", field="solver.max_iterations"
            )
        if not 0 < self.armijo < 1:
            raise ConfigError("armijo must lie in (0, 1)", field="solver.armijo")
        if not 0 < self.backtrack < 1:
            raise ConfigError("backtrack must lie in (0, 1)", field="solver.backtrack")
        if self.eps_schedule is not None:
            schedule = tuple(float(eps) for eps in self.eps_schedule)
            if not schedule or schedule[-1] != 0.0:
                raise ConfigError(
                    "eps schedule must end with 0", field="solver.eps_schedule"
                )
            if any(b >= a for a, b in zip(schedule, schedule[1:])):
                raise ConfigError(
                    "eps schedule must be strictly decreasing",
                    field="solver.eps_schedule",
                )
            object.__setattr__(self, "eps_schedule", schedule)
        elif not self.eps0 > 0:
            raise ConfigError("eps0 must be positive", field="solver.eps0")

    @property
    def effective_tolerance(self) -> float:
        if self.tolerance is not None:
            return self.tolerance
        return 1e-8 if self.p == 2.0 else 1e-6

    def schedule(self) -> tuple[float, ...]:
        """Smoothing parameters of the continuation, always ending with 0"""
        if self.eps_schedule is not None:
            return self.eps_schedule
        if self.p >= 2.0:
            return (0.0,)
        return tuple(self.eps0 * 10 ** (-k / 2) for k in range(self.eps_stages)) + (
            0.0,
        )


@dataclasses.dataclass(frozen=True, eq=False)
class SolverResult:
    # minimizer
    u: DiscreteFunction
    # objective value at u
    objective: float
    # optimality residual at u
    residual: float
    # "converged", "max_iterations" or "stalled"
    status: str
    # total number of descent iterations
    iterations: int
    # objective after every iteration, non-increasing
    trace: tuple[float, ...] = ()
    # residual after every iteration
    residual_trace: tuple[float, ...] = ()
    # Lagrange multiplier of an integral constraint
    lam: float | None = None
    # free-form numbers and messages, such as multiplier cross-checks
    diagnostics: dict[str, typing.Any] = dataclasses.field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_dict(self) -> dict[str, typing.Any]:
        return jsonable(
            dict(
                u=self.u,
                objective=self.objective,
                residual=self.residual,
                status=self.status,
                iterations=self.iterations,
                trace=self.trace,
                residual_trace=self.residual_trace,
                lam=self.lam,
                diagnostics=self.diagnostics,
            )
        )


@dataclasses.dataclass(frozen=True)
class CheckReport:
    name: str
    samples: int
    # signed, positive means satisfied
    worst_margin: float
    passed: bool
    seed: int
    tolerance: float = 1e-12
    # such as "exact" or "empirical witness"
    label: str = "exact"
    # per-parameter rows, such as the (eps, delta) table of the Clarkson check
    table: tuple[dict[str, typing.Any], ...] = ()

    def to_dict(self) -> dict[str, typing.Any]:
        return jsonable(dataclasses.asdict(self))


@dataclasses.dataclass(frozen=True, eq=False)
class KusuokaCells:
    level: int
    # boundary values of h1, h2 restricted to every cell, shape (3^n, 3, 2)
    boundary_values: npt.NDArray[np.float64]
    # mutual energy measures per cell, shape (3^n, 2, 2), basis dependent
    d: npt.NDArray[np.float64]
    # Kusuoka mass per cell
    nu: npt.NDArray[np.float64]
    # unit trace normalization of d
    z: npt.NDArray[np.float64]
    # whether nu was rescaled to a probability measure
    normalized: bool = False

    def cell(self, word: Word) -> CellEnergyData:
        index = word.index
        return CellEnergyData(
            word=word, d=self.d[index], nu=float(self.nu[index]), z=self.z[index]
        )


@dataclasses.dataclass(frozen=True, eq=False)
class ModelAssembly:
    # stacked gradient maps of all fibers, shape (sum of dims, dof count)
    gradient: sparse.csr_matrix
    # dimension of every fiber
    dims: npt.NDArray[np.int64]
    # measure mass of every fiber
    weights: npt.NDArray[np.float64]
    # dof coordinates, one row per dof
    coordinates: npt.NDArray[np.float64]
    # ids of the Dirichlet dofs
    boundary: npt.NDArray[np.int64]
    # named boolean masks over the dofs, restricted to non-boundary dofs on use
    regions: dict[str, npt.NDArray[np.bool_]] = dataclasses.field(default_factory=dict)
    # lumped dof masses, defaults to splitting every fiber weight over its support
    dof_mass: npt.NDArray[np.float64] | None = None
    # non default frames keyed by fiber id
    frames: dict[int, npt.NDArray[np.float64]] = dataclasses.field(
        default_factory=dict
    )
    # extra export metadata
    metadata: dict[str, typing.Any] = dataclasses.field(default_factory=dict)
