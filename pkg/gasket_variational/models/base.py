import functools
import logging
import typing

import numpy as np
import numpy.typing as npt
from scipy import sparse

from ..data_types import DiscreteFunction
from ..data_types import Fiber
from ..data_types import FiberVectorField
from ..data_types import ModelAssembly
from ..data_types import ModelSpec
from ..errors import InputError
from ..utils import as_function
from ..utils import check_exponent
from ..utils import fiber_norms
from ..utils import safe_power
from ..utils import segment_sums

logger = logging.getLogger(__name__)

INVARIANT_TOLERANCE = 1e-12
RegionLike = str | npt.ArrayLike | None


def power_weights(
    squared_norms: npt.NDArray[np.float64], p: float, eps: float = 0.0
) -> npt.NDArray[np.float64]:
    """(|v|^2 + eps^2)^((p - 2) / 2), fibers with a zero base contribute zero"""
    if p == 2.0:
        return np.ones_like(squared_norms)
    return safe_power(squared_norms + eps * eps, (p - 2.0) / 2.0)


class EnergyModel:
    """A finite fiber bundle: every fiber carries a dimension, a measure weight
    and a linear gradient map from the dof values
    """

    MODEL_NAME: str = ""
    COORDINATE_NAMES: tuple[str, ...] = ("x",)
    # Gamma of every fiber is a weighted sum of squared dof differences
    DIFFERENCE_FIBERS: bool = False

    def __init__(self, **params: typing.Any):
        self.params = self.validate(dict(params))
        assembly = self.assemble()
        self.gradient_matrix = sparse.csr_matrix(assembly.gradient, dtype=np.float64)
        self.gradient_matrix.eliminate_zeros()
        self.dims = np.asarray(assembly.dims, dtype=np.int64)
        self.weights = np.asarray(assembly.weights, dtype=np.float64)
        self.coordinates = np.asarray(assembly.coordinates, dtype=np.float64)
        if self.coordinates.ndim == 1:
            self.coordinates = self.coordinates[:, None]
        self.metadata = dict(assembly.metadata)
        self._frames = dict(assembly.frames)

        self.offsets = np.concatenate([[0], np.cumsum(self.dims)[:-1]]).astype(np.int64)
        self.row_fiber = np.repeat(np.arange(self.fiber_count), self.dims)
        self.row_weights = self.weights[self.row_fiber]
        # sums rows of a fiber, shape (fiber count, row count)
        self.aggregation = sparse.csr_matrix(
            (
                np.ones(len(self.row_fiber)),
                (self.row_fiber, np.arange(len(self.row_fiber))),
            ),
            shape=(self.fiber_count, len(self.row_fiber)),
        )
        support = self.aggregation @ abs(self.gradient_matrix)
        support.eliminate_zeros()
        support.data = np.ones_like(support.data)
        self.support = support.tocsr()
        self.support_counts = np.asarray(self.support.sum(axis=1)).ravel()

        self.boundary_mask = np.zeros(self.dof_count, dtype=bool)
        self.boundary_mask[np.asarray(assembly.boundary, dtype=np.int64)] = True
        self.interior_mask = ~self.boundary_mask
        self.regions = {
            name: np.asarray(mask, dtype=bool) & self.interior_mask
            for name, mask in assembly.regions.items()
        }
        if assembly.dof_mass is None:
            self.dof_mass = self.support.T @ (self.weights / self.support_counts)
        else:
            self.dof_mass = np.asarray(assembly.dof_mass, dtype=np.float64)
        self._check_invariants()
        logger.debug(
            "Built %s model with %s dofs and %s fibers",
            self.MODEL_NAME,
            self.dof_count,
            self.fiber_count,
        )

    def validate(self, params: dict[str, typing.Any]) -> dict[str, typing.Any]:
        raise NotImplementedError()

    def assemble(self) -> ModelAssembly:
        raise NotImplementedError()

    def named_region(self, name: str) -> npt.NDArray[np.bool_] | None:
        """Regions computed from their name, such as SG cells"""
        return None

    def _check_invariants(self):
        if np.any(self.weights <= 0):
            raise InputError(f"{self.MODEL_NAME} model has non-positive fiber weights")
        if np.any(self.dims < 1):
            raise InputError(f"{self.MODEL_NAME} model has empty fibers")
        constants = self.gradient_matrix @ np.ones(self.dof_count)
        scale = max(1.0, float(np.abs(self.gradient_matrix.data).max(initial=0.0)))
        if np.abs(constants).max(initial=0.0) > INVARIANT_TOLERANCE * scale:
            raise InputError(
                f"{self.MODEL_NAME} model gradient does not annihilate constants"
            )
        referenced = np.asarray(abs(self.gradient_matrix).sum(axis=0)).ravel() > 0
        if not np.all(referenced | self.boundary_mask):
            raise InputError(f"{self.MODEL_NAME} model has unreferenced dofs")

    @property
    def name(self) -> str:
        return self.MODEL_NAME

    @property
    def difference_fibers(self) -> bool:
        """Normal contractions lower Gamma on every fiber, hence E^(p) for every p"""
        return self.DIFFERENCE_FIBERS

    @property
    def spec(self) -> ModelSpec:
        return ModelSpec(name=self.MODEL_NAME, params=dict(self.params))

    @property
    def dof_count(self) -> int:
        return self.gradient_matrix.shape[1]

    @property
    def fiber_count(self) -> int:
        return len(self.dims)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def boundary(self) -> npt.NDArray[np.int64]:
        return np.flatnonzero(self.boundary_mask)

    @property
    def interior(self) -> npt.NDArray[np.int64]:
        return np.flatnonzero(self.interior_mask)

    def frame(self, fiber_id: int) -> npt.NDArray[np.float64]:
        self._check_fiber(fiber_id)
        frame = self._frames.get(fiber_id)
        if frame is None:
            return np.eye(int(self.dims[fiber_id]))
        return frame

    def first_frame_components(self) -> npt.NDArray[np.float64]:
        """The first frame vector of every fiber, concatenated like a field"""
        components = np.zeros(len(self.row_fiber))
        components[self.offsets] = 1.0
        for fiber_id, frame in self._frames.items():
            start = self.offsets[fiber_id]
            components[start : start + self.dims[fiber_id]] = frame[0]
        return components

    def _check_fiber(self, fiber_id: int):
        if not 0 <= fiber_id < self.fiber_count:
            raise InputError(
                f"Fiber id {fiber_id} out of range for {self.fiber_count} fibers"
            )

    def fiber(self, fiber_id: int) -> Fiber:
        self._check_fiber(fiber_id)
        start = int(self.offsets[fiber_id])
        stop = start + int(self.dims[fiber_id])
        return Fiber(
            id=fiber_id,
            dim=int(self.dims[fiber_id]),
            weight=float(self.weights[fiber_id]),
            gradient_map=self.gradient_matrix[start:stop],
            frame=self.frame(fiber_id),
        )

    @property
    def fibers(self) -> list[Fiber]:
        return [self.fiber(fiber_id) for fiber_id in range(self.fiber_count)]

    def function(self, values: npt.ArrayLike, name: str = "f") -> DiscreteFunction:
        return as_function(values, self.dof_count, name=name)

    def sample(self, func: typing.Callable[..., npt.ArrayLike]) -> DiscreteFunction:
        """Evaluate a function of the dof coordinates"""
        values = np.broadcast_to(
            np.asarray(func(*self.coordinates.T), dtype=np.float64), (self.dof_count,)
        )
        return self.function(values.copy())

    def field(self, components: npt.ArrayLike) -> FiberVectorField:
        return FiberVectorField(np.asarray(components, dtype=np.float64), self.dims)

    def _check_field(self, v: FiberVectorField) -> FiberVectorField:
        if v.components.shape != (len(self.row_fiber),) or not np.array_equal(
            v.dims, self.dims
        ):
            raise InputError("Vector field does not match the model fibers")
        return v

    # gradients and carre du champ

    def gradient(self, f: npt.ArrayLike) -> FiberVectorField:
        return FiberVectorField(self.gradient_matrix @ self.function(f), self.dims)

    def fiber_gradient(self, f: npt.ArrayLike, fiber_id: int) -> npt.NDArray[np.float64]:
        return self.fiber(fiber_id).gradient_map @ self.function(f)

    def carre(
        self, f: npt.ArrayLike, g: npt.ArrayLike | None = None
    ) -> npt.NDArray[np.float64]:
        """Per-fiber carre du champ densities Gamma(f, g)"""
        df = self.gradient_matrix @ self.function(f)
        dg = df if g is None else self.gradient_matrix @ self.function(g, name="g")
        return segment_sums(df * dg, self.offsets)

    def carre_density(self, f: npt.ArrayLike, fiber_id: int) -> float:
        gradient = self.fiber_gradient(f, fiber_id)
        return float(gradient @ gradient)

    # p-energies

    def p_energy(self, f: npt.ArrayLike, p: float, eps: float = 0.0) -> float:
        p = check_exponent(p)
        squared = self.carre(f)
        if eps == 0.0:
            densities = safe_power(squared, p / 2.0)
        else:
            densities = (squared + eps * eps) ** (p / 2.0)
        return float(self.weights @ densities)

    def functional_gradient(
        self, f: npt.ArrayLike, p: float, eps: float = 0.0
    ) -> DiscreteFunction:
        """Euclidean gradient of f -> E^(p)(f) with respect to the dof values"""
        p = check_exponent(p)
        components = self.gradient_matrix @ self.function(f)
        scale = power_weights(segment_sums(components**2, self.offsets), p, eps)
        return p * (
            self.gradient_matrix.T
            @ (self.row_weights * scale[self.row_fiber] * components)
        )

    def p_energy_bilinear(
        self, u: npt.ArrayLike, phi: npt.ArrayLike, p: float, eps: float = 0.0
    ) -> float:
        p = check_exponent(p)
        return float(
            self.functional_gradient(u, p, eps) @ self.function(phi, name="phi") / p
        )

    @functools.cached_property
    def stiffness(self) -> sparse.csr_matrix:
        """S = B^T diag(m) B, the matrix of the base bilinear energy"""
        weighted = sparse.diags(self.row_weights) @ self.gradient_matrix
        return (self.gradient_matrix.T @ weighted).tocsr()

    @functools.cached_property
    def fiber_pairs(self) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.int64]]:
        """(row, col) of every pair of gradient rows sharing a fiber"""
        rows, cols = [], []
        for dim in np.unique(self.dims):
            starts = self.offsets[self.dims == dim]
            local_rows, local_cols = np.divmod(np.arange(dim * dim), dim)
            rows.append((starts[:, None] + local_rows[None, :]).ravel())
            cols.append((starts[:, None] + local_cols[None, :]).ravel())
        return np.concatenate(rows), np.concatenate(cols)

    def base_energy(self, f: npt.ArrayLike, g: npt.ArrayLike | None = None) -> float:
        f = self.function(f)
        g = f if g is None else self.function(g, name="g")
        return float(f @ (self.stiffness @ g))

    # divergence and generator

    def divergence(self, v: FiberVectorField) -> DiscreteFunction:
        v = self._check_field(v)
        return self.gradient_matrix.T @ (self.row_weights * v.components)

    def generator_apply(self, f: npt.ArrayLike) -> DiscreteFunction:
        """Lf with sum_i mu_i phi_i (-Lf)_i = E(f, phi) for phi vanishing on
        the boundary, zero on boundary dofs
        """
        result = np.zeros(self.dof_count)
        interior = self.interior_mask
        result[interior] = -(self.stiffness @ self.function(f))[interior] / (
            self.dof_mass[interior]
        )
        return result

    # function module action

    def fiber_values(self, g: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Average of g over the support of every fiber"""
        return (self.support @ self.function(g, name="g")) / self.support_counts

    def scale_field(self, g: npt.ArrayLike, v: FiberVectorField) -> FiberVectorField:
        v = self._check_field(v)
        return FiberVectorField(
            v.components * self.fiber_values(g)[self.row_fiber], self.dims
        )

    # norms and pairings

    def lp_field_norm(self, v: FiberVectorField, p: float) -> float:
        p = check_exponent(p)
        v = self._check_field(v)
        norms = fiber_norms(v.components, self.offsets)
        return float((self.weights @ norms**p) ** (1.0 / p))

    def dual_pairing(self, u: FiberVectorField, v: FiberVectorField) -> float:
        u = self._check_field(u)
        v = self._check_field(v)
        return float(self.row_weights @ (u.components * v.components))

    def lp_norm(self, f: npt.ArrayLike, p: float, region: RegionLike = None) -> float:
        p = check_exponent(p)
        values = np.abs(self.function(f)) ** p * self.dof_mass
        if region is not None:
            values = values[self.region_mask(region)]
        return float(values.sum() ** (1.0 / p))

    def sobolev_norm(self, f: npt.ArrayLike, p: float) -> float:
        """(||f||_p^p + E^(p)(f))^(1/p)"""
        p = check_exponent(p)
        return float((self.lp_norm(f, p) ** p + self.p_energy(f, p)) ** (1.0 / p))

    def hat_norms(self, p: float) -> npt.NDArray[np.float64]:
        """Sobolev norm of every dof indicator"""
        p = check_exponent(p)
        squared = self.aggregation @ self.gradient_matrix.multiply(self.gradient_matrix)
        squared = sparse.csr_matrix(squared)
        squared.data = squared.data ** (p / 2.0)
        energies = squared.T @ self.weights
        return (self.dof_mass + energies) ** (1.0 / p)

    # regions and boundary data

    def region_mask(self, region: RegionLike = None) -> npt.NDArray[np.bool_]:
        """Boolean mask of the free dofs of a region, never containing boundary dofs"""
        if region is None or (isinstance(region, str) and region == "interior"):
            mask = self.interior_mask.copy()
        elif isinstance(region, str):
            if region in self.regions:
                mask = self.regions[region].copy()
            else:
                named = self.named_region(region)
                if named is None:
                    raise InputError(
                        f"Unknown region {region!r} for the {self.MODEL_NAME} model"
                    )
                mask = np.asarray(named, dtype=bool) & self.interior_mask
        else:
            array = np.asarray(region)
            if array.dtype == bool:
                if array.shape != (self.dof_count,):
                    raise InputError(
                        f"Region mask has shape {array.shape}, expected ({self.dof_count},)"
                    )
                mask = array.copy()
            else:
                indices = array.astype(np.int64).ravel()
                if indices.size and (
                    indices.min() < 0 or indices.max() >= self.dof_count
                ):
                    raise InputError("Region dof ids out of range")
                mask = np.zeros(self.dof_count, dtype=bool)
                mask[indices] = True
            if np.any(mask & self.boundary_mask):
                raise InputError("Region contains boundary dofs")
        if not mask.any():
            raise InputError(f"Region {region!r} has no interior dofs")
        return mask

    def boundary_datum(self, g: npt.ArrayLike | float | None) -> DiscreteFunction:
        """Expand boundary data to all dofs

        Accepts a full dof vector, one value per boundary dof (other dofs set to
        zero) or a scalar.
        """
        if g is None:
            return np.zeros(self.dof_count)
        array = np.asarray(g, dtype=np.float64)
        if array.ndim == 0:
            values = np.zeros(self.dof_count)
            values[self.boundary_mask] = float(array)
            return self.function(values, name="g")
        if array.shape == (self.dof_count,):
            return self.function(array, name="g")
        if array.shape == (len(self.boundary),):
            values = np.zeros(self.dof_count)
            values[self.boundary] = array
            return self.function(values, name="g")
        raise InputError(
            f"Boundary datum has shape {array.shape}, expected ({len(self.boundary)},)"
            f" or ({self.dof_count},)"
        )

    def to_json(self) -> dict[str, typing.Any]:
        coo = self.gradient_matrix.tocoo()
        return dict(
            model=self.MODEL_NAME,
            params=dict(self.params),
            dof_count=self.dof_count,
            coordinate_names=list(self.COORDINATE_NAMES),
            coordinates=self.coordinates.tolist(),
            boundary=self.boundary.tolist(),
            dof_mass=self.dof_mass.tolist(),
            fibers=dict(
                dims=self.dims.tolist(),
                weights=self.weights.tolist(),
                offsets=self.offsets.tolist(),
            ),
            gradient=dict(
                shape=list(coo.shape),
                rows=coo.row.tolist(),
                cols=coo.col.tolist(),
                values=coo.data.tolist(),
            ),
            total_mass=self.total_mass,
            metadata=dict(self.metadata),
        )
