import dataclasses

import numpy as np
import numpy.typing as npt
from scipy import sparse

from ..data_types import CoercivityCertificate
from ..data_types import DiscreteFunction
from ..errors import InvalidIntegrandError
from ..models.base import EnergyModel
from ..models.base import power_weights
from ..utils import check_exponent
from ..utils import fiber_norms
from ..utils import make_rng
from ..utils import safe_power
from ..utils import segment_sums

# relative floor of the metric diagonal, keeps the metric definite on flat fibers
METRIC_FLOOR = 1e-6
SPOT_CHECK_TOLERANCE = 1e-10


def block_metric(
    model: EnergyModel,
    diagonal: npt.NDArray[np.float64],
    rank_one: list[tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]] = (),
) -> sparse.csr_matrix:
    """B^T (M W) B with W = diag(diagonal) + sum of per-fiber c_x v_x v_x^T"""
    rows, cols = model.fiber_pairs
    data = np.where(rows == cols, diagonal[rows], 0.0)
    for coefficients, vectors in rank_one:
        data = data + coefficients[model.row_fiber[rows]] * vectors[rows] * vectors[cols]
    size = len(model.row_fiber)
    weighted = sparse.csr_matrix(
        (data * model.row_weights[rows], (rows, cols)), shape=(size, size)
    )
    return (model.gradient_matrix.T @ weighted @ model.gradient_matrix).tocsr()


def floored(values: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    top = float(values.max(initial=0.0))
    return np.maximum(values, METRIC_FLOOR * (top if top > 0 else 1.0))


class ConvexIntegrand:
    """Per-fiber convex integrand f_x, evaluated on fiber vectors"""

    NAME: str = ""
    p: float
    eps: float

    # divides the dof gradient before residuals, so they read as E^(p)(u, phi)
    @property
    def residual_scale(self) -> float:
        return self.p

    def certificate(self, model: EnergyModel) -> CoercivityCertificate:
        raise NotImplementedError()

    def with_eps(self, eps: float) -> "ConvexIntegrand":
        return dataclasses.replace(self, eps=eps)

    def values(
        self, model: EnergyModel, components: npt.NDArray[np.float64]
    ) -> npt.NDArray[np.float64]:
        raise NotImplementedError()

    def derivative(
        self, model: EnergyModel, components: npt.NDArray[np.float64]
    ) -> npt.NDArray[np.float64]:
        raise NotImplementedError()

    def metric(
        self, model: EnergyModel, components: npt.NDArray[np.float64]
    ) -> sparse.csr_matrix:
        """Positive definite curvature of the integral functional in the dof values"""
        return block_metric(model, np.ones(len(components)))

    def evaluate(self, model: EnergyModel, f: DiscreteFunction) -> float:
        components = model.gradient_matrix @ f
        return float(model.weights @ self.values(model, components))

    def gradient(self, model: EnergyModel, f: DiscreteFunction) -> DiscreteFunction:
        components = model.gradient_matrix @ f
        return model.gradient_matrix.T @ (
            model.row_weights * self.derivative(model, components)
        )

    def dof_metric(self, model: EnergyModel, f: DiscreteFunction) -> sparse.csr_matrix:
        return self.metric(model, model.gradient_matrix @ f)

    def validate(self, model: EnergyModel, samples: int = 16, seed: int | None = 0):
        """Spot check convexity and coercivity on random fiber vectors"""
        rng = make_rng(seed)
        certificate = self.certificate(model)
        size = len(model.row_fiber)
        for _ in range(samples):
            u = rng.standard_normal(size) * rng.exponential()
            v = rng.standard_normal(size) * rng.exponential()
            t = rng.uniform()
            mixed = self.values(model, t * u + (1.0 - t) * v)
            bound = t * self.values(model, u) + (1.0 - t) * self.values(model, v)
            scale = 1.0 + np.abs(bound)
            if np.any(mixed > bound + SPOT_CHECK_TOLERANCE * scale):
                raise InvalidIntegrandError(
                    f"Integrand {self.NAME!r} failed the convex combination check"
                )
            norms = fiber_norms(u, model.offsets)
            lower = -np.asarray(certificate.a) + np.asarray(certificate.b) * (
                norms**certificate.p
            )
            values = self.values(model, u)
            if np.any(values < lower - SPOT_CHECK_TOLERANCE * (1.0 + np.abs(lower))):
                raise InvalidIntegrandError(
                    f"Integrand {self.NAME!r} violates its coercivity certificate"
                )


def radial_terms(
    squared: npt.NDArray[np.float64], p: float, eps: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Value, first and second radial factors of r -> (r^2 + eps^2)^(p/2)"""
    if eps == 0.0:
        values = safe_power(squared, p / 2.0)
    else:
        values = (squared + eps * eps) ** (p / 2.0)
    first = power_weights(squared, p, eps)
    second = (
        np.zeros_like(squared)
        if p == 2.0
        else safe_power(squared + eps * eps, (p - 4.0) / 2.0)
    )
    return values, first, second


@dataclasses.dataclass(frozen=True)
class PowerIntegrand(ConvexIntegrand):
    """f_x(v) = |v|^p, smoothed to (|v|^2 + eps^2)^(p/2)"""

    NAME = "power"
    p: float = 2.0
    eps: float = 0.0

    def __post_init__(self):
        check_exponent(self.p)

    def certificate(self, model: EnergyModel) -> CoercivityCertificate:
        return CoercivityCertificate(a=0.0, b=1.0, p=self.p)

    def values(self, model, components):
        squared = segment_sums(components * components, model.offsets)
        return radial_terms(squared, self.p, self.eps)[0]

    def derivative(self, model, components):
        squared = segment_sums(components * components, model.offsets)
        first = power_weights(squared, self.p, self.eps)
        return self.p * first[model.row_fiber] * components

    def metric(self, model, components):
        squared = segment_sums(components * components, model.offsets)
        _, first, second = radial_terms(squared, self.p, self.eps)
        p = self.p
        return block_metric(
            model,
            p * floored(first)[model.row_fiber],
            [(p * (p - 2.0) * second, components)],
        )


@dataclasses.dataclass(frozen=True)
class AnisotropicIntegrand(ConvexIntegrand):
    """f_x(v) = |v|^p + |<v, eta_x>|^p on fibers of dimension >= 2, 0 elsewhere

    eta_x is the first frame vector of the fiber.
    """

    NAME = "anisotropic"
    p: float = 2.0
    eps: float = 0.0

    def __post_init__(self):
        check_exponent(self.p)

    def certificate(self, model: EnergyModel) -> CoercivityCertificate:
        return CoercivityCertificate(
            a=0.0, b=(model.dims >= 2).astype(np.float64), p=self.p
        )

    def _terms(self, model, components):
        active = model.dims >= 2
        rows = active[model.row_fiber]
        eta = model.first_frame_components() * rows
        v = components * rows
        squared = segment_sums(v * v, model.offsets)
        projection = segment_sums(v * eta, model.offsets)
        return active, eta, v, squared, projection

    def values(self, model, components):
        active, _, _, squared, projection = self._terms(model, components)
        radial = radial_terms(squared, self.p, self.eps)[0]
        directional = radial_terms(projection**2, self.p, self.eps)[0]
        return np.where(active, radial + directional, 0.0)

    def derivative(self, model, components):
        _, eta, v, squared, projection = self._terms(model, components)
        p = self.p
        first = power_weights(squared, p, self.eps)
        directional = power_weights(projection**2, p, self.eps) * projection
        return p * (first[model.row_fiber] * v + directional[model.row_fiber] * eta)

    def metric(self, model, components):
        active, eta, v, squared, projection = self._terms(model, components)
        p = self.p
        _, first, second = radial_terms(squared, p, self.eps)
        _, first_eta, second_eta = radial_terms(projection**2, p, self.eps)
        first = np.where(active, first, 0.0)
        eta_curvature = p * first_eta + p * (p - 2.0) * second_eta * projection**2
        return block_metric(
            model,
            p * floored(first)[model.row_fiber],
            [
                (p * (p - 2.0) * second * active, v),
                (eta_curvature * active, eta),
            ],
        )


@dataclasses.dataclass(frozen=True)
class QuadraticIntegrand(ConvexIntegrand):
    """f_x(v) = |v|^2 / 2"""

    NAME = "quadratic"
    p: float = 2.0
    eps: float = 0.0

    @property
    def residual_scale(self) -> float:
        return 1.0

    def certificate(self, model: EnergyModel) -> CoercivityCertificate:
        return CoercivityCertificate(a=0.0, b=0.5, p=2.0)

    def values(self, model, components):
        return segment_sums(components * components, model.offsets) / 2.0

    def derivative(self, model, components):
        return components.copy()
