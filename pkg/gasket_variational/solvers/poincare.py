import logging

import numpy as np
import numpy.typing as npt
from scipy import linalg
from scipy import optimize
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from ..models.base import EnergyModel
from ..models.base import RegionLike
from ..utils import check_exponent

logger = logging.getLogger(__name__)

# largest region solved with a dense generalized eigensolve
DENSE_LIMIT = 2000


def smallest_eigenpair(
    stiffness: sparse.csr_matrix, mass: npt.NDArray[np.float64]
) -> tuple[float, npt.NDArray[np.float64]]:
    """Smallest eigenpair of the pencil (S, diag(mass))"""
    if stiffness.shape[0] <= DENSE_LIMIT:
        values, vectors = linalg.eigh(
            stiffness.toarray(), np.diag(mass), subset_by_index=(0, 0)
        )
    else:
        values, vectors = sparse_linalg.eigsh(
            stiffness.tocsc(), k=1, M=sparse.diags(mass).tocsc(), sigma=0.0, which="LM"
        )
    return float(values[0]), vectors[:, 0]


def poincare_constant(
    model: EnergyModel,
    region: RegionLike = None,
    p: float = 2.0,
    max_iterations: int = 500,
) -> float:
    """Smallest c with ||u||_p^p <= c E^(p)(u) for u vanishing outside the region"""
    p = check_exponent(p)
    index = np.flatnonzero(model.region_mask(region))
    mass = model.dof_mass[index]
    if len(index) == 1:
        column = model.gradient_matrix[:, index[0]].toarray().ravel()
        norms = np.sqrt(model.aggregation @ (column * column))
        return float(mass[0] / (model.weights @ norms**p))

    stiffness = model.stiffness[index][:, index]
    eigenvalue, vector = smallest_eigenpair(stiffness, mass)
    if p == 2.0:
        logger.debug("Smallest Dirichlet eigenvalue %.12g", eigenvalue)
        return 1.0 / eigenvalue

    def quotient(values):
        u = np.zeros(model.dof_count)
        u[index] = values
        energy = model.p_energy(u, p)
        energy_gradient = model.functional_gradient(u, p)[index]
        norm = float(mass @ np.abs(values) ** p)
        norm_gradient = p * mass * np.sign(values) * np.abs(values) ** (p - 1.0)
        ratio = energy / norm
        return ratio, (energy_gradient - ratio * norm_gradient) / norm

    start = vector / np.abs(vector).max()
    best = [1.0 / quotient(start)[0]]

    def track(values):
        best.append(1.0 / quotient(values)[0])

    result = optimize.minimize(
        quotient,
        start,
        jac=True,
        method="L-BFGS-B",
        callback=track,
        options=dict(maxiter=max_iterations),
    )
    logger.debug(
        "Rayleigh quotient minimization finished after %s iterations: %s",
        result.nit,
        result.message,
    )
    best.append(1.0 / float(result.fun))
    return float(max(best))
