import typing

import numpy as np
import numpy.typing as npt

from .errors import InputError


def as_function(values: npt.ArrayLike, size: int, name: str = "f") -> npt.NDArray[np.float64]:
    """Validate dof values and return them as a float64 vector"""
    array = np.asarray(values, dtype=np.float64)
    if array.shape != (size,):
        raise InputError(f"{name} has shape {array.shape}, expected ({size},)")
    if not np.all(np.isfinite(array)):
        raise InputError(f"{name} contains non-finite values")
    return array


def segment_sums(
    values: npt.NDArray[np.float64], offsets: npt.NDArray[np.int64]
) -> npt.NDArray[np.float64]:
    """Sum consecutive segments starting at offsets, every segment non-empty"""
    return np.add.reduceat(values, offsets)


def fiber_norms(
    components: npt.NDArray[np.float64], offsets: npt.NDArray[np.int64]
) -> npt.NDArray[np.float64]:
    return np.sqrt(segment_sums(components * components, offsets))


def safe_power(
    base: npt.NDArray[np.float64], exponent: float
) -> npt.NDArray[np.float64]:
    """base ** exponent with zero bases mapped to zero, also for negative exponents"""
    result = np.zeros_like(base)
    positive = base > 0
    result[positive] = base[positive] ** exponent
    return result


def conjugate_exponent(p: float) -> float:
    return p / (p - 1.0)


def check_exponent(p: float) -> float:
    p = float(p)
    if not (p > 1.0 and np.isfinite(p)):
        raise InputError(f"p must lie in (1, inf), got {p}")
    return p


def make_rng(seed: int | None) -> np.random.Generator:
    return np.random.default_rng(seed)


def format_float(value: float) -> str:
    return f"{float(value):.17g}"


def jsonable(value: typing.Any) -> typing.Any:
    """Convert numpy scalars and arrays nested in containers to plain Python"""
    if isinstance(value, dict):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value
