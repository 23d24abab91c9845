from .data_types import ModelSpec
from .data_types import SolverConfig
from .data_types import SolverResult
from .data_types import Word
from .models import ALL_MODELS
from .models import build_model

__all__ = [
    "ALL_MODELS",
    "ModelSpec",
    "SolverConfig",
    "SolverResult",
    "Word",
    "build_model",
]
