import dataclasses
import json
import logging
import os
import pathlib
import typing

import numpy as np

from .data_types import ModelSpec
from .data_types import SolverConfig
from .errors import ConfigError

logger = logging.getLogger(__name__)

PROBLEMS = (
    "dirichlet",
    "anisotropic",
    "constrained",
    "obstacle",
    "poincare",
    "verify",
    "measure-table",
)
# problems solving for an energy exponent, the config must name solver.p
NEEDS_EXPONENT = ("dirichlet", "anisotropic", "constrained", "poincare")
THREADS_ENV = "GASKET_VARIATIONAL_THREADS"

DATA_KEYS = ("boundary", "source", "obstacle", "initial")
CONSTRAINT_KINDS = ("linear", "cubic")


@dataclasses.dataclass(frozen=True)
class ConstraintOptions:
    kind: str = "linear"
    # offset of the linear constraint G(z) = z - offset
    offset: float = 0.0
    # c of the cubic constraint G(z) = z^3 / 3 - c z
    c: float = 0.0
    # growth constant override
    growth: float | None = None


@dataclasses.dataclass(frozen=True)
class VerifyOptions:
    ps: tuple[float, ...] = (1.5, 2.0, 3.0, 4.0)
    seeds: tuple[int, ...] = (0, 1, 2)
    samples: int = 100
    # levels of the Z-eigenvalue decay table, empty to skip it
    rank_levels: tuple[int, ...] = ()


@dataclasses.dataclass(frozen=True)
class RunConfig:
    model: ModelSpec
    # one of PROBLEMS
    problem: str
    solver: SolverConfig = dataclasses.field(default_factory=SolverConfig)
    # region of the free dofs, "interior" when unset
    region: str | None = None
    # data vectors or constants, keyed by DATA_KEYS
    data: dict[str, typing.Any] = dataclasses.field(default_factory=dict)
    constraint: ConstraintOptions = dataclasses.field(default_factory=ConstraintOptions)
    verify: VerifyOptions = dataclasses.field(default_factory=VerifyOptions)
    # level of the measure table
    level: int = 3
    output: str | None = None
    threads: int = 1

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(
                f"Unknown problem {self.problem!r}, expected one of {list(PROBLEMS)}",
                field="problem.type",
            )
        if self.threads < 1:
            raise ConfigError("threads must be positive", field="run.threads")


def default_threads() -> int:
    value = os.environ.get(THREADS_ENV)
    if value is None:
        return 1
    try:
        threads = int(value)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {value!r}")
    if threads < 1:
        raise ConfigError(f"{THREADS_ENV} must be positive, got {threads}")
    return threads


def parse_scalar(text: str) -> typing.Any:
    """Typed value of a config entry: bool, int, float, comma list or string"""
    text = text.strip()
    lowered = text.lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    if lowered in ("none", "null", ""):
        return None
    if "," in text:
        return tuple(parse_scalar(item) for item in text.split(",") if item.strip())
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def parse_flat(text: str) -> tuple[dict[str, typing.Any], dict[str, int]]:
    """Parse `section.key = value` lines into values and the line of every key"""
    values: dict[str, typing.Any] = {}
    lines: dict[str, int] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("expected `key = value`", line=number)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or any(not part for part in key.split(".")):
            raise ConfigError(f"malformed key {key!r}", line=number)
        if key in values:
            raise ConfigError("duplicate key", field=key, line=number)
        values[key] = parse_scalar(value)
        lines[key] = number
    return values, lines


def flatten(document: dict[str, typing.Any], prefix: str = "") -> dict[str, typing.Any]:
    values = {}
    for key, value in document.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            values.update(flatten(value, prefix=f"{name}."))
        elif isinstance(value, list):
            values[name] = tuple(value)
        else:
            values[name] = value
    return values


def _take(values, lines, key, kind, default=None):
    if key not in values:
        return default
    value = values.pop(key)
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value {value!r}: {exc}", field=key, line=lines.get(key))


def _as_tuple(kind):
    def convert(value):
        if not isinstance(value, tuple):
            value = (value,)
        return tuple(kind(item) for item in value)

    return convert


def _as_bool(value):
    if isinstance(value, bool):
        return value
    raise ValueError("expected true or false")


def load_data(value: typing.Any, base: pathlib.Path, key: str, line: int | None):
    """Inline numbers stay as they are, `@path` entries are read as one-column text"""
    if isinstance(value, str):
        path = pathlib.Path(value[1:] if value.startswith("@") else value)
        if not path.is_absolute():
            path = base / path
        if not path.exists():
            raise ConfigError(f"data file {str(path)!r} does not exist", field=key, line=line)
        return np.loadtxt(path, delimiter=",", ndmin=1, dtype=np.float64)
    if isinstance(value, tuple):
        return np.asarray(value, dtype=np.float64)
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    raise ConfigError(f"invalid data value {value!r}", field=key, line=line)


def build_config(
    values: dict[str, typing.Any],
    lines: dict[str, int] | None = None,
    base: pathlib.Path | None = None,
) -> RunConfig:
    """RunConfig from flat dotted keys"""
    values = dict(values)
    lines = lines or {}
    base = base or pathlib.Path.cwd()

    problem = _take(values, lines, "problem.type", str)
    if problem is None:
        raise ConfigError("missing problem type", field="problem.type")
    model_name = _take(values, lines, "model.name", str)
    if model_name is None and problem != "measure-table":
        raise ConfigError("missing model name", field="model.name")
    model_params = {
        key.split(".", 1)[1]: values.pop(key)
        for key in [key for key in values if key.startswith("model.")]
    }

    if problem in NEEDS_EXPONENT and "solver.p" not in values:
        raise ConfigError(f"the {problem} problem needs an exponent", field="solver.p")
    solver_kinds = dict(
        p=float,
        tolerance=float,
        max_iterations=int,
        armijo=float,
        backtrack=float,
        max_backtracks=int,
        eps0=float,
        eps_stages=int,
        eps_schedule=_as_tuple(float),
        seed=int,
        test_basis_cap=int,
        verify_poincare=_as_bool,
    )
    solver_params = {}
    for name, kind in solver_kinds.items():
        key = f"solver.{name}"
        if key in values:
            solver_params[name] = _take(values, lines, key, kind)
    try:
        solver = SolverConfig(**solver_params)
    except ConfigError as exc:
        raise ConfigError(
            str(exc).split(": ", 1)[-1], field=exc.field, line=lines.get(exc.field)
        ) from exc
    if problem == "obstacle" and solver.p != 2.0:
        raise ConfigError(
            "the obstacle problem is quadratic, p must be 2",
            field="solver.p",
            line=lines.get("solver.p"),
        )

    data = {}
    for name in DATA_KEYS:
        key = f"data.{name}"
        if key in values:
            data[name] = load_data(values.pop(key), base, key, lines.get(key))
    if problem == "obstacle" and "obstacle" not in data:
        raise ConfigError("the obstacle problem needs an obstacle", field="data.obstacle")

    constraint = ConstraintOptions(
        kind=_take(values, lines, "constraint.kind", str, "linear"),
        offset=_take(values, lines, "constraint.offset", float, 0.0),
        c=_take(values, lines, "constraint.c", float, 0.0),
        growth=_take(values, lines, "constraint.growth", float),
    )
    if constraint.kind not in CONSTRAINT_KINDS:
        raise ConfigError(
            f"unknown constraint {constraint.kind!r}, expected one of {list(CONSTRAINT_KINDS)}",
            field="constraint.kind",
        )
    verify = VerifyOptions(
        ps=_take(values, lines, "verify.ps", _as_tuple(float), VerifyOptions.ps),
        seeds=_take(values, lines, "verify.seeds", _as_tuple(int), VerifyOptions.seeds),
        samples=_take(values, lines, "verify.samples", int, VerifyOptions.samples),
        rank_levels=_take(values, lines, "verify.rank_levels", _as_tuple(int), ()),
    )
    threads = _take(values, lines, "run.threads", int)
    config = RunConfig(
        model=ModelSpec(name=model_name or "sierpinski", params=model_params),
        problem=problem,
        solver=solver,
        region=_take(values, lines, "problem.region", str),
        data=data,
        constraint=constraint,
        verify=verify,
        level=_take(values, lines, "problem.level", int, 3),
        output=_take(values, lines, "output.dir", str),
        threads=default_threads() if threads is None else threads,
    )
    if values:
        key = sorted(values)[0]
        raise ConfigError("unknown key", field=key, line=lines.get(key))
    return config


def load_config(path: str | os.PathLike) -> RunConfig:
    """Read a flat `key = value` config, or nested JSON for a .json file"""
    path = pathlib.Path(path)
    if not path.exists():
        raise ConfigError(f"config file {str(path)!r} does not exist")
    text = path.read_text()
    if path.suffix.lower() == ".json":
        try:
            document = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
        if not isinstance(document, dict):
            raise ConfigError("JSON config must be an object")
        values, lines = flatten(document), {}
    else:
        values, lines = parse_flat(text)
    logger.debug("Loaded %s config keys from %s", len(values), path)
    return build_config(values, lines, base=path.parent)
