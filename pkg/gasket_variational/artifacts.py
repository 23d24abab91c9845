import csv
import dataclasses
import datetime
import json
import logging
import pathlib
import typing

import numpy as np

from .data_types import CheckReport
from .data_types import SolverResult
from .data_types import Word
from .models.base import EnergyModel
from .sg_core import kusuoka_cells
from .utils import format_float
from .utils import jsonable

logger = logging.getLogger(__name__)

RESULT_FILE = "result.json"
TRACE_FILE = "trace.csv"
SOLUTION_FILE = "solution.csv"
MEASURE_TABLE_FILE = "measure_table.csv"
MODEL_FILE = "model.json"
SCHEMA_VERSION = 1


def ensure_output(path: str | pathlib.Path) -> pathlib.Path:
    path = pathlib.Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def result_payload(
    problem: str,
    model: EnergyModel | None,
    result: SolverResult | typing.Sequence[CheckReport] | float,
    config: dict[str, typing.Any] | None = None,
    created_at: datetime.datetime | None = None,
) -> dict[str, typing.Any]:
    """result.json document, created_at is its only run-dependent field"""
    if created_at is None:
        created_at = datetime.datetime.now(tz=datetime.timezone.utc)
    payload: dict[str, typing.Any] = dict(
        schema_version=SCHEMA_VERSION,
        problem=problem,
        created_at=created_at.isoformat(),
        config=jsonable(config or {}),
    )
    if model is not None:
        payload["model"] = jsonable(dataclasses.asdict(model.spec))
    if isinstance(result, SolverResult):
        payload["result"] = result.to_dict()
    elif isinstance(result, (int, float)):
        payload["result"] = dict(value=float(result))
    else:
        reports = [report.to_dict() for report in result]
        payload["result"] = dict(
            passed=all(report["passed"] for report in reports), checks=reports
        )
    return payload


def dump_json(payload: dict[str, typing.Any]) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_json(path: str | pathlib.Path, payload: dict[str, typing.Any]):
    pathlib.Path(path).write_text(dump_json(payload))


def trace_rows(result: SolverResult) -> list[tuple[str, str, str]]:
    return [
        (str(iteration), format_float(objective), format_float(residual))
        for iteration, (objective, residual) in enumerate(
            zip(result.trace, result.residual_trace)
        )
    ]


def write_trace(path: str | pathlib.Path, result: SolverResult):
    with open(path, "wt", newline="") as fo:
        writer = csv.writer(fo)
        writer.writerow(("iteration", "objective", "residual"))
        writer.writerows(trace_rows(result))


def solution_columns(model: EnergyModel) -> tuple[str, ...]:
    names = tuple(model.COORDINATE_NAMES)
    if len(names) < 2:
        names = names + ("y",)
    return ("dof",) + names + ("value",)


def write_solution(
    path: str | pathlib.Path, model: EnergyModel, u: np.ndarray
):
    """dof, coordinates padded to two columns, value"""
    coordinates = model.coordinates
    if coordinates.shape[1] < 2:
        coordinates = np.hstack(
            [coordinates, np.zeros((len(coordinates), 2 - coordinates.shape[1]))]
        )
    with open(path, "wt", newline="") as fo:
        writer = csv.writer(fo)
        writer.writerow(solution_columns(model))
        for dof, (point, value) in enumerate(zip(coordinates, u)):
            writer.writerow(
                [str(dof)] + [format_float(x) for x in point] + [format_float(value)]
            )


def measure_table(level: int) -> list[dict[str, typing.Any]]:
    """Kusuoka mass and Z eigenvalues of every cell, in word order"""
    cells = kusuoka_cells(level)
    eigenvalues = np.linalg.eigvalsh(cells.z)
    return [
        dict(
            word=str(Word.from_index(index, level)),
            nu=float(cells.nu[index]),
            z_min=float(eigenvalues[index, 0]),
            z_max=float(eigenvalues[index, 1]),
        )
        for index in range(len(cells.nu))
    ]


def write_measure_table(
    fo: typing.TextIO, rows: typing.Sequence[dict[str, typing.Any]]
):
    writer = csv.writer(fo)
    writer.writerow(("word", "nu", "z_min", "z_max"))
    for row in rows:
        writer.writerow(
            (
                row["word"],
                format_float(row["nu"]),
                format_float(row["z_min"]),
                format_float(row["z_max"]),
            )
        )


def export_model(path: str | pathlib.Path, model: EnergyModel):
    write_json(path, jsonable(model.to_json()))
    logger.info("Exported the %s model to %s", model.name, path)
