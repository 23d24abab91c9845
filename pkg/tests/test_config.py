import pathlib

import numpy as np
import pytest

from gasket_variational.config import ConstraintOptions
from gasket_variational.config import RunConfig
from gasket_variational.config import THREADS_ENV
from gasket_variational.config import build_config
from gasket_variational.config import default_threads
from gasket_variational.config import flatten
from gasket_variational.config import load_config
from gasket_variational.config import parse_flat
from gasket_variational.config import parse_scalar
from gasket_variational.data_types import ModelSpec
from gasket_variational.errors import ConfigError


@pytest.mark.parametrize(
    "text, expected",
    [
        ("3", 3),
        ("1e-8", 1e-8),
        ("-2.5", -2.5),
        ("true", True),
        ("Off", False),
        ("none", None),
        ("", None),
        ("cell:01", "cell:01"),
        ("1.5, 2, 3", (1.5, 2, 3)),
        ("0,", (0,)),
    ],
)
def test_parse_scalar(text: str, expected):
    assert parse_scalar(text) == expected


def test_parse_flat():
    values, lines = parse_flat(
        "# comment\n\nproblem.type = dirichlet\nmodel.level=2\n  solver.p = 1.5  \n"
    )
    assert values == {"problem.type": "dirichlet", "model.level": 2, "solver.p": 1.5}
    assert lines == {"problem.type": 3, "model.level": 4, "solver.p": 5}


@pytest.mark.parametrize(
    "text, line, field",
    [
        ("problem.type dirichlet", 1, None),
        ("a.type = 1\n.b = 2", 2, None),
        ("solver.p = 2\nsolver.p = 3", 2, "solver.p"),
    ],
)
def test_parse_flat_errors(text: str, line: int, field: str | None):
    with pytest.raises(ConfigError) as exc_info:
        parse_flat(text)
    assert exc_info.value.line == line
    assert exc_info.value.field == field


def test_flatten():
    assert flatten(dict(a=dict(b=1, c=dict(d=[1, 2])), e="x")) == {
        "a.b": 1,
        "a.c.d": (1, 2),
        "e": "x",
    }


def test_load_flat_config(fixtures_folder: pathlib.Path):
    config = load_config(fixtures_folder / "dirichlet.conf")
    assert config.problem == "dirichlet"
    assert config.model == ModelSpec(name="sierpinski", params=dict(level=3))
    assert config.solver.p == 3.0
    assert config.solver.tolerance == 1e-8
    np.testing.assert_allclose(config.data["boundary"], [1.0, -0.5, 0.25])
    assert config.region is None
    assert config.threads == 1


def test_load_json_config(fixtures_folder: pathlib.Path):
    config = load_config(fixtures_folder / "verify.json")
    assert config.problem == "verify"
    assert config.model == ModelSpec(name="interval", params=dict(cells=8))
    assert config.verify.ps == (1.5, 2.0, 3.0)
    assert config.verify.seeds == (0,)
    assert config.verify.samples == 10
    assert config.verify.rank_levels == (2, 3)
    assert config.threads == 2


def test_load_data_file(fixtures_folder: pathlib.Path):
    config = load_config(fixtures_folder / "obstacle.conf")
    assert config.data["obstacle"].shape == (9,)
    assert config.data["obstacle"][2] == -0.05
    assert config.data["source"] == -2.0


def test_missing_exponent(fixtures_folder: pathlib.Path):
    with pytest.raises(ConfigError) as exc_info:
        load_config(fixtures_folder / "missing_p.conf")
    assert exc_info.value.field == "solver.p"
    assert "solver.p" in str(exc_info.value)


@pytest.mark.parametrize(
    "values, field",
    [
        ({"model.name": "interval"}, "problem.type"),
        ({"problem.type": "dirichlet", "solver.p": 2}, "model.name"),
        ({"problem.type": "melt", "model.name": "interval"}, "problem.type"),
        (
            {"problem.type": "dirichlet", "model.name": "interval", "solver.p": 0.5},
            "solver.p",
        ),
        (
            {"problem.type": "poincare", "model.name": "interval", "solver.p": "two"},
            "solver.p",
        ),
        (
            {"problem.type": "obstacle", "model.name": "interval", "solver.p": 3},
            "solver.p",
        ),
        (
            {"problem.type": "obstacle", "model.name": "interval"},
            "data.obstacle",
        ),
        (
            {"problem.type": "verify", "model.name": "interval", "solver.colour": 1},
            "solver.colour",
        ),
        (
            {"problem.type": "verify", "model.name": "interval", "constraint.kind": "sine"},
            "constraint.kind",
        ),
        (
            {"problem.type": "verify", "model.name": "interval", "data.boundary": "nowhere.csv"},
            "data.boundary",
        ),
        (
            {"problem.type": "verify", "model.name": "interval", "run.threads": 0},
            "run.threads",
        ),
        (
            {
                "problem.type": "dirichlet",
                "model.name": "interval",
                "solver.p": 2,
                "solver.eps_schedule": (0.1, 0.2, 0.0),
            },
            "solver.eps_schedule",
        ),
        (
            {
                "problem.type": "verify",
                "model.name": "interval",
                "solver.verify_poincare": "maybe",
            },
            "solver.verify_poincare",
        ),
    ],
)
def test_build_config_errors(values: dict, field: str, tmp_path: pathlib.Path):
    with pytest.raises(ConfigError) as exc_info:
        build_config(values, base=tmp_path)
    assert exc_info.value.field == field


def test_unknown_key_names_line(tmp_path: pathlib.Path):
    path = tmp_path / "run.conf"
    path.write_text(
        "problem.type = verify\nmodel.name = interval\nverify.colour = red\n"
    )
    with pytest.raises(ConfigError) as exc_info:
        load_config(path)
    assert exc_info.value.field == "verify.colour"
    assert exc_info.value.line == 3
    assert str(exc_info.value).startswith("line 3, field 'verify.colour'")


def test_constraint_options():
    config = build_config(
        {
            "problem.type": "constrained",
            "model.name": "sierpinski",
            "solver.p": 3,
            "constraint.kind": "cubic",
            "constraint.c": 0.5,
            "constraint.growth": 10,
            "problem.region": "cell:0",
        }
    )
    assert config.constraint == ConstraintOptions(kind="cubic", offset=0.0, c=0.5, growth=10.0)
    assert config.region == "cell:0"


def test_measure_table_needs_no_model():
    config = build_config({"problem.type": "measure-table", "problem.level": 2})
    assert config.level == 2
    assert config.model.name == "sierpinski"


def test_invalid_json(tmp_path: pathlib.Path):
    path = tmp_path / "run.json"
    path.write_text('{"problem": {"type": "verify"},\n')
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(path)
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="object"):
        load_config(path)
    with pytest.raises(ConfigError, match="does not exist"):
        load_config(tmp_path / "missing.conf")


def test_default_threads(monkeypatch: pytest.MonkeyPatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert default_threads() == 1
    monkeypatch.setenv(THREADS_ENV, "4")
    assert default_threads() == 4
    assert build_config({"problem.type": "measure-table"}).threads == 4
    monkeypatch.setenv(THREADS_ENV, "many")
    with pytest.raises(ConfigError):
        default_threads()
    monkeypatch.setenv(THREADS_ENV, "0")
    with pytest.raises(ConfigError):
        default_threads()


def test_run_config_rejects_unknown_problem():
    with pytest.raises(ConfigError):
        RunConfig(model=ModelSpec(name="interval"), problem="melt")
