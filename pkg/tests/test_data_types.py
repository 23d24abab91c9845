import numpy as np
import pytest

from gasket_variational.data_types import CheckReport
from gasket_variational.data_types import FiberVectorField
from gasket_variational.data_types import SolverConfig
from gasket_variational.data_types import SolverResult
from gasket_variational.data_types import Word
from gasket_variational.errors import ConfigError
from gasket_variational.errors import InputError


@pytest.mark.parametrize(
    "text, symbols, index",
    [
        ("", (), 0),
        ("-", (), 0),
        ("0", (0,), 0),
        ("2", (2,), 2),
        ("10", (1, 0), 3),
        ("0121", (0, 1, 2, 1), 16),
    ],
)
def test_word_parse(text: str, symbols: tuple[int, ...], index: int):
    word = Word.parse(text)
    assert word.symbols == symbols
    assert word.index == index
    assert Word.from_index(index, len(symbols)) == word


@pytest.mark.parametrize("text", ["3", "01a", "x"])
def test_word_parse_rejects(text: str):
    with pytest.raises(InputError):
        Word.parse(text)


def test_word_children_and_prefix():
    word = Word.parse("12")
    children = word.children()
    assert [str(child) for child in children] == ["120", "121", "122"]
    assert all(child.startswith(word) for child in children)
    assert not Word.parse("02").startswith(word)
    assert str(Word(())) == "-"


def test_word_from_index_out_of_range():
    with pytest.raises(InputError):
        Word.from_index(9, 2)


def test_fiber_vector_field_arithmetic():
    u = FiberVectorField(np.array([1.0, 2.0, 3.0]), np.array([2, 1]))
    v = FiberVectorField(np.array([0.5, 0.5, 0.5]), np.array([2, 1]))
    np.testing.assert_allclose((u + v).components, [1.5, 2.5, 3.5])
    np.testing.assert_allclose((u - v).components, [0.5, 1.5, 2.5])
    np.testing.assert_allclose((u * 2.0).components, [2.0, 4.0, 6.0])
    np.testing.assert_allclose(u.vector(1), [3.0])
    np.testing.assert_array_equal(u.offsets, [0, 2])


def test_fiber_vector_field_rejects_mismatch():
    with pytest.raises(InputError):
        FiberVectorField(np.array([1.0, 2.0]), np.array([2, 1]))


@pytest.mark.parametrize(
    "p, tolerance, expected",
    [
        (2.0, None, 1e-8),
        (3.0, None, 1e-6),
        (1.5, None, 1e-6),
        (2.0, 1e-4, 1e-4),
    ],
)
def test_solver_config_tolerance(p: float, tolerance: float | None, expected: float):
    assert SolverConfig(p=p, tolerance=tolerance).effective_tolerance == expected


def test_solver_config_schedule():
    assert SolverConfig(p=2.0).schedule() == (0.0,)
    schedule = SolverConfig(p=1.5, eps0=0.1, eps_stages=3).schedule()
    assert schedule[-1] == 0.0
    np.testing.assert_allclose(schedule[:3], [0.1, 0.1 / np.sqrt(10.0), 0.01])
    assert SolverConfig(p=3.0, eps_schedule=[0.5, 0.0]).schedule() == (0.5, 0.0)


@pytest.mark.parametrize(
    "kwargs, field",
    [
        (dict(p=1.0), "solver.p"),
        (dict(tolerance=0.0), "solver.tolerance"),
        (dict(max_iterations=0), "solver.max_iterations"),
        (dict(armijo=1.0), "solver.armijo"),
        (dict(backtrack=0.0), "solver.backtrack"),
        (dict(eps_schedule=(0.1, 0.01)), "solver.eps_schedule"),
        (dict(eps_schedule=(0.1, 0.2, 0.0)), "solver.eps_schedule"),
    ],
)
def test_solver_config_rejects(kwargs: dict, field: str):
    with pytest.raises(ConfigError) as exc_info:
        SolverConfig(**kwargs)
    assert exc_info.value.field == field


def test_solver_result_to_dict():
    result = SolverResult(
        u=np.array([0.0, 0.5, 1.0]),
        objective=np.float64(1.0),
        residual=1e-9,
        status="converged",
        iterations=3,
        trace=(2.0, 1.0),
        residual_trace=(1.0, 1e-9),
        lam=0.25,
        diagnostics=dict(active=np.array([1, 2])),
    )
    assert result.converged
    assert result.to_dict() == dict(
        u=[0.0, 0.5, 1.0],
        objective=1.0,
        residual=1e-9,
        status="converged",
        iterations=3,
        trace=[2.0, 1.0],
        residual_trace=[1.0, 1e-9],
        lam=0.25,
        diagnostics=dict(active=[1, 2]),
    )


def test_check_report_to_dict():
    report = CheckReport(
        name="markov", samples=2, worst_margin=0.0, passed=True, seed=1
    )
    assert report.to_dict() == dict(
        name="markov",
        samples=2,
        worst_margin=0.0,
        passed=True,
        seed=1,
        tolerance=1e-12,
        label="exact",
        table=[],
    )
