import dataclasses

import numpy as np
import pytest
from pytest_mock import MockFixture

from gasket_variational import analysis
from gasket_variational.data_types import CheckReport
from gasket_variational.errors import InputError
from gasket_variational.models import build_model
from gasket_variational.models.base import EnergyModel
from gasket_variational.solvers import AnisotropicIntegrand
from gasket_variational.solvers import ConvexIntegrand
from gasket_variational.solvers import PowerIntegrand

ALL_FIXTURES = [
    pytest.lazy_fixture("sierpinski_model"),
    pytest.lazy_fixture("interval_model"),
    pytest.lazy_fixture("degenerate_model"),
    pytest.lazy_fixture("superposition_model"),
    pytest.lazy_fixture("product_model"),
]


@dataclasses.dataclass(frozen=True)
class ConcaveIntegrand(PowerIntegrand):
    NAME = "concave"

    def values(self, model, components):
        return -super().values(model, components)


@pytest.mark.parametrize("model", ALL_FIXTURES)
def test_markov(model: EnergyModel):
    report = analysis.check_markov(model, samples=50)
    assert report.passed
    assert report.samples == 50
    assert report.label == "exact"



@pytest.mark.parametrize(
    "model",
    [
        pytest.lazy_fixture("sierpinski_model"),
        pytest.lazy_fixture("interval_model"),
        pytest.lazy_fixture("product_model"),
        pytest.lazy_fixture("degenerate_model"),
    ],
)
@pytest.mark.parametrize("p", [1.5, 3.0, 4.0])
def test_markov_p_energy(model: EnergyModel, p: float):
    report = analysis.check_markov(model, samples=50, seed=2, p=p)
    assert report.passed
    assert report.name == f"markov[p={p:g}]"


def test_markov_p_energy_needs_difference_fibers():
    model = build_model("sierpinski", level=2, rank=1)
    with pytest.raises(InputError, match="p=3"):
        analysis.check_markov(model, samples=20, p=3.0)
    names = [check.func.__name__ for check in analysis.suite_checks(model, ps=(3.0,))]
    assert names.count("check_markov") == 1


@pytest.mark.parametrize("model", ALL_FIXTURES)
def test_polarization_and_holder(model: EnergyModel):
    assert analysis.check_polarization(model, samples=20).passed
    for p in (1.5, 3.0):
        assert analysis.check_holder(model, p, samples=20).passed


@pytest.mark.parametrize("model", ALL_FIXTURES)
@pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
def test_duality(model: EnergyModel, p: float):
    report = analysis.check_duality(model, p, samples=20, seed=3)
    assert report.passed
    assert report.worst_margin <= 0.0
    assert report.name == f"duality[p={p:g}]"


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
def test_clarkson(sierpinski_model: EnergyModel, p: float):
    report = analysis.check_clarkson(sierpinski_model, p, samples=50)
    assert report.passed
    assert report.label == "empirical witness"
    rows = [row for row in report.table if "eps" in row]
    assert [row["eps"] for row in rows] == list(analysis.CLARKSON_DISTANCES)
    for row in rows:
        assert 0.0 < row["delta"] <= 1.0
        assert row["delta"] == pytest.approx(1.0 - row["max_ratio"])
    if p == 2.0:
        assert report.table[-1]["parallelogram_error"] <= 1e-12
    else:
        assert len(report.table) == len(rows)


def test_clarkson_without_witness(interval_model: EnergyModel):
    report = analysis.check_clarkson(
        interval_model, 3.0, samples=5, distances=(0.5, 10.0)
    )
    assert report.table[1]["delta"] is None
    assert report.passed


@pytest.mark.parametrize(
    "model",
    [
        pytest.lazy_fixture("interval_model"),
        pytest.lazy_fixture("sierpinski_model"),
        pytest.lazy_fixture("product_model"),
    ],
)
def test_integration_by_parts(model: EnergyModel):
    report = analysis.check_integration_by_parts(model, samples=30)
    assert report.passed
    assert [row["part"] for row in report.table] == ["adjointness", "bound"]


@pytest.mark.parametrize("model", ALL_FIXTURES)
def test_integration_by_parts_adjointness(model: EnergyModel):
    report = analysis.check_integration_by_parts(model, samples=10)
    assert report.table[0]["worst_margin"] >= -1e-12


@pytest.mark.parametrize("model", ALL_FIXTURES)
@pytest.mark.parametrize(
    "integrand", [PowerIntegrand(p=1.5), PowerIntegrand(p=3.0), AnisotropicIntegrand(p=3.0)]
)
def test_convexity_and_lower_semicontinuity(
    model: EnergyModel, integrand: ConvexIntegrand
):
    assert analysis.check_convexity(model, integrand, samples=30).passed
    assert analysis.check_lower_semicontinuity(model, integrand, samples=5).passed


def test_convexity_detects_concave_integrand(sierpinski_model: EnergyModel):
    report = analysis.check_convexity(sierpinski_model, ConcaveIntegrand(p=3.0), samples=30)
    assert not report.passed
    assert report.worst_margin < 0.0


def test_rank_decay_report():
    report = analysis.rank_decay_report(levels=(4, 2, 3))
    assert report.passed
    assert [row["level"] for row in report.table] == [2, 3, 4]
    assert [row["cells"] for row in report.table] == [9, 27, 81]
    medians = [row["median"] for row in report.table]
    assert medians[0] > medians[-1]
    assert report.worst_margin == pytest.approx(medians[0] - medians[-1])


def test_run_suite_threads(interval_model: EnergyModel):
    kwargs = dict(ps=(1.5, 2.0), seeds=(0, 1), samples=10)
    serial = analysis.run_suite(interval_model, **kwargs)
    parallel = analysis.run_suite(interval_model, threads=3, **kwargs)
    assert [report.to_dict() for report in serial] == [
        report.to_dict() for report in parallel
    ]
    assert all(report.passed for report in serial)
    # three fixed checks, seven per exponent and the Markov check at p = 1.5
    assert len(serial) == 2 * (3 + 2 * 7 + 1)
    assert serial[3].name == "markov[p=1.5]"



@pytest.mark.parametrize("model", ALL_FIXTURES)
def test_run_suite_all_models(model: EnergyModel):
    reports = analysis.run_suite(model, seeds=(0, 1, 2), samples=10)
    assert all(report.passed for report in reports)
    assert {report.seed for report in reports} == {0, 1, 2}


def test_run_suite_rank_levels(interval_model: EnergyModel):
    reports = analysis.run_suite(
        interval_model, ps=(2.0,), samples=5, rank_levels=(2, 3)
    )
    assert reports[-1].name == "rank_decay"


def test_run_suite_reports_failures(interval_model: EnergyModel, mocker: MockFixture):
    failed = CheckReport(
        name="markov", samples=1, worst_margin=-1.0, passed=False, seed=0
    )
    mocker.patch.object(analysis, "check_markov", return_value=failed)
    warning = mocker.patch.object(analysis.logger, "warning")
    reports = analysis.run_suite(interval_model, ps=(2.0,), samples=5)
    assert reports[0] == failed
    warning.assert_called_once()


def test_format_table():
    reports = [
        CheckReport(name="markov", samples=10, worst_margin=0.5, passed=True, seed=0),
        CheckReport(
            name="clarkson[p=3]",
            samples=20,
            worst_margin=-1.0,
            passed=False,
            seed=1,
            label="empirical witness",
        ),
    ]
    lines = analysis.format_table(reports).splitlines()
    assert lines[0].split() == ["check", "seed", "samples", "worst", "margin", "label", "result"]
    assert set(lines[1]) <= {"-", " "}
    assert lines[2].split()[-1] == "pass"
    assert lines[3].endswith("FAIL")
    assert "empirical witness" in lines[3]


def test_smooth_function(sierpinski_model: EnergyModel):
    rng = np.random.default_rng(0)
    values = analysis.smooth_function(sierpinski_model, rng)
    assert values.shape == (sierpinski_model.dof_count,)
    field = analysis.unit_field(sierpinski_model, rng, 3.0)
    assert sierpinski_model.lp_field_norm(field, 3.0) == pytest.approx(1.0)
