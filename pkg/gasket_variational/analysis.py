import concurrent.futures
import functools
import logging
import typing

import numpy as np
import numpy.typing as npt

from .data_types import CheckReport
from .data_types import FiberVectorField
from .errors import InputError
from .models.base import EnergyModel
from .sg_core import z_eigenvalues
from .solvers.integrands import AnisotropicIntegrand
from .solvers.integrands import ConvexIntegrand
from .solvers.integrands import PowerIntegrand
from .utils import check_exponent
from .utils import conjugate_exponent
from .utils import fiber_norms
from .utils import make_rng
from .utils import safe_power

logger = logging.getLogger(__name__)

EXACT_TOLERANCE = 1e-12
DUALITY_TOLERANCE = 1e-10
CONVEXITY_TOLERANCE = 1e-10
CLARKSON_DISTANCES = (0.5, 1.0, 1.5)
DEFAULT_EXPONENTS = (1.5, 2.0, 3.0, 4.0)
RANK_DECAY_LEVELS = (2, 3, 4, 5, 6)


def random_field(model: EnergyModel, rng: np.random.Generator) -> FiberVectorField:
    return model.field(rng.standard_normal(len(model.row_fiber)))


def unit_field(
    model: EnergyModel, rng: np.random.Generator, p: float
) -> FiberVectorField:
    v = random_field(model, rng)
    return v * (1.0 / model.lp_field_norm(v, p))


def smooth_function(
    model: EnergyModel, rng: np.random.Generator
) -> npt.NDArray[np.float64]:
    """Random quadratic polynomial of the dof coordinates"""
    coordinates = model.coordinates
    size = coordinates.shape[1]
    linear = rng.standard_normal(size)
    quadratic = rng.standard_normal((size, size))
    return (
        rng.standard_normal()
        + coordinates @ linear
        + np.einsum("ni,ij,nj->n", coordinates, quadratic, coordinates)
    )


def _report(
    name: str,
    margins: list[float],
    seed: int,
    tolerance: float,
    label: str = "exact",
    table: typing.Sequence[dict[str, typing.Any]] = (),
    samples: int | None = None,
) -> CheckReport:
    worst = float(min(margins)) if margins else 0.0
    report = CheckReport(
        name=name,
        samples=len(margins) if samples is None else samples,
        worst_margin=worst,
        passed=worst >= -tolerance,
        seed=seed,
        tolerance=tolerance,
        label=label,
        table=tuple(table),
    )
    logger.debug("%s: worst margin %.3e passed=%s", name, worst, report.passed)
    return report


def check_markov(
    model: EnergyModel, samples: int = 1000, seed: int = 0, p: float = 2.0
) -> CheckReport:
    """E^(p)((0 v f) ^ 1) <= E^(p)(f) on random f

    Away from p = 2 this only holds when normal contractions lower Gamma on
    every fiber, so other models are rejected.
    """
    p = check_exponent(p)
    if p == 2.0:
        energy_of = model.base_energy
        name = "markov"
    elif model.difference_fibers:
        energy_of = functools.partial(model.p_energy, p=p)
        name = f"markov[p={p:g}]"
    else:
        raise InputError(
            f"Markov property of E^(p) at p={p:g} is not available on"
            f" the {model.MODEL_NAME} model, its fibers mix dof differences"
        )
    rng = make_rng(seed)
    margins = []
    for _ in range(samples):
        f = rng.standard_normal(model.dof_count) * rng.exponential(2.0)
        energy = energy_of(f)
        clamped = energy_of(np.clip(f, 0.0, 1.0))
        margins.append((energy - clamped) / (1.0 + energy))
    return _report(name, margins, seed, EXACT_TOLERANCE)


def check_clarkson(
    model: EnergyModel,
    p: float,
    samples: int = 200,
    seed: int = 0,
    distances: typing.Sequence[float] = CLARKSON_DISTANCES,
) -> CheckReport:
    """Empirical uniform convexity of the L^p field norm

    For every distance eps the table holds delta = 1 - max ratio of
    ||(u+v)/2||^p to (||u||^p + ||v||^p)/2 over sampled pairs with ||u||, ||v|| <= 1
    and ||u - v|| >= eps. The check passes when every delta is positive.
    """
    p = check_exponent(p)
    rng = make_rng(seed)
    worst_ratio = {eps: None for eps in distances}
    parallelogram = 0.0
    for index in range(samples):
        u = unit_field(model, rng, p) * rng.uniform(0.75, 1.0)
        if index == 0:
            v = u * -1.0
        else:
            mix = rng.uniform()
            v = u * -mix + unit_field(model, rng, p) * (1.0 - mix)
            v = v * (rng.uniform(0.5, 1.0) / max(model.lp_field_norm(v, p), 1e-300))
        norm_u = model.lp_field_norm(u, p)
        norm_v = model.lp_field_norm(v, p)
        midpoint = model.lp_field_norm((u + v) * 0.5, p)
        distance = model.lp_field_norm(u - v, p)
        ratio = midpoint**p / ((norm_u**p + norm_v**p) / 2.0)
        for eps in distances:
            if distance >= eps and (
                worst_ratio[eps] is None or ratio > worst_ratio[eps]
            ):
                worst_ratio[eps] = ratio
        if p == 2.0:
            half_difference = model.lp_field_norm((u - v) * 0.5, 2.0)
            error = abs(
                midpoint**2 + half_difference**2 - (norm_u**2 + norm_v**2) / 2.0
            )
            parallelogram = max(parallelogram, error)
    table = []
    margins = []
    for eps in distances:
        ratio = worst_ratio[eps]
        delta = None if ratio is None else 1.0 - ratio
        table.append(dict(eps=eps, delta=delta, max_ratio=ratio))
        if delta is not None:
            # strictly positive delta is required
            margins.append(delta if delta > 0 else -1.0)
    if p == 2.0:
        table.append(dict(parallelogram_error=parallelogram))
        margins.append(EXACT_TOLERANCE - parallelogram)
    return _report(
        f"clarkson[p={p:g}]",
        margins,
        seed,
        0.0,
        "empirical witness",
        table,
        samples=samples,
    )


def check_duality(
    model: EnergyModel, p: float, samples: int = 100, seed: int = 0
) -> CheckReport:
    """u_x = |v_x|^(q-2) v_x attains <v, u> = ||v||_q ||u||_p"""
    p = check_exponent(p)
    q = conjugate_exponent(p)
    rng = make_rng(seed)
    margins = []
    for index in range(samples):
        if index == 0:
            v = model.field(np.zeros(len(model.row_fiber)))
        elif index == 1:
            components = np.zeros(len(model.row_fiber))
            fiber_id = int(rng.integers(model.fiber_count))
            start = model.offsets[fiber_id]
            components[start : start + model.dims[fiber_id]] = rng.standard_normal(
                model.dims[fiber_id]
            )
            v = model.field(components)
        else:
            v = random_field(model, rng) * rng.exponential()
        norm_v = model.lp_field_norm(v, q)
        if norm_v == 0.0:
            margins.append(0.0)
            continue
        norms = fiber_norms(v.components, model.offsets)
        u = model.field(safe_power(norms, q - 2.0)[model.row_fiber] * v.components)
        attained = model.dual_pairing(v, u) / model.lp_field_norm(u, p)
        margins.append(-abs(attained - norm_v) / max(1.0, norm_v))
    return _report(f"duality[p={p:g}]", margins, seed, DUALITY_TOLERANCE)


def check_holder(
    model: EnergyModel, p: float, samples: int = 100, seed: int = 0
) -> CheckReport:
    """|<u, v>| <= ||u||_p ||v||_q"""
    p = check_exponent(p)
    q = conjugate_exponent(p)
    rng = make_rng(seed)
    margins = []
    for _ in range(samples):
        u = random_field(model, rng)
        v = random_field(model, rng)
        bound = model.lp_field_norm(u, p) * model.lp_field_norm(v, q)
        margins.append((bound - abs(model.dual_pairing(u, v))) / (1.0 + bound))
    return _report(f"holder[p={p:g}]", margins, seed, EXACT_TOLERANCE)


def check_polarization(model: EnergyModel, samples: int = 100, seed: int = 0) -> CheckReport:
    """Gamma(f, g) = (Gamma(f + g) - Gamma(f - g)) / 4 on every fiber"""
    rng = make_rng(seed)
    margins = []
    for _ in range(samples):
        f = rng.standard_normal(model.dof_count)
        g = rng.standard_normal(model.dof_count)
        direct = model.carre(f, g)
        polarized = (model.carre(f + g) - model.carre(f - g)) / 4.0
        scale = 1.0 + np.abs(model.carre(f)).max() + np.abs(model.carre(g)).max()
        margins.append(-float(np.abs(direct - polarized).max()) / scale)
    return _report("polarization", margins, seed, EXACT_TOLERANCE)


def check_integration_by_parts(
    model: EnergyModel, samples: int = 100, seed: int = 0
) -> CheckReport:
    """Adjointness <df, v> = <f, d*v> and the bound
    |<g df, d phi>| <= (|g|_inf |Lf|_inf + |Gamma f|_inf^(1/2) |Gamma g|_inf^(1/2)) |phi|_1
    on phi vanishing on the boundary
    """
    rng = make_rng(seed)
    interior = model.interior_mask
    adjoint_margins = []
    bound_margins = []
    for index in range(samples):
        f = rng.standard_normal(model.dof_count)
        v = random_field(model, rng)
        df = model.gradient(f)
        lhs = model.dual_pairing(df, v)
        rhs = float(f @ model.divergence(v))
        scale = 1.0 + float(model.row_weights @ np.abs(df.components * v.components))
        adjoint_margins.append(-abs(lhs - rhs) / scale)

        f = smooth_function(model, rng)
        g = smooth_function(model, rng)
        phi = np.zeros(model.dof_count)
        if index > 0:
            phi[interior] = rng.standard_normal(int(interior.sum()))
        pairing = model.dual_pairing(
            model.scale_field(g, model.gradient(f)), model.gradient(phi)
        )
        generator = np.abs(model.generator_apply(f)[interior]).max(initial=0.0)
        bound = (
            np.abs(g).max() * generator
            + np.sqrt(model.carre(f).max() * model.carre(g).max())
        ) * float(model.dof_mass @ np.abs(phi))
        bound_margins.append((bound - abs(pairing)) / (1.0 + bound))
    table = [
        dict(part="adjointness", worst_margin=float(min(adjoint_margins))),
        dict(part="bound", worst_margin=float(min(bound_margins))),
    ]
    adjoint_ok = min(adjoint_margins) >= -EXACT_TOLERANCE
    bound_ok = min(bound_margins) >= 0.0
    return CheckReport(
        name="integration_by_parts",
        samples=samples,
        worst_margin=float(min(min(adjoint_margins), min(bound_margins))),
        passed=bool(adjoint_ok and bound_ok),
        seed=seed,
        tolerance=EXACT_TOLERANCE,
        table=tuple(table),
    )


def _field_functional(
    model: EnergyModel, integrand: ConvexIntegrand, v: FiberVectorField
) -> float:
    return float(model.weights @ integrand.values(model, v.components))


def check_convexity(
    model: EnergyModel, integrand: ConvexIntegrand, samples: int = 100, seed: int = 0
) -> CheckReport:
    """I[tu + (1-t)v] <= t I[u] + (1-t) I[v] for I[v] = sum_x m_x f_x(v_x)"""
    rng = make_rng(seed)
    margins = []
    for _ in range(samples):
        u = random_field(model, rng) * rng.exponential()
        v = random_field(model, rng) * rng.exponential()
        t = rng.uniform()
        mixed = _field_functional(model, integrand, u * t + v * (1.0 - t))
        bound = t * _field_functional(model, integrand, u) + (
            1.0 - t
        ) * _field_functional(model, integrand, v)
        margins.append((bound - mixed) / (1.0 + abs(bound)))
    return _report(
        f"convexity[{integrand.NAME},p={integrand.p:g}]",
        margins,
        seed,
        CONVEXITY_TOLERANCE,
    )


def check_lower_semicontinuity(
    model: EnergyModel,
    integrand: ConvexIntegrand,
    samples: int = 20,
    seed: int = 0,
    length: int = 16,
    tail: int = 3,
) -> CheckReport:
    """I[v] <= liminf I[v_n] along v_n = v + 10^-n w, the liminf read off the tail"""
    rng = make_rng(seed)
    margins = []
    for _ in range(samples):
        v = random_field(model, rng) * rng.exponential()
        w = random_field(model, rng)
        limit = _field_functional(model, integrand, v)
        sequence = [
            _field_functional(model, integrand, v + w * 10.0**-n)
            for n in range(1, length + 1)
        ]
        margins.append((min(sequence[-tail:]) - limit) / (1.0 + abs(limit)))
    return _report(
        f"lower_semicontinuity[{integrand.NAME},p={integrand.p:g}]",
        margins,
        seed,
        CONVEXITY_TOLERANCE,
    )


def rank_decay_report(
    levels: typing.Sequence[int] = RANK_DECAY_LEVELS, seed: int = 0
) -> CheckReport:
    """Statistics of the smaller eigenvalue of Z_w per level

    Passes when every Z_w has trace 1 and nonnegative eigenvalues and the
    median at the finest level is below the median at the coarsest one.
    """
    levels = sorted(set(int(level) for level in levels))
    table = []
    medians = []
    structure_error = 0.0
    for level in levels:
        eigenvalues = z_eigenvalues(level)
        smaller = eigenvalues[:, 0]
        structure_error = max(
            structure_error,
            float(np.abs(eigenvalues.sum(axis=1) - 1.0).max()),
            float(-smaller.min()),
        )
        medians.append(float(np.median(smaller)))
        table.append(
            dict(
                level=level,
                cells=len(smaller),
                median=medians[-1],
                max=float(smaller.max()),
            )
        )
    decay = medians[0] - medians[-1] if len(medians) > 1 else 0.0
    passed = structure_error <= EXACT_TOLERANCE and (len(medians) < 2 or decay > 0)
    return CheckReport(
        name="rank_decay",
        samples=len(levels),
        worst_margin=float(decay if len(medians) > 1 else -structure_error),
        passed=bool(passed),
        seed=seed,
        tolerance=EXACT_TOLERANCE,
        label="empirical witness",
        table=tuple(table),
    )


def suite_checks(
    model: EnergyModel,
    ps: typing.Sequence[float] = DEFAULT_EXPONENTS,
    seeds: typing.Sequence[int] = (0,),
    samples: int = 100,
    rank_levels: typing.Sequence[int] | None = None,
) -> list[typing.Callable[[], CheckReport]]:
    checks = []
    for seed in seeds:
        checks.append(functools.partial(check_markov, model, samples * 10, seed))
        checks.append(functools.partial(check_polarization, model, samples, seed))
        checks.append(
            functools.partial(check_integration_by_parts, model, samples, seed)
        )
        for p in ps:
            if p != 2.0 and model.difference_fibers:
                checks.append(
                    functools.partial(check_markov, model, samples * 10, seed, p)
                )
            checks.append(functools.partial(check_clarkson, model, p, samples * 2, seed))
            checks.append(functools.partial(check_duality, model, p, samples, seed))
            checks.append(functools.partial(check_holder, model, p, samples, seed))
            for integrand in (PowerIntegrand(p=p), AnisotropicIntegrand(p=p)):
                checks.append(
                    functools.partial(check_convexity, model, integrand, samples, seed)
                )
                checks.append(
                    functools.partial(
                        check_lower_semicontinuity, model, integrand, samples // 5, seed
                    )
                )
    if rank_levels:
        checks.append(functools.partial(rank_decay_report, rank_levels, seeds[0]))
    return checks


def run_suite(
    model: EnergyModel,
    ps: typing.Sequence[float] = DEFAULT_EXPONENTS,
    seeds: typing.Sequence[int] = (0,),
    threads: int = 1,
    samples: int = 100,
    rank_levels: typing.Sequence[int] | None = None,
) -> list[CheckReport]:
    """Run every check, in parallel across checks, reports in a fixed order"""
    checks = suite_checks(model, ps, seeds, samples, rank_levels)
    # fill cached model matrices before the threads share the model
    model.stiffness
    model.fiber_pairs
    if threads <= 1:
        reports = [check() for check in checks]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
            reports = list(executor.map(lambda check: check(), checks))
    failed = [report.name for report in reports if not report.passed]
    if failed:
        logger.warning("Failed checks on the %s model: %s", model.name, failed)
    else:
        logger.info("All %s checks passed on the %s model", len(reports), model.name)
    return reports


def format_table(reports: typing.Sequence[CheckReport]) -> str:
    rows = [("check", "seed", "samples", "worst margin", "label", "result")]
    for report in reports:
        rows.append(
            (
                report.name,
                str(report.seed),
                str(report.samples),
                f"{report.worst_margin:.3e}",
                report.label,
                "pass" if report.passed else "FAIL",
            )
        )
    widths = [max(len(row[column]) for row in rows) for column in range(len(rows[0]))]
    lines = [
        "  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip()
        for row in rows
    ]
    lines.insert(1, "  ".join("-" * width for width in widths))
    return "\n".join(lines)
