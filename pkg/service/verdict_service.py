from typing import Dict, List, Tuple

import numpy as np

from models.schemas import (
    FITTABLE_GENERATORS,
    Bounds,
    DriftReport,
    EnergySummary,
    GeneratorKind,
    GeneratorSpec,
    ResidualSummary,
    SystemSpec,
    Trajectory,
    Verdict,
)
from service.activity_service import ActivityHelpers
from service.invariant_service import drift, drift_series, energy_scale, fit_correction_coefficients

FAILING_VERDICTS = {Verdict.FAIL, Verdict.UNEXPECTED_PASS}


def energy_summary(traj: Trajectory) -> EnergySummary:
    e0 = float(traj.energy[0])
    max_abs = float(np.max(np.abs(traj.energy - e0)))
    return EnergySummary(initial=e0, max_abs=max_abs, max_rel=max_abs / max(abs(e0), 1e-6 * energy_scale(traj)))


def residual_summary(traj: Trajectory) -> ResidualSummary:
    return ResidualSummary(
        max_surface=float(np.max(traj.surface_res)),
        max_tangency=float(np.max(traj.tangency_res)),
    )


def trajectory_verdicts(traj: Trajectory, bounds: Bounds) -> Dict[str, Verdict]:
    """Energy and constraint verdicts of a recorded trajectory"""
    verdicts = {"energy": Verdict.PASS if energy_summary(traj).max_rel <= bounds.energy else Verdict.FAIL}
    if not traj.flat:
        res = residual_summary(traj)
        r0 = traj.space.r0
        ok = res.max_surface <= bounds.residual * r0 ** 2 and res.max_tangency <= bounds.residual * max(
            1.0, float(np.max(np.abs(traj.P))) * r0
        )
        verdicts["constraints"] = Verdict.PASS if ok else Verdict.FAIL
    return verdicts


def with_energy(generators: List[GeneratorSpec]) -> List[GeneratorSpec]:
    """The generator list with the Energy generator first, added when missing"""
    if any(g.kind == GeneratorKind.ENERGY for g in generators):
        return list(generators)
    return [GeneratorSpec(kind=GeneratorKind.ENERGY), *generators]


def judge_generator(
    traj: Trajectory,
    g: GeneratorSpec,
    system: SystemSpec,
    bounds: Bounds,
    expect_fail: bool = False,
) -> Tuple[DriftReport, Verdict, np.ndarray]:
    """
    Drift of one generator and its verdict.

    A generator with printed correction coefficients that misses the bound is
    refitted; the run is then flagged when the fitted coefficients meet the
    bound and failed otherwise. Under expect_fail every generator except the
    energy must drift by at least bounds.expected_fail_min.

    Returns:
        (report, verdict, generator values at every sample)
    """
    values = drift_series(traj, g, system)
    report = drift(traj, g, system, values)
    is_energy = g.kind == GeneratorKind.ENERGY
    bound = bounds.energy if is_energy else bounds.drift

    if expect_fail and not is_energy:
        verdict = Verdict.EXPECTED_FAIL if report.max_rel >= bounds.expected_fail_min else Verdict.UNEXPECTED_PASS
        if verdict == Verdict.EXPECTED_FAIL:
            ActivityHelpers.log_expected_failure(report.name, report.max_rel, bounds.expected_fail_min)
    elif report.max_rel <= bound:
        verdict = Verdict.PASS
    elif g.kind in FITTABLE_GENERATORS and g.coefficients is None:
        fit = fit_correction_coefficients(traj, g, system)
        report.fit = fit
        ActivityHelpers.log_fit_fallback(report.name, fit.printed, fit.fitted, fit.fitted_max_rel)
        verdict = Verdict.FLAGGED if fit.fitted_max_rel <= bound else Verdict.FAIL
    else:
        verdict = Verdict.FAIL

    ActivityHelpers.log_drift(report.name, report.max_rel, verdict.value)
    return report, verdict, values


def failing(verdicts: Dict[str, Verdict]) -> List[str]:
    return [name for name, v in verdicts.items() if v in FAILING_VERDICTS]


def unique_name(name: str, taken: Dict[str, Verdict]) -> str:
    if name not in taken:
        return name
    k = 2
    while f"{name}_{k}" in taken:
        k += 1
    return f"{name}_{k}"
