from typing import Dict, List

import numpy as np

from models.errors import ConfigError
from models.schemas import (
    CommandName,
    GeneratorKind,
    GeneratorSpec,
    RunReport,
    SystemSpec,
    Trajectory,
    Verdict,
)
from routers.dependencies import RunContext, initial_state
from service.activity_service import ActivityHelpers
from service.dynamics_service import simulate
from service.invariant_service import lock_runge_lenz_convention
from service.verdict_service import (
    energy_summary,
    judge_generator,
    residual_summary,
    trajectory_verdicts,
    unique_name,
    with_energy,
)
from utils.command_router import CommandRouter

router = CommandRouter()

_RUNGE_LENZ_KINDS = {GeneratorKind.RUNGE_LENZ, GeneratorKind.KEPLER_DEFORMED_INVARIANT}


def evaluate_generators(
    ctx: RunContext,
    traj: Trajectory,
    system: SystemSpec,
    generators: List[GeneratorSpec],
    report: RunReport,
    table: str = "drift.csv",
) -> Dict[str, Verdict]:
    """Judge every generator along traj, fill the report and write g(t) - g(0) per generator"""
    bounds = ctx.config.bounds
    verdicts: Dict[str, Verdict] = {}
    header: List[str] = ["t"]
    columns: List[np.ndarray] = [traj.times]
    for g in with_energy(generators):
        drift_report, verdict, values = judge_generator(traj, g, system, bounds, ctx.config.expect_fail)
        name = unique_name(drift_report.name, verdicts)
        drift_report.name = name
        verdicts[name] = verdict
        report.drift.append(drift_report)
        header.append(name)
        columns.append(values - values[0])
    ctx.reporter.write_columns(table, header, columns)
    return verdicts


@router.command(CommandName.DRIFT)
def run_drift(ctx: RunContext) -> RunReport:
    """Measure how well the configured generators are conserved"""
    config = ctx.config
    if not config.generators:
        raise ConfigError("drift needs at least one generator")
    system = ctx.system

    report = ctx.new_report()
    if not system.is_flat and any(g.kind in _RUNGE_LENZ_KINDS for g in config.generators):
        convention = lock_runge_lenz_convention(system.space.epsilon)
        ActivityHelpers.log_convention(convention)
        report.conventions["runge_lenz"] = convention

    traj = simulate(system, initial_state(config, ctx.seed), config.integrator)
    ActivityHelpers.log_trajectory(len(traj), config.integrator.n_steps, traj.flat)
    ctx.reporter.write_trajectory(traj)

    report.n_samples = len(traj)
    report.energy = energy_summary(traj)
    if not traj.flat:
        report.residuals = residual_summary(traj)
    verdicts = trajectory_verdicts(traj, config.bounds)
    verdicts.update(evaluate_generators(ctx, traj, system, config.generators, report))
    report.verdicts = verdicts
    if config.expect_fail:
        report.results["expected_fail_min"] = config.bounds.expected_fail_min
    return report
