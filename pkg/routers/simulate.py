from models.schemas import CommandName, RunReport
from routers.dependencies import RunContext, initial_state
from service.activity_service import ActivityHelpers
from service.dynamics_service import simulate
from service.verdict_service import energy_summary, residual_summary, trajectory_verdicts
from utils.command_router import CommandRouter

router = CommandRouter()


@router.command(CommandName.SIMULATE)
def run_simulate(ctx: RunContext) -> RunReport:
    """Integrate the configured system and write its trajectory"""
    config = ctx.config
    traj = simulate(ctx.system, initial_state(config, ctx.seed), config.integrator)
    ActivityHelpers.log_trajectory(len(traj), config.integrator.n_steps, traj.flat)
    ctx.reporter.write_trajectory(traj)

    report = ctx.new_report()
    report.n_samples = len(traj)
    report.energy = energy_summary(traj)
    if not traj.flat:
        report.residuals = residual_summary(traj)
    report.verdicts = trajectory_verdicts(traj, config.bounds)
    report.results = {"final_time": float(traj.times[-1])}
    return report
