import numpy as np

from models.schemas import CommandName, RunReport, Verdict
from routers.dependencies import RunContext, initial_state
from service.activity_service import ActivityHelpers, ActivityService, ActivityTypes
from service.dynamics_service import find_period_return, simulate
from service.geometry_service import phase_distance
from service.verdict_service import energy_summary, residual_summary
from utils.command_router import CommandRouter

router = CommandRouter()


@router.command(CommandName.CLOSURE)
def run_closure(ctx: RunContext) -> RunReport:
    """Find the earliest return of the trajectory to its initial phase point"""
    config = ctx.config
    spec = config.closure
    state = initial_state(config, ctx.seed)
    traj = simulate(ctx.system, state, config.integrator)
    ActivityHelpers.log_trajectory(len(traj), config.integrator.n_steps, traj.flat)

    length = 1.0 if traj.flat else traj.space.r0
    p_scale = spec.p_scale or (float(np.linalg.norm(traj.P[0])) or 1.0)
    distance = np.array(
        [phase_distance(X - traj.X[0], P - traj.P[0], length, p_scale) for X, P in zip(traj.X, traj.P)]
    )
    ctx.reporter.write_columns("distance.csv", ["t", "distance"], [traj.times, distance])

    report = ctx.new_report()
    report.n_samples = len(traj)
    report.energy = energy_summary(traj)
    if not traj.flat:
        report.residuals = residual_summary(traj)
    report.results = {"t_min": spec.t_min, "threshold": spec.threshold, "p_scale": p_scale}

    t_return, d_return = find_period_return(traj, t_min=spec.t_min, threshold=spec.threshold, p_scale=p_scale)
    ActivityService.log_activity(
        ActivityTypes.CLOSURE_FOUND,
        f"returned at t={t_return:.6f} with phase distance {d_return:.3e}",
        data={"t": t_return, "distance": d_return},
    )
    report.results.update({"return_time": t_return, "distance": d_return})
    report.verdicts["closure"] = Verdict.PASS if d_return <= config.bounds.closure_distance else Verdict.FAIL
    return report
