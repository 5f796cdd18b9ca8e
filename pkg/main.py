import argparse
import logging
import sys
from typing import List, Optional

from models.errors import GradientCheckFailed, LabError, NotFound, VerdictFailed
from models.schemas import RunReport
from routers import closure, drift, gradcheck, reduce, simulate
from routers.dependencies import RunContext, get_run_context
from service.activity_service import ActivityHelpers, ActivityService, ActivityTypes
from service.verdict_service import failing
from settings import settings
from storage import close_store, current_store
from utils.command_router import CommandApp

logger = logging.getLogger(__name__)

app = CommandApp(
    title="higgslab",
    description="Numerical lab for hidden symmetries of oscillator and Kepler systems on spheres and pseudospheres",
    version="1.0.0",
)

# Include routers
app.include_router(simulate.router)
app.include_router(drift.router)
app.include_router(reduce.router)
app.include_router(gradcheck.router)
app.include_router(closure.router)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=app.title, description=app.description)
    parser.add_argument("--version", action="version", version=f"%(prog)s {app.version}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, route in app.routes.items():
        cmd = sub.add_parser(name, help=route.help)
        cmd.add_argument("--config", help="experiment config (JSON)")
        cmd.add_argument("--out", help=f"output directory (default {settings.output_dir}/<command>)")
        cmd.add_argument("--seed", type=int, help="seed of every random draw (default: config seed)")
        cmd.add_argument(
            "--override",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="set a config value before validation, e.g. integrator.dt=5e-4 (repeatable)",
        )
    return parser


def _error_report(ctx: RunContext, e: LabError) -> RunReport:
    report = ctx.report if ctx.report is not None else ctx.new_report()
    report.status = "error"
    report.exit_code = e.exit_code
    report.error = str(e)
    if e.step_index is not None:
        report.results["step_index"] = e.step_index
    if isinstance(e, NotFound):
        report.results["minima"] = e.minima
    if isinstance(e, GradientCheckFailed):
        report.results["worst"] = e.worst
    return report


def run(argv: Optional[List[str]] = None) -> int:
    """Run one command and return its exit code"""
    args = build_parser().parse_args(argv)
    route = app.get(args.command)
    ctx: Optional[RunContext] = None
    try:
        ctx = get_run_context(args.command, args.config, args.out, args.seed, args.override)
        report = route.handler(ctx)
        failed = failing(report.verdicts)
        if failed:
            raise VerdictFailed(f"verdicts failed: {', '.join(failed)}")
        ActivityService.log_activity(ActivityTypes.RUN_FINISHED, f"{args.command} finished, all verdicts hold")
        report.events = list(current_store().events)
        ctx.reporter.write_report(report)
        return 0
    except LabError as e:
        if e.step_index is not None:
            ActivityHelpers.log_step_failed(e.step_index, e.detail)
        ActivityService.log_activity(ActivityTypes.RUN_FAILED, f"{args.command} failed: {e}", level=logging.ERROR)
        store = current_store()
        if ctx is not None and store is not None:
            report = _error_report(ctx, e)
            report.events = list(store.events)
            ctx.reporter.write_report(report)
        else:
            print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    finally:
        close_store()


def main():
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    sys.exit(run())


if __name__ == "__main__":
    main()
