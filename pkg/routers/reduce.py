from typing import List

import numpy as np

from models.errors import ConfigError
from models.schemas import (
    FLAT_GENERATORS,
    CommandName,
    GeneratorKind,
    GeneratorSpec,
    KeplerImage,
    ReductionKind,
    RunReport,
    Verdict,
)
from routers.dependencies import RunContext, oscillator_state
from routers.drift import evaluate_generators
from service.activity_service import ActivityHelpers, ActivityService, ActivityTypes
from service.dynamics_service import simulate
from service.reduction_service import as_kepler_trajectory, pushforward_trajectory, velocity_residual
from service.verdict_service import energy_summary
from utils.command_router import CommandRouter

router = CommandRouter()

# Kepler-side time derivatives come from finite differences of sampled data
VELOCITY_TOLERANCE = 1e-2


def default_kepler_generators(image: KeplerImage, kepler_dim: int) -> List[GeneratorSpec]:
    """Runge-Lenz components for an undeformed image, the parabolic invariant otherwise"""
    deformed = image.cos_coefficient is not None or image.linear_coefficient is not None
    if deformed:
        generators = [GeneratorSpec(kind=GeneratorKind.FLAT_PARABOLIC_INVARIANT, axis=image.axis)]
    else:
        generators = [GeneratorSpec(kind=GeneratorKind.FLAT_RUNGE_LENZ, indices=[a]) for a in range(kepler_dim)]
    if kepler_dim == 3:
        generators.append(GeneratorSpec(kind=GeneratorKind.FLAT_ANGULAR_MOMENTUM, indices=[image.axis]))
    return generators


@router.command(CommandName.REDUCE)
def run_reduce(ctx: RunContext) -> RunReport:
    """Map an oscillator trajectory to its Kepler-side image and check the image's invariants"""
    config = ctx.config
    spec = config.reduction
    if spec is None:
        raise ConfigError("reduce needs a reduction section")
    system = ctx.system

    u, p_u = oscillator_state(config, spec, ctx.seed)
    osc = simulate(system, (u, p_u), config.integrator)
    ActivityHelpers.log_trajectory(len(osc), config.integrator.n_steps, True)
    ctx.reporter.write_trajectory(osc, "oscillator.csv")

    mapped = pushforward_trajectory(osc, spec, system)
    image = mapped.image
    kepler = image.system(spec.kepler_dim)
    kepler_traj = as_kepler_trajectory(mapped)
    ctx.reporter.write_mapped(mapped)
    ActivityService.log_activity(
        ActivityTypes.REDUCTION_MAPPED,
        f"{spec.kind.value}: {len(mapped)} samples mapped, gamma_eff={image.gamma_eff:.6g}",
        data={"terms": [t.kind.value for t in image.terms]},
    )
    if image.cos_printed_ratio is not None and abs(image.cos_printed_ratio - 1.0) > 1e-12:
        ActivityHelpers.log_coefficient_mismatch(image.cos_printed_ratio, image.conformal_factor)

    report = ctx.new_report()
    report.n_samples = len(mapped)
    report.energy = energy_summary(osc)
    report.conventions["reduction"] = {
        "kind": spec.kind.value,
        "conformal_factor": spec.conformal_factor,
        "momentum_map": "p_u = sqrt(c) L^T p_x",
        "time_map": "dt_K = 2 sqrt(c) |x| ds",
        "gamma_eff": image.gamma_eff,
        "kepler_energy": image.kepler_energy,
        "image_axis": image.axis,
        "fiber_momentum": spec.s,
        "monopole_charge": image.charge,
        "cos_printed_ratio": image.cos_printed_ratio,
    }

    generators = [g for g in config.generators if g.kind in FLAT_GENERATORS or g.kind == GeneratorKind.ENERGY]
    if not generators:
        generators = default_kepler_generators(image, spec.kepler_dim)
    verdicts = evaluate_generators(ctx, kepler_traj, kepler, generators, report, table="kepler_drift.csv")

    radius_scale = max(1.0, float(np.max(np.linalg.norm(mapped.x, axis=1))))
    radius_ok = float(np.max(mapped.radius_residual)) <= config.bounds.residual * radius_scale
    verdicts["radius_map"] = Verdict.PASS if radius_ok else Verdict.FAIL
    if spec.kind == ReductionKind.KS:
        fiber_dev = float(np.max(np.abs(mapped.fiber_momentum - spec.s)))
        report.results["max_fiber_deviation"] = fiber_dev
    vel_res = velocity_residual(mapped)
    verdicts["kepler_velocity"] = Verdict.PASS if vel_res <= VELOCITY_TOLERANCE else Verdict.FAIL
    report.verdicts = verdicts

    report.results.update(
        {
            "image": image.model_dump(mode="json"),
            "oscillator_energy": float(osc.energy[0]),
            "kepler_energy_mean": float(np.mean(mapped.kepler_energy)),
            "max_radius_residual": float(np.max(mapped.radius_residual)),
            "velocity_residual": vel_res,
            "final_kepler_time": float(mapped.kepler_time[-1]),
        }
    )
    return report
