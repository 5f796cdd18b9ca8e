import logging
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from models.errors import GradientCheckFailed
from models.schemas import (
    BLOCK_KINDS,
    CURVED_KINDS,
    CommandName,
    Couplings,
    PotentialKind,
    PotentialTerm,
    RunReport,
    SpaceSpec,
    TMatrix,
    Verdict,
)
from routers.dependencies import RunContext
from service.activity_service import ActivityService, ActivityTypes
from service.geometry_service import random_flat_point, random_phase_point
from service.potential_service import gradient, value
from settings import settings
from utils.command_router import CommandRouter
from utils.numeric_utils import central_difference_gradient, relative_error

logger = logging.getLogger(__name__)

router = CommandRouter()

GradientFn = Callable[[PotentialTerm, np.ndarray, Optional[SpaceSpec]], np.ndarray]

# Generic couplings exercising every coefficient of every term
CATALOG_COUPLINGS = Couplings(omega2=1.3, dOmega2=0.4, eps_el=0.2, gamma=0.8, s=0.7)

# (label, term, space or None, flat dimension)
Case = Tuple[str, PotentialTerm, Optional[SpaceSpec], int]


def _catalog_term(kind: PotentialKind, d: int) -> PotentialTerm:
    t = None
    if kind in (PotentialKind.CURVED_ANISOTROPIC, PotentialKind.CURVED_NONLINEAR):
        t = TMatrix.diag([1.0] + [-1.0] * (d - 1))
    return PotentialTerm(kind=kind, couplings=CATALOG_COUPLINGS, t=t)


def catalog_cases(kinds: Optional[List[PotentialKind]], r0: float = 1.0) -> List[Case]:
    """One case per flat kind and per curved kind on each surface, all in dimension 3 (block kinds in 4)"""
    cases: List[Case] = []
    for kind in PotentialKind:
        if kinds is not None and kind not in kinds:
            continue
        if kind in CURVED_KINDS:
            for epsilon in (1, -1):
                space = SpaceSpec(epsilon=epsilon, d=3, r0=r0)
                cases.append((f"{kind.value}(eps={epsilon:+d})", _catalog_term(kind, 3), space, 3))
        if kind not in CURVED_KINDS or kind == PotentialKind.MONOPOLE_CENTRIFUGAL:
            dim = 4 if kind in BLOCK_KINDS else 3
            cases.append((f"{kind.value}(flat)" if kind in CURVED_KINDS else kind.value, _catalog_term(kind, dim), None, dim))
    return cases


def system_cases(ctx: RunContext) -> List[Case]:
    system = ctx.system
    kinds = ctx.config.gradcheck.kinds
    cases: List[Case] = []
    for i, term in enumerate(system.terms):
        if kinds is None or term.kind in kinds:
            cases.append((f"{i}:{term.kind.value}", term, system.space, system.dimension))
    return cases


def sample_points(space: Optional[SpaceSpec], dim: int, n: int, seed: int) -> List[np.ndarray]:
    """Seeded evaluation points away from the equator and origin floors"""
    seeds = np.random.default_rng(seed).integers(0, 2 ** 31 - 1, size=n)
    points = []
    for s in seeds:
        if space is None:
            x, _ = random_flat_point(dim, int(s), 1.0, cap=1.5, r_min=0.2)
            points.append(x)
        else:
            cap = 0.9 if space.epsilon == 1 else 2.0
            points.append(random_phase_point(space, int(s), 1.0, cap).X)
    return points


def max_gradient_error(
    term: PotentialTerm,
    space: Optional[SpaceSpec],
    points: List[np.ndarray],
    gradient_fn: GradientFn = gradient,
) -> Dict[str, object]:
    """
    Largest relative error between an analytic gradient and central differences.

    Curved terms are differentiated as functions of the ambient coordinates.
    """
    worst = {"error": -1.0, "index": -1, "point": None, "analytic": None, "numeric": None}
    for i, X in enumerate(points):
        h = 1e-6 * max(min(float(np.linalg.norm(X[:-1] if space else X)), space.r0 if space else 1.0), 1e-3)
        numeric = central_difference_gradient(lambda Y: value(term, Y, space), X, h)
        analytic = gradient_fn(term, X, space)
        err = relative_error(analytic, numeric, settings.gradient_floor)
        if err > worst["error"]:
            worst = {
                "error": err,
                "index": i,
                "point": X.tolist(),
                "analytic": np.asarray(analytic).tolist(),
                "numeric": numeric.tolist(),
            }
    return worst


@router.command(CommandName.GRADCHECK)
def run_gradcheck(ctx: RunContext, gradient_fn: GradientFn = gradient) -> RunReport:
    """Compare every analytic potential gradient with central finite differences"""
    config = ctx.config
    spec = config.gradcheck
    cases = system_cases(ctx) if ctx.system.terms else catalog_cases(
        spec.kinds, ctx.system.space.r0 if ctx.system.space else 1.0
    )
    bound = config.bounds.gradient

    report = ctx.new_report()
    rows = []
    table: Dict[str, Dict[str, object]] = {}
    for label, term, space, dim in cases:
        points = sample_points(space, dim, spec.n_points, ctx.seed)
        worst = max_gradient_error(term, space, points, gradient_fn)
        table[label] = worst
        report.verdicts[label] = Verdict.PASS if worst["error"] <= bound else Verdict.FAIL
        rows.append([label, worst["error"], float(worst["index"])])
        logger.info(f"{label}: max relative gradient error {worst['error']:.3e}")

    ctx.reporter.write_table("gradcheck.csv", ["term", "max_rel_error", "worst_index"], rows)
    report.n_samples = spec.n_points
    report.results = {"bound": bound, "n_points": spec.n_points, "terms": table}
    ActivityService.log_activity(
        ActivityTypes.GRADIENT_CHECKED,
        f"{len(cases)} terms checked at {spec.n_points} points",
        data={"max_error": max((w["error"] for w in table.values()), default=0.0)},
    )

    failed = {label: w for label, w in table.items() if w["error"] > bound}
    if failed:
        label, worst = max(failed.items(), key=lambda kv: kv[1]["error"])
        raise GradientCheckFailed(
            f"{len(failed)} term(s) exceed {bound:.1e}; worst {label} with error {worst['error']:.3e} "
            f"at point {worst['point']}",
            worst={"term": label, **worst},
        )
    return report
