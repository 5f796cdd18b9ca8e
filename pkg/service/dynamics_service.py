"""Time integration on the quadric surface and in flat space.

Curved systems use RATTLE on the single constraint <X,X>_eta = epsilon R0^2:
a Verlet position update corrected along X by a scalar multiplier, then a
velocity update projected back onto the tangent space. Flat systems use
kick-drift-kick velocity Verlet, or a drift-kick-drift splitting with a Boris
rotation when a monopole charge is present.
"""
import logging
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy.optimize import newton

from models.errors import LabError, NewtonDivergence, NotFound
from models.schemas import IntegratorConfig, PhasePoint, SpaceSpec, SystemSpec, Trajectory
from service.geometry_service import (
    check_phase_point,
    metric_dot,
    phase_distance,
    surface_residual,
    tangency_residual,
    tangent_project,
)
from service.potential_service import energy, monopole_field, potential_gradient
from utils.numeric_utils import local_minima, point_segment_distance

logger = logging.getLogger(__name__)

FlatState = Tuple[np.ndarray, np.ndarray]


def constrained_force(system: SystemSpec, X: np.ndarray) -> np.ndarray:
    """Ambient force vector -eta grad U (unprojected)"""
    return -system.space.eta * potential_gradient(system, X)


def _solve_multiplier(space: SpaceSpec, X: np.ndarray, Y: np.ndarray, cfg: IntegratorConfig) -> float:
    """Root c near 0 of <Y - cX, Y - cX>_eta = epsilon R0^2"""
    target = space.epsilon * space.r0 ** 2
    xx = metric_dot(space, X, X)
    xy = metric_dot(space, X, Y)
    yy_res = metric_dot(space, Y, Y) - target

    root, info = newton(
        lambda c: xx * c * c - 2.0 * xy * c + yy_res,
        0.0,
        fprime=lambda c: 2.0 * xx * c - 2.0 * xy,
        tol=cfg.newton_tol,
        maxiter=cfg.newton_max_iter,
        full_output=True,
        disp=False,
    )
    if not info.converged or not np.isfinite(root):
        raise NewtonDivergence(f"constraint multiplier did not converge in {cfg.newton_max_iter} iterations")
    return float(root)


def _rattle(
    system: SystemSpec,
    X: np.ndarray,
    P: np.ndarray,
    F: np.ndarray,
    dt: float,
    cfg: IntegratorConfig,
    force_fn: Callable[[SystemSpec, np.ndarray], np.ndarray] = constrained_force,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    space = system.space
    Y = X + dt * P + 0.5 * dt * dt * F
    c = _solve_multiplier(space, X, Y, cfg)
    X1 = Y - c * X
    F1 = force_fn(system, X1)
    P1 = (X1 - X) / dt + 0.5 * dt * F1
    P1 = tangent_project(space, X1, P1)
    return X1, P1, F1


def step_constrained(system: SystemSpec, ph: PhasePoint, cfg: IntegratorConfig) -> PhasePoint:
    """
    One RATTLE step of length cfg.dt.

    Args:
        system: Curved system
        ph: Valid phase point
        cfg: Step size and multiplier solve settings

    Returns:
        The phase point after one step; both constraints hold to round-off

    Raises:
        NewtonDivergence: the constraint multiplier solve failed
    """
    X, P = ph.X, ph.P
    X1, P1, _ = _rattle(system, X, P, constrained_force(system, X), cfg.dt, cfg)
    return PhasePoint.from_arrays(X1, P1)


def step_flat(system: SystemSpec, x: np.ndarray, p: np.ndarray, cfg: Union[IntegratorConfig, float]) -> FlatState:
    """
    One second-order, time-reversible flat step.

    Without a monopole this is kick-drift-kick velocity Verlet. With charge s
    the step is drift / (half electric kick, Boris rotation in B = s x / |x|^3,
    half electric kick) / drift, which keeps |p| exact under the magnetic part.
    """
    dt = cfg.dt if isinstance(cfg, IntegratorConfig) else float(cfg)
    s = system.charge
    if s == 0.0:
        p_half = p - 0.5 * dt * potential_gradient(system, x)
        x1 = x + dt * p_half
        return x1, p_half - 0.5 * dt * potential_gradient(system, x1)

    x_half = x + 0.5 * dt * p
    E = -potential_gradient(system, x_half)
    B = monopole_field(x_half, s)
    v_minus = p + 0.5 * dt * E
    t = 0.5 * dt * B
    s_vec = 2.0 * t / (1.0 + np.dot(t, t))
    v_prime = v_minus + np.cross(v_minus, t)
    v_plus = v_minus + np.cross(v_prime, s_vec)
    p1 = v_plus + 0.5 * dt * E
    return x_half + 0.5 * dt * p1, p1


def _diagnostics(system: SystemSpec, X: np.ndarray, P: np.ndarray) -> Tuple[float, float, float]:
    if system.is_flat:
        return energy(system, X, P), 0.0, 0.0
    space = system.space
    return energy(system, X, P), surface_residual(space, X), tangency_residual(space, X, P)


def simulate(
    system: SystemSpec,
    ph0: Union[PhasePoint, FlatState],
    cfg: IntegratorConfig,
) -> Trajectory:
    """
    Integrate cfg.n_steps steps and record every cfg.record_every-th sample and the last one.

    Args:
        system: Curved or flat system
        ph0: PhasePoint (curved) or an (x, p) pair (flat)
        cfg: Integrator settings

    Returns:
        Trajectory whose first sample is the initial state

    Raises:
        LabError: any step failure, tagged with the failing step index
    """
    flat = system.is_flat
    if flat:
        X, P = (np.asarray(v, dtype=float) for v in ph0)
    else:
        X, P = ph0.X, ph0.P
        check_phase_point(system.space, X, P)
        F = constrained_force(system, X)

    times: List[float] = [0.0]
    xs: List[np.ndarray] = [X.copy()]
    ps: List[np.ndarray] = [P.copy()]
    diag = [_diagnostics(system, X, P)]

    for k in range(1, cfg.n_steps + 1):
        try:
            if flat:
                X, P = step_flat(system, X, P, cfg.dt)
            else:
                X, P, F = _rattle(system, X, P, F, cfg.dt, cfg)
                check_phase_point(system.space, X, P)
        except LabError as e:
            e.step_index = k
            logger.error(f"step {k} failed: {e.detail}")
            raise
        if k % cfg.record_every == 0 or k == cfg.n_steps:
            times.append(k * cfg.dt)
            xs.append(X.copy())
            ps.append(P.copy())
            diag.append(_diagnostics(system, X, P))

    diag_arr = np.array(diag)
    return Trajectory(
        flat=flat,
        space=system.space,
        times=np.array(times),
        X=np.array(xs),
        P=np.array(ps),
        energy=diag_arr[:, 0],
        surface_res=diag_arr[:, 1],
        tangency_res=diag_arr[:, 2],
    )


def find_period_return(
    traj: Trajectory,
    ph0: Optional[Union[PhasePoint, FlatState]] = None,
    t_min: float = 0.5,
    threshold: float = 1e-4,
    p_scale: Optional[float] = None,
) -> Tuple[float, float]:
    """
    Earliest closed return of a trajectory to its initial state.

    The phase distance sqrt(|dX|^2/R0^2 + |dP|^2/p_scale^2) is scanned for local
    minima; each minimum is refined by the distance to the two sampled segments
    around it, with the time interpolated along the closer segment.

    Args:
        traj: Densely recorded trajectory
        ph0: Reference state, defaults to the first sample
        t_min: Returns at or before this time are ignored
        threshold: Largest accepted refined distance
        p_scale: Momentum scale, defaults to |P(0)| (1 when at rest)

    Returns:
        (time, distance) of the first accepted return

    Raises:
        NotFound: no minimum below threshold; carries the sorted minima table
    """
    if ph0 is None:
        X0, P0 = traj.X[0], traj.P[0]
    elif isinstance(ph0, PhasePoint):
        X0, P0 = ph0.X, ph0.P
    else:
        X0, P0 = (np.asarray(v, dtype=float) for v in ph0)

    length = 1.0 if traj.flat else traj.space.r0
    if p_scale is None:
        p_scale = float(np.linalg.norm(P0)) or 1.0
    scale = np.concatenate([np.full(len(X0), 1.0 / length), np.full(len(P0), 1.0 / p_scale)])

    z = np.hstack([traj.X, traj.P]) * scale
    z0 = np.concatenate([X0, P0]) * scale
    dist = np.array([phase_distance(X - X0, P - P0, length, p_scale) for X, P in zip(traj.X, traj.P)])

    minima = []
    for i in local_minima(dist):
        best_d, best_t = dist[i], traj.times[i]
        for j in (i - 1, i):
            a, b = z[j], z[j + 1]
            d_seg = point_segment_distance(z0, a, b)
            if d_seg < best_d:
                ab = b - a
                s = float(np.clip(np.dot(z0 - a, ab) / np.dot(ab, ab), 0.0, 1.0))
                best_d, best_t = d_seg, traj.times[j] + s * (traj.times[j + 1] - traj.times[j])
        minima.append({"t": float(best_t), "distance": float(best_d)})
        if best_t > t_min and best_d <= threshold:
            logger.info(f"closed return at t={best_t:.6f}, phase distance {best_d:.3e}")
            return float(best_t), float(best_d)

    table = sorted((m for m in minima if m["t"] > t_min), key=lambda m: m["distance"])[:10]
    raise NotFound(f"no return below {threshold:.1e} after t={t_min}", minima=table)
