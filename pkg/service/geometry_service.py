from typing import Optional

import numpy as np

from models.errors import ChartViolation, ConfigError, ConstraintViolation
from models.schemas import AmbientPoint, PhasePoint, SpaceSpec


def metric_dot(space: SpaceSpec, a: np.ndarray, b: np.ndarray) -> float:
    """
    Ambient pairing <a, b>_eta with eta = diag(1, ..., 1, epsilon).

    Args:
        space: Surface the vectors live over
        a, b: (d+1)-vectors ordered (spatial..., 0-component)

    Returns:
        a.b over the spatial part plus epsilon * a0 * b0
    """
    return float(np.dot(a[:-1], b[:-1]) + space.epsilon * a[-1] * b[-1])


def lift_to_surface(space: SpaceSpec, x: np.ndarray) -> AmbientPoint:
    """
    Complete a spatial position to an ambient point on the upper chart (x0 > 0).

    Args:
        space: Target surface
        x: d-vector of spatial coordinates

    Returns:
        AmbientPoint with x0 = sqrt(R0^2 - epsilon * x.x)

    Raises:
        ChartViolation: on the sphere when x.x >= R0^2
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (space.d,):
        raise ChartViolation(f"expected {space.d} spatial components, got shape {x.shape}")
    x0_sq = space.r0 ** 2 - space.epsilon * float(np.dot(x, x))
    if x0_sq <= 0.0:
        raise ChartViolation(f"|x|^2 = {np.dot(x, x):.6g} is outside the north chart of radius {space.r0}")
    return AmbientPoint(x=x, x0=float(np.sqrt(x0_sq)))


def tangent_project(space: SpaceSpec, X: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Remove the eta-normal component of v at the ambient point X"""
    return v - (metric_dot(space, X, v) / metric_dot(space, X, X)) * X


def make_phase_point(space: SpaceSpec, x: np.ndarray, p: np.ndarray) -> PhasePoint:
    """
    Build a valid phase point from spatial data.

    The 0-components follow from the constraints: x0 by lifting, p0 from
    x.p + epsilon * x0 * p0 = 0.
    """
    q = lift_to_surface(space, x)
    p = np.asarray(p, dtype=float)
    p0 = -space.epsilon * float(np.dot(q.x, p)) / q.x0
    return PhasePoint(q=q, p=p, p0=p0)


def random_phase_point(
    space: SpaceSpec,
    seed: int,
    momentum_scale: float,
    cap: float = 0.5,
) -> PhasePoint:
    """
    Deterministic random phase point.

    Args:
        space: Target surface
        seed: Seed of numpy's default generator
        momentum_scale: Standard deviation of the raw ambient momentum draw
        cap: Positions are uniform in the chart ball |x| <= cap * R0

    Returns:
        PhasePoint obeying both constraints to round-off
    """
    if momentum_scale <= 0:
        raise ConfigError("momentum_scale must be positive")
    if space.epsilon == 1 and cap >= 1.0:
        raise ChartViolation(f"cap {cap} reaches the equator of the sphere")
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=space.d)
    direction /= np.linalg.norm(direction)
    radius = cap * space.r0 * rng.uniform() ** (1.0 / space.d)
    q = lift_to_surface(space, radius * direction)
    X = q.X
    P = tangent_project(space, X, momentum_scale * rng.normal(size=space.d + 1))
    # Second pass removes the round-off left by the first projection
    P = tangent_project(space, X, P)
    return PhasePoint(q=q, p=P[:-1], p0=float(P[-1]))


def random_flat_point(dim: int, seed: int, momentum_scale: float, cap: float = 0.5, r_min: float = 0.0):
    """Seeded flat (x, p) pair with r_min <= |x| <= cap"""
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)
    radius = r_min + (cap - r_min) * rng.uniform() ** (1.0 / dim)
    return radius * direction, momentum_scale * rng.normal(size=dim)


def surface_residual(space: SpaceSpec, X: np.ndarray) -> float:
    """|epsilon x.x + x0^2 - R0^2|, i.e. |<X,X>_eta - epsilon R0^2| up to the sign epsilon"""
    return abs(space.epsilon * float(np.dot(X[:-1], X[:-1])) + X[-1] ** 2 - space.r0 ** 2)


def tangency_residual(space: SpaceSpec, X: np.ndarray, P: np.ndarray) -> float:
    return abs(metric_dot(space, X, P))


def tangency_scale(space: SpaceSpec, P: np.ndarray) -> float:
    return max(1.0, float(np.linalg.norm(P[:-1])) * space.r0)


def check_phase_point(space: SpaceSpec, X: np.ndarray, P: np.ndarray, tol: Optional[float] = None) -> None:
    """
    Raise ConstraintViolation unless (X, P) lies on the surface and is tangent.

    Args:
        tol: relative tolerance, defaults to the space's ctol
    """
    tol = space.ctol if tol is None else tol
    s_res = surface_residual(space, X)
    if s_res > tol * space.r0 ** 2:
        raise ConstraintViolation(f"surface residual {s_res:.3e} exceeds {tol:.1e} * R0^2")
    if space.epsilon == -1 and X[-1] < space.r0 * (1.0 - tol):
        raise ConstraintViolation(f"x0 = {X[-1]:.6g} is not on the upper sheet")
    t_res = tangency_residual(space, X, P)
    if t_res > tol * tangency_scale(space, P):
        raise ConstraintViolation(f"tangency residual {t_res:.3e} exceeds tolerance")


def phase_distance(
    dX: np.ndarray,
    dP: np.ndarray,
    length_scale: float = 1.0,
    p_scale: float = 1.0,
) -> float:
    """Chart-free distance sqrt(|dX|^2 / L^2 + |dP|^2 / p_scale^2) on ambient (or flat) data"""
    return float(np.sqrt(np.dot(dX, dX) / length_scale ** 2 + np.dot(dP, dP) / p_scale ** 2))
