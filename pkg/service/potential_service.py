from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from models.errors import EquatorSingularity, OriginSingularity, UnsupportedTerm
from models.schemas import (
    AmbientPoint,
    Couplings,
    PhasePoint,
    PotentialKind,
    PotentialTerm,
    SpaceSpec,
    SystemSpec,
    TMatrix,
)
from settings import settings

Point = Union[AmbientPoint, np.ndarray]


def _ambient(q: Point) -> np.ndarray:
    return q.X if isinstance(q, AmbientPoint) else np.asarray(q, dtype=float)


def _x0_checked(space: SpaceSpec, X: np.ndarray) -> float:
    x0 = X[-1]
    if abs(x0) <= settings.x0_floor_rel * space.r0:
        raise EquatorSingularity(f"|x0| = {abs(x0):.3e} is inside the equator floor")
    return x0


def _r_checked(space: SpaceSpec, X: np.ndarray) -> float:
    r = float(np.linalg.norm(X[:-1]))
    if r <= settings.r_floor_rel * space.r0:
        raise OriginSingularity(f"|x| = {r:.3e} is inside the origin floor")
    return r


def _flat_r_checked(x: np.ndarray) -> float:
    r = float(np.linalg.norm(x))
    if r <= settings.flat_r_floor:
        raise OriginSingularity(f"|x| = {r:.3e} is inside the origin floor")
    return r


def _unit(n: int, axis: int) -> np.ndarray:
    e = np.zeros(n)
    e[axis] = 1.0
    return e


# Curved terms: values

def v_curved_higgs(space: SpaceSpec, q: Point, c: Couplings) -> float:
    """(omega^2 R0^2 / 2) x.x / x0^2"""
    X = _ambient(q)
    x0 = _x0_checked(space, X)
    x = X[:-1]
    return 0.5 * c.omega2 * space.r0 ** 2 * float(np.dot(x, x)) / x0 ** 2


def v_curved_anisotropic(space: SpaceSpec, q: Point, c: Couplings, t: TMatrix) -> float:
    x = _ambient(q)[:-1]
    return 0.5 * c.dOmega2 * float(x @ t.matrix @ x)


def v_curved_nonlinear(space: SpaceSpec, q: Point, c: Couplings, t: TMatrix) -> float:
    """eps_el R0^2 (R0^2 + x0^2) / x0^4 (x.x)(x.Tx)"""
    X = _ambient(q)
    x0 = _x0_checked(space, X)
    x = X[:-1]
    r0_sq = space.r0 ** 2
    return c.eps_el * r0_sq * (r0_sq + x0 ** 2) / x0 ** 4 * float(np.dot(x, x)) * float(x @ t.matrix @ x)


def v_curved_kepler(space: SpaceSpec, q: Point, c: Couplings) -> float:
    X = _ambient(q)
    r = _r_checked(space, X)
    return -c.gamma / space.r0 * X[-1] / r


def v_curved_stark(space: SpaceSpec, q: Point, c: Couplings, axis: int) -> float:
    X = _ambient(q)
    return c.eps_el * X[-1] / space.r0 * X[axis]


def v_curved_cos(space: SpaceSpec, q: Point, c: Couplings, axis: int) -> float:
    """(dOmega^2 / 2) cos(theta), theta measured from the axis"""
    X = _ambient(q)
    r = _r_checked(space, X)
    return 0.5 * c.dOmega2 * X[axis] / r


def v_curved_kepler_deformed(space: SpaceSpec, q: Point, c: Couplings, axis: int) -> float:
    X = _ambient(q)
    r = _r_checked(space, X)
    x0, xa = X[-1], X[axis]
    return 0.5 * c.dOmega2 * (xa / r + space.epsilon * x0 * xa / space.r0 ** 2) + c.eps_el * x0 * xa / space.r0


def v_curved_monopole(space: SpaceSpec, q: Point, c: Couplings) -> float:
    """Centrifugal companion of a monopole on the surface: (s^2/2) x0^2 / (R0^2 x.x)"""
    X = _ambient(q)
    r = _r_checked(space, X)
    return 0.5 * c.s ** 2 * X[-1] ** 2 / (space.r0 ** 2 * r ** 2)


# Curved terms: ambient gradients, (d+1)-vectors

def _g_curved_higgs(space, X, term):
    x0 = _x0_checked(space, X)
    x = X[:-1]
    k = term.couplings.omega2 * space.r0 ** 2
    return np.append(k * x / x0 ** 2, -k * np.dot(x, x) / x0 ** 3)


def _g_curved_anisotropic(space, X, term):
    x = X[:-1]
    return np.append(term.couplings.dOmega2 * (term.t.matrix @ x), 0.0)


def _g_curved_nonlinear(space, X, term):
    x0 = _x0_checked(space, X)
    x = X[:-1]
    T = term.t.matrix
    r0_sq = space.r0 ** 2
    k = term.couplings.eps_el * r0_sq
    f = (r0_sq + x0 ** 2) / x0 ** 4
    df = -4.0 * r0_sq / x0 ** 5 - 2.0 / x0 ** 3
    q, s = float(np.dot(x, x)), float(x @ T @ x)
    return np.append(k * f * (2.0 * s * x + 2.0 * q * (T @ x)), k * df * q * s)


def _g_curved_kepler(space, X, term):
    r = _r_checked(space, X)
    k = term.couplings.gamma / space.r0
    return np.append(k * X[-1] * X[:-1] / r ** 3, -k / r)


def _g_curved_stark(space, X, term):
    axis = term.axis_index(space.d)
    k = term.couplings.eps_el / space.r0
    return np.append(k * X[-1] * _unit(space.d, axis), k * X[axis])


def _cos_gradient(x: np.ndarray, r: float, axis: int, k: float) -> np.ndarray:
    return k * (_unit(len(x), axis) / r - x[axis] * x / r ** 3)


def _g_curved_cos(space, X, term):
    r = _r_checked(space, X)
    axis = term.axis_index(space.d)
    return np.append(_cos_gradient(X[:-1], r, axis, 0.5 * term.couplings.dOmega2), 0.0)


def _g_curved_kepler_deformed(space, X, term):
    r = _r_checked(space, X)
    axis = term.axis_index(space.d)
    c = term.couplings
    x0, xa = X[-1], X[axis]
    e = _unit(space.d, axis)
    k = 0.5 * c.dOmega2 * space.epsilon / space.r0 ** 2 + c.eps_el / space.r0
    grad_x = _cos_gradient(X[:-1], r, axis, 0.5 * c.dOmega2) + k * x0 * e
    return np.append(grad_x, k * xa)


def _g_curved_monopole(space, X, term):
    r = _r_checked(space, X)
    k = term.couplings.s ** 2 / space.r0 ** 2
    return np.append(-k * X[-1] ** 2 * X[:-1] / r ** 4, k * X[-1] / r ** 2)


CURVED_VALUES: Dict[PotentialKind, Callable] = {
    PotentialKind.CURVED_HIGGS: lambda sp, X, tm: v_curved_higgs(sp, X, tm.couplings),
    PotentialKind.CURVED_ANISOTROPIC: lambda sp, X, tm: v_curved_anisotropic(sp, X, tm.couplings, tm.t),
    PotentialKind.CURVED_NONLINEAR: lambda sp, X, tm: v_curved_nonlinear(sp, X, tm.couplings, tm.t),
    PotentialKind.CURVED_KEPLER: lambda sp, X, tm: v_curved_kepler(sp, X, tm.couplings),
    PotentialKind.CURVED_STARK: lambda sp, X, tm: v_curved_stark(sp, X, tm.couplings, tm.axis_index(sp.d)),
    PotentialKind.CURVED_COS: lambda sp, X, tm: v_curved_cos(sp, X, tm.couplings, tm.axis_index(sp.d)),
    PotentialKind.CURVED_KEPLER_DEFORMED: lambda sp, X, tm: v_curved_kepler_deformed(
        sp, X, tm.couplings, tm.axis_index(sp.d)
    ),
    PotentialKind.MONOPOLE_CENTRIFUGAL: lambda sp, X, tm: v_curved_monopole(sp, X, tm.couplings),
}


CURVED_GRADIENTS: Dict[PotentialKind, Callable] = {
    PotentialKind.CURVED_HIGGS: _g_curved_higgs,
    PotentialKind.CURVED_ANISOTROPIC: _g_curved_anisotropic,
    PotentialKind.CURVED_NONLINEAR: _g_curved_nonlinear,
    PotentialKind.CURVED_KEPLER: _g_curved_kepler,
    PotentialKind.CURVED_STARK: _g_curved_stark,
    PotentialKind.CURVED_COS: _g_curved_cos,
    PotentialKind.CURVED_KEPLER_DEFORMED: _g_curved_kepler_deformed,
    PotentialKind.MONOPOLE_CENTRIFUGAL: _g_curved_monopole,
}


# Flat terms

def _blocks(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    p = len(x) // 2
    return x[:p], x[p:]


def v_flat_term(kind: PotentialKind, x: np.ndarray, c: Couplings, t: Optional[TMatrix] = None, axis: Optional[int] = None) -> float:
    """
    Value of a flat-space term.

    Args:
        kind: One of the flat kinds
        x: d-vector; block kinds read it as (first p, last p)
        c: Couplings of the term
        t: Unused by the flat kinds, whose involution is the fixed block sign
        axis: Distinguished index for FlatLinear/FlatCos (default last)

    Returns:
        The term's value at x
    """
    x = np.asarray(x, dtype=float)
    axis = len(x) - 1 if axis is None else axis
    if kind == PotentialKind.FLAT_OSCILLATOR:
        return 0.5 * c.omega2 * float(np.dot(x, x))
    if kind == PotentialKind.FLAT_ANISOTROPIC:
        a, b = _blocks(x)
        return 0.5 * c.dOmega2 * float(np.dot(a, a) - np.dot(b, b))
    if kind == PotentialKind.FLAT_QUARTIC:
        a, b = _blocks(x)
        return -2.0 * c.eps_el * (float(np.dot(a, a)) ** 2 - float(np.dot(b, b)) ** 2)
    if kind == PotentialKind.FLAT_KEPLER:
        return -c.gamma / _flat_r_checked(x)
    if kind == PotentialKind.FLAT_LINEAR:
        return c.eps_el * x[axis]
    if kind == PotentialKind.FLAT_COS:
        return 0.25 * c.dOmega2 * x[axis] / _flat_r_checked(x)
    if kind == PotentialKind.MONOPOLE_CENTRIFUGAL:
        return 0.5 * c.s ** 2 / _flat_r_checked(x) ** 2
    raise UnsupportedTerm(f"{kind.value} is not a flat potential term")


def g_flat_term(kind: PotentialKind, x: np.ndarray, c: Couplings, axis: Optional[int] = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = len(x)
    axis = n - 1 if axis is None else axis
    if kind == PotentialKind.FLAT_OSCILLATOR:
        return c.omega2 * x
    if kind == PotentialKind.FLAT_ANISOTROPIC:
        p = n // 2
        return c.dOmega2 * np.concatenate([x[:p], -x[p:]])
    if kind == PotentialKind.FLAT_QUARTIC:
        a, b = _blocks(x)
        return -8.0 * c.eps_el * np.concatenate([np.dot(a, a) * a, -np.dot(b, b) * b])
    if kind == PotentialKind.FLAT_KEPLER:
        r = _flat_r_checked(x)
        return c.gamma * x / r ** 3
    if kind == PotentialKind.FLAT_LINEAR:
        return c.eps_el * _unit(n, axis)
    if kind == PotentialKind.FLAT_COS:
        r = _flat_r_checked(x)
        return _cos_gradient(x, r, axis, 0.25 * c.dOmega2)
    if kind == PotentialKind.MONOPOLE_CENTRIFUGAL:
        r = _flat_r_checked(x)
        return -c.s ** 2 * x / r ** 4
    raise UnsupportedTerm(f"{kind.value} is not a flat potential term")


# Dispatch over terms and systems

def value(term: PotentialTerm, point: np.ndarray, space: Optional[SpaceSpec] = None) -> float:
    """Term value at an ambient point (space given) or a flat point (space None)"""
    if space is None:
        axis = term.axis_index(len(point))
        return v_flat_term(term.kind, point, term.couplings, term.t, axis)
    return CURVED_VALUES[term.kind](space, _ambient(point), term)


def gradient(term: PotentialTerm, point: np.ndarray, space: Optional[SpaceSpec] = None) -> np.ndarray:
    """
    Analytic gradient of one term.

    Returns:
        The unprojected ambient (d+1)-gradient on a curved space, or the flat d-gradient
    """
    if space is None:
        return g_flat_term(term.kind, point, term.couplings, term.axis_index(len(point)))
    return CURVED_GRADIENTS[term.kind](space, _ambient(point), term)


def potential(system: SystemSpec, point: np.ndarray) -> float:
    return sum((value(term, point, system.space) for term in system.terms), 0.0)


def potential_gradient(system: SystemSpec, point: np.ndarray) -> np.ndarray:
    grad = np.zeros(len(point))
    for term in system.terms:
        grad += gradient(term, point, system.space)
    return grad


def hamiltonian(system: SystemSpec, ph: PhasePoint) -> float:
    """1/2 <P,P>_eta plus the sum of the system's terms"""
    eta = system.space.eta
    P = ph.P
    return 0.5 * float(np.dot(eta * P, P)) + potential(system, ph.X)


def flat_hamiltonian(system: SystemSpec, x: np.ndarray, p: np.ndarray, canonical: bool = False) -> float:
    """
    1/2 |pi|^2 plus the terms, pi the kinetic momentum.

    With canonical=True, p is the canonical momentum and pi = p - A(x) uses the
    Dirac potential of the system's monopole charge.
    """
    s = system.charge
    pi = p - dirac_vector_potential(x, s) if (canonical and s != 0.0) else p
    return 0.5 * float(np.dot(pi, pi)) + potential(system, x)


def energy(system: SystemSpec, X: np.ndarray, P: np.ndarray) -> float:
    if system.is_flat:
        return flat_hamiltonian(system, X, P)
    eta = system.space.eta
    return 0.5 * float(np.dot(eta * P, P)) + potential(system, X)


# Monopole fields (flat, d = 3)

def monopole_field(x: np.ndarray, s: float) -> np.ndarray:
    r = _flat_r_checked(x)
    return s * x / r ** 3


def dirac_vector_potential(x: np.ndarray, s: float) -> np.ndarray:
    """A = s (-x2, x1, 0) / (r (r + x3)); curl A is the monopole field off the negative x3 axis"""
    r = _flat_r_checked(x)
    denom = r * (r + x[2])
    if denom <= settings.flat_r_floor * r:
        raise OriginSingularity("point lies on the Dirac string (negative x3 axis)")
    return s * np.array([-x[1], x[0], 0.0]) / denom
