"""Levi-Civita (2 -> 2) and Kustaanheimo-Stiefel (4 -> 3) reductions of flat oscillators.

Both maps are quadratic with |x| = u.u. At fixed oscillator energy E the
constraint H_osc - E = 0 divided by c |x| (c the conformal factor) is a Kepler
system with coupling E/c at the fixed energy -omega^2/(2c), evolving in the
time t_K with dt_K = 2 sqrt(c) |x| ds, s the oscillator time.
"""
import logging
from typing import List, Optional, Tuple

import numpy as np

from models.errors import ConfigError, FiberViolation, UnsupportedTerm
from models.schemas import (
    Couplings,
    KeplerImage,
    MappedTrajectory,
    PotentialKind,
    PotentialTerm,
    ReductionKind,
    ReductionSpec,
    SystemSpec,
    Trajectory,
)
from service.potential_service import flat_hamiltonian

logger = logging.getLogger(__name__)

# Right-hand side of the printed flat image of the anisotropic term, per unit dOmega^2
PRINTED_COS_COEFFICIENT = 0.25


# Kustaanheimo-Stiefel

def ks_map(u: np.ndarray) -> np.ndarray:
    """
    Hopf-type quadratic map R^4 -> R^3.

    Args:
        u: 4-vector

    Returns:
        x = (2(u1u3 + u2u4), 2(u2u3 - u1u4), u1^2 + u2^2 - u3^2 - u4^2), with |x| = u.u
    """
    u1, u2, u3, u4 = u
    return np.array([2.0 * (u1 * u3 + u2 * u4), 2.0 * (u2 * u3 - u1 * u4), u1 ** 2 + u2 ** 2 - u3 ** 2 - u4 ** 2])


def ks_matrix(u: np.ndarray) -> np.ndarray:
    """Half Jacobian L of ks_map (dx = 2 L du); L L^T = (u.u) Id"""
    u1, u2, u3, u4 = u
    return np.array([
        [u3, u4, u1, u2],
        [-u4, u3, u2, -u1],
        [u1, u2, -u3, -u4],
    ])


def fiber_vector(u: np.ndarray) -> np.ndarray:
    """Generator of the U(1) fiber, the simultaneous rotation of the (u1,u2) and (u3,u4) planes"""
    u1, u2, u3, u4 = u
    return np.array([-u2, u1, -u4, u3])


def fiber_momentum(u: np.ndarray, p_u: np.ndarray) -> float:
    """(u1 p2 - u2 p1) + (u3 p4 - u4 p3)"""
    return float(np.dot(fiber_vector(u), p_u))


def ks_momentum(u: np.ndarray, p_u: np.ndarray, conformal_factor: float = 4.0) -> np.ndarray:
    return ks_matrix(u) @ p_u / (np.sqrt(conformal_factor) * np.dot(u, u))


def ks_lift(x: np.ndarray, p_x: np.ndarray, conformal_factor: float = 4.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    One fiber-free preimage of Kepler-side data.

    Args:
        x: 3-vector, not at the origin
        p_x: Kepler-side momentum
        conformal_factor: c of the momentum map p_u = sqrt(c) L^T p_x

    Returns:
        (u, p_u) with ks_map(u) = x and zero fiber momentum
    """
    x1, x2, x3 = x
    r = float(np.linalg.norm(x))
    if r == 0.0:
        raise ConfigError("the origin has no regular KS preimage")
    if x3 < 0.0:
        u3 = np.sqrt(0.5 * (r - x3))
        u = np.array([x1 / (2.0 * u3), x2 / (2.0 * u3), u3, 0.0])
    else:
        u1 = np.sqrt(0.5 * (r + x3))
        u = np.array([u1, 0.0, x1 / (2.0 * u1), -x2 / (2.0 * u1)])
    p_u = np.sqrt(conformal_factor) * ks_matrix(u).T @ np.asarray(p_x, dtype=float)
    return u, p_u


def with_fiber_momentum(u: np.ndarray, p_u: np.ndarray, s: float) -> np.ndarray:
    """Replace the fiber component of p_u so that fiber_momentum(u, p_u) = s"""
    f = fiber_vector(u)
    return p_u + (s - np.dot(f, p_u)) / np.dot(f, f) * f


# Levi-Civita

def lc_map(u: np.ndarray) -> np.ndarray:
    """Complex squaring (u1 + i u2)^2"""
    u1, u2 = u
    return np.array([u1 ** 2 - u2 ** 2, 2.0 * u1 * u2])


def lc_matrix(u: np.ndarray) -> np.ndarray:
    u1, u2 = u
    return np.array([[u1, -u2], [u2, u1]])


def lc_momentum(u: np.ndarray, p_u: np.ndarray, conformal_factor: float = 4.0) -> np.ndarray:
    return lc_matrix(u) @ p_u / (np.sqrt(conformal_factor) * np.dot(u, u))


def lc_lift(x: np.ndarray, p_x: np.ndarray, conformal_factor: float = 4.0) -> Tuple[np.ndarray, np.ndarray]:
    """Principal square root preimage of (x, p_x)"""
    w = np.sqrt(complex(x[0], x[1]))
    u = np.array([w.real, w.imag])
    p_u = np.sqrt(conformal_factor) * lc_matrix(u).T @ np.asarray(p_x, dtype=float)
    return u, p_u


# Potentials and trajectories

def oscillator_frequency(terms: List[PotentialTerm]) -> float:
    omega2 = sum(t.couplings.omega2 for t in terms if t.kind == PotentialKind.FLAT_OSCILLATOR)
    if omega2 <= 0.0:
        raise ConfigError("the oscillator side needs a FlatOscillator term with omega2 > 0")
    return omega2


def pushforward_potential(spec: ReductionSpec, terms: List[PotentialTerm], energy: float) -> KeplerImage:
    """
    Kepler-side system of an oscillator at energy E.

    Args:
        spec: Reduction kind, conformal factor and fiber momentum
        terms: Oscillator terms (FlatOscillator plus FlatAnisotropic/FlatQuartic deformations)
        energy: Oscillator energy level E

    Returns:
        KeplerImage with FlatKepler (gamma = E/c), FlatCos (from FlatAnisotropic),
        FlatLinear (from FlatQuartic) and, for nonzero fiber momentum, the
        MonopoleCentrifugal term; the ratio of the cos coefficient to the printed
        dOmega^2/4 is recorded

    Raises:
        UnsupportedTerm: any other oscillator term
    """
    c = spec.conformal_factor
    omega2 = oscillator_frequency(terms)
    axis = 2 if spec.kind == ReductionKind.KS else 0
    gamma_eff = energy / c
    image_terms = [PotentialTerm(kind=PotentialKind.FLAT_KEPLER, couplings=Couplings(gamma=gamma_eff))]
    d_omega2 = sum(t.couplings.dOmega2 for t in terms if t.kind == PotentialKind.FLAT_ANISOTROPIC)
    eps_el = sum(t.couplings.eps_el for t in terms if t.kind == PotentialKind.FLAT_QUARTIC)

    for t in terms:
        if t.kind not in (PotentialKind.FLAT_OSCILLATOR, PotentialKind.FLAT_ANISOTROPIC, PotentialKind.FLAT_QUARTIC):
            raise UnsupportedTerm(f"{t.kind.value} has no Kepler-side image under {spec.kind.value}")

    cos_coefficient = ratio = linear = None
    if d_omega2 != 0.0:
        # (dOmega^2/2)(|u_a|^2 - |u_b|^2) = (dOmega^2/2) x_axis, divided by c|x|
        cos_coefficient = d_omega2 / (2.0 * c)
        ratio = cos_coefficient / (PRINTED_COS_COEFFICIENT * d_omega2)
        image_terms.append(
            PotentialTerm(kind=PotentialKind.FLAT_COS, couplings=Couplings(dOmega2=4.0 * cos_coefficient), axis=axis)
        )
    if eps_el != 0.0:
        # -2 eps_el (|u_a|^4 - |u_b|^4) = -2 eps_el x_axis |x|
        linear = -2.0 * eps_el / c
        image_terms.append(PotentialTerm(kind=PotentialKind.FLAT_LINEAR, couplings=Couplings(eps_el=linear), axis=axis))

    charge = 0.0
    if spec.s != 0.0:
        charge = -spec.s / np.sqrt(c)
        image_terms.append(
            PotentialTerm(kind=PotentialKind.MONOPOLE_CENTRIFUGAL, couplings=Couplings(s=charge))
        )

    image = KeplerImage(
        terms=image_terms,
        gamma_eff=gamma_eff,
        kepler_energy=-omega2 / (2.0 * c),
        charge=charge,
        conformal_factor=c,
        cos_coefficient=cos_coefficient,
        cos_printed_ratio=ratio,
        linear_coefficient=linear,
        axis=axis,
    )
    if ratio is not None and abs(ratio - 1.0) > 1e-12:
        logger.warning(f"cos image coefficient is {ratio:g} x the printed dOmega^2/4 at conformal factor {c:g}")
    return image


def pushforward_trajectory(
    osc: Trajectory,
    spec: ReductionSpec,
    system: SystemSpec,
    energy: Optional[float] = None,
) -> MappedTrajectory:
    """
    Map an oscillator trajectory sample by sample to the Kepler side.

    Args:
        osc: Flat oscillator trajectory (dimension 4 for KS, 2 for Levi-Civita)
        spec: Reduction settings; spec.s is the required fiber momentum
        system: The oscillator system that produced osc
        energy: Oscillator energy level, default spec.energy or the initial energy

    Returns:
        MappedTrajectory with Kepler-side time, momentum, per-sample energies and
        the |x| - u.u residual

    Raises:
        FiberViolation: some sample's fiber momentum differs from spec.s
    """
    if not osc.flat or osc.X.shape[1] != spec.oscillator_dim:
        raise ConfigError(f"{spec.kind.value} needs a flat oscillator trajectory of dimension {spec.oscillator_dim}")
    E = energy if energy is not None else (spec.energy if spec.energy is not None else float(osc.energy[0]))
    image = pushforward_potential(spec, system.terms, E)
    kepler = image.system(spec.kepler_dim)
    c = spec.conformal_factor
    is_ks = spec.kind == ReductionKind.KS

    n = len(osc)
    xs = np.empty((n, spec.kepler_dim))
    ps = np.empty((n, spec.kepler_dim))
    radius_res = np.empty(n)
    fiber = np.zeros(n)
    for i, (u, p_u) in enumerate(zip(osc.X, osc.P)):
        if is_ks:
            fiber[i] = fiber_momentum(u, p_u)
            scale = max(1.0, float(np.linalg.norm(u) * np.linalg.norm(p_u)))
            if abs(fiber[i] - spec.s) > spec.fiber_tol * scale:
                raise FiberViolation(
                    f"fiber momentum {fiber[i]:.3e} differs from the required {spec.s:g}", step_index=i
                )
            xs[i] = ks_map(u)
            ps[i] = ks_momentum(u, p_u, c)
        else:
            xs[i] = lc_map(u)
            ps[i] = lc_momentum(u, p_u, c)
        radius_res[i] = abs(np.linalg.norm(xs[i]) - np.dot(u, u))

    radii = np.einsum("ij,ij->i", osc.X, osc.X)
    dt_k = 2.0 * np.sqrt(c) * 0.5 * (radii[1:] + radii[:-1]) * np.diff(osc.times)
    kepler_time = np.concatenate([[0.0], np.cumsum(dt_k)])
    energies = np.array([flat_hamiltonian(kepler, x, p) for x, p in zip(xs, ps)])

    logger.info(
        f"{spec.kind.value} pushforward: {n} samples, gamma_eff={image.gamma_eff:.6g}, "
        f"E_K={image.kepler_energy:.6g}"
    )
    return MappedTrajectory(
        fictitious_time=osc.times,
        kepler_time=kepler_time,
        x=xs,
        p=ps,
        radius_residual=radius_res,
        fiber_momentum=fiber,
        kepler_energy=energies,
        image=image,
    )


def as_kepler_trajectory(mapped: MappedTrajectory) -> Trajectory:
    """View a mapped trajectory as a flat Kepler-side Trajectory in Kepler time"""
    n = len(mapped)
    return Trajectory(
        flat=True,
        times=mapped.kepler_time,
        X=mapped.x,
        P=mapped.p,
        energy=mapped.kepler_energy,
        surface_res=np.zeros(n),
        tangency_res=np.zeros(n),
    )


def velocity_residual(mapped: MappedTrajectory) -> float:
    """
    Largest relative mismatch between dx/dt_K (central differences) and the mapped momentum.

    The Kepler-side equations of motion require x' = p.
    """
    if len(mapped) < 3:
        return 0.0
    dx = (mapped.x[2:] - mapped.x[:-2]) / (mapped.kepler_time[2:] - mapped.kepler_time[:-2])[:, None]
    p = mapped.p[1:-1]
    scale = max(float(np.max(np.linalg.norm(mapped.p, axis=1))), 1e-300)
    return float(np.max(np.linalg.norm(dx - p, axis=1)) / scale)
