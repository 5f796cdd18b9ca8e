import numpy as np
import numpy.testing as npt
import pytest

from conftest import higgs_system
from models.errors import ConfigError, EquatorSingularity, InvalidIndex
from models.schemas import (
    Bounds,
    Couplings,
    GeneratorKind,
    GeneratorSpec,
    IntegratorConfig,
    PotentialKind,
    PotentialTerm,
    SpaceSpec,
    SystemSpec,
    TMatrix,
    Verdict,
)
from service.dynamics_service import simulate
from service.geometry_service import make_phase_point, random_phase_point
from service.invariant_service import (
    drift,
    fit_correction_coefficients,
    flat_angular_momentum_vector,
    flat_anisotropic_invariant,
    flat_invariants,
    flat_parabolic_invariant,
    flat_runge_lenz_vector,
    flow_derivative,
    generator_function,
    higgs_tensor,
    j_alpha,
    kepler_deformed_invariant,
    l_alphabeta,
    lock_runge_lenz_convention,
    nonlinear_invariant,
    runge_lenz,
    runge_lenz_vector,
    system_couplings,
)
from service.verdict_service import judge_generator, with_energy


def term(kind, t=None, axis=None, **couplings):
    return PotentialTerm(kind=kind, couplings=Couplings(**couplings), t=t, axis=axis)


def assert_conserved(system, g, points, tol=1e-8):
    f = generator_function(g, system)
    for X, P in points:
        scale = max(1.0, abs(f(X, P)))
        assert abs(flow_derivative(system, f, X, P)) <= tol * scale, g.name


def curved_points(space, n=5, cap=0.6):
    return [(ph.X, ph.P) for ph in (random_phase_point(space, seed, 0.5, cap) for seed in range(n))]


def flat_points(dim, n=5):
    rng = np.random.default_rng(7)
    points = []
    for _ in range(n):
        x = rng.normal(size=dim)
        x *= rng.uniform(0.5, 1.2) / np.linalg.norm(x)
        points.append((x, 0.5 * rng.normal(size=dim)))
    return points


class TestGeneratorValues:
    def test_j_and_l(self, sphere):
        ph = make_phase_point(sphere, np.array([0.6, 0.0, 0.0]), np.array([0.0, 0.5, 0.0]))
        assert j_alpha(sphere, ph, 1) == pytest.approx(0.8 * 0.5)
        assert l_alphabeta(ph, 0, 1) == pytest.approx(0.3)
        assert l_alphabeta(ph, 1, 0) == pytest.approx(-0.3)

    def test_bad_indices(self, sphere):
        ph = make_phase_point(sphere, np.zeros(3), np.zeros(3))
        with pytest.raises(InvalidIndex):
            j_alpha(sphere, ph, 3)
        with pytest.raises(InvalidIndex):
            l_alphabeta(ph, 1, 1)

    def test_higgs_tensor(self, sphere):
        ph = make_phase_point(sphere, np.array([0.6, 0.0, 0.0]), np.zeros(3))
        assert higgs_tensor(sphere, ph, Couplings(omega2=1.0), 0, 0) == pytest.approx(0.5 * 0.36 / 0.64)
        assert higgs_tensor(sphere, ph, Couplings(omega2=1.0), 0, 1) == 0.0

    def test_higgs_tensor_equator(self, sphere):
        X = np.array([1.0, 0.0, 0.0, 0.0])
        with pytest.raises(EquatorSingularity):
            higgs_tensor(sphere, (X, np.zeros(4)), Couplings(omega2=1.0), 0, 0)

    def test_higgs_tensor_trace_is_energy(self, space):
        # J.J + epsilon L.L = R0^2 <P,P>, so the trace of A misses the energy by epsilon L.L / 2R0^2
        system = higgs_system(space)
        f = generator_function(GeneratorSpec(kind=GeneratorKind.ENERGY), system)
        for X, P in curved_points(space):
            trace = sum(higgs_tensor(space, (X, P), Couplings(omega2=1.0), a, a) for a in range(3))
            kinetic_extra = 0.5 * (sum(l_alphabeta((X, P), a, b) ** 2 for a in range(3) for b in range(a + 1, 3))) / space.r0 ** 2
            assert trace == pytest.approx(f(X, P) - space.epsilon * kinetic_extra, rel=1e-10)

    def test_nonlinear_reduces_to_trace_without_coupling(self):
        sphere2 = SpaceSpec(epsilon=1, d=2)
        ph = make_phase_point(sphere2, np.array([0.3, 0.2]), np.array([0.1, 0.4]))
        t = TMatrix.diag([1.0, -1.0])
        c = Couplings(omega2=1.0)
        expected = higgs_tensor(sphere2, ph, c, 0, 0) - higgs_tensor(sphere2, ph, c, 1, 1)
        assert nonlinear_invariant(sphere2, ph, c, t) == pytest.approx(expected)

    def test_flat_micz_reduces_to_kepler(self):
        x, p = np.array([0.4, -0.3, 0.8]), np.array([0.2, 0.5, -0.1])
        c = Couplings(gamma=1.0)
        a = flat_runge_lenz_vector(x, p, c)
        npt.assert_allclose(a, np.cross(flat_angular_momentum_vector(x, p), p) + x / np.linalg.norm(x))

    def test_kepler_deformed_adds_parabolic_terms(self, sphere):
        ph = make_phase_point(sphere, np.array([0.3, -0.2, 0.4]), np.array([0.1, 0.2, -0.3]))
        bare = Couplings(gamma=1.0)
        deformed = Couplings(gamma=1.0, eps_el=0.1, dOmega2=0.2)
        base = runge_lenz(sphere, ph, bare, 2, sigma=1)
        assert kepler_deformed_invariant(sphere, ph, bare, sigma=1) == pytest.approx(base)
        transverse = 0.3 ** 2 + 0.2 ** 2
        r = np.sqrt(transverse + 0.4 ** 2)
        value = kepler_deformed_invariant(sphere, ph, deformed, axis=2, coefficients=(0.5, 0.25), sigma=1)
        assert value == pytest.approx(base + 0.5 * 0.1 * transverse + 0.25 * 0.2 * transverse / r)

    def test_flat_invariants_dispatch(self):
        x, p = np.array([0.4, -0.3, 0.8, 0.1]), np.array([0.2, 0.5, -0.1, 0.3])
        c = Couplings(gamma=1.0, omega2=1.0, dOmega2=0.2, eps_el=0.05)
        assert flat_invariants(GeneratorKind.FLAT_RUNGE_LENZ, x, p, c, axis=1) == pytest.approx(
            flat_runge_lenz_vector(x, p, c)[1]
        )
        assert flat_invariants(GeneratorKind.FLAT_ANISOTROPIC_INVARIANT, x, p, c) == pytest.approx(
            flat_anisotropic_invariant(x, p, c)
        )
        assert flat_invariants(GeneratorKind.FLAT_PARABOLIC_INVARIANT, x[:3], p[:3], c) == pytest.approx(
            flat_parabolic_invariant(x[:3], p[:3], c, 2)
        )
        with pytest.raises(ConfigError):
            flat_invariants(GeneratorKind.ENERGY, x, p, c)

    def test_system_couplings_sum(self):
        system = SystemSpec(
            space=SpaceSpec(d=3),
            terms=[
                term(PotentialKind.CURVED_KEPLER, gamma=1.0),
                term(PotentialKind.CURVED_STARK, eps_el=0.1),
                term(PotentialKind.CURVED_KEPLER_DEFORMED, dOmega2=0.2, eps_el=0.3),
            ],
        )
        c = system_couplings(system)
        assert (c.gamma, c.dOmega2) == (1.0, 0.2)
        assert c.eps_el == pytest.approx(0.4)

    def test_generator_name(self):
        assert GeneratorSpec(kind=GeneratorKind.HIGGS_TENSOR, indices=[0, 1]).name == "HiggsTensor12"
        assert GeneratorSpec(kind=GeneratorKind.RUNGE_LENZ, axis=2).name == "RungeLenz3"
        assert GeneratorSpec(kind=GeneratorKind.ENERGY, label="H").name == "H"

    def test_negative_index_rejected(self):
        with pytest.raises(InvalidIndex):
            GeneratorSpec(kind=GeneratorKind.J_ALPHA, indices=[-1])

    def test_flat_generator_on_curved_system(self, sphere):
        with pytest.raises(ConfigError):
            generator_function(GeneratorSpec(kind=GeneratorKind.FLAT_RUNGE_LENZ), higgs_system(sphere))

    def test_anisotropic_invariant_needs_t(self, sphere):
        with pytest.raises(ConfigError):
            generator_function(GeneratorSpec(kind=GeneratorKind.ANISOTROPIC_INVARIANT), higgs_system(sphere))


class TestConservationAlongFlow:
    def test_free_motion_isometries(self, space):
        system = SystemSpec(space=space)
        for g in (
            GeneratorSpec(kind=GeneratorKind.J_ALPHA, indices=[0]),
            GeneratorSpec(kind=GeneratorKind.J_ALPHA, indices=[2]),
            GeneratorSpec(kind=GeneratorKind.L_ALPHABETA, indices=[0, 2]),
        ):
            assert_conserved(system, g, curved_points(space))

    def test_higgs_tensor(self, higgs, space):
        for a, b in [(0, 0), (0, 1), (1, 2), (2, 2)]:
            assert_conserved(higgs, GeneratorSpec(kind=GeneratorKind.HIGGS_TENSOR, indices=[a, b]), curved_points(space))
        assert_conserved(higgs, GeneratorSpec(kind=GeneratorKind.L_ALPHABETA, indices=[0, 1]), curved_points(space))

    def test_j_is_not_conserved_by_higgs(self, higgs, space):
        f = generator_function(GeneratorSpec(kind=GeneratorKind.J_ALPHA, indices=[0]), higgs)
        rates = [abs(flow_derivative(higgs, f, X, P)) for X, P in curved_points(space)]
        assert max(rates) > 1e-3

    @pytest.mark.parametrize("epsilon", [1, -1])
    def test_anisotropic_invariant(self, epsilon):
        space = SpaceSpec(epsilon=epsilon, d=3)
        t = TMatrix.diag([1.0, 1.0, -1.0])
        system = SystemSpec(
            space=space,
            terms=[term(PotentialKind.CURVED_HIGGS, omega2=1.0), term(PotentialKind.CURVED_ANISOTROPIC, t=t, dOmega2=0.3)],
        )
        assert_conserved(system, GeneratorSpec(kind=GeneratorKind.ANISOTROPIC_INVARIANT), curved_points(space))

    @pytest.mark.parametrize("epsilon", [1, -1])
    def test_nonlinear_invariant_conserved_value(self, epsilon):
        space = SpaceSpec(epsilon=epsilon, d=2)
        t = TMatrix.diag([1.0, -1.0])
        system = SystemSpec(
            space=space,
            terms=[term(PotentialKind.CURVED_HIGGS, omega2=1.0), term(PotentialKind.CURVED_NONLINEAR, t=t, eps_el=0.2)],
        )
        points = curved_points(space, cap=0.5)
        assert_conserved(system, GeneratorSpec(kind=GeneratorKind.NONLINEAR_INVARIANT, coefficients=[1.0]), points)

        printed = generator_function(GeneratorSpec(kind=GeneratorKind.NONLINEAR_INVARIANT), system)
        assert max(abs(flow_derivative(system, printed, X, P)) for X, P in points) > 1e-4

    @pytest.mark.parametrize("epsilon", [1, -1])
    def test_runge_lenz_with_locked_sign(self, epsilon):
        space = SpaceSpec(epsilon=epsilon, d=3)
        system = SystemSpec(space=space, terms=[term(PotentialKind.CURVED_KEPLER, gamma=1.0)])
        for a in range(3):
            assert_conserved(system, GeneratorSpec(kind=GeneratorKind.RUNGE_LENZ, indices=[a]), curved_points(space))

    def test_flat_kepler(self):
        system = SystemSpec(dim=3, terms=[term(PotentialKind.FLAT_KEPLER, gamma=1.0)])
        points = flat_points(3)
        for a in range(3):
            assert_conserved(system, GeneratorSpec(kind=GeneratorKind.FLAT_RUNGE_LENZ, indices=[a]), points)
            assert_conserved(system, GeneratorSpec(kind=GeneratorKind.FLAT_ANGULAR_MOMENTUM, indices=[a]), points)

    def test_micz(self):
        system = SystemSpec(
            dim=3,
            terms=[term(PotentialKind.FLAT_KEPLER, gamma=1.0), term(PotentialKind.MONOPOLE_CENTRIFUGAL, s=0.6)],
        )
        points = flat_points(3)
        for a in range(3):
            assert_conserved(system, GeneratorSpec(kind=GeneratorKind.FLAT_RUNGE_LENZ, indices=[a]), points)
            assert_conserved(system, GeneratorSpec(kind=GeneratorKind.FLAT_ANGULAR_MOMENTUM, indices=[a]), points)

    def test_flat_anisotropic_blocks(self):
        system = SystemSpec(
            dim=4,
            terms=[term(PotentialKind.FLAT_OSCILLATOR, omega2=1.0), term(PotentialKind.FLAT_ANISOTROPIC, dOmega2=0.3)],
        )
        assert_conserved(system, GeneratorSpec(kind=GeneratorKind.FLAT_ANISOTROPIC_INVARIANT), flat_points(4))

    def test_flat_parabolic_exact_pair(self):
        system = SystemSpec(
            dim=3,
            terms=[
                term(PotentialKind.FLAT_KEPLER, gamma=1.0),
                term(PotentialKind.FLAT_LINEAR, eps_el=0.1),
                term(PotentialKind.FLAT_COS, dOmega2=0.2),
            ],
        )
        points = flat_points(3)
        assert_conserved(system, GeneratorSpec(kind=GeneratorKind.FLAT_PARABOLIC_INVARIANT, coefficients=[0.5, 0.25]), points)
        printed = generator_function(GeneratorSpec(kind=GeneratorKind.FLAT_PARABOLIC_INVARIANT), system)
        assert max(abs(flow_derivative(system, printed, X, P)) for X, P in points) > 1e-4


class TestRungeLenzConvention:
    @pytest.mark.parametrize("epsilon", [1, -1])
    def test_lock(self, epsilon):
        lock = lock_runge_lenz_convention(epsilon)
        assert lock["sigma"] == 1
        assert lock["drift_plus"] < 0.1 * lock["drift_minus"]

    def test_large_radius_matches_flat_vector(self):
        space = SpaceSpec(epsilon=1, d=3, r0=1e3)
        x, p = np.array([0.4, -0.3, 0.8]), np.array([0.2, 0.5, -0.1])
        ph = make_phase_point(space, x, p)
        curved = runge_lenz_vector(space, ph.X, ph.P, 1.0, sigma=1)
        flat = flat_runge_lenz_vector(x, p, Couplings(gamma=1.0))
        npt.assert_allclose(curved, flat, rtol=1e-5)

    def test_default_sign_is_locked(self, sphere):
        ph = make_phase_point(sphere, np.array([0.3, 0.0, 0.1]), np.array([0.0, 1.2, 0.0]))
        c = Couplings(gamma=1.0)
        assert runge_lenz(sphere, ph, c, 0) == pytest.approx(runge_lenz(sphere, ph, c, 0, sigma=1))


class TestDrift:
    def test_higgs_drift_is_small(self, short_run):
        space = SpaceSpec(epsilon=1, d=3)
        system = higgs_system(space)
        ph = make_phase_point(space, np.array([0.3, 0.1, 0.0]), np.array([0.0, 0.4, 0.2]))
        traj = simulate(system, ph, short_run)
        report = drift(traj, GeneratorSpec(kind=GeneratorKind.HIGGS_TENSOR, indices=[0, 0]), system)
        assert report.name == "HiggsTensor11"
        assert report.initial > 0
        assert report.max_rel <= 1e-5
        assert report.floor == pytest.approx(abs(report.initial))

    def test_floor_for_vanishing_generator(self, short_run):
        # L_12 vanishes identically for motion in the (x1, x3) plane
        space = SpaceSpec(epsilon=1, d=3)
        system = higgs_system(space)
        ph = make_phase_point(space, np.array([0.3, 0.0, 0.0]), np.array([0.0, 0.0, 0.4]))
        traj = simulate(system, ph, short_run)
        report = drift(traj, GeneratorSpec(kind=GeneratorKind.L_ALPHABETA, indices=[0, 1]), system)
        assert report.initial == 0.0
        assert report.floor > 0.0
        assert report.max_rel == 0.0

    def test_vector_component_floor_is_vector_magnitude(self):
        # planar orbit with A along x1: A_2 starts at zero
        system = SystemSpec(dim=3, terms=[term(PotentialKind.FLAT_KEPLER, gamma=1.0)])
        x, p = np.array([0.5, 0.0, 0.0]), np.array([0.0, 1.1, 0.0])
        traj = simulate(system, (x, p), IntegratorConfig(dt=1e-4, n_steps=5000, record_every=10))
        magnitude = np.linalg.norm(flat_runge_lenz_vector(x, p, Couplings(gamma=1.0)))
        assert magnitude == pytest.approx(0.395)
        report = drift(traj, GeneratorSpec(kind=GeneratorKind.FLAT_RUNGE_LENZ, indices=[1]), system)
        assert report.initial == pytest.approx(0.0, abs=1e-15)
        assert report.floor == pytest.approx(magnitude, rel=1e-12)
        assert report.max_rel <= 1e-4
        _, verdict, _ = judge_generator(traj, GeneratorSpec(kind=GeneratorKind.FLAT_RUNGE_LENZ, indices=[1]), system, Bounds(drift=1e-4))
        assert verdict == Verdict.PASS

    def test_scalar_generator_keeps_own_floor(self, short_run):
        space = SpaceSpec(epsilon=1, d=3)
        system = higgs_system(space)
        ph = make_phase_point(space, np.array([0.3, 0.1, 0.0]), np.array([0.0, 0.4, 0.2]))
        traj = simulate(system, ph, short_run)
        report = drift(traj, GeneratorSpec(kind=GeneratorKind.L_ALPHABETA, indices=[0, 1]), system)
        assert report.floor == pytest.approx(abs(report.initial))

    def test_energy_generator_added_once(self):
        gens = with_energy([GeneratorSpec(kind=GeneratorKind.RUNGE_LENZ)])
        assert [g.kind for g in gens] == [GeneratorKind.ENERGY, GeneratorKind.RUNGE_LENZ]
        assert with_energy(gens) == gens


def _flat_parabolic_trajectory():
    system = SystemSpec(
        dim=3,
        terms=[
            term(PotentialKind.FLAT_KEPLER, gamma=1.0),
            term(PotentialKind.FLAT_LINEAR, eps_el=0.05),
            term(PotentialKind.FLAT_COS, dOmega2=0.1),
        ],
    )
    x, p = np.array([0.6, 0.2, 0.5]), np.array([0.0, 0.9, 0.3])
    return system, simulate(system, (x, p), IntegratorConfig(dt=1e-3, n_steps=6000, record_every=10))


class TestCoefficientFit:
    def test_flat_parabolic_fit_recovers_exact_pair(self):
        system, traj = _flat_parabolic_trajectory()
        fit = fit_correction_coefficients(traj, GeneratorSpec(kind=GeneratorKind.FLAT_PARABOLIC_INVARIANT), system)
        assert fit.printed == [2.0, 1.0]
        npt.assert_allclose(fit.fitted, [0.5, 0.25], atol=1e-2)
        assert fit.fitted_max_rel < 1e-3 < fit.printed_max_rel
        assert fit.flagged

    def test_judge_flags_printed_coefficients(self):
        system, traj = _flat_parabolic_trajectory()
        g = GeneratorSpec(kind=GeneratorKind.FLAT_PARABOLIC_INVARIANT)
        report, verdict, values = judge_generator(traj, g, system, Bounds(drift=1e-3))
        assert verdict == Verdict.FLAGGED
        assert report.fit is not None
        assert len(values) == len(traj)

    def test_judge_passes_exact_pair(self):
        system, traj = _flat_parabolic_trajectory()
        g = GeneratorSpec(kind=GeneratorKind.FLAT_PARABOLIC_INVARIANT, coefficients=[0.5, 0.25])
        report, verdict, _ = judge_generator(traj, g, system, Bounds(drift=1e-3))
        assert verdict == Verdict.PASS
        assert report.fit is None

    def test_vanishing_column_not_fitted(self):
        system = SystemSpec(dim=3, terms=[term(PotentialKind.FLAT_KEPLER, gamma=1.0), term(PotentialKind.FLAT_LINEAR, eps_el=0.05)])
        traj = simulate(system, (np.array([0.6, 0.2, 0.5]), np.array([0.0, 0.9, 0.3])), IntegratorConfig(dt=1e-3, n_steps=4000, record_every=10))
        fit = fit_correction_coefficients(traj, GeneratorSpec(kind=GeneratorKind.FLAT_PARABOLIC_INVARIANT), system)
        assert fit.fitted[1] is None
        assert fit.fitted[0] == pytest.approx(0.5, abs=1e-2)

    def test_nonlinear_fit(self):
        space = SpaceSpec(epsilon=-1, d=2)
        t = TMatrix.diag([1.0, -1.0])
        system = SystemSpec(
            space=space,
            terms=[term(PotentialKind.CURVED_HIGGS, omega2=1.0), term(PotentialKind.CURVED_NONLINEAR, t=t, eps_el=0.05)],
        )
        ph = make_phase_point(space, np.array([0.2, 0.1]), np.array([0.05, 0.3]))
        traj = simulate(system, ph, IntegratorConfig(dt=1e-3, n_steps=6000, record_every=10))
        fit = fit_correction_coefficients(traj, GeneratorSpec(kind=GeneratorKind.NONLINEAR_INVARIANT), system)
        assert fit.printed == [4.0]
        assert fit.fitted[0] == pytest.approx(1.0, abs=1e-3)


class TestExpectedFailure:
    def _control(self, allow_invalid: bool):
        space = SpaceSpec(epsilon=1, d=2)
        entries = [1.0, -0.9] if allow_invalid else [1.0, -1.0]
        t = TMatrix.diag(entries, allow_invalid=allow_invalid)
        system = SystemSpec(
            space=space,
            terms=[term(PotentialKind.CURVED_HIGGS, omega2=1.0), term(PotentialKind.CURVED_ANISOTROPIC, t=t, dOmega2=0.5)],
        )
        ph = make_phase_point(space, np.array([0.3, 0.2]), np.array([0.1, 0.4]))
        return system, simulate(system, ph, IntegratorConfig(dt=1e-3, n_steps=10000, record_every=10))

    def test_invalid_t_drifts(self):
        system, traj = self._control(allow_invalid=True)
        g = GeneratorSpec(kind=GeneratorKind.ANISOTROPIC_INVARIANT)
        report, verdict, _ = judge_generator(traj, g, system, Bounds(), expect_fail=True)
        assert report.max_rel >= 1e-3
        assert verdict == Verdict.EXPECTED_FAIL

    def test_valid_t_is_unexpected_pass(self):
        system, traj = self._control(allow_invalid=False)
        g = GeneratorSpec(kind=GeneratorKind.ANISOTROPIC_INVARIANT)
        _, verdict, _ = judge_generator(traj, g, system, Bounds(), expect_fail=True)
        assert verdict == Verdict.UNEXPECTED_PASS

    def test_energy_still_judged_normally(self):
        system, traj = self._control(allow_invalid=True)
        _, verdict, _ = judge_generator(traj, GeneratorSpec(kind=GeneratorKind.ENERGY), system, Bounds(), expect_fail=True)
        assert verdict == Verdict.PASS


def _curved_kepler_trajectory(eps_el: float, d_omega2: float = 0.0):
    space = SpaceSpec(epsilon=1, d=3, r0=1.0)
    system = SystemSpec(
        space=space,
        terms=[
            term(PotentialKind.CURVED_KEPLER, gamma=1.0),
            term(PotentialKind.CURVED_KEPLER_DEFORMED, eps_el=eps_el, dOmega2=d_omega2),
        ],
    )
    ph = make_phase_point(space, np.array([0.0, 0.0, 0.5]), np.array([1.1, 0.0, 0.0]))
    return system, simulate(system, ph, IntegratorConfig(dt=1e-4, n_steps=30000, record_every=20))


@pytest.mark.slow
class TestCurvedKeplerDeformed:
    def test_stark_only_flags_half(self):
        system, traj = _curved_kepler_trajectory(eps_el=0.1)
        _, energy_verdict, _ = judge_generator(traj, GeneratorSpec(kind=GeneratorKind.ENERGY), system, Bounds())
        assert energy_verdict == Verdict.PASS
        report, verdict, _ = judge_generator(
            traj, GeneratorSpec(kind=GeneratorKind.KEPLER_DEFORMED_INVARIANT), system, Bounds()
        )
        assert verdict == Verdict.FLAGGED
        assert report.fit.printed == [2.0, 1.0]
        assert report.fit.fitted[0] == pytest.approx(0.5, abs=1e-3)
        assert report.fit.fitted[1] is None
        assert report.fit.fitted_max_rel <= 1e-6

    def test_stark_only_exact_half_passes(self):
        system, traj = _curved_kepler_trajectory(eps_el=0.1)
        g = GeneratorSpec(kind=GeneratorKind.KEPLER_DEFORMED_INVARIANT, coefficients=[0.5, 0.0])
        _, verdict, _ = judge_generator(traj, g, system, Bounds())
        assert verdict == Verdict.PASS

    def test_anisotropic_deformation_has_no_conserved_pair(self):
        system, traj = _curved_kepler_trajectory(eps_el=0.1, d_omega2=0.2)
        report, verdict, _ = judge_generator(
            traj, GeneratorSpec(kind=GeneratorKind.KEPLER_DEFORMED_INVARIANT), system, Bounds()
        )
        assert verdict == Verdict.FAIL
        assert report.fit is not None
        assert all(c is not None for c in report.fit.fitted)
        assert report.fit.fitted_max_rel > 1e-3


class TestAnisotropicDrift:
    @pytest.mark.parametrize("epsilon", [1, -1], ids=["sphere", "pseudosphere"])
    @pytest.mark.parametrize("d_omega2", [0.1, 0.5])
    @pytest.mark.parametrize(
        "x,p,entries",
        [
            ([0.3, 0.2], [0.5, 0.05], [1.0, -1.0]),
            ([0.3, 0.1, 0.2, 0.1], [0.5, 0.1, 0.05, 0.0], [1.0, 1.0, -1.0, -1.0]),
        ],
        ids=["d2", "d4"],
    )
    def test_invariant_drift_within_bound(self, epsilon, d_omega2, x, p, entries):
        space = SpaceSpec(epsilon=epsilon, d=len(x), r0=1.0)
        system = SystemSpec(
            space=space,
            terms=[
                term(PotentialKind.CURVED_HIGGS, omega2=1.0),
                term(PotentialKind.CURVED_ANISOTROPIC, t=TMatrix.diag(entries), dOmega2=d_omega2),
            ],
        )
        ph = make_phase_point(space, np.array(x), np.array(p))
        traj = simulate(system, ph, IntegratorConfig(dt=2.5e-4, n_steps=8000, record_every=20))
        report, verdict, _ = judge_generator(traj, GeneratorSpec(kind=GeneratorKind.ANISOTROPIC_INVARIANT), system, Bounds())
        assert abs(report.initial) > 1e-3
        assert report.max_rel <= 1e-6
        assert verdict == Verdict.PASS
