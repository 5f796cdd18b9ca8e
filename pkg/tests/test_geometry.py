import numpy as np
import numpy.testing as npt
import pytest

from models.errors import ChartViolation, ConfigError, ConstraintViolation
from models.schemas import PhasePoint, SpaceSpec
from service.geometry_service import (
    check_phase_point,
    lift_to_surface,
    make_phase_point,
    metric_dot,
    phase_distance,
    random_flat_point,
    random_phase_point,
    surface_residual,
    tangency_residual,
    tangent_project,
)


def test_metric_dot_signature(sphere, pseudosphere):
    a = np.array([1.0, 2.0, 3.0, 4.0])
    b = np.array([0.5, -1.0, 2.0, 1.0])
    assert metric_dot(sphere, a, b) == pytest.approx(0.5 - 2.0 + 6.0 + 4.0)
    assert metric_dot(pseudosphere, a, b) == pytest.approx(0.5 - 2.0 + 6.0 - 4.0)


def test_lift_pole_and_surface(space):
    q = lift_to_surface(space, np.zeros(3))
    assert q.x0 == pytest.approx(space.r0)
    q = lift_to_surface(space, np.array([0.3, -0.2, 0.4]))
    assert q.x0 > 0
    assert surface_residual(space, q.X) < 1e-14


def test_lift_sphere_outside_chart(sphere):
    with pytest.raises(ChartViolation):
        lift_to_surface(sphere, np.array([1.0, 0.0, 0.0]))
    with pytest.raises(ChartViolation):
        lift_to_surface(sphere, np.array([0.1, 0.2]))


def test_lift_pseudosphere_has_no_chart_limit(pseudosphere):
    q = lift_to_surface(pseudosphere, np.array([3.0, 4.0, 0.0]))
    assert q.x0 == pytest.approx(np.sqrt(26.0))


def test_tangent_project_is_idempotent(space, rng):
    X = lift_to_surface(space, np.array([0.2, 0.1, -0.3])).X
    v = rng.normal(size=4)
    w = tangent_project(space, X, v)
    assert abs(metric_dot(space, X, w)) < 1e-14
    npt.assert_allclose(tangent_project(space, X, w), w, atol=1e-15)


def test_make_phase_point_is_tangent(space):
    ph = make_phase_point(space, np.array([0.3, 0.1, 0.0]), np.array([0.0, 0.4, 0.2]))
    assert surface_residual(space, ph.X) < 1e-14
    assert tangency_residual(space, ph.X, ph.P) < 1e-15
    check_phase_point(space, ph.X, ph.P)


@pytest.mark.parametrize("seed", range(5))
def test_random_phase_point_is_valid_and_deterministic(space, seed):
    a = random_phase_point(space, seed, 0.5)
    b = random_phase_point(space, seed, 0.5)
    npt.assert_array_equal(a.X, b.X)
    npt.assert_array_equal(a.P, b.P)
    assert np.linalg.norm(a.q.x) <= 0.5 * space.r0 + 1e-12
    assert surface_residual(space, a.X) <= 1e-10 * space.r0 ** 2
    assert tangency_residual(space, a.X, a.P) <= 1e-12


def test_random_phase_point_rejects_bad_scale(sphere):
    with pytest.raises(ConfigError):
        random_phase_point(sphere, 0, 0.0)
    with pytest.raises(ChartViolation):
        random_phase_point(sphere, 0, 0.5, cap=1.0)


def test_random_flat_point_bounds():
    for seed in range(10):
        x, p = random_flat_point(3, seed, 0.5, cap=1.0, r_min=0.2)
        assert 0.2 - 1e-12 <= np.linalg.norm(x) <= 1.0 + 1e-12
        assert p.shape == (3,)


def test_check_phase_point_detects_violations(sphere):
    ph = make_phase_point(sphere, np.array([0.3, 0.1, 0.0]), np.array([0.0, 0.4, 0.2]))
    X = ph.X.copy()
    X[0] += 1e-6
    with pytest.raises(ConstraintViolation):
        check_phase_point(sphere, X, ph.P)
    P = ph.P + 1e-6 * ph.X
    with pytest.raises(ConstraintViolation):
        check_phase_point(sphere, ph.X, P)


def test_check_phase_point_lower_sheet(pseudosphere):
    ph = make_phase_point(pseudosphere, np.array([0.3, 0.0, 0.0]), np.zeros(3))
    X = ph.X.copy()
    X[-1] = -X[-1]
    with pytest.raises(ConstraintViolation):
        check_phase_point(pseudosphere, X, np.zeros(4))


def test_phase_point_arrays_roundtrip(sphere):
    ph = make_phase_point(sphere, np.array([0.1, 0.2, 0.3]), np.array([0.3, -0.1, 0.2]))
    again = PhasePoint.from_arrays(ph.X, ph.P)
    npt.assert_array_equal(again.X, ph.X)
    npt.assert_array_equal(again.P, ph.P)


def test_phase_distance_scales():
    assert phase_distance(np.array([3.0, 0.0]), np.array([0.0, 4.0])) == pytest.approx(5.0)
    assert phase_distance(np.array([2.0]), np.array([2.0]), length_scale=2.0, p_scale=2.0) == pytest.approx(np.sqrt(2.0))


def test_space_spec_validation():
    with pytest.raises(ValueError):
        SpaceSpec(epsilon=0, d=3)
    with pytest.raises(ValueError):
        SpaceSpec(epsilon=1, d=1)
    npt.assert_array_equal(SpaceSpec(epsilon=-1, d=2).eta, [1.0, 1.0, -1.0])
