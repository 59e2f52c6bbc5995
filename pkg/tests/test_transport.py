"""Tests for flows and transport"""

import numpy as np
import pytest
from scipy.linalg import expm

from fshapes.config import KernelConfig
from fshapes.discretization import discretize, refine_curve
from fshapes.errors import DimensionMismatchError, FlowDivergenceError, SingularJacobianError
from fshapes.kernels import fcurrent_distance
from fshapes.models import FCurrent, FunctionalShape, discrete_mass
from fshapes.synth import crenellated_circle, sphere_with_caps
from fshapes.transport import (
    AnalyticVelocityField,
    DeformationPath,
    flow_map,
    flow_points,
    path_step,
    pushforward_atoms,
    transport_shape,
    velocity_at,
)

ROTATION = np.array([[0.0, -np.pi / 2], [np.pi / 2, 0.0]])


def wavy_curve(points=40):
    t = np.linspace(0, 1, points)
    return FunctionalShape(
        ambient_dim=2,
        manifold_dim=1,
        vertices=np.stack([t, 0.2 * np.sin(3 * t)], axis=1),
        cells=np.stack([np.arange(points - 1), np.arange(1, points)], axis=1),
        signal=np.cos(5 * t),
    )


def random_path(rng, points=4, timesteps=3, scale=0.3, integrator="euler"):
    q = rng.normal(size=(points, 2))
    trajectory = [q]
    momenta = scale * rng.normal(size=(timesteps, points, 2))
    for j in range(timesteps):
        q, _ = path_step(q, q, momenta[j], 1.0 / timesteps, 0.8, integrator)
        trajectory.append(q)
    return DeformationPath(
        timesteps=timesteps, sigma_v=0.8, integrator=integrator, control_points=np.stack(trajectory), momenta=momenta
    )


def test_velocity_at_examples():
    """Test zero field, single control point and symmetric cancellation"""
    path = DeformationPath.identity(np.array([[0.0, 0.0], [1.0, 0.0]]), timesteps=2, sigma_v=0.5)
    np.testing.assert_array_equal(velocity_at(path, 0, [0.3, 0.4]), [0.0, 0.0])

    single = DeformationPath(timesteps=1, sigma_v=0.5, control_points=[[[1.0, 2.0]]] * 2, momenta=[[[0.3, -0.7]]])
    np.testing.assert_allclose(velocity_at(single, 0, [1.0, 2.0]), [0.3, -0.7])

    pair = DeformationPath(
        timesteps=1,
        sigma_v=0.5,
        control_points=[[[-1.0, 0.0], [1.0, 0.0]]] * 2,
        momenta=[[[0.0, 1.0], [0.0, -1.0]]],
    )
    np.testing.assert_allclose(velocity_at(pair, 0, [0.0, 0.0]), [0.0, 0.0], atol=1e-15)
    with pytest.raises(IndexError):
        velocity_at(pair, 1, [0.0, 0.0])


def test_path_shape_validation():
    """Test inconsistent path arrays raise the typed dimension error"""
    with pytest.raises(DimensionMismatchError) as excinfo:
        DeformationPath(timesteps=2, sigma_v=1.0, control_points=np.zeros((2, 3, 2)), momenta=np.zeros((2, 3, 2)))
    assert excinfo.value.exit_code == 5
    with pytest.raises(DimensionMismatchError):
        DeformationPath(timesteps=3, sigma_v=1.0, control_points=np.zeros((4, 3, 2)), momenta=np.zeros((2, 3, 2)))


@pytest.mark.parametrize("integrator", ["euler", "rk4"])
def test_constant_field_is_exact(integrator):
    """Test constant-in-space field gives x + u"""
    u = np.array([0.25, -0.5])
    field = AnalyticVelocityField(field=lambda t, x: np.broadcast_to(u, x.shape))
    points = np.array([[0.0, 0.0], [1.0, 2.0], [-3.0, 0.5]])
    end = flow_points(field, points, timesteps=8, integrator=integrator)[-1]
    np.testing.assert_allclose(end, points + u, rtol=0, atol=1e-14)


def test_rotation_field_matches_matrix_exponential():
    """Test RK4 on a linear rotation generator at T = 20"""
    field = AnalyticVelocityField(field=lambda t, x: x @ ROTATION.T)
    points = np.array([[1.0, 0.0], [0.3, -2.0]])
    end = flow_points(field, points, timesteps=20, integrator="rk4")[-1]
    exact = points @ expm(ROTATION).T
    assert np.max(np.linalg.norm(end - exact, axis=1) / np.linalg.norm(exact, axis=1)) <= 1e-6


def test_zero_field_is_identity():
    """Test zero momenta path and zero analytic field"""
    shape = wavy_curve()
    path = DeformationPath.identity(shape.vertices, timesteps=5, sigma_v=0.3)
    np.testing.assert_array_equal(transport_shape(shape, path).vertices, shape.vertices)
    zero = AnalyticVelocityField(field=lambda t, x: np.zeros_like(x))
    np.testing.assert_array_equal(flow_points(zero, shape.vertices)[-1], shape.vertices)


def test_translation_keeps_signals():
    """Test pure translation moves vertices and keeps signals"""
    shape = wavy_curve()
    field = AnalyticVelocityField(field=lambda t, x: np.broadcast_to([1.0, 0.5], x.shape))
    moved = transport_shape(shape, field)
    np.testing.assert_allclose(moved.vertices, shape.vertices + [1.0, 0.5], atol=1e-14)
    np.testing.assert_array_equal(moved.signal, shape.signal)
    np.testing.assert_array_equal(moved.cells, shape.cells)


def test_displacement_bound_on_sampled_fields():
    """Test |phi(x) - x| <= sup|v| and the exponential bound on random smooth fields"""
    rng = np.random.default_rng(1)
    points = rng.uniform(-1, 1, size=(200, 2))
    for _ in range(5):
        amp, freq = rng.uniform(0.1, 1.0), rng.uniform(0.5, 2.0)
        direction = rng.normal(size=2)
        direction /= np.linalg.norm(direction)

        def v(t, x, amp=amp, freq=freq, direction=direction):
            return amp * np.sin(freq * x[:, :1] + t) * direction

        field = AnalyticVelocityField(field=v, sup_norm=amp, lipschitz=amp * freq)
        end = flow_points(field, points, timesteps=20)[-1]
        displacement = np.linalg.norm(end - points, axis=1).max()
        assert displacement <= amp + 1e-8
        assert displacement <= field.displacement_bound()


def test_divergent_flow_raises():
    """Test non-finite positions abort the flow"""
    field = AnalyticVelocityField(field=lambda t, x: np.exp(np.exp(10 * x)))
    with pytest.raises(FlowDivergenceError):
        flow_points(field, np.array([[10.0, 10.0]]), timesteps=2, integrator="euler")


def test_pushforward_identity_and_scalings():
    """Test identity, curve scaling and surface normal scaling"""
    curve = discretize(wavy_curve())
    same = pushforward_atoms(curve, lambda x: x, jacobian=lambda x: np.broadcast_to(np.eye(2), (len(x), 2, 2)))
    np.testing.assert_array_equal(same.xi, curve.xi)
    np.testing.assert_array_equal(same.positions, curve.positions)

    scaled = pushforward_atoms(curve, lambda x: 3.0 * x, jacobian=lambda x: np.broadcast_to(3.0 * np.eye(2), (len(x), 2, 2)))
    np.testing.assert_allclose(scaled.xi, 3.0 * curve.xi)

    surface = discretize(sphere_with_caps(rings=4, sectors=6))
    scaled = pushforward_atoms(surface, lambda x: 2.0 * x)
    np.testing.assert_allclose(scaled.xi, 4.0 * surface.xi, rtol=1e-8, atol=1e-12)


def test_pushforward_contrast_change():
    """Test the signal map psi"""
    curve = discretize(wavy_curve())
    moved = pushforward_atoms(curve, lambda x: x, psi=lambda m: 2.0 * m + 1.0)
    np.testing.assert_allclose(moved.signals, 2.0 * curve.signals + 1.0)


def test_pushforward_singular_jacobian():
    """Test a collapsing map is rejected"""
    curve = discretize(wavy_curve())
    with pytest.raises(SingularJacobianError):
        pushforward_atoms(curve, lambda x: x * [1.0, 0.0])


def test_affine_pushforward_commutes_with_discretization():
    """Test pushforward(discretize(S)) = discretize(transport(S)) for affine maps on polylines"""
    shape = wavy_curve()
    a = np.array([[2.0, 0.0], [0.0, 0.5]])
    b = np.array([0.5, -0.25])
    field_map = lambda x: x @ a.T + b  # noqa: E731
    pushed = pushforward_atoms(discretize(shape), field_map, jacobian=lambda x: np.broadcast_to(a, (len(x), 2, 2)))
    moved = discretize(shape.replace(vertices=field_map(shape.vertices)))
    np.testing.assert_allclose(pushed.positions, moved.positions, rtol=0, atol=1e-14)
    np.testing.assert_allclose(pushed.xi, moved.xi, rtol=0, atol=1e-14)
    np.testing.assert_array_equal(pushed.signals, moved.signals)


def test_nonlinear_pushforward_agrees_under_refinement():
    """Test pushforward and re-discretization agree to second order in the mesh size"""
    rng = np.random.default_rng(2)
    path = random_path(rng, points=5, timesteps=4)
    phi = flow_map(path)
    cfg = KernelConfig.parse("gaussian:0.3", "gaussian:1.0")
    coarse = crenellated_circle(segments=24, crenels=2)
    gaps = []
    for factor in (2, 4):
        shape = refine_curve(coarse, factor)
        pushed = pushforward_atoms(discretize(shape), phi)
        moved = discretize(transport_shape(shape, path))
        gaps.append(fcurrent_distance(cfg, pushed, moved) / discrete_mass(discretize(shape)))
    assert gaps[1] < 0.5 * gaps[0]


def test_continuity_in_field_amplitude():
    """Test d(C, phi_* C) / mass shrinks linearly with the field amplitude"""
    curve = discretize(wavy_curve())
    cfg = KernelConfig.parse("gaussian:0.2", "gaussian:1.0")
    ratios = []
    for amp in (1e-1, 1e-2, 1e-3):
        field = AnalyticVelocityField(field=lambda t, x, amp=amp: amp * np.stack([np.sin(x[:, 1]), np.cos(x[:, 0])], axis=1))
        moved = pushforward_atoms(curve, flow_map(field, timesteps=10))
        ratios.append(fcurrent_distance(cfg, curve, moved) / discrete_mass(curve) / amp)
    assert ratios[0] > 0
    assert max(ratios) / min(ratios) < 2.0


def test_volume_element_change_bounded_by_lipschitz_norm():
    """Test |J xi - xi| <= beta |Dv| |xi| for small fields"""
    curve = discretize(wavy_curve())
    beta = 2.0
    for amp in (0.05, 0.01):
        lipschitz = amp
        field = AnalyticVelocityField(
            field=lambda t, x, amp=amp: amp * np.stack([np.sin(x[:, 1]), np.cos(x[:, 0])], axis=1),
            lipschitz=lipschitz,
        )
        moved = pushforward_atoms(curve, flow_map(field, timesteps=10))
        change = np.linalg.norm(moved.xi - curve.xi, axis=1)
        assert np.all(change <= beta * lipschitz * np.linalg.norm(curve.xi, axis=1))


def test_path_flow_reproduces_control_points():
    """Test flowing the control points with the path gives the stored trajectories"""
    rng = np.random.default_rng(3)
    for integrator in ("euler", "rk4"):
        path = random_path(rng, integrator=integrator)
        np.testing.assert_array_equal(flow_points(path, path.control_points[0]), path.control_points)


def test_empty_current_pushforward():
    """Test empty input passes through"""
    empty = FCurrent.empty(2, 1, 1)
    assert len(pushforward_atoms(empty, lambda x: x)) == 0
