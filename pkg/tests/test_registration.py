"""Tests for LDDMM registration with functional-current attachment"""

import numpy as np
import pytest

from fshapes.config import KernelConfig, RegistrationConfig
from fshapes.errors import DimensionMismatchError
from fshapes.models import FunctionalShape
from fshapes.registration import apply_result, energy, gradient, register
from fshapes.synth import stain_midpoint, stained_ellipse


def polyline(points=21, shift=(0.0, 0.0)):
    t = np.linspace(0.0, 1.0, points)
    return FunctionalShape(
        ambient_dim=2,
        manifold_dim=1,
        vertices=np.stack([t, 0.2 * np.sin(3 * t)], axis=1) + np.asarray(shift),
        cells=np.stack([np.arange(points - 1), np.arange(1, points)], axis=1),
        signal=np.cos(5 * t),
    )


def config(weight=10.0, **kwargs):
    kernels = kwargs.pop("kernels", KernelConfig.parse("gaussian:0.5", "gaussian:1.0"))
    return RegistrationConfig(kernels=kernels, sigma_v=kwargs.pop("sigma_v", 0.5), weight=weight, **kwargs)


def test_identical_shapes_need_no_iteration():
    """Test source == target stops immediately at zero energy"""
    shape = polyline()
    result = register(config(timesteps=5), shape, shape)
    assert result.iterations == 0
    assert result.stop_reason == "grad_tol"
    assert result.energy_trace[-1][2] <= 1e-10
    np.testing.assert_array_equal(result.deformed_source.vertices, shape.vertices)


@pytest.mark.parametrize("integrator", ["euler", "rk4"])
def test_gradient_matches_finite_differences(integrator):
    """Test the reverse-mode gradient against central differences"""
    rng = np.random.default_rng(0)
    source = polyline(points=5)
    target = polyline(points=5, shift=(0.15, -0.1))
    cfg = config(weight=2.0, timesteps=3, integrator=integrator)
    momenta = 0.1 * rng.normal(size=(3, 5, 2))
    grad = gradient(cfg, source, target, momenta)

    step = 1e-6
    numeric = np.zeros_like(momenta)
    for idx in np.ndindex(momenta.shape):
        plus, minus = momenta.copy(), momenta.copy()
        plus[idx] += step
        minus[idx] -= step
        numeric[idx] = (energy(cfg, source, target, plus)[2] - energy(cfg, source, target, minus)[2]) / (2 * step)
    np.testing.assert_allclose(grad, numeric, rtol=1e-5, atol=1e-7)


def test_gradient_is_affine_in_weight():
    """Test doubling lambda doubles the attachment part of the gradient"""
    rng = np.random.default_rng(1)
    source, target = polyline(points=6), polyline(points=6, shift=(0.1, 0.05))
    momenta = 0.2 * rng.normal(size=(4, 6, 2))
    g1, g2, g3 = (gradient(config(weight=w, timesteps=4), source, target, momenta) for w in (1.0, 2.0, 3.0))
    np.testing.assert_allclose(g3 - g1, 2.0 * (g2 - g1), rtol=1e-9, atol=1e-12)
    assert np.linalg.norm(g2 - g1) > 0


def test_energy_components():
    """Test zero momenta carry no kinetic energy and the total adds up"""
    source, target = polyline(), polyline(shift=(0.2, 0.0))
    kinetic, attachment, total = energy(config(timesteps=4), source, target, np.zeros((4, 21, 2)))
    assert kinetic == 0.0
    assert attachment > 0.0
    assert total == attachment
    with pytest.raises(DimensionMismatchError):
        energy(config(timesteps=4), source, target, np.zeros((3, 21, 2)))


def test_translated_polyline_is_matched():
    """Test registration removes most of the attachment for a small translation"""
    source, target = polyline(), polyline(shift=(0.2, 0.1))
    seen = []
    result = register(
        config(weight=100.0, timesteps=5, max_iters=200),
        source,
        target,
        on_iteration=lambda i, values, step: seen.append(i),
    )
    trace = result.energy_trace
    assert trace[-1][1] <= 0.05 * trace[0][1]
    assert all(b[2] <= a[2] for a, b in zip(trace, trace[1:]))
    assert seen == list(range(1, result.iterations + 1))
    assert len(result.steps) == result.iterations + 1 and result.steps[0] == 0.0
    assert result.stop_reason in ("grad_tol", "max_iters", "step_collapse")


def test_translation_by_half_unit_is_matched():
    """Test a (0.5, 0) shift of a constant-signal polyline under a geometry-only kernel"""
    source = polyline().replace(signal=np.ones(21))
    target = source.replace(vertices=source.vertices + np.array([0.5, 0.0]))
    cfg = config(weight=100.0, timesteps=10, max_iters=200, kernels=KernelConfig.parse("gaussian:0.5", "constant"))
    trace = register(cfg, source, target).energy_trace
    assert len(trace) <= 201
    assert trace[-1][1] <= 0.05 * trace[0][1]


def test_small_weight_keeps_flow_near_identity():
    """Test lambda = 1e-6 ends with kinetic energy at most 1e-6 of the initial attachment"""
    edge = FunctionalShape(ambient_dim=2, manifold_dim=1, vertices=[[0.0, 0.0], [1.0, 0.0]], cells=[[0, 1]], signal=[0.0, 0.0])
    target = edge.replace(vertices=edge.vertices + np.array([0.5, 0.0]))
    cfg = config(weight=1e-6, timesteps=4, max_iters=50, grad_tol=0.0, kernels=KernelConfig.parse("gaussian:10", "constant"))
    result = register(cfg, edge, target)
    assert result.iterations > 0
    kinetic = result.energy_trace[-1][0]
    assert 0.0 < kinetic <= 1e-6 * result.energy_trace[0][1]


def test_currents_kernel_ignores_signal_permutation():
    """Test a constant signal kernel makes the run independent of signal values"""
    rng = np.random.default_rng(2)
    source, target = polyline(), polyline(shift=(0.1, 0.1))
    shuffled = source.replace(signal=source.signal[rng.permutation(source.n_vertices)])
    cfg = config(timesteps=4, max_iters=5, kernels=KernelConfig.parse("gaussian:0.5", "constant"))
    plain = register(cfg, source, target).energy_trace
    permuted = register(cfg, shuffled, target).energy_trace
    np.testing.assert_allclose(np.array(permuted), np.array(plain), rtol=0, atol=1e-12)


def test_stain_slides_toward_target():
    """Test the signal term drags the stain along the ellipse"""
    source = stained_ellipse(vertices=48, stain_center=0.0)
    target = stained_ellipse(vertices=48, stain_center=np.pi / 4)
    cfg = config(weight=100.0, timesteps=5, max_iters=100, kernels=KernelConfig.parse("gaussian:0.5", "gaussian:0.2"))
    result = register(cfg, source, target)
    goal = stain_midpoint(target)
    before = np.linalg.norm(stain_midpoint(source) - goal)
    after = np.linalg.norm(stain_midpoint(result.deformed_source) - goal)
    assert after < before
    assert after <= cfg.kernels.geom_width
    assert result.energy_trace[-1][1] < result.energy_trace[0][1]


def test_zero_iterations_allowed():
    """Test max_iters = 0 returns the identity path"""
    source, target = polyline(), polyline(shift=(0.2, 0.0))
    result = register(config(timesteps=3, max_iters=0), source, target)
    assert result.iterations == 0
    assert result.stop_reason == "max_iters"
    np.testing.assert_array_equal(result.path.momenta, 0.0)


def test_apply_result_carries_other_shapes():
    """Test the registered flow moves the source like the deformed source and rejects other dimensions"""
    source, target = polyline(points=11), polyline(points=11, shift=(0.1, 0.0))
    result = register(config(timesteps=3, max_iters=10), source, target)
    moved = apply_result(result, source)
    np.testing.assert_allclose(moved.vertices, result.deformed_source.vertices, atol=1e-12)
    np.testing.assert_array_equal(moved.signal, source.signal)

    other = FunctionalShape(ambient_dim=3, manifold_dim=1, vertices=np.eye(3), cells=[[0, 1]], signal=[0, 0, 0])
    with pytest.raises(DimensionMismatchError):
        apply_result(result, other)


def test_source_target_dimension_mismatch():
    """Test registering shapes with different signal dimensions"""
    source = polyline()
    target = source.replace(signal_dim=2, signal=np.zeros((source.n_vertices, 2)))
    with pytest.raises(DimensionMismatchError):
        register(config(), source, target)
