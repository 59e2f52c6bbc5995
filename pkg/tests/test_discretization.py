"""Tests for shape discretization"""

import logging

import numpy as np
import pytest

from fshapes.config import KernelConfig
from fshapes.discretization import (
    cell_atoms,
    degenerate_cells,
    discretize,
    discretize_curve,
    discretize_surface,
    flip_orientation,
    pull_back_gradient,
    refine_curve,
)
from fshapes.errors import ShapeValidationError
from fshapes.kernels import fcurrent_distance
from fshapes.models import FunctionalShape, discrete_mass
from fshapes.synth import sphere_with_caps


def segment_shape(signal=(0.0, 2.0)):
    return FunctionalShape(ambient_dim=2, manifold_dim=1, vertices=[[0, 0], [2, 0]], cells=[[0, 1]], signal=signal)


def polygon(count, radius=1.0):
    theta = 2 * np.pi * np.arange(count) / count
    idx = np.arange(count)
    return FunctionalShape(
        ambient_dim=2,
        manifold_dim=1,
        vertices=radius * np.stack([np.cos(theta), np.sin(theta)], axis=1),
        cells=np.stack([idx, np.roll(idx, -1)], axis=1),
        signal=np.cos(theta).reshape(-1, 1),
    )


def test_single_segment():
    """Test midpoint, edge vector and mean signal"""
    c = discretize_curve(segment_shape())
    np.testing.assert_array_equal(c.positions, [[1.0, 0.0]])
    np.testing.assert_array_equal(c.xi, [[2.0, 0.0]])
    np.testing.assert_array_equal(c.signals, [[1.0]])


def test_single_triangle():
    """Test centroid and half cross product normal"""
    shape = FunctionalShape(
        ambient_dim=3,
        manifold_dim=2,
        vertices=[[0, 0, 0], [1, 0, 0], [0, 1, 0]],
        cells=[[0, 1, 2]],
        signal=[0.0, 3.0, 6.0],
    )
    c = discretize_surface(shape)
    np.testing.assert_allclose(c.positions, [[1 / 3, 1 / 3, 0.0]])
    np.testing.assert_array_equal(c.xi, [[0.0, 0.0, 0.5]])
    np.testing.assert_array_equal(c.signals, [[3.0]])


def test_closed_polygon_mass_is_perimeter():
    """Test discrete mass of a regular polygon"""
    count = 100
    c = discretize(polygon(count))
    assert len(c) == count
    assert discrete_mass(c) == pytest.approx(2 * count * np.sin(np.pi / count), rel=1e-12)
    np.testing.assert_allclose(c.xi.sum(axis=0), 0.0, atol=1e-12)


def test_wrong_manifold_dimension_rejected():
    """Test discretize_surface on a polyline"""
    with pytest.raises(ShapeValidationError) as excinfo:
        discretize_surface(segment_shape())
    assert "expected manifold dimension 2" in excinfo.value.violations[0]


def test_invalid_shape_rejected():
    """Test invariant violations abort discretization"""
    bad = FunctionalShape(ambient_dim=2, manifold_dim=1, vertices=[[0, 0], [1, 0]], cells=[[0, 2]], signal=[0, 0])
    with pytest.raises(ShapeValidationError):
        discretize_curve(bad)


def test_degenerate_cells_dropped_with_warning(caplog):
    """Test zero-length edges are dropped and counted"""
    shape = FunctionalShape(
        ambient_dim=2,
        manifold_dim=1,
        vertices=[[0, 0], [1, 0], [1, 0], [2, 0]],
        cells=[[0, 1], [1, 2], [2, 3]],
        signal=[0, 1, 2, 3],
    )
    np.testing.assert_array_equal(degenerate_cells(shape), [1])
    with caplog.at_level(logging.WARNING, logger="fshapes.discretization"):
        c = discretize_curve(shape)
    assert len(c) == 2
    assert "dropped 1 degenerate atom(s)" in caplog.text


def test_empty_shape_gives_empty_current():
    """Test shape without cells"""
    shape = FunctionalShape(ambient_dim=3, manifold_dim=2, vertices=[[0, 0, 0]], cells=np.zeros((0, 3), dtype=int), signal=[1.0])
    assert len(discretize(shape)) == 0


def test_flip_orientation_negates_volume_elements():
    """Test orientation reversal on curves and surfaces"""
    c = discretize(polygon(12))
    flipped = discretize(flip_orientation(polygon(12)))
    np.testing.assert_array_equal(flipped.xi, -c.xi)
    tri = FunctionalShape(ambient_dim=3, manifold_dim=2, vertices=np.eye(3), cells=[[0, 1, 2]], signal=[0, 0, 0])
    np.testing.assert_allclose(discretize(flip_orientation(tri)).xi, -discretize(tri).xi)


def test_refine_curve_keeps_endpoints_and_mass():
    """Test edge subdivision"""
    shape = segment_shape()
    fine = refine_curve(shape, 4)
    assert fine.n_cells == 4
    assert discrete_mass(discretize(fine)) == pytest.approx(2.0)
    np.testing.assert_allclose(np.sort(fine.signal[:, 0]), [0.0, 0.5, 1.0, 1.5, 2.0])
    with pytest.raises(ValueError):
        refine_curve(shape, 1)


def test_refinement_converges_to_polygon_current():
    """Test W' distance to the polygon current decreases quadratically under refinement"""
    cfg = KernelConfig.parse("gaussian:0.3", "gaussian:0.5")
    coarse = polygon(32)
    reference = discretize(refine_curve(coarse, 64))
    distances = [fcurrent_distance(cfg, discretize(coarse), reference)]
    for factor in (2, 4, 8):
        distances.append(fcurrent_distance(cfg, discretize(refine_curve(coarse, factor)), reference))
    assert all(b < a for a, b in zip(distances, distances[1:]))
    assert distances[3] <= 0.25 * distances[1]


def test_pull_back_gradient_matches_finite_differences():
    """Test the chain rule through cell_atoms for triangles"""
    rng = np.random.default_rng(0)
    vertices = rng.normal(size=(5, 3))
    cells = np.array([[0, 1, 2], [1, 3, 2], [2, 3, 4]])
    gc, gx = rng.normal(size=(3, 3)), rng.normal(size=(3, 3))

    def objective(v):
        centers, xi = cell_atoms(v, cells, 2)
        return float(np.sum(gc * centers) + np.sum(gx * xi))

    grad = pull_back_gradient(vertices, cells, 2, gc, gx)
    numeric = np.zeros_like(vertices)
    for idx in np.ndindex(vertices.shape):
        plus, minus = vertices.copy(), vertices.copy()
        plus[idx] += 1e-6
        minus[idx] -= 1e-6
        numeric[idx] = (objective(plus) - objective(minus)) / 2e-6
    np.testing.assert_allclose(grad, numeric, rtol=1e-6, atol=1e-8)


def test_unit_square_area():
    """Test two triangles of the unit square carry total mass 1"""
    square = FunctionalShape(
        ambient_dim=3,
        manifold_dim=2,
        vertices=[[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]],
        cells=[[0, 1, 2], [0, 2, 3]],
        signal=[0.0, 1.0, 2.0, 3.0],
    )
    c = discretize_surface(square)
    assert discrete_mass(c) == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_array_equal(c.xi, [[0.0, 0.0, 0.5], [0.0, 0.0, 0.5]])


def test_rigid_motion_equivariance():
    """Test rotating and translating the vertices rotates positions and volume elements and keeps signals"""
    angle = 0.7
    rotation2 = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    rotation3 = np.eye(3)
    rotation3[1:, 1:] = rotation2
    rotation3 = rotation3 @ np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    for shape, rotation in ((polygon(9), rotation2), (sphere_with_caps(rings=4, sectors=6), rotation3)):
        shift = np.arange(1, shape.ambient_dim + 1) * 0.25
        moved = discretize(shape.replace(vertices=shape.vertices @ rotation.T + shift))
        base = discretize(shape)
        np.testing.assert_allclose(moved.positions, base.positions @ rotation.T + shift, atol=1e-12)
        np.testing.assert_allclose(moved.xi, base.xi @ rotation.T, atol=1e-12)
        np.testing.assert_array_equal(moved.signals, base.signals)
