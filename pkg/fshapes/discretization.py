"""Discretization of functional shapes into Dirac functional currents

Each cell becomes one atom: its center (edge midpoint or triangle centroid),
its volume element (edge vector, or half the cross product of two triangle
edges) and the mean of its vertex signals.
"""

import logging

import numpy as np

from fshapes.errors import ShapeValidationError
from fshapes.models import FCurrent, FunctionalShape, validate_shape

logger = logging.getLogger(__name__)

# Atoms with |xi| at most this fraction of the bounding-box diagonal are dropped
DEGENERACY_RATIO = 1e-12


def cell_atoms(vertices: np.ndarray, cells: np.ndarray, manifold_dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Centers and volume elements of every cell, without any filtering"""
    corners = vertices[cells]
    centers = corners.mean(axis=1)
    if manifold_dim == 1:
        xi = corners[:, 1] - corners[:, 0]
    else:
        xi = 0.5 * np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    return centers, xi


def pull_back_gradient(
    vertices: np.ndarray,
    cells: np.ndarray,
    manifold_dim: int,
    grad_centers: np.ndarray,
    grad_xi: np.ndarray,
) -> np.ndarray:
    """Chain rule from cell centers and volume elements back to vertex coordinates"""
    grad = np.zeros_like(vertices)
    arity = manifold_dim + 1
    for corner in range(arity):
        np.add.at(grad, cells[:, corner], grad_centers / arity)
    if manifold_dim == 1:
        np.add.at(grad, cells[:, 1], grad_xi)
        np.add.at(grad, cells[:, 0], -grad_xi)
    else:
        corners = vertices[cells]
        e1 = corners[:, 1] - corners[:, 0]
        e2 = corners[:, 2] - corners[:, 0]
        g1 = 0.5 * np.cross(e2, grad_xi)
        g2 = 0.5 * np.cross(grad_xi, e1)
        np.add.at(grad, cells[:, 1], g1)
        np.add.at(grad, cells[:, 2], g2)
        np.add.at(grad, cells[:, 0], -(g1 + g2))
    return grad


def degenerate_cells(shape: FunctionalShape) -> np.ndarray:
    """Indices of cells whose volume element falls under the degeneracy threshold"""
    _, xi = cell_atoms(shape.vertices, shape.cells, shape.manifold_dim)
    threshold = DEGENERACY_RATIO * shape.diameter()
    return np.flatnonzero(np.linalg.norm(xi, axis=1) <= threshold)


def _discretize(shape: FunctionalShape, manifold_dim: int) -> FCurrent:
    violations = validate_shape(shape)
    if shape.manifold_dim != manifold_dim:
        violations.insert(0, f"expected manifold dimension {manifold_dim}, got {shape.manifold_dim}")
    if violations:
        raise ShapeValidationError(violations)

    if shape.n_cells == 0:
        return FCurrent.empty(shape.ambient_dim, shape.manifold_dim, shape.signal_dim)
    centers, xi = cell_atoms(shape.vertices, shape.cells, manifold_dim)
    signals = shape.signal[shape.cells].mean(axis=1)

    keep = np.linalg.norm(xi, axis=1) > DEGENERACY_RATIO * shape.diameter()
    dropped = int(np.count_nonzero(~keep))
    if dropped:
        logger.warning("dropped %d degenerate atom(s) out of %d cells", dropped, shape.n_cells)
    return FCurrent(
        ambient_dim=shape.ambient_dim,
        manifold_dim=shape.manifold_dim,
        signal_dim=shape.signal_dim,
        positions=centers[keep],
        signals=signals[keep],
        xi=xi[keep],
    )


def discretize_curve(shape: FunctionalShape) -> FCurrent:
    """One atom per edge: midpoint, edge vector, mean endpoint signal"""
    return _discretize(shape, 1)


def discretize_surface(shape: FunctionalShape) -> FCurrent:
    """One atom per triangle: centroid, half cross product normal, mean vertex signal"""
    return _discretize(shape, 2)


def discretize(shape: FunctionalShape) -> FCurrent:
    """Dispatch on the manifold dimension of the shape"""
    if shape.manifold_dim == 2:
        return discretize_surface(shape)
    return discretize_curve(shape)


def flip_orientation(shape: FunctionalShape) -> FunctionalShape:
    """Reverse the orientation of every cell"""
    if shape.manifold_dim == 1:
        cells = shape.cells[:, ::-1]
    else:
        cells = shape.cells[:, [0, 2, 1]]
    return shape.replace(cells=np.ascontiguousarray(cells))


def refine_curve(shape: FunctionalShape, factor: int) -> FunctionalShape:
    """Split every edge into `factor` collinear sub-edges with interpolated signal"""
    if factor < 2:
        raise ValueError(f"refinement factor must be at least 2, got {factor}")
    if shape.manifold_dim != 1:
        raise ShapeValidationError(["refine_curve needs a polyline (manifold dimension 1)"])
    violations = validate_shape(shape)
    if violations:
        raise ShapeValidationError(violations)

    vertices = [shape.vertices]
    signal = [shape.signal]
    cells = []
    next_index = shape.n_vertices
    weights = np.arange(1, factor) / factor
    for a, b in shape.cells:
        inner = shape.vertices[a] + weights[:, None] * (shape.vertices[b] - shape.vertices[a])
        inner_signal = shape.signal[a] + weights[:, None] * (shape.signal[b] - shape.signal[a])
        vertices.append(inner)
        signal.append(inner_signal)
        chain = [a, *range(next_index, next_index + factor - 1), b]
        cells.extend(zip(chain[:-1], chain[1:]))
        next_index += factor - 1
    return shape.replace(
        vertices=np.vstack(vertices),
        signal=np.vstack(signal),
        cells=np.array(cells, dtype=np.int64).reshape(-1, 2),
    )
