"""Synthetic functional shapes for experiments, demos and tests"""

import math
from typing import Tuple

import numpy as np

from fshapes.models import FunctionalShape


def _closed_cells(count: int, offset: int = 0) -> np.ndarray:
    idx = np.arange(count) + offset
    return np.stack([idx, np.roll(idx, -1)], axis=1)


def _open_cells(count: int, offset: int = 0) -> np.ndarray:
    idx = np.arange(count - 1) + offset
    return np.stack([idx, idx + 1], axis=1)


def crenel_antiderivative(theta: np.ndarray, crenels: int, amplitude: float) -> np.ndarray:
    """Integral from 0 to theta of the crenel signal (amplitude on the first half of every period)"""
    period = 2.0 * math.pi / crenels
    theta = np.asarray(theta, dtype=np.float64)
    turns = np.floor(theta / period)
    inner = theta - turns * period
    return amplitude * (turns * 0.5 * period + np.minimum(inner, 0.5 * period))


def crenellated_circle(
    segments: int = 512,
    crenels: int = 16,
    amplitude: float = 1.0,
    rotation: float = 0.0,
) -> FunctionalShape:
    """Unit circle carrying a crenel signal rotated by `rotation` radians

    Each vertex gets the exact mean of the rotated signal over its dual arc
    (half an edge on each side), so the signal moves continuously with the
    rotation even for sub-edge angles.
    """
    if segments < 3:
        raise ValueError("a circle needs at least 3 segments")
    if crenels < 1:
        raise ValueError("crenels must be at least 1")
    theta = 2.0 * math.pi * np.arange(segments) / segments
    half = math.pi / segments
    lo, hi = theta - half - rotation, theta + half - rotation
    signal = (crenel_antiderivative(hi, crenels, amplitude) - crenel_antiderivative(lo, crenels, amplitude)) / (2 * half)
    return FunctionalShape(
        ambient_dim=2,
        manifold_dim=1,
        vertices=np.stack([np.cos(theta), np.sin(theta)], axis=1),
        cells=_closed_cells(segments),
        signal=signal.reshape(-1, 1),
    )


def crenel_l1_distance(crenels: int, amplitude: float, dtheta: float) -> float:
    """Exact L1 distance on the unit circle between the crenel signal and its rotation by dtheta"""
    period = 2.0 * math.pi / crenels
    shift = math.fmod(abs(dtheta), period)
    return abs(amplitude) * crenels * 2.0 * min(shift, period - shift)


def stained_ellipse(
    vertices: int = 64,
    axes: Tuple[float, float] = (2.0, 1.2),
    stain_center: float = 0.0,
    stain_width: float = 1.2,
    center: Tuple[float, float] = (0.0, 0.0),
) -> FunctionalShape:
    """Closed ellipse with signal 1 on the arc of angular width stain_width around stain_center, 0 elsewhere"""
    theta = 2.0 * math.pi * np.arange(vertices) / vertices
    offset = np.angle(np.exp(1j * (theta - stain_center)))
    signal = (np.abs(offset) <= 0.5 * stain_width).astype(np.float64)
    points = np.stack([axes[0] * np.cos(theta) + center[0], axes[1] * np.sin(theta) + center[1]], axis=1)
    return FunctionalShape(
        ambient_dim=2,
        manifold_dim=1,
        vertices=points,
        cells=_closed_cells(vertices),
        signal=signal.reshape(-1, 1),
    )


def stain_midpoint(shape: FunctionalShape, threshold: float = 0.5) -> np.ndarray:
    """Mean position of the vertices whose first signal coordinate exceeds threshold"""
    mask = shape.signal[:, 0] > threshold
    if not np.any(mask):
        raise ValueError("shape has no stained vertex")
    return shape.vertices[mask].mean(axis=0)


def fiber_bundle(
    fibers: int = 300,
    samples: int = 20,
    length: float = 1.0,
    spread: float = 0.5,
    bend: float = 0.1,
    seed: int = 0,
) -> FunctionalShape:
    """Planar bundle of gently bent open fibers, one random signal value per fiber"""
    if fibers < 1 or samples < 2:
        raise ValueError("need at least one fiber of at least two samples")
    rng = np.random.default_rng(seed)
    s = np.linspace(0.0, length, samples)
    heights = np.linspace(-0.5 * spread, 0.5 * spread, fibers)
    values = rng.uniform(0.0, 1.0, fibers)
    vertices, cells, signal = [], [], []
    for f, (y0, value) in enumerate(zip(heights, values)):
        y = y0 + bend * np.sin(math.pi * s / length) * (1.0 + y0)
        vertices.append(np.stack([s, y], axis=1))
        cells.append(_open_cells(samples, f * samples))
        signal.append(np.full((samples, 1), value))
    return FunctionalShape(
        ambient_dim=2,
        manifold_dim=1,
        vertices=np.vstack(vertices),
        cells=np.vstack(cells),
        signal=np.vstack(signal),
    )


def straight_segment(edges: int = 200, length: float = 1.0, signal: float = 1.0) -> FunctionalShape:
    """Segment from the origin along the first axis, split into equal edges, constant signal"""
    x = np.linspace(0.0, length, edges + 1)
    return FunctionalShape(
        ambient_dim=2,
        manifold_dim=1,
        vertices=np.stack([x, np.zeros_like(x)], axis=1),
        cells=_open_cells(edges + 1),
        signal=np.full((edges + 1, 1), float(signal)),
    )


def sphere_with_caps(
    rings: int = 12,
    sectors: int = 24,
    radius: float = 1.0,
    cap_angle: float = 0.5,
) -> FunctionalShape:
    """UV sphere with outward normals; signal 1 within cap_angle of either pole, 0 elsewhere"""
    if rings < 2 or sectors < 3:
        raise ValueError("sphere needs rings >= 2 and sectors >= 3")
    polar = math.pi * np.arange(1, rings) / rings
    azimuth = 2.0 * math.pi * np.arange(sectors) / sectors
    p, a = np.meshgrid(polar, azimuth, indexing="ij")
    ring_points = np.stack([np.sin(p) * np.cos(a), np.sin(p) * np.sin(a), np.cos(p)], axis=-1).reshape(-1, 3)
    vertices = radius * np.vstack([[0.0, 0.0, 1.0], ring_points, [0.0, 0.0, -1.0]])
    north, south = 0, len(vertices) - 1

    def ring(i: int, j: int) -> int:
        return 1 + i * sectors + j % sectors

    cells = []
    for j in range(sectors):
        cells.append((north, ring(0, j), ring(0, j + 1)))
        for i in range(rings - 2):
            cells.append((ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)))
            cells.append((ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)))
        cells.append((south, ring(rings - 2, j + 1), ring(rings - 2, j)))

    angle = np.arccos(np.clip(vertices[:, 2] / radius, -1.0, 1.0))
    signal = ((angle <= cap_angle) | (angle >= math.pi - cap_angle)).astype(np.float64)
    return FunctionalShape(
        ambient_dim=3,
        manifold_dim=2,
        vertices=vertices,
        cells=np.array(cells, dtype=np.int64),
        signal=signal.reshape(-1, 1),
    )


def deformation_grid(
    lower: Tuple[float, float] = (-1.0, -1.0),
    upper: Tuple[float, float] = (1.0, 1.0),
    lines: int = 11,
    samples: int = 41,
) -> FunctionalShape:
    """Planar grid of horizontal and vertical polylines with zero signal, for visualizing flows"""
    xs = np.linspace(lower[0], upper[0], lines)
    ys = np.linspace(lower[1], upper[1], lines)
    tx = np.linspace(lower[0], upper[0], samples)
    ty = np.linspace(lower[1], upper[1], samples)
    vertices, cells = [], []
    offset = 0
    for y in ys:
        vertices.append(np.stack([tx, np.full(samples, y)], axis=1))
        cells.append(_open_cells(samples, offset))
        offset += samples
    for x in xs:
        vertices.append(np.stack([np.full(samples, x), ty], axis=1))
        cells.append(_open_cells(samples, offset))
        offset += samples
    return FunctionalShape(
        ambient_dim=2,
        manifold_dim=1,
        vertices=np.vstack(vertices),
        cells=np.vstack(cells),
        signal=np.zeros((offset, 1)),
    )


def two_piece_polyline(gap: float, segments: int = 10, connected: bool = True) -> FunctionalShape:
    """Two unit segments on the first axis with signals 0 and 1, the right one shifted by gap

    The connected variant adds the single edge of length gap joining the pieces,
    so both variants differ by exactly one atom.
    """
    if gap <= 0:
        raise ValueError("gap must be positive")
    left = np.linspace(-1.0, 0.0, segments + 1)
    right = np.linspace(0.0, 1.0, segments + 1) + gap
    x = np.concatenate([left, right])
    vertices = np.stack([x, np.zeros_like(x)], axis=1)
    signal = np.concatenate([np.zeros(segments + 1), np.ones(segments + 1)]).reshape(-1, 1)
    cells = [_open_cells(segments + 1), _open_cells(segments + 1, segments + 1)]
    if connected:
        cells.append(np.array([[segments, segments + 1]]))
    return FunctionalShape(ambient_dim=2, manifold_dim=1, vertices=vertices, cells=np.vstack(cells), signal=signal)
