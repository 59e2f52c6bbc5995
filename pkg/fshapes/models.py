"""Data models for functional shapes and their discrete functional currents"""

from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, ValidationInfo, field_validator, model_validator

from fshapes.errors import DimensionMismatchError, FShapeError

# (ambient_dim, manifold_dim) pairs with a discretization
SUPPORTED_DIMS = {(2, 1), (3, 1), (3, 2)}


def volume_dim(ambient_dim: int, manifold_dim: int) -> int:
    """Length of the vector storing a volume element (surfaces use the normal in R^3)"""
    return 3 if manifold_dim == 2 else ambient_dim


def _as_rows(value, width: Optional[int], dtype) -> np.ndarray:
    """Coerce a nested list or array to a read-only 2-D array"""
    arr = np.array(value, dtype=dtype)
    if arr.ndim == 0:
        raise ValueError("expected a list of rows")
    if arr.size == 0:
        arr = arr.reshape(0, width or 0)
    elif arr.ndim == 1:
        if width is None:
            raise ValueError("cannot infer row width")
        arr = arr.reshape(-1, width)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D array, got {arr.ndim} dimensions")
    arr.setflags(write=False)
    return arr


def _as_vector(value) -> np.ndarray:
    arr = np.array(value, dtype=np.float64).reshape(-1)
    arr.setflags(write=False)
    return arr


def unwrap_validation_error(err: ValidationError) -> Exception:
    """The fshapes error a validator raised, or err itself when there is none"""
    for detail in err.errors():
        cause = detail.get("ctx", {}).get("error")
        if isinstance(cause, FShapeError):
            return cause
    return err


class FunctionalShape(BaseModel):
    """A polyline or triangle mesh carrying one signal vector per vertex"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    ambient_dim: int = Field(description="Dimension n of the ambient space (2 or 3)")
    manifold_dim: int = Field(description="Dimension d of the cells (1 = polyline, 2 = triangles)")
    signal_dim: int = Field(default=1, description="Dimension k of the signal values", ge=1)
    vertices: np.ndarray = Field(description="Vertex coordinates, shape (V, n)")
    cells: np.ndarray = Field(description="Oriented zero-based cells, shape (C, d + 1)")
    signal: np.ndarray = Field(description="Per-vertex signal values, shape (V, k)")

    @field_validator("vertices", mode="before")
    @classmethod
    def _coerce_vertices(cls, value, info: ValidationInfo):
        return _as_rows(value, info.data.get("ambient_dim"), np.float64)

    @field_validator("cells", mode="before")
    @classmethod
    def _coerce_cells(cls, value, info: ValidationInfo):
        d = info.data.get("manifold_dim")
        return _as_rows(value, None if d is None else d + 1, np.int64)

    @field_validator("signal", mode="before")
    @classmethod
    def _coerce_signal(cls, value, info: ValidationInfo):
        return _as_rows(value, info.data.get("signal_dim"), np.float64)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    def diameter(self) -> float:
        """Length of the bounding-box diagonal of the vertices"""
        if self.n_vertices == 0:
            return 0.0
        return float(np.linalg.norm(self.vertices.max(axis=0) - self.vertices.min(axis=0)))

    def replace(self, **changes) -> "FunctionalShape":
        """Return a validated copy with some fields replaced"""
        data = {
            "ambient_dim": self.ambient_dim,
            "manifold_dim": self.manifold_dim,
            "signal_dim": self.signal_dim,
            "vertices": self.vertices,
            "cells": self.cells,
            "signal": self.signal,
        }
        data.update(changes)
        return FunctionalShape(**data)


class DiracFCurrent(BaseModel):
    """A single Dirac functional current: position, signal value and volume element"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    x: np.ndarray = Field(description="Position in R^n")
    m: np.ndarray = Field(description="Signal value in R^k")
    xi: np.ndarray = Field(description="Volume element (tangent vector or area-weighted normal)")

    @field_validator("x", "m", "xi", mode="before")
    @classmethod
    def _coerce(cls, value):
        return _as_vector(value)


class FCurrent(BaseModel):
    """A finite sum of Dirac functional currents, stored as aligned arrays"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    ambient_dim: int = Field(description="Dimension n of the ambient space")
    manifold_dim: int = Field(description="Dimension d of the underlying cells")
    signal_dim: int = Field(description="Dimension k of the signal values", ge=1)
    positions: np.ndarray = Field(description="Atom positions, shape (N, n)")
    signals: np.ndarray = Field(description="Atom signal values, shape (N, k)")
    xi: np.ndarray = Field(description="Atom volume elements, shape (N, q)")

    def __init__(self, **data):
        try:
            super().__init__(**data)
        except ValidationError as err:
            raise unwrap_validation_error(err) from None

    @field_validator("positions", mode="before")
    @classmethod
    def _coerce_positions(cls, value, info: ValidationInfo):
        return _as_rows(value, info.data.get("ambient_dim"), np.float64)

    @field_validator("signals", mode="before")
    @classmethod
    def _coerce_signals(cls, value, info: ValidationInfo):
        return _as_rows(value, info.data.get("signal_dim"), np.float64)

    @field_validator("xi", mode="before")
    @classmethod
    def _coerce_xi(cls, value, info: ValidationInfo):
        n, d = info.data.get("ambient_dim"), info.data.get("manifold_dim")
        width = None if n is None or d is None else volume_dim(n, d)
        return _as_rows(value, width, np.float64)

    @model_validator(mode="after")
    def _check_dimensions(self):
        q = volume_dim(self.ambient_dim, self.manifold_dim)
        count = self.positions.shape[0]
        if self.positions.shape != (count, self.ambient_dim):
            raise DimensionMismatchError(f"positions must have shape (N, {self.ambient_dim})")
        if self.signals.shape != (count, self.signal_dim):
            raise DimensionMismatchError(f"signals must have shape ({count}, {self.signal_dim})")
        if self.xi.shape != (count, q):
            raise DimensionMismatchError(f"volume elements must have shape ({count}, {q})")
        return self

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def volume_dim(self) -> int:
        return volume_dim(self.ambient_dim, self.manifold_dim)

    @property
    def atoms(self) -> List[DiracFCurrent]:
        """The atoms as a list of DiracFCurrent values"""
        return [
            DiracFCurrent(x=x, m=m, xi=xi)
            for x, m, xi in zip(self.positions, self.signals, self.xi)
        ]

    @classmethod
    def empty(cls, ambient_dim: int, manifold_dim: int, signal_dim: int) -> "FCurrent":
        return cls(
            ambient_dim=ambient_dim,
            manifold_dim=manifold_dim,
            signal_dim=signal_dim,
            positions=np.zeros((0, ambient_dim)),
            signals=np.zeros((0, signal_dim)),
            xi=np.zeros((0, volume_dim(ambient_dim, manifold_dim))),
        )

    @classmethod
    def from_atoms(
        cls,
        atoms: List[DiracFCurrent],
        ambient_dim: int,
        manifold_dim: int,
        signal_dim: int,
    ) -> "FCurrent":
        """Build an FCurrent from a list of atoms, checking that dimensions agree"""
        if not atoms:
            return cls.empty(ambient_dim, manifold_dim, signal_dim)
        q = volume_dim(ambient_dim, manifold_dim)
        for i, atom in enumerate(atoms):
            if atom.x.size != ambient_dim or atom.m.size != signal_dim or atom.xi.size != q:
                raise DimensionMismatchError(f"atom {i} has inconsistent dimensions")
        return cls(
            ambient_dim=ambient_dim,
            manifold_dim=manifold_dim,
            signal_dim=signal_dim,
            positions=np.stack([a.x for a in atoms]),
            signals=np.stack([a.m for a in atoms]),
            xi=np.stack([a.xi for a in atoms]),
        )

    def replace(self, **changes) -> "FCurrent":
        """Return a validated copy with some arrays replaced"""
        data = {
            "ambient_dim": self.ambient_dim,
            "manifold_dim": self.manifold_dim,
            "signal_dim": self.signal_dim,
            "positions": self.positions,
            "signals": self.signals,
            "xi": self.xi,
        }
        data.update(changes)
        return FCurrent(**data)


def validate_shape(shape: FunctionalShape) -> List[str]:
    """List every invariant the shape violates; empty when the shape is valid"""
    violations: List[str] = []
    n, d, k = shape.ambient_dim, shape.manifold_dim, shape.signal_dim
    if (n, d) not in SUPPORTED_DIMS:
        violations.append(f"unsupported dimensions (n={n}, d={d})")
    n_vertices = shape.vertices.shape[0]

    if shape.vertices.shape[1] != n:
        violations.append("vertex dimension mismatch")
    elif not np.all(np.isfinite(shape.vertices)):
        violations.append("non-finite vertex coordinates")

    if shape.signal.shape[0] != n_vertices:
        violations.append("signal length mismatch")
    if shape.signal.shape[1] != k:
        violations.append("signal dimension mismatch")
    elif not np.all(np.isfinite(shape.signal)):
        violations.append("non-finite signal values")

    if shape.cells.shape[1] != d + 1:
        violations.append("cell arity mismatch")
        return violations
    for i, cell in enumerate(shape.cells):
        if np.any(cell < 0) or np.any(cell >= n_vertices):
            violations.append(f"cell {i} index out of range")
        elif len(set(cell.tolist())) != len(cell):
            violations.append(f"degenerate cell {i}")
    return violations


def discrete_mass(current: FCurrent) -> float:
    """Sum of the volume-element norms, the discrete mass of the current"""
    if len(current) == 0:
        return 0.0
    return float(np.linalg.norm(current.xi, axis=1).sum())


def scale_atoms(current: FCurrent, r: float) -> FCurrent:
    """Multiply every volume element by r, leaving positions and signals alone"""
    if r == 0:
        raise ValueError("scale factor must be nonzero")
    return current.replace(xi=current.xi * r)
