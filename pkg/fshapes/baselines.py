"""Colored currents and product-space currents

Both representations are kept for comparison with functional currents:
colored currents multiply the volume element by the signal value (so f and
xi can trade a scalar factor), and product-space currents lift a planar
curve with scalar signal to its graph in R^3 (so they depend on how the
curve is connected).
"""

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator

from fshapes.config import KernelConfig
from fshapes.discretization import discretize, discretize_curve
from fshapes.errors import DimensionMismatchError, ShapeValidationError
from fshapes.kernels import CHUNK_SIZE, currents_kernel, fcurrent_distance, fcurrent_inner_product
from fshapes.models import FCurrent, FunctionalShape, _as_rows, validate_shape, volume_dim


class ColoredCurrent(BaseModel):
    """Atoms (x_i, f_i xi_i): the signal only survives as a weight on the volume element"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    ambient_dim: int
    manifold_dim: int
    positions: np.ndarray = Field(description="Atom positions, shape (N, n)")
    weighted_xi: np.ndarray = Field(description="Signal-weighted volume elements f_i xi_i, shape (N, q)")

    @field_validator("positions", mode="before")
    @classmethod
    def _coerce_positions(cls, value, info: ValidationInfo):
        return _as_rows(value, info.data.get("ambient_dim"), np.float64)

    @field_validator("weighted_xi", mode="before")
    @classmethod
    def _coerce_xi(cls, value, info: ValidationInfo):
        n, d = info.data.get("ambient_dim"), info.data.get("manifold_dim")
        return _as_rows(value, None if n is None or d is None else volume_dim(n, d), np.float64)

    def __len__(self) -> int:
        return self.positions.shape[0]

    def as_current(self) -> FCurrent:
        """The same atoms as a plain current (one dummy signal coordinate)"""
        return FCurrent(
            ambient_dim=self.ambient_dim,
            manifold_dim=self.manifold_dim,
            signal_dim=1,
            positions=self.positions,
            signals=np.zeros((len(self), 1)),
            xi=self.weighted_xi,
        )


def colored_from_current(current: FCurrent) -> ColoredCurrent:
    """Fold the scalar signal of every atom into its volume element"""
    if current.signal_dim != 1:
        raise DimensionMismatchError(f"colored currents need a scalar signal, got k={current.signal_dim}")
    return ColoredCurrent(
        ambient_dim=current.ambient_dim,
        manifold_dim=current.manifold_dim,
        positions=current.positions,
        weighted_xi=current.signals * current.xi,
    )


def colored_current(shape: FunctionalShape) -> ColoredCurrent:
    """Colored current of a shape with scalar signal, using the midpoint/centroid rule"""
    if shape.signal_dim != 1:
        raise DimensionMismatchError(f"colored currents need a scalar signal, got k={shape.signal_dim}")
    return colored_from_current(discretize(shape))


def colored_inner_product(
    cfg: KernelConfig, a: ColoredCurrent, b: ColoredCurrent, threads: int = 1, chunk_size: int = CHUNK_SIZE
) -> float:
    """sum k_g(|x_a - x_b|) <f_a xi_a, f_b xi_b>; the signal kernel plays no role"""
    return fcurrent_inner_product(currents_kernel(cfg), a.as_current(), b.as_current(), threads, chunk_size)


def colored_distance(
    cfg: KernelConfig, a: ColoredCurrent, b: ColoredCurrent, threads: int = 1, chunk_size: int = CHUNK_SIZE
) -> float:
    return fcurrent_distance(currents_kernel(cfg), a.as_current(), b.as_current(), threads, chunk_size)


def product_space_shape(shape: FunctionalShape) -> FunctionalShape:
    """Graph of a planar curve with scalar signal: vertices (x, y, f) in R^3"""
    if (shape.ambient_dim, shape.manifold_dim, shape.signal_dim) != (2, 1, 1):
        raise DimensionMismatchError(
            "product-space lift needs a planar curve with scalar signal, got "
            f"(n, d, k) = ({shape.ambient_dim}, {shape.manifold_dim}, {shape.signal_dim})"
        )
    violations = validate_shape(shape)
    if violations:
        raise ShapeValidationError(violations)
    return FunctionalShape(
        ambient_dim=3,
        manifold_dim=1,
        signal_dim=1,
        vertices=np.hstack([shape.vertices, shape.signal]),
        cells=shape.cells,
        signal=np.zeros((shape.n_vertices, 1)),
    )


def product_space_current(shape: FunctionalShape) -> FCurrent:
    """Plain 1-current of the lifted curve (its signal carries no information)"""
    return discretize_curve(product_space_shape(shape))


def product_distance(
    cfg: KernelConfig, a: FunctionalShape, b: FunctionalShape, threads: int = 1, chunk_size: int = CHUNK_SIZE
) -> float:
    """Distance between lifted curves under the geometric kernel of cfg, applied in R^3"""
    return fcurrent_distance(
        currents_kernel(cfg), product_space_current(a), product_space_current(b), threads, chunk_size
    )
