"""Configuration settings for fshapes"""

import os
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from fshapes.errors import KernelSpecError

GEOM_KINDS = ("gaussian", "cauchy")
SIGNAL_KINDS = ("gaussian", "cauchy", "constant")


def _parse_spec(spec: str, allowed: tuple) -> tuple[str, Optional[float]]:
    """Split a `<kind>:<width>` kernel spec"""
    kind, _, width = spec.strip().partition(":")
    kind = kind.lower()
    if kind not in allowed:
        raise KernelSpecError(f"unknown kernel kind '{kind}' in '{spec}' (expected one of {', '.join(allowed)})")
    if kind == "constant":
        if width:
            raise KernelSpecError(f"constant kernel takes no width: '{spec}'")
        return kind, None
    if not width:
        raise KernelSpecError(f"kernel '{spec}' needs a width, e.g. {kind}:0.1")
    try:
        value = float(width)
    except ValueError:
        raise KernelSpecError(f"invalid kernel width in '{spec}'") from None
    if not value > 0 or value == float("inf"):
        raise KernelSpecError(f"kernel width must be positive and finite in '{spec}'")
    return kind, value


class KernelConfig(BaseModel):
    """Tensor product of a geometric radial kernel and a signal radial kernel"""

    geom_kind: Literal["gaussian", "cauchy"] = Field(
        default="gaussian",
        description="Radial profile of the geometric kernel",
    )
    geom_width: float = Field(description="Geometric kernel width lambda_g (length units)", gt=0)
    sig_kind: Literal["gaussian", "cauchy", "constant"] = Field(
        default="gaussian",
        description="Radial profile of the signal kernel; constant gives plain currents",
    )
    sig_width: Optional[float] = Field(
        default=None,
        description="Signal kernel width lambda_f (signal units); ignored for constant",
        gt=0,
    )

    model_config = ConfigDict(validate_assignment=True)

    @model_validator(mode="after")
    def _width_required(self):
        if self.sig_kind != "constant" and self.sig_width is None:
            raise ValueError(f"{self.sig_kind} signal kernel needs sig_width")
        return self

    @classmethod
    def parse(cls, geom_spec: str, sig_spec: str = "constant") -> "KernelConfig":
        """Build a configuration from CLI spec strings such as `gaussian:0.04`"""
        geom_kind, geom_width = _parse_spec(geom_spec, GEOM_KINDS)
        sig_kind, sig_width = _parse_spec(sig_spec, SIGNAL_KINDS)
        return cls(geom_kind=geom_kind, geom_width=geom_width, sig_kind=sig_kind, sig_width=sig_width)

    def spec_strings(self) -> tuple[str, str]:
        """Inverse of `parse`"""
        sig = "constant" if self.sig_kind == "constant" else f"{self.sig_kind}:{self.sig_width!r}"
        return f"{self.geom_kind}:{self.geom_width!r}", sig


class MPConfig(BaseModel):
    """Configuration for matching pursuit compression"""

    epsilon: float = Field(
        default=0.05,
        description="Stop when the residual norm falls below epsilon times the input norm",
        gt=0.0,
        lt=1.0,
    )
    max_atoms: int = Field(default=1000, description="Maximum number of selected atoms", ge=1)
    variant: Literal["greedy", "orthogonal"] = Field(
        default="orthogonal",
        description="Greedy pursuit or orthogonal pursuit (coefficients re-solved each step)",
    )
    dictionary: Literal["source_supports", "grid"] = Field(
        default="source_supports",
        description="Candidate supports: the input atoms, or a regular grid",
    )
    grid_spacing: Optional[float] = Field(
        default=None,
        description="Position spacing of the grid dictionary (length units)",
        gt=0,
    )
    signal_levels: int = Field(
        default=8,
        description="Evenly spaced signal levels per coordinate in the grid dictionary",
        ge=1,
        le=64,
    )
    ridge: Optional[float] = Field(
        default=None,
        description="Ridge added to the Gram matrix; None adds 1e-10 * trace / n only when the condition number reaches 1e12",
        ge=0,
    )

    model_config = ConfigDict(validate_assignment=True)

    @model_validator(mode="after")
    def _grid_needs_spacing(self):
        if self.dictionary == "grid" and self.grid_spacing is None:
            raise ValueError("grid dictionary needs grid_spacing")
        return self


class RegistrationConfig(BaseModel):
    """Configuration for LDDMM registration of functional shapes"""

    kernels: KernelConfig = Field(description="Attachment kernels")
    sigma_v: float = Field(description="Width of the gaussian velocity kernel (length units)", gt=0)
    timesteps: int = Field(default=10, description="Number of time steps T of the flow", ge=1, le=1000)
    weight: float = Field(
        default=1.0,
        alias="lambda",
        description="Weight of the attachment term",
        gt=0,
    )
    max_iters: int = Field(default=200, description="Maximum number of descent iterations", ge=0)
    grad_tol: float = Field(default=1e-6, description="Stop when the gradient norm falls below this", ge=0)
    initial_step: float = Field(default=1.0, description="First trial step of the line search", gt=0)
    shrink: float = Field(default=0.5, description="Backtracking factor", gt=0, lt=1)
    sufficient_decrease: float = Field(default=1e-4, description="Armijo constant", gt=0, lt=1)
    min_step: float = Field(default=1e-12, description="Step size below which the search collapses", gt=0)
    integrator: Literal["euler", "rk4"] = Field(default="euler", description="Flow integrator")

    model_config = ConfigDict(validate_assignment=True, populate_by_name=True)


class RuntimeSettings(BaseModel):
    """Process-wide settings, usually read from the environment"""

    threads: int = Field(default=1, description="Worker threads for kernel sums", ge=1, le=256)
    chunk_size: int = Field(
        default=256,
        description="Rows per chunk in pairwise kernel sums (fixed for reproducibility)",
        ge=1,
    )
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = Field(
        default="WARNING",
        description="Root logger level used by the CLI",
    )

    @classmethod
    def from_env(cls) -> "RuntimeSettings":
        """Read FSHAPES_THREADS, FSHAPES_CHUNK_SIZE and FSHAPES_LOG_LEVEL"""
        values = {}
        if os.getenv("FSHAPES_THREADS"):
            values["threads"] = int(os.environ["FSHAPES_THREADS"])
        if os.getenv("FSHAPES_CHUNK_SIZE"):
            values["chunk_size"] = int(os.environ["FSHAPES_CHUNK_SIZE"])
        if os.getenv("FSHAPES_LOG_LEVEL"):
            values["log_level"] = os.environ["FSHAPES_LOG_LEVEL"].upper()
        return cls(**values)


# Default configuration
DEFAULT_MP_CONFIG = MPConfig()

# High-precision configuration (more atoms, smaller residual)
PRECISE_MP_CONFIG = MPConfig(epsilon=0.01, max_atoms=5000)

# Fast configuration (greedy selection, no Gram solves)
FAST_MP_CONFIG = MPConfig(variant="greedy", max_atoms=500)
