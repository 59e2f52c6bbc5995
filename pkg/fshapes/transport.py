"""Diffeomorphic transport of functional shapes and functional currents

A DeformationPath is a time-discretized kernel velocity field

    v_j(x) = sum_p k_V(|x - q_p(t_j)|) a_p(t_j),   k_V(r) = exp(-r^2 / sigma_V^2)

whose control points q_p ride along the flow. Flows are integrated with
explicit Euler or classical RK4 on [0, 1] with step h = 1 / T.
"""

import logging
from typing import Callable, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from scipy.spatial.distance import cdist

from fshapes.errors import DimensionMismatchError, FlowDivergenceError, SingularJacobianError
from fshapes.models import FCurrent, FunctionalShape, unwrap_validation_error

logger = logging.getLogger(__name__)

Integrator = Literal["euler", "rk4"]


class DeformationPath(BaseModel):
    """Control point trajectories and momenta of a time-discretized velocity field"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    timesteps: int = Field(description="Number of time steps T", ge=1)
    sigma_v: float = Field(description="Width of the gaussian velocity kernel", gt=0)
    integrator: Integrator = Field(default="euler", description="Integrator used along the path")
    control_points: np.ndarray = Field(description="Trajectories q_p(t_j), shape (T + 1, P, n)")
    momenta: np.ndarray = Field(description="Momenta a_p(t_j), shape (T, P, n)")

    def __init__(self, **data):
        try:
            super().__init__(**data)
        except ValidationError as err:
            raise unwrap_validation_error(err) from None

    @field_validator("control_points", "momenta", mode="before")
    @classmethod
    def _coerce(cls, value):
        arr = np.array(value, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError("expected a (time, point, dimension) array")
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check_shapes(self):
        steps, points, dim = self.momenta.shape
        if steps != self.timesteps:
            raise DimensionMismatchError(f"momenta hold {steps} steps, expected {self.timesteps}")
        if self.control_points.shape != (self.timesteps + 1, points, dim):
            raise DimensionMismatchError(
                f"control points have shape {self.control_points.shape}, "
                f"expected {(self.timesteps + 1, points, dim)}"
            )
        return self

    @property
    def step(self) -> float:
        return 1.0 / self.timesteps

    @property
    def ambient_dim(self) -> int:
        return self.momenta.shape[2]

    @classmethod
    def identity(cls, control_points: np.ndarray, timesteps: int, sigma_v: float, integrator: Integrator = "euler"):
        """Zero momenta: the flow is the identity"""
        q = np.asarray(control_points, dtype=np.float64)
        return cls(
            timesteps=timesteps,
            sigma_v=sigma_v,
            integrator=integrator,
            control_points=np.broadcast_to(q, (timesteps + 1, *q.shape)),
            momenta=np.zeros((timesteps, *q.shape)),
        )


class AnalyticVelocityField(BaseModel):
    """Closed-form velocity field v(t, x), vectorized over rows of x"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    field: Callable[[float, np.ndarray], np.ndarray] = Field(description="(t, points) -> velocities")
    sup_norm: Optional[float] = Field(default=None, description="Declared integral over t of sup_x |v(t, x)|")
    lipschitz: Optional[float] = Field(default=None, description="Declared integral over t of sup_x |Dv(t, x)|")

    def __call__(self, t: float, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.field(t, points), dtype=np.float64)

    def displacement_bound(self) -> Optional[float]:
        """Bound |phi(x) - x| <= |v|_0 exp(|v|_1), when both norms are declared"""
        if self.sup_norm is None or self.lipschitz is None:
            return None
        return self.sup_norm * float(np.exp(self.lipschitz))


VelocityField = Union[DeformationPath, AnalyticVelocityField]


def gaussian_velocity(points: np.ndarray, supports: np.ndarray, momenta: np.ndarray, sigma_v: float) -> np.ndarray:
    """sum_p exp(-|x - q_p|^2 / sigma^2) a_p at every row of points"""
    kernel = np.exp(-cdist(points, supports, "sqeuclidean") / sigma_v**2)
    return kernel @ momenta


def velocity_at(path: DeformationPath, j: int, x) -> np.ndarray:
    """Velocity of the path at time step j, evaluated at a point or rows of points"""
    if not 0 <= j < path.timesteps:
        raise IndexError(f"time step {j} outside [0, {path.timesteps})")
    points = np.asarray(x, dtype=np.float64)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    if points.shape[1] != path.ambient_dim:
        raise DimensionMismatchError(f"points of dimension {points.shape[1]}, path in dimension {path.ambient_dim}")
    v = gaussian_velocity(points, path.control_points[j], path.momenta[j], path.sigma_v)
    return v[0] if single else v


def _advance(
    x: np.ndarray,
    supports: list[np.ndarray],
    a: np.ndarray,
    h: float,
    sigma_v: float,
) -> np.ndarray:
    """One Euler (one support) or RK4 (four stage supports) update of x"""
    if len(supports) == 1:
        return x + h * gaussian_velocity(x, supports[0], a, sigma_v)
    k1 = gaussian_velocity(x, supports[0], a, sigma_v)
    k2 = gaussian_velocity(x + 0.5 * h * k1, supports[1], a, sigma_v)
    k3 = gaussian_velocity(x + 0.5 * h * k2, supports[2], a, sigma_v)
    k4 = gaussian_velocity(x + h * k3, supports[3], a, sigma_v)
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def stage_supports(q: np.ndarray, a: np.ndarray, h: float, sigma_v: float, integrator: Integrator) -> list[np.ndarray]:
    """Control point positions at every stage of one integrator step"""
    if integrator == "euler":
        return [q]
    k1 = gaussian_velocity(q, q, a, sigma_v)
    q2 = q + 0.5 * h * k1
    k2 = gaussian_velocity(q2, q2, a, sigma_v)
    q3 = q + 0.5 * h * k2
    k3 = gaussian_velocity(q3, q3, a, sigma_v)
    return [q, q2, q3, q + h * k3]


def control_step(q: np.ndarray, a: np.ndarray, h: float, sigma_v: float, integrator: Integrator) -> np.ndarray:
    """Advance the control points over one step with momenta a held fixed"""
    return _advance(q, stage_supports(q, a, h, sigma_v, integrator), a, h, sigma_v)


def path_step(
    q: np.ndarray,
    x: np.ndarray,
    a: np.ndarray,
    h: float,
    sigma_v: float,
    integrator: Integrator,
) -> tuple[np.ndarray, np.ndarray]:
    """Advance control points q and passive points x over one step with momenta a held fixed"""
    supports = stage_supports(q, a, h, sigma_v, integrator)
    return _advance(q, supports, a, h, sigma_v), _advance(x, supports, a, h, sigma_v)


def _check_finite(positions: np.ndarray, step: int) -> None:
    bad = ~np.all(np.isfinite(positions), axis=1)
    if np.any(bad):
        first = int(np.flatnonzero(bad)[0])
        raise FlowDivergenceError(
            f"{int(bad.sum())} point(s) became non-finite at step {step} (first: point {first})"
        )


def _flow_analytic(
    field: AnalyticVelocityField,
    points: np.ndarray,
    timesteps: int,
    integrator: Integrator,
) -> np.ndarray:
    h = 1.0 / timesteps
    trajectory = np.empty((timesteps + 1, *points.shape))
    trajectory[0] = points
    x = points
    for j in range(timesteps):
        t = j * h
        if integrator == "euler":
            x = x + h * field(t, x)
        else:
            k1 = field(t, x)
            k2 = field(t + 0.5 * h, x + 0.5 * h * k1)
            k3 = field(t + 0.5 * h, x + 0.5 * h * k2)
            k4 = field(t + h, x + h * k3)
            x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check_finite(x, j + 1)
        trajectory[j + 1] = x
    return trajectory


def _flow_path(path: DeformationPath, points: np.ndarray) -> np.ndarray:
    trajectory = np.empty((path.timesteps + 1, *points.shape))
    trajectory[0] = points
    x = points
    for j in range(path.timesteps):
        _, x = path_step(path.control_points[j], x, path.momenta[j], path.step, path.sigma_v, path.integrator)
        _check_finite(x, j + 1)
        trajectory[j + 1] = x
    return trajectory


def flow_points(
    field: VelocityField,
    points,
    timesteps: int = 10,
    integrator: Integrator = "rk4",
) -> np.ndarray:
    """Positions of the points at every time step, shape (T + 1, N, n)

    A DeformationPath carries its own time steps and integrator; the
    keyword arguments only apply to analytic fields.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if isinstance(field, DeformationPath):
        if points.shape[1] != field.ambient_dim:
            raise DimensionMismatchError(
                f"points of dimension {points.shape[1]}, path in dimension {field.ambient_dim}"
            )
        return _flow_path(field, points)
    if timesteps < 1:
        raise ValueError("timesteps must be at least 1")
    return _flow_analytic(field, points, timesteps, integrator)


def flow_map(field: VelocityField, timesteps: int = 10, integrator: Integrator = "rk4") -> Callable[[np.ndarray], np.ndarray]:
    """Endpoint map phi_{0,1} of the field as a callable on rows of points"""

    def phi(points: np.ndarray) -> np.ndarray:
        return flow_points(field, points, timesteps, integrator)[-1]

    return phi


def transport_shape(
    shape: FunctionalShape,
    field: VelocityField,
    action: Literal["geometric"] = "geometric",
    timesteps: int = 10,
    integrator: Integrator = "rk4",
) -> FunctionalShape:
    """Geometric action: vertices follow the flow, cells and signal values are unchanged"""
    if action != "geometric":
        raise ValueError(f"unsupported action '{action}'")
    if shape.n_vertices == 0:
        return shape
    moved = flow_points(field, shape.vertices, timesteps, integrator)[-1]
    return shape.replace(vertices=moved)


def finite_difference_jacobian(phi: Callable[[np.ndarray], np.ndarray], points: np.ndarray, step: float) -> np.ndarray:
    """Central-difference Jacobians of phi at every row of points, shape (N, n, n)"""
    n = points.shape[1]
    jac = np.empty((points.shape[0], n, n))
    for i in range(n):
        offset = np.zeros(n)
        offset[i] = step
        jac[:, :, i] = (phi(points + offset) - phi(points - offset)) / (2.0 * step)
    return jac


def _cofactor(jac: np.ndarray) -> np.ndarray:
    """det(J) J^{-T} for a stack of 3x3 matrices, written with cross products"""
    c0, c1, c2 = jac[:, :, 0], jac[:, :, 1], jac[:, :, 2]
    return np.stack([np.cross(c1, c2), np.cross(c2, c0), np.cross(c0, c1)], axis=2)


def pushforward_atoms(
    current: FCurrent,
    phi: Callable[[np.ndarray], np.ndarray],
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    psi: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    fd_step: Optional[float] = None,
) -> FCurrent:
    """(phi, psi) push-forward of a discrete functional current

    Positions map through phi, signals through psi (identity by default) and
    volume elements through the Jacobian of phi: J xi for curves, and the
    cofactor det(J) J^{-T} xi for surface normals.
    """
    if len(current) == 0:
        return current
    x = current.positions
    if jacobian is not None:
        jac = np.asarray(jacobian(x), dtype=np.float64)
    else:
        if fd_step is None:
            extent = np.linalg.norm(x.max(axis=0) - x.min(axis=0))
            fd_step = 1e-5 * (extent if extent > 0 else 1.0)
        jac = finite_difference_jacobian(phi, x, fd_step)

    det = np.linalg.det(jac)
    scale = (np.linalg.norm(jac, axis=(1, 2)) / np.sqrt(current.ambient_dim)) ** current.ambient_dim
    singular = np.abs(det) <= 1e-12 * scale
    if np.any(singular):
        raise SingularJacobianError(f"singular Jacobian at atom {int(np.flatnonzero(singular)[0])}")

    if current.manifold_dim == 1:
        xi = np.einsum("nij,nj->ni", jac, current.xi)
    else:
        xi = np.einsum("nij,nj->ni", _cofactor(jac), current.xi)
    signals = current.signals if psi is None else np.asarray(psi(current.signals), dtype=np.float64)
    return current.replace(positions=np.asarray(phi(x), dtype=np.float64), signals=signals, xi=xi)
