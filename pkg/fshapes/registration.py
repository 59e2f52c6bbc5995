"""LDDMM registration of functional shapes with a functional-current attachment

The control points are the source vertices. Momenta are free at every time
step and the discrete energy is

    E(a) = sum_j h sum_{p,p'} a_p(t_j)^T k_V(|q_p(t_j) - q_p'(t_j)|) a_p'(t_j)
           + lambda |C(q(1)) - C_target|^2_{W'}

where C(q(1)) re-discretizes the source mesh at the flowed vertices with its
signal values unchanged. The gradient is obtained by reverse accumulation
through the discrete flow.
"""

import logging
import math
from typing import Callable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.distance import cdist
from tqdm import tqdm

from fshapes.config import RegistrationConfig
from fshapes.discretization import cell_atoms, discretize, pull_back_gradient
from fshapes.errors import DimensionMismatchError, FlowDivergenceError, OptimizationError, ShapeValidationError
from fshapes.kernels import distance_gradient, self_inner_product
from fshapes.models import FCurrent, FunctionalShape, validate_shape
from fshapes.transport import DeformationPath, control_step, flow_points, stage_supports

logger = logging.getLogger(__name__)

Energy = Tuple[float, float, float]


class RegistrationResult(BaseModel):
    """Outcome of a registration run"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    path: DeformationPath = Field(description="Optimal time-discretized velocity field")
    deformed_source: FunctionalShape = Field(description="Source transported by the path")
    energy_trace: List[Energy] = Field(description="(kinetic, attachment, total) per accepted iteration")
    final_gradient_norm: float = Field(description="Euclidean norm of the last gradient")
    iterations: int = Field(default=0, description="Number of accepted descent steps")
    stop_reason: str = Field(default="", description="grad_tol, max_iters or step_collapse")
    steps: List[float] = Field(default_factory=list, description="Accepted step size per iteration (0 for the start)")


def _kernel(q: np.ndarray, sigma_v: float) -> np.ndarray:
    return np.exp(-cdist(q, q, "sqeuclidean") / sigma_v**2)


def _velocity_vjp_points(q: np.ndarray, a: np.ndarray, g: np.ndarray, kernel: np.ndarray, sigma_v: float) -> np.ndarray:
    """Gradient of <g, K(q) a> with respect to the points q"""
    w = (-2.0 / sigma_v**2) * kernel * (g @ a.T)
    s = w + w.T
    return s.sum(axis=1)[:, None] * q - s @ q


class _Problem:
    """Source/target pair with the cached target current"""

    def __init__(self, config: RegistrationConfig, source: FunctionalShape, target: FunctionalShape):
        for name, shape in (("source", source), ("target", target)):
            violations = validate_shape(shape)
            if violations:
                raise ShapeValidationError([f"{name}: {v}" for v in violations])
        dims_s = (source.ambient_dim, source.manifold_dim, source.signal_dim)
        dims_t = (target.ambient_dim, target.manifold_dim, target.signal_dim)
        if dims_s != dims_t:
            raise DimensionMismatchError(f"source (n, d, k) = {dims_s}, target {dims_t}")
        self.config = config
        self.source = source
        self.target = discretize(target)
        self.target_norm2 = self_inner_product(config.kernels, self.target)
        # signals ride unchanged under the geometric action
        self.atom_signals = source.signal[source.cells].mean(axis=1) if source.n_cells else np.zeros((0, source.signal_dim))
        self.h = 1.0 / config.timesteps

    @property
    def momenta_shape(self) -> tuple[int, int, int]:
        return self.config.timesteps, self.source.n_vertices, self.source.ambient_dim

    def check(self, momenta: np.ndarray) -> np.ndarray:
        momenta = np.asarray(momenta, dtype=np.float64)
        if momenta.shape != self.momenta_shape:
            raise DimensionMismatchError(f"momenta of shape {momenta.shape}, expected {self.momenta_shape}")
        return momenta

    def shoot(self, momenta: np.ndarray) -> np.ndarray:
        cfg = self.config
        trajectory = np.empty((cfg.timesteps + 1, *self.source.vertices.shape))
        trajectory[0] = self.source.vertices
        q = trajectory[0]
        for j in range(cfg.timesteps):
            q = control_step(q, momenta[j], self.h, cfg.sigma_v, cfg.integrator)
            if not np.all(np.isfinite(q)):
                raise FlowDivergenceError(f"control points became non-finite at step {j + 1}")
            trajectory[j + 1] = q
        return trajectory

    def deformed_current(self, vertices: np.ndarray) -> FCurrent:
        centers, xi = cell_atoms(vertices, self.source.cells, self.source.manifold_dim)
        return FCurrent(
            ambient_dim=self.source.ambient_dim,
            manifold_dim=self.source.manifold_dim,
            signal_dim=self.source.signal_dim,
            positions=centers,
            signals=self.atom_signals,
            xi=xi,
        )

    def kinetic(self, trajectory: np.ndarray, momenta: np.ndarray) -> float:
        total = 0.0
        for j in range(self.config.timesteps):
            a = momenta[j]
            total += float(np.sum(a * (_kernel(trajectory[j], self.config.sigma_v) @ a)))
        return self.h * total

    def energy(self, momenta: np.ndarray) -> Energy:
        momenta = self.check(momenta)
        trajectory = self.shoot(momenta)
        kinetic = self.kinetic(trajectory, momenta)
        attachment, _, _ = distance_gradient(
            self.config.kernels, self.deformed_current(trajectory[-1]), self.target, self.target_norm2
        )
        attachment *= self.config.weight
        return kinetic, attachment, kinetic + attachment

    def _step_vjp(self, q: np.ndarray, a: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Pull the cotangent g of q(t_{j+1}) back to q(t_j) and a(t_j)"""
        sigma, h = self.config.sigma_v, self.h
        if self.config.integrator == "euler":
            kernel = _kernel(q, sigma)
            return g + h * _velocity_vjp_points(q, a, g, kernel, sigma), h * (kernel @ g)

        stages = stage_supports(q, a, h, sigma, "rk4")
        g_k = [h / 6.0 * g, h / 3.0 * g, h / 3.0 * g, h / 6.0 * g]
        g_q = g.copy()
        g_a = np.zeros_like(a)
        # stage i input is q + c_i h k_{i-1}; walk the stages backwards
        feed = [None, 0.5 * h, 0.5 * h, h]
        for i in (3, 2, 1, 0):
            kernel = _kernel(stages[i], sigma)
            g_stage = _velocity_vjp_points(stages[i], a, g_k[i], kernel, sigma)
            g_a += kernel @ g_k[i]
            g_q += g_stage
            if i > 0:
                g_k[i - 1] = g_k[i - 1] + feed[i] * g_stage
        return g_q, g_a

    def energy_and_gradient(self, momenta: np.ndarray) -> tuple[Energy, np.ndarray]:
        cfg = self.config
        momenta = self.check(momenta)
        trajectory = self.shoot(momenta)
        final = trajectory[-1]
        value, g_centers, g_xi = distance_gradient(
            cfg.kernels, self.deformed_current(final), self.target, self.target_norm2
        )
        g_q = cfg.weight * pull_back_gradient(final, self.source.cells, self.source.manifold_dim, g_centers, g_xi)

        gradient = np.zeros_like(momenta)
        kinetic = 0.0
        for j in reversed(range(cfg.timesteps)):
            q, a = trajectory[j], momenta[j]
            kernel = _kernel(q, cfg.sigma_v)
            ka = kernel @ a
            kinetic += float(np.sum(a * ka))
            g_prev, g_a = self._step_vjp(q, a, g_q)
            gradient[j] = g_a + 2.0 * self.h * ka
            g_q = g_prev + self.h * _velocity_vjp_points(q, a, a, kernel, cfg.sigma_v)
        kinetic *= self.h
        attachment = cfg.weight * value
        return (kinetic, attachment, kinetic + attachment), gradient


def energy(config: RegistrationConfig, source: FunctionalShape, target: FunctionalShape, momenta) -> Energy:
    """(kinetic, attachment, total) for momenta of shape (T, P, n)"""
    return _Problem(config, source, target).energy(momenta)


def gradient(config: RegistrationConfig, source: FunctionalShape, target: FunctionalShape, momenta) -> np.ndarray:
    """Exact gradient of the discrete total energy with respect to the momenta"""
    return _Problem(config, source, target).energy_and_gradient(momenta)[1]


def _finite(values: Energy) -> bool:
    return all(math.isfinite(v) for v in values)


def register(
    config: RegistrationConfig,
    source: FunctionalShape,
    target: FunctionalShape,
    progress: bool = False,
    on_iteration: Optional[Callable[[int, Energy, float], None]] = None,
) -> RegistrationResult:
    """Backtracking gradient descent on the momenta, starting from zero"""
    problem = _Problem(config, source, target)
    momenta = np.zeros(problem.momenta_shape)
    current, grad = problem.energy_and_gradient(momenta)
    if not _finite(current) or not np.all(np.isfinite(grad)):
        raise OptimizationError(f"non-finite initial energy {current}")

    trace: List[Energy] = [current]
    steps: List[float] = [0.0]
    step = config.initial_step
    grad_norm = float(np.linalg.norm(grad))
    stop_reason = "max_iters"
    accepted = 0

    with tqdm(total=config.max_iters, desc="Registering", disable=not progress) as pbar:
        while accepted < config.max_iters:
            if grad_norm <= config.grad_tol:
                stop_reason = "grad_tol"
                break
            trial = step if accepted == 0 else 2.0 * step
            candidate = None
            while trial >= config.min_step:
                proposal = momenta - trial * grad
                try:
                    values = problem.energy(proposal)
                except FlowDivergenceError:
                    values = None
                if values is not None and _finite(values):
                    if values[2] <= current[2] - config.sufficient_decrease * trial * grad_norm**2:
                        candidate = proposal
                        break
                logger.debug("rejected step %.3e", trial)
                trial *= config.shrink
            if candidate is None:
                stop_reason = "step_collapse"
                break

            momenta, step = candidate, trial
            current, grad = problem.energy_and_gradient(momenta)
            if not np.all(np.isfinite(grad)):
                raise OptimizationError(f"non-finite gradient after {accepted + 1} iteration(s); trace: {trace[-3:]}")
            grad_norm = float(np.linalg.norm(grad))
            accepted += 1
            trace.append(current)
            steps.append(step)
            logger.info(
                "iteration %d: kinetic %.6e attachment %.6e total %.6e step %.3e",
                accepted, current[0], current[1], current[2], step,
            )
            if on_iteration is not None:
                on_iteration(accepted, current, step)
            pbar.update(1)
            pbar.set_postfix(total=f"{current[2]:.4e}")

    trajectory = problem.shoot(momenta)
    path = DeformationPath(
        timesteps=config.timesteps,
        sigma_v=config.sigma_v,
        integrator=config.integrator,
        control_points=trajectory,
        momenta=momenta,
    )
    return RegistrationResult(
        path=path,
        deformed_source=source.replace(vertices=trajectory[-1]),
        energy_trace=trace,
        final_gradient_norm=grad_norm,
        iterations=accepted,
        stop_reason=stop_reason,
        steps=steps,
    )


def apply_result(result: RegistrationResult, shape: FunctionalShape) -> FunctionalShape:
    """Carry any shape in the source space along the registered flow, signals unchanged"""
    if shape.ambient_dim != result.path.ambient_dim:
        raise DimensionMismatchError(
            f"shape in dimension {shape.ambient_dim}, path in dimension {result.path.ambient_dim}"
        )
    if shape.n_vertices == 0:
        return shape
    return shape.replace(vertices=flow_points(result.path, shape.vertices)[-1])
