"""Greedy and orthogonal matching pursuit on functional currents

The dictionary holds unit Dirac functional currents at candidate supports
(x, m). The correlation of the residual with a candidate is the vector

    gamma(x, m) = sum_i K((x, m), (x_i, m_i)) xi_i - sum_j K((x, m), (x'_j, m'_j)) alpha_j

and the best unit volume element at that support is gamma / |gamma|.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from fshapes.config import DEFAULT_MP_CONFIG, KernelConfig, MPConfig
from fshapes.errors import SingularGramError
from fshapes.kernels import CHUNK_SIZE, fcurrent_inner_product, kernel_matrix
from fshapes.models import DiracFCurrent, FCurrent

logger = logging.getLogger(__name__)

# Condition number above which the Gram system is treated as singular
MAX_CONDITION = 1e12


class MPStep(BaseModel):
    """One selection of the pursuit"""
    step: int = Field(description="1-based step index")
    candidate: int = Field(description="Index of the selected dictionary entry")
    x: List[float] = Field(description="Selected support position")
    m: List[float] = Field(description="Selected support signal")
    gamma_norm: float = Field(description="|gamma| at the selected support")
    residual_ratio: float = Field(description="Residual norm divided by the input norm after the step")


class MPResult(BaseModel):
    """Compressed representation C = Pi_n(C) + R_n(C)"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    ambient_dim: int
    manifold_dim: int
    signal_dim: int
    atoms: List[DiracFCurrent] = Field(default_factory=list, description="Selected atoms with solved coefficients")
    residual_norms: List[float] = Field(default_factory=list, description="|R_j| for j = 0..n")
    converged: bool = Field(default=False, description="Residual ratio reached epsilon")
    steps: List[MPStep] = Field(default_factory=list)
    input_norm: float = Field(default=0.0, description="|C| in W'")


def build_dictionary(config: MPConfig, current: FCurrent) -> tuple[np.ndarray, np.ndarray]:
    """Candidate supports (positions, signals) for the pursuit"""
    if config.dictionary == "source_supports":
        return current.positions, current.signals

    spacing = config.grid_spacing
    lo, hi = current.positions.min(axis=0), current.positions.max(axis=0)
    axes = [np.arange(a, b + 0.5 * spacing, spacing) for a, b in zip(lo, hi)]
    positions = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, current.ambient_dim)

    s_lo, s_hi = current.signals.min(axis=0), current.signals.max(axis=0)
    levels = [
        np.array([a]) if a == b else np.linspace(a, b, config.signal_levels)
        for a, b in zip(s_lo, s_hi)
    ]
    signals = np.stack(np.meshgrid(*levels, indexing="ij"), axis=-1).reshape(-1, current.signal_dim)

    positions_all = np.repeat(positions, len(signals), axis=0)
    signals_all = np.tile(signals, (len(positions), 1))
    return positions_all, signals_all


def correlation_field(
    kernels: KernelConfig,
    current: FCurrent,
    approximation: Optional[FCurrent],
    positions: np.ndarray,
    signals: np.ndarray,
    threads: int = 1,
    chunk_size: int = CHUNK_SIZE,
) -> np.ndarray:
    """gamma at every candidate support for the residual current - approximation"""
    positions = np.atleast_2d(np.asarray(positions, dtype=np.float64))
    signals = np.asarray(signals, dtype=np.float64).reshape(positions.shape[0], -1)

    def block(bound: tuple[int, int]) -> np.ndarray:
        lo, hi = bound
        out = kernel_matrix(kernels, positions[lo:hi], signals[lo:hi], current.positions, current.signals) @ current.xi
        if approximation is not None and len(approximation) > 0:
            out -= (
                kernel_matrix(kernels, positions[lo:hi], signals[lo:hi], approximation.positions, approximation.signals)
                @ approximation.xi
            )
        return out

    bounds = [(lo, min(lo + chunk_size, len(positions))) for lo in range(0, len(positions), chunk_size)]
    if not bounds:
        return np.zeros((0, current.volume_dim))
    if threads <= 1 or len(bounds) == 1:
        parts = [block(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            parts = list(executor.map(block, bounds))
    return np.vstack(parts)


def _solve_coefficients(gram: np.ndarray, rhs: np.ndarray, ridge: Optional[float]) -> np.ndarray:
    """Solve gram @ alpha = rhs column-wise; an automatic ridge rescues singular systems"""
    n = gram.shape[0]
    cond = float(np.linalg.cond(gram))
    if ridge is None:
        shift = 0.0 if cond < MAX_CONDITION else 1e-10 * float(np.trace(gram)) / n
    else:
        shift = ridge
    try:
        factor = cho_factor(gram + shift * np.eye(n))
    except LinAlgError:
        raise SingularGramError(f"Gram matrix of {n} supports is singular (condition number {cond:.3e})") from None
    if shift:
        logger.info("gram system solved with ridge %.3e (condition number %.3e)", shift, cond)
    return cho_solve(factor, rhs)


def mp_compress(
    kernels: KernelConfig,
    current: FCurrent,
    config: MPConfig = DEFAULT_MP_CONFIG,
    threads: int = 1,
    on_step: Optional[Callable[[MPStep], None]] = None,
) -> MPResult:
    """Compress a functional current into few Dirac atoms under the W' norm"""
    if len(current) == 0:
        raise ValueError("cannot compress an empty current")

    positions, signals = build_dictionary(config, current)
    gamma_source = correlation_field(kernels, current, None, positions, signals, threads)
    norm2 = fcurrent_inner_product(kernels, current, current, threads)
    norm = math.sqrt(max(norm2, 0.0))

    selected: List[int] = []
    columns = np.zeros((len(positions), 0))
    alpha = np.zeros((0, current.volume_dim))
    gamma = gamma_source.copy()
    residual_norms = [norm]
    steps: List[MPStep] = []
    converged = norm == 0.0

    while not converged and len(steps) < config.max_atoms:
        scores = np.linalg.norm(gamma, axis=1)
        if config.variant == "orthogonal" and selected:
            # already spanned
            scores[selected] = -1.0
        candidate = int(np.argmax(scores))
        best = float(scores[candidate])
        if best <= 1e-15 * norm:
            logger.info("correlation vanished after %d step(s)", len(steps))
            break

        if candidate in selected:
            alpha[selected.index(candidate)] += gamma[candidate]
        else:
            column = kernel_matrix(
                kernels, positions, signals, positions[candidate : candidate + 1], signals[candidate : candidate + 1]
            )
            columns = np.hstack([columns, column])
            selected.append(candidate)
            alpha = np.vstack([alpha, gamma[candidate]])

        gram = columns[selected]
        gram = 0.5 * (gram + gram.T)
        if config.variant == "orthogonal":
            alpha = _solve_coefficients(gram, gamma_source[selected], config.ridge)

        gamma = gamma_source - columns @ alpha
        residual2 = norm2 - 2.0 * float(np.sum(alpha * gamma_source[selected])) + float(np.sum((gram @ alpha) * alpha))
        residual = math.sqrt(max(residual2, 0.0))
        residual_norms.append(residual)
        ratio = residual / norm
        converged = ratio <= config.epsilon

        record = MPStep(
            step=len(steps) + 1,
            candidate=candidate,
            x=positions[candidate].tolist(),
            m=signals[candidate].tolist(),
            gamma_norm=best,
            residual_ratio=ratio,
        )
        steps.append(record)
        logger.info("pursuit step %d: candidate %d, |gamma| %.4e, residual ratio %.4e", record.step, candidate, best, ratio)
        if on_step is not None:
            on_step(record)

    atoms = [DiracFCurrent(x=positions[i], m=signals[i], xi=a) for i, a in zip(selected, alpha)]
    return MPResult(
        ambient_dim=current.ambient_dim,
        manifold_dim=current.manifold_dim,
        signal_dim=current.signal_dim,
        atoms=atoms,
        residual_norms=residual_norms,
        converged=converged,
        steps=steps,
        input_norm=norm,
    )


def reconstruct(result: MPResult) -> FCurrent:
    """The compressed current Pi_n(C) held by a pursuit result"""
    return FCurrent.from_atoms(result.atoms, result.ambient_dim, result.manifold_dim, result.signal_dim)
