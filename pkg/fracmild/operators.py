"""
Operators with a real spectral decomposition and their Mittag-Leffler functions.

In coefficient space every operator function is diagonal:

    W_{α,β}(t) v = (t^(β-1) E_{α,β}(μ_n t^α) v_n)_n

S, K and T are the instances β = 1, 2 and α.
"""

import math
from enum import Enum
from typing import Iterable, Optional

import numpy as np
from pydantic import BaseModel, validator

from fracmild.errors import DimensionError, DomainError, ParameterError
from fracmild.log import get_logger
from fracmild.mlfunc import mittag_leffler

logger = get_logger(__name__)

BOUND_POINTS = 1000
BOUND_MARGIN = 0.05


class OperatorFunctionKind(str, Enum):
    S = "S"
    K = "K"
    T = "T"

    def beta(self, alpha: float) -> float:
        match self:
            case OperatorFunctionKind.S:
                return 1.0
            case OperatorFunctionKind.K:
                return 2.0
            case OperatorFunctionKind.T:
                return alpha
        raise ValueError(f"unknown operator function {self}")


class SectorialParams(BaseModel):
    M: float
    theta: float
    alpha: float
    mu: float = 0.0

    @validator("M")
    def check_m(cls, value: float) -> float:
        if not value >= 1.0:
            raise ValueError("M must be at least 1")
        return value

    @validator("theta")
    def check_theta(cls, value: float) -> float:
        if not math.pi / 2 < value < math.pi:
            raise ValueError("theta must lie in (pi/2, pi)")
        return value

    @validator("alpha")
    def check_alpha(cls, value: float) -> float:
        if not 1.0 < value < 2.0:
            raise ValueError("alpha must lie in (1, 2)")
        return value

    class Config:
        frozen = True


class SpectralOperator(BaseModel):
    eigenvalues: tuple[float, ...]
    label: str = ""
    sectorial_params: Optional[SectorialParams] = None

    @validator("eigenvalues", pre=True)
    def check_eigenvalues(cls, value) -> tuple[float, ...]:
        spectrum = tuple(float(v) for v in np.atleast_1d(value))
        if not spectrum:
            raise ValueError("an operator needs at least one eigenvalue")
        if not all(math.isfinite(v) for v in spectrum):
            raise ValueError("eigenvalues must be finite")
        return spectrum

    class Config:
        frozen = True

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    @property
    def spectrum(self) -> np.ndarray:
        return np.asarray(self.eigenvalues, dtype=float)

    @property
    def accepted_as_sectorial(self) -> bool:
        """Declared type with μ ≤ 0 that dominates the whole spectrum."""
        params = self.sectorial_params
        if params is None:
            return False
        return params.mu <= 0 and max(self.eigenvalues) <= params.mu


def make_heat_operator(n_modes: int) -> SpectralOperator:
    """Dirichlet Laplacian on (0, π) truncated to its first ``n_modes`` modes."""
    if n_modes < 1:
        raise ParameterError(f"n_modes must be at least 1, got {n_modes}")
    n = np.arange(1, n_modes + 1, dtype=float)
    return SpectralOperator(eigenvalues=tuple(-(n**2)), label="heat")


def multipliers(
    op: SpectralOperator,
    alpha: float,
    beta: float,
    t: np.ndarray,
) -> np.ndarray:
    """
    t^(β-1) E_{α,β}(μ_n t^α) on a (len(t), dim) table.

    Equal arguments μ_n t^α are evaluated once.
    """
    t = np.asarray(t, dtype=float).reshape(-1)
    if np.any(t < 0):
        raise DomainError("operator functions are defined for t >= 0 only")
    z = np.multiply.outer(t**alpha, op.spectrum)
    unique, inverse = np.unique(z, return_inverse=True)
    values = mittag_leffler(unique, alpha, beta)[inverse].reshape(z.shape)
    return (t ** (beta - 1.0))[:, None] * values


def apply_w(
    op: SpectralOperator,
    alpha: float,
    beta: float,
    t: float,
    v: np.ndarray,
) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (op.dim,):
        raise DimensionError(f"expected a vector of length {op.dim}, got {v.shape}")
    if t < 0:
        raise DomainError(f"t must be non-negative, got {t}")
    return multipliers(op, alpha, beta, np.array([t]))[0] * v


def apply_opfunc(
    op: SpectralOperator,
    kind: OperatorFunctionKind,
    alpha: float,
    t: float,
    v: np.ndarray,
) -> np.ndarray:
    if not 1.0 < alpha < 2.0:
        raise DomainError(f"alpha must lie in (1, 2), got {alpha}")
    return apply_w(op, alpha, kind.beta(alpha), t, v)


def bound_M(
    op: SpectralOperator,
    alpha: float,
    T: float,
    kinds: Iterable[OperatorFunctionKind],
    *,
    points: int = BOUND_POINTS,
    margin: float = BOUND_MARGIN,
) -> float:
    """Grid scan of sup_t max_n |multiplier| over the requested kinds."""
    if not T > 0:
        raise DomainError(f"T must be positive, got {T}")
    t = np.linspace(0.0, T, points)
    bound = 0.0
    for kind in kinds:
        table = multipliers(op, alpha, kind.beta(alpha), t)
        bound = max(bound, float(np.max(np.abs(table))))
    logger.debug("operator bound %.6g before margin %.2f", bound, margin)
    return bound * (1.0 + margin)


def sectorial_ratio(
    op: SpectralOperator,
    params: SectorialParams,
    *,
    radii: Optional[np.ndarray] = None,
    angles: int = 64,
) -> float:
    """
    Worst sampled |λ^α - μ| · ‖(λ^α - A)^{-1}‖ outside μ + S_θ.

    The excluded sector opens around the negative real axis with half-angle θ,
    so the samples λ^α = μ + r e^{iψ} take |ψ| ≤ π - θ.
    """
    if radii is None:
        radii = np.logspace(-3, 4, 57)
    opening = math.pi - params.theta
    psi = np.linspace(-opening, opening, angles)
    w = params.mu + np.multiply.outer(radii, np.exp(1j * psi)).reshape(-1)
    distance = np.abs(w[:, None] - op.spectrum[None, :])
    if np.any(distance == 0):
        return math.inf
    resolvent = np.max(1.0 / distance, axis=1)
    return float(np.max(resolvent * np.abs(w - params.mu)))


def heat_eigenfunctions(n_modes: int, x: np.ndarray) -> np.ndarray:
    """√(2/π) sin(n x) on a (len(x), n_modes) table."""
    n = np.arange(1, n_modes + 1, dtype=float)
    return math.sqrt(2.0 / math.pi) * np.sin(np.multiply.outer(np.asarray(x), n))


def synthesize(coefficients: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Σ_n c_n w_n(x); leading axes of ``coefficients`` are kept."""
    coefficients = np.asarray(coefficients, dtype=float)
    basis = heat_eigenfunctions(coefficients.shape[-1], x)
    return coefficients @ basis.T
