"""
Discrete Riemann-Liouville integrals and Caputo derivatives.

Everything here is product integration: the smooth factor is replaced by its
piecewise-linear interpolant and the weakly singular kernel (t-s)^(α-1) is
integrated exactly against it cell by cell.
"""

from typing import Optional

import numpy as np
from pydantic import BaseModel, validator
from scipy import special

from fracmild.errors import DomainError, GridError

MIN_CAPUTO_POINTS = 5


class SampledFunction(BaseModel):
    grid: np.ndarray
    values: np.ndarray

    class Config:
        arbitrary_types_allowed = True

    @validator("grid", pre=True)
    def check_grid(cls, value) -> np.ndarray:
        grid = np.asarray(value, dtype=float).reshape(-1)
        if not np.all(np.isfinite(grid)):
            raise ValueError("grid must be finite")
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise ValueError("grid must be strictly increasing")
        return grid

    @validator("values", pre=True)
    def check_values(cls, value, values) -> np.ndarray:
        arr = np.asarray(value, dtype=float)
        grid = values.get("grid")
        if grid is not None and (arr.ndim == 0 or arr.shape[0] != grid.size):
            raise ValueError("values must have one entry per grid node")
        return arr

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def is_uniform(self, rtol: float = 1e-9) -> bool:
        steps = np.diff(self.grid)
        return bool(np.allclose(steps, steps[0], rtol=rtol, atol=0.0))


def kernel_moments(
    t: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    alpha: float,
    anchor: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """
    ∫_lo^hi (t-s)^(α-1) ds and ∫_lo^hi (t-s)^(α-1) (s - anchor) ds.

    Arguments broadcast; cells with hi > t are clipped to zero length.
    """
    upper = np.maximum(t - lo, 0.0)
    lower = np.maximum(t - hi, 0.0)
    m0 = (upper**alpha - lower**alpha) / alpha
    m1 = (t - anchor) * m0 - (upper ** (alpha + 1) - lower ** (alpha + 1)) / (
        alpha + 1
    )
    return m0, m1


def product_rule(
    targets: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    g_lo: np.ndarray,
    g_hi: np.ndarray,
    alpha: float,
) -> np.ndarray:
    """
    (1/Γ(α)) Σ_cells ∫_lo^hi (t-s)^(α-1) g(s) ds for every target t.

    ``g`` is linear on each cell between ``g_lo`` and ``g_hi`` and may jump
    between cells. Only cells lying fully left of a target contribute to it.
    """
    t = targets[:, None]
    width = hi - lo
    active = (hi[None, :] <= t + 1e-12 * max(1.0, float(np.max(np.abs(hi)))))
    m0, m1 = kernel_moments(t, lo[None, :], hi[None, :], alpha, lo[None, :])
    m0 = np.where(active, m0, 0.0)
    m1 = np.where(active, m1, 0.0)
    w_lo = m0 - m1 / width
    w_hi = m1 / width
    result = w_lo @ g_lo + w_hi @ g_hi
    return result * special.rgamma(alpha)


def rl_integral(f: SampledFunction, alpha: float) -> SampledFunction:
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    if f.grid.size < 2:
        raise GridError("the Riemann-Liouville integral needs at least two nodes")
    grid = f.grid
    values = f.values
    integral = product_rule(
        grid, grid[:-1], grid[1:], values[:-1], values[1:], alpha
    )
    return SampledFunction(grid=grid, values=integral)


def second_difference(
    u: SampledFunction,
    u1: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    u'' at every node of a uniform grid.

    Central differences inside, second-order one-sided stencils at the ends.
    When the left derivative ``u1`` is known it replaces one of the left nodes.
    """
    if u.grid.size < MIN_CAPUTO_POINTS:
        raise GridError(
            f"need at least {MIN_CAPUTO_POINTS} nodes, got {u.grid.size}"
        )
    if not u.is_uniform():
        raise GridError("second differences need a uniform grid")
    h = u.step
    v = u.values
    d2 = np.empty_like(v)
    d2[1:-1] = (v[:-2] - 2.0 * v[1:-1] + v[2:]) / h**2
    if u1 is None:
        d2[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h**2
    else:
        d2[0] = (-7.0 * v[0] + 8.0 * v[1] - v[2] - 6.0 * h * u1) / (2.0 * h**2)
    d2[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / h**2
    return d2


def _check_order(alpha: float) -> None:
    if not 1.0 < alpha < 2.0:
        raise DomainError(f"Caputo order must lie in (1, 2), got {alpha}")


def caputo_derivative(
    u: SampledFunction,
    u1: Optional[np.ndarray],
    alpha: float,
) -> SampledFunction:
    """D^α u = J^(2-α) u'' with lower limit at the first grid node."""
    _check_order(alpha)
    d2 = second_difference(u, None if u1 is None else np.asarray(u1, dtype=float))
    return rl_integral(SampledFunction(grid=u.grid, values=d2), 2.0 - alpha)


def piecewise_caputo(
    pieces: list[SampledFunction],
    u1: Optional[np.ndarray],
    alpha: float,
) -> list[SampledFunction]:
    """
    Caputo derivative with lower limit at the start of the first piece.

    Second differences never straddle a piece boundary; the kernel runs over
    the cells of every earlier piece, with u'' allowed to jump between pieces.
    """
    _check_order(alpha)
    if not pieces:
        raise GridError("at least one piece is required")
    lo, hi, g_lo, g_hi = [], [], [], []
    curvatures = []
    for index, piece in enumerate(pieces):
        d2 = second_difference(piece, u1 if index == 0 else None)
        curvatures.append(d2)
        lo.append(piece.grid[:-1])
        hi.append(piece.grid[1:])
        g_lo.append(d2[:-1])
        g_hi.append(d2[1:])
    cells = (
        np.concatenate(lo),
        np.concatenate(hi),
        np.concatenate(g_lo),
        np.concatenate(g_hi),
    )
    if np.any(np.diff(cells[0]) <= 0):
        raise GridError("pieces must follow each other in time")
    return [
        SampledFunction(
            grid=piece.grid,
            values=product_rule(piece.grid, *cells, 2.0 - alpha),
        )
        for piece in pieces
    ]

