import math
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import integrate

from fracmild.models import DelaySpec, Impulse, ProblemSpec, Trajectory
from fracmild.operators import SpectralOperator, heat_eigenfunctions

PROBLEMS = Path(__file__).parent.parent / "fracmild" / "problems"


def constant_history(value: float):
    return lambda t: np.full((np.size(t), 1), value)


def constant_map(value: float):
    return lambda u: np.full_like(np.asarray(u, dtype=float), value)


def zero_forcing(s, delayed):
    return np.zeros_like(delayed)


def unit_forcing(s, delayed):
    return np.ones_like(delayed)


def scalar_problem(
    mu: float = -1.0,
    *,
    alpha: float = 1.5,
    T: float = 1.0,
    u0: float = 1.0,
    u1: float = 0.0,
    forcing=zero_forcing,
    impulses: Optional[list[Impulse]] = None,
    delay: Optional[DelaySpec] = None,
    d: float = 0.0,
) -> ProblemSpec:
    """D^α u = μ u + f with constant history u0 and slope u1."""
    return ProblemSpec(
        alpha=alpha,
        T=T,
        d=d,
        op=SpectralOperator(eigenvalues=(mu,), label="scalar"),
        phi=constant_history(u0),
        varphi=constant_history(u1),
        forcing=forcing,
        delay=delay or DelaySpec(),
        impulses=impulses or [],
    )


def jump_impulse(t: float, c: float, q: float) -> Impulse:
    return Impulse(t=t, I=constant_map(c), Q=constant_map(q))


def power_integral(t: np.ndarray, alpha: float, power: float = 0.0) -> np.ndarray:
    """J^α of s^p evaluated at t: Γ(p+1)/Γ(p+1+α) · t^(p+α)."""
    scale = math.gamma(power + 1.0) / math.gamma(power + 1.0 + alpha)
    return scale * np.asarray(t, dtype=float) ** (power + alpha)


def project(values: np.ndarray, x: np.ndarray, n_modes: int) -> np.ndarray:
    """Coefficients (u, w_n) of samples u(x) on a grid covering [0, π]."""
    basis = heat_eigenfunctions(n_modes, x)
    return integrate.trapezoid(basis * np.asarray(values)[:, None], x, axis=0)


def with_main_values(traj: Trajectory, stacked: np.ndarray) -> Trajectory:
    sizes = np.cumsum([len(times) for times in traj.piece_times])[:-1]
    return traj.copy(update={"piece_values": list(np.split(stacked, sizes))})
