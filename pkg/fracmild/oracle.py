"""
Reference solver marching the Volterra form of the impulsive problem

    u(t) = u0 + u1 t + Σ_{t_i < t} [I_i(u(t_i^-)) + Q_i(u(t_i^-)) (t - t_i)]
           + (1/Γ(α)) ∫_0^t (t-s)^(α-1) [A u(s) + f(s, u(ρ(s, u_s)))] ds

with right-endpoint product rectangles. It shares only the grid and the delay
lookup with the mild-solution solver and never touches Mittag-Leffler
functions.
"""

import numpy as np
from scipy import special

from fracmild.errors import HorizonMismatchError, InnerIterationError
from fracmild.helper import sup_norm
from fracmild.log import get_logger
from fracmild.models import CompareResult, OracleConfig, ProblemSpec, Trajectory
from fracmild.solver import build_grid, delayed_states, grid_cells

logger = get_logger(__name__)


def volterra_solve(prob: ProblemSpec, cfg: OracleConfig) -> Trajectory:
    grid = build_grid(prob, cfg.h)
    alpha, mu = prob.alpha, prob.op.spectrum
    times = grid.main_times
    n_main, dim = times.size, prob.dim
    lo, hi, _, index_hi = grid_cells(grid.piece_times)
    inv_gamma = special.rgamma(alpha)

    u0 = prob.history(np.array([0.0]))[0]
    u1 = prob.history_derivative(np.array([0.0]))[0]
    stacked = np.zeros((n_main, dim))
    # μ u + f at every node a cell ends on
    integrand = np.zeros((n_main, dim))
    sizes = np.cumsum(grid.piece_sizes)
    traj = Trajectory(
        history_times=grid.history_times,
        history_values=(
            prob.history(grid.history_times)
            if grid.history_times.size
            else np.empty((0, dim))
        ),
        piece_times=grid.piece_times,
        piece_values=list(np.split(stacked, sizes[:-1])),
        impulse_times=prob.impulse_times,
        u1=u1,
        alpha=alpha,
        op=prob.op,
    )

    def source(j: int) -> np.ndarray:
        s = times[j : j + 1]
        delayed = delayed_states(traj, prob, s, stacked[j : j + 1])
        return np.asarray(prob.forcing(s, delayed), dtype=float).reshape(dim)

    piece_starts = set(int(x) for x in sizes[:-1])
    lefts: list[np.ndarray] = []
    c_last = 0.0
    stacked[0] = u0
    integrand[0] = mu * u0 + source(0)
    for j in range(1, n_main):
        t = times[j]
        if j in piece_starts:
            # right value at t_k: same integral as the left value, plus the jump
            k = len(lefts)
            left = stacked[j - 1].copy()
            lefts.append(left)
            stacked[j] = left + np.asarray(prob.impulses[k].I(left), dtype=float)
            continue

        known = u0 + u1 * t
        for impulse, left in zip(prob.impulses, lefts):
            known = known + np.asarray(impulse.I(left), dtype=float)
            known = known + np.asarray(impulse.Q(left), dtype=float) * (t - impulse.t)
        before = index_hi < j
        upper = t - lo[before]
        lower = t - hi[before]
        weights = (upper**alpha - lower**alpha) / alpha * inv_gamma
        known = known + weights @ integrand[index_hi[before]]

        last = index_hi == j
        width = float(hi[last][0] - lo[last][0])
        c_last = width**alpha / alpha * inv_gamma
        denominator = 1.0 - c_last * mu
        if np.any(denominator <= 0):
            raise InnerIterationError(
                f"step {width:.3e} too large for the operator at t={t}",
                iterations=0,
                last_ratio=float("nan"),
            )
        stacked[j] = stacked[j - 1]
        change = float("inf")
        for _ in range(cfg.picard_inner):
            update = (known + c_last * source(j)) / denominator
            change = sup_norm(update - stacked[j])
            stacked[j] = update
            if change <= cfg.tol_inner * max(1.0, sup_norm(update)):
                break
        else:
            raise InnerIterationError(
                f"inner iteration did not settle at t={t} "
                f"after {cfg.picard_inner} steps (last change {change:.3e})",
                iterations=cfg.picard_inner,
                last_ratio=float("nan"),
            )
        integrand[j] = mu * stacked[j] + source(j)

    logger.info("oracle marched %d nodes, last cell weight %.3e", n_main, c_last)
    return traj.copy(update={"piece_values": list(np.split(stacked, sizes[:-1]))})


def compare(traj_a: Trajectory, traj_b: Trajectory) -> CompareResult:
    """Sup gap on the coarser grid, finer trajectory interpolated piecewise."""
    if not np.isclose(traj_a.T, traj_b.T, rtol=1e-12, atol=0.0):
        raise HorizonMismatchError(f"horizons differ: {traj_a.T} vs {traj_b.T}")
    if len(traj_a.impulse_times) != len(traj_b.impulse_times) or not np.allclose(
        traj_a.impulse_times, traj_b.impulse_times, rtol=1e-12, atol=0.0
    ):
        raise HorizonMismatchError(
            f"impulse times differ: {traj_a.impulse_times} vs {traj_b.impulse_times}"
        )
    coarse, fine = traj_a, traj_b
    if traj_a.main_times.size > traj_b.main_times.size:
        coarse, fine = traj_b, traj_a
    gaps = []
    for times, values, fine_times, fine_values in zip(
        coarse.piece_times, coarse.piece_values, fine.piece_times, fine.piece_values
    ):
        if values.shape[1] != fine_values.shape[1]:
            raise HorizonMismatchError("trajectories have different dimensions")
        interpolated = np.column_stack(
            [
                np.interp(times, fine_times, fine_values[:, n])
                for n in range(values.shape[1])
            ]
        )
        gaps.append(sup_norm(values - interpolated))
    return CompareResult(sup_gap=max(gaps), per_piece_gaps=gaps)
