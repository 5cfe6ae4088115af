"""
Mild solutions by Picard iteration.

    (Pu)(t) = S(t)φ(0) + K(t)ϕ(0)
              + Σ_{t_i < t} [S(t - t_i) I_i(u(t_i^-)) + K(t - t_i) Q_i(u(t_i^-))]
              + ∫_0^t T(t - s) f(s, u(ρ(s, u_s))) ds

The grid splits [0, T] at the impulse times into pieces with an integer number
of cells each. The convolution weights depend only on the grid, so they are
built once per solve in a SolverWorkspace and every iteration is a tensor
contraction. Impulse terms are added piece by piece, reading each left limit
from the trajectory under construction.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from fracmild.errors import (
    DelayCausalityError,
    GridError,
    NonConvergenceError,
    ParameterError,
)
from fracmild.fraccalc import SampledFunction, kernel_moments, piecewise_caputo
from fracmild.helper import sup_norm
from fracmild.log import get_logger
from fracmild.mlfunc import mittag_leffler
from fracmild.models import (
    PicardResult,
    PieceResidual,
    ProblemSpec,
    ResidualReport,
    SolverConfig,
    Trajectory,
)
from fracmild.operators import multipliers

logger = get_logger(__name__)

TAU_DIGITS = 12
MIN_RESIDUAL_POINTS = 5


@dataclass(frozen=True)
class Grid:
    history_times: np.ndarray
    piece_times: list[np.ndarray]

    @property
    def main_times(self) -> np.ndarray:
        return np.concatenate(self.piece_times)

    @property
    def piece_sizes(self) -> list[int]:
        return [len(times) for times in self.piece_times]


def build_grid(prob: ProblemSpec, h: float) -> Grid:
    if not h > 0:
        raise GridError(f"h must be positive, got {h}")
    breaks = prob.breaks
    pieces = []
    for k, (start, end) in enumerate(zip(breaks[:-1], breaks[1:])):
        cells = max(1, math.ceil((end - start) / h - 1e-9))
        if not math.isclose(cells * h, end - start, rel_tol=1e-9):
            logger.debug(
                "piece %d [%s, %s]: step adjusted from %s to %s",
                k,
                start,
                end,
                h,
                (end - start) / cells,
            )
        pieces.append(np.linspace(start, end, cells + 1))
    history = np.empty(0)
    if prob.d > 0:
        cells = max(1, math.ceil(prob.d / h - 1e-9))
        history = np.linspace(-prob.d, 0.0, cells + 1)[:-1]
    return Grid(history_times=history, piece_times=pieces)


def grid_cells(piece_times: list[np.ndarray]):
    """Cell end points and the stacked node index of each end."""
    lo, hi, index_lo = [], [], []
    offset = 0
    for times in piece_times:
        lo.append(times[:-1])
        hi.append(times[1:])
        index_lo.append(offset + np.arange(len(times) - 1))
        offset += len(times)
    index_lo = np.concatenate(index_lo)
    return np.concatenate(lo), np.concatenate(hi), index_lo, index_lo + 1


def convolution_entries(
    targets: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    alpha: float,
    spectrum: np.ndarray,
    refine: int,
):
    """
    Product-rule weights of ∫_0^t τ^(α-1) E_{α,α}(μ_n τ^α) f(s) ds, τ = t - s.

    Returns (target, cell, w_lo, w_hi) where the weight arrays have one column
    per mode; f is linear on each cell and E is frozen at subcell midpoints.
    """
    scale = max(1.0, float(np.max(np.abs(hi)))) if hi.size else 1.0
    active = hi[None, :] <= targets[:, None] + 1e-12 * scale
    target, cell = np.nonzero(active)
    t = targets[target]
    a, b = lo[cell], hi[cell]
    width = b - a

    moments, taus = [], []
    for s in range(refine):
        c = a + width * (s / refine)
        d = a + width * ((s + 1) / refine)
        moments.append(kernel_moments(t, c, d, alpha, a))
        taus.append(t - 0.5 * (c + d))
    tau = np.round(np.concatenate(taus), TAU_DIGITS)
    unique, inverse = np.unique(tau, return_inverse=True)
    z = np.multiply.outer(unique**alpha, spectrum)
    values = mittag_leffler(z.reshape(-1), alpha, alpha).reshape(z.shape)
    logger.debug(
        "convolution: %d kernel entries, %d distinct lags", tau.size, unique.size
    )

    w_lo = np.zeros((target.size, spectrum.size))
    w_hi = np.zeros((target.size, spectrum.size))
    inverse = inverse.reshape(refine, target.size)
    for s, (m0, m1) in enumerate(moments):
        e = values[inverse[s]]
        w_lo += e * (m0 - m1 / width)[:, None]
        w_hi += e * (m1 / width)[:, None]
    return target, cell, w_lo, w_hi


def convolve_T(
    prob: ProblemSpec,
    fvals: SampledFunction,
    t: float,
    quad_refine: int = 4,
) -> np.ndarray:
    grid = fvals.grid
    if grid.size < 2:
        raise GridError("the convolution needs at least two nodes")
    if not grid[0] <= t <= grid[-1] + 1e-12:
        raise GridError(f"t={t} lies outside the sampled interval")
    values = fvals.values.reshape(grid.size, -1)
    if values.shape[1] != prob.dim:
        raise ParameterError(
            f"forcing samples have {values.shape[1]} coordinates, expected {prob.dim}"
        )
    _, cell, w_lo, w_hi = convolution_entries(
        np.array([t]), grid[:-1], grid[1:], prob.alpha, prob.op.spectrum, quad_refine
    )
    return np.sum(w_lo * values[cell] + w_hi * values[cell + 1], axis=0)


def delayed_states(
    traj: Trajectory,
    prob: ProblemSpec,
    s: np.ndarray,
    own: np.ndarray,
) -> np.ndarray:
    """u(ρ(s, u_s)) for states ``own`` at times ``s``; own values when ρ = s."""
    norms = np.linalg.norm(own, axis=1)
    r = prob.delay.targets(s, norms)
    eps = 1e-12 * max(1.0, prob.T)
    late = r > s + eps
    early = r < -prob.d - eps
    if late.any() or early.any():
        bad = int(np.argmax(late | early))
        raise DelayCausalityError(
            f"delay target r={r[bad]!r} at s={s[bad]!r} is outside "
            f"[{-prob.d}, {s[bad]!r}]"
        )
    delayed = own.copy()
    lagged = r < s - eps
    if lagged.any():
        delayed[lagged] = traj.evaluate(r[lagged])
    return delayed


def forcing_values(traj: Trajectory, prob: ProblemSpec) -> np.ndarray:
    """f(s, u(ρ(s, u_s))) at every stacked node of ``traj``."""
    s = traj.main_times
    own = traj.main_values
    delayed = delayed_states(traj, prob, s, own)
    return np.asarray(prob.forcing(s, delayed), dtype=float).reshape(own.shape)


class SolverWorkspace:
    """Grid-dependent data shared by every Picard iterate."""

    def __init__(self, prob: ProblemSpec, cfg: SolverConfig):
        self.prob = prob
        self.cfg = cfg
        self.grid = build_grid(prob, cfg.h)
        op, alpha = prob.op, prob.alpha
        times = self.grid.main_times
        n_main, dim = times.size, op.dim

        self.history_values = (
            prob.history(self.grid.history_times)
            if self.grid.history_times.size
            else np.empty((0, dim))
        )
        self.phi0 = prob.history(np.array([0.0]))[0]
        self.varphi0 = prob.history_derivative(np.array([0.0]))[0]
        self.homogeneous = (
            multipliers(op, alpha, 1.0, times) * self.phi0
            + multipliers(op, alpha, 2.0, times) * self.varphi0
        )

        ends = np.cumsum(self.grid.piece_sizes)
        self.piece_starts = np.concatenate([[0], ends[:-1]])
        self.piece_ends = ends
        self.impulse_tables = []
        for k, impulse in enumerate(prob.impulses, start=1):
            rows = slice(int(self.piece_starts[k]), n_main)
            lag = np.maximum(times[rows] - impulse.t, 0.0)
            self.impulse_tables.append(
                (
                    rows,
                    multipliers(op, alpha, 1.0, lag),
                    multipliers(op, alpha, 2.0, lag),
                )
            )

        lo, hi, index_lo, index_hi = grid_cells(self.grid.piece_times)
        target, cell, w_lo, w_hi = convolution_entries(
            times, lo, hi, alpha, op.spectrum, cfg.quad_refine
        )
        self.weights = np.empty((dim, n_main, n_main))
        flat_lo = target * n_main + index_lo[cell]
        flat_hi = target * n_main + index_hi[cell]
        for n in range(dim):
            self.weights[n] = (
                np.bincount(flat_lo, weights=w_lo[:, n], minlength=n_main**2)
                + np.bincount(flat_hi, weights=w_hi[:, n], minlength=n_main**2)
            ).reshape(n_main, n_main)
        logger.info(
            "workspace: %d nodes, %d modes, %d pieces",
            n_main,
            dim,
            len(self.grid.piece_times),
        )

    def trajectory(self, stacked: np.ndarray) -> Trajectory:
        sizes = self.piece_ends[:-1]
        return Trajectory(
            history_times=self.grid.history_times,
            history_values=self.history_values,
            piece_times=self.grid.piece_times,
            piece_values=list(np.split(stacked, sizes)),
            impulse_times=self.prob.impulse_times,
            u1=self.varphi0,
            alpha=self.prob.alpha,
            op=self.prob.op,
        )

    def convolve(self, forcing: np.ndarray) -> np.ndarray:
        return np.einsum("nji,in->jn", self.weights, forcing)

    def add_impulses(self, stacked: np.ndarray) -> np.ndarray:
        out = stacked.copy()
        for k, (impulse, (rows, s_table, k_table)) in enumerate(
            zip(self.prob.impulses, self.impulse_tables), start=1
        ):
            left = out[int(self.piece_ends[k - 1]) - 1].copy()
            jump = np.asarray(impulse.I(left), dtype=float)
            kick = np.asarray(impulse.Q(left), dtype=float)
            out[rows] += s_table * jump + k_table * kick
        return out


def initial_guess(prob: ProblemSpec, cfg: SolverConfig, workspace=None) -> Trajectory:
    """S(t)φ(0) + K(t)ϕ(0) on [0, T], φ on the history."""
    ws = workspace or SolverWorkspace(prob, cfg)
    return ws.trajectory(ws.homogeneous.copy())


def eval_history_segment(traj: Trajectory, c: float, theta: float) -> np.ndarray:
    """u_c(θ) = u(c + θ), left value at impulse times."""
    if not 0.0 <= c <= traj.T:
        raise ParameterError(f"c={c} lies outside [0, {traj.T}]")
    if not -traj.d - 1e-12 <= theta <= 0.0:
        raise ParameterError(f"theta={theta} lies outside [{-traj.d}, 0]")
    return traj.evaluate(c + theta)[0]


def apply_P(
    traj: Trajectory,
    prob: ProblemSpec,
    cfg: SolverConfig,
    workspace: Optional[SolverWorkspace] = None,
) -> Trajectory:
    ws = workspace or SolverWorkspace(prob, cfg)
    if traj.main_values.shape != ws.homogeneous.shape:
        raise GridError("the trajectory does not live on the solver grid")
    forcing = forcing_values(traj, prob)
    stacked = ws.homogeneous + ws.convolve(forcing)
    return ws.trajectory(ws.add_impulses(stacked))


def picard_solve(
    prob: ProblemSpec,
    cfg: SolverConfig,
    *,
    delta: Optional[float] = None,
) -> PicardResult:
    """
    Iterate P from the homogeneous part until the sup difference drops to tol.

    ``delta`` is the contraction constant of the same problem when known; a
    failure to converge with delta < 1 is flagged as inconsistent.
    """
    ws = SolverWorkspace(prob, cfg)
    current = initial_guess(prob, cfg, ws)
    differences: list[float] = []
    for iteration in range(1, cfg.max_iter + 1):
        following = apply_P(current, prob, cfg, ws)
        difference = sup_norm(following.main_values - current.main_values)
        differences.append(difference)
        logger.debug("picard iteration %d: difference %.3e", iteration, difference)
        current = following
        if difference <= cfg.tol:
            ratio = _last_ratio(differences)
            logger.info(
                "picard converged after %d iteration(s), last ratio %.4f",
                iteration,
                ratio,
            )
            return PicardResult(
                trajectory=current,
                iterations=iteration,
                final_delta=ratio,
                differences=differences,
            )
    ratio = _last_ratio(differences)
    inconsistent = delta is not None and delta < 1.0
    raise NonConvergenceError(
        f"no convergence after {cfg.max_iter} iterations "
        f"(last difference {differences[-1]:.3e}, last ratio {ratio:.4f})"
        + (f"; inconsistent with delta={delta:.4f} < 1" if inconsistent else ""),
        iterations=cfg.max_iter,
        last_ratio=ratio,
        inconsistent=inconsistent,
    )


def _last_ratio(differences: list[float]) -> float:
    if len(differences) < 2 or differences[-2] == 0:
        return 0.0
    return differences[-1] / differences[-2]


def residuals(
    traj: Trajectory,
    prob: ProblemSpec,
    *,
    interior: float = 0.1,
) -> ResidualReport:
    """
    Max |D^α u - A u - f(·, u(ρ))| inside every smooth piece.

    Nodes within ``interior`` times the piece length of either piece end are
    left out. The report also carries |u(0) - φ(0)| and the jump defects.
    """
    pieces = [
        SampledFunction(grid=times, values=values)
        for times, values in zip(traj.piece_times, traj.piece_values)
    ]
    for index, piece in enumerate(pieces):
        if piece.grid.size < MIN_RESIDUAL_POINTS:
            raise GridError(
                f"piece {index} has {piece.grid.size} nodes, "
                f"need {MIN_RESIDUAL_POINTS} for a residual"
            )
    derivatives = piecewise_caputo(pieces, traj.u1, prob.alpha)
    forcing = np.split(
        forcing_values(traj, prob), np.cumsum([p.grid.size for p in pieces])[:-1]
    )
    report = []
    for index, (piece, derivative, f) in enumerate(zip(pieces, derivatives, forcing)):
        start, end = float(piece.grid[0]), float(piece.grid[-1])
        margin = interior * (end - start)
        inside = (piece.grid >= start + margin) & (piece.grid <= end - margin)
        defect = derivative.values - piece.values * prob.op.spectrum - f
        worst = sup_norm(defect[inside]) if inside.any() else 0.0
        report.append(
            PieceResidual(index=index, start=start, end=end, max_residual=worst)
        )

    phi0 = prob.history(np.array([0.0]))[0]
    jumps = [
        sup_norm(
            traj.right_value(k)
            - traj.left_value(k)
            - np.asarray(impulse.I(traj.left_value(k)), dtype=float)
        )
        for k, impulse in enumerate(prob.impulses, start=1)
    ]
    steps = np.concatenate([np.diff(times) for times in traj.piece_times])
    return ResidualReport(
        h=float(steps.max()),
        pieces=report,
        initial_defect=sup_norm(traj.piece_values[0][0] - phi0),
        jump_defects=jumps,
    )
