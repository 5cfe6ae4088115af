from pathlib import Path
from typing import Callable, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, root_validator, validator

from fracmild.errors import ParameterError
from fracmild.operators import SpectralOperator

# t (n,) -> values (n, dim)
HistoryFunction = Callable[[np.ndarray], np.ndarray]
# (t (n,), delayed state (n, dim)) -> (n, dim)
Forcing = Callable[[np.ndarray, np.ndarray], np.ndarray]
# state (dim,) -> (dim,)
StateMap = Callable[[np.ndarray], np.ndarray]
ScalarFunction = Callable[[np.ndarray], np.ndarray]


class DelaySpec(BaseModel):
    form: Literal["none", "constant", "state"] = "none"
    tau: float = 0.0
    rho1: Optional[ScalarFunction] = None
    rho2: Optional[ScalarFunction] = None

    @validator("tau")
    def check_tau(cls, value: float) -> float:
        if value < 0:
            raise ValueError("tau must be non-negative")
        return value

    @root_validator
    def check_state_parts(cls, values):
        if values.get("form") == "state" and (
            values.get("rho1") is None or values.get("rho2") is None
        ):
            raise ValueError("a state-dependent delay needs rho1 and rho2")
        return values

    def targets(self, s: np.ndarray, norms: np.ndarray) -> np.ndarray:
        """Times r = ρ(s, u_s) at which the forcing reads the state."""
        match self.form:
            case "none":
                return s.copy()
            case "constant":
                return s - self.tau
            case "state":
                assert self.rho1 is not None and self.rho2 is not None
                lag = np.asarray(self.rho1(s), dtype=float) * np.asarray(
                    self.rho2(norms), dtype=float
                )
                return s - lag
        raise ValueError(f"unknown delay form {self.form}")


class Impulse(BaseModel):
    t: float
    I: StateMap
    Q: StateMap
    label: str = ""


class ProblemSpec(BaseModel):
    alpha: float
    T: float
    d: float = 0.0
    op: SpectralOperator
    phi: HistoryFunction
    varphi: HistoryFunction
    forcing: Forcing
    delay: DelaySpec = DelaySpec()
    impulses: list[Impulse] = []
    name: str = ""

    @validator("alpha")
    def check_alpha(cls, value: float) -> float:
        if not 1.0 < value < 2.0:
            raise ValueError("alpha must lie in (1, 2)")
        return value

    @validator("T")
    def check_horizon(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("T must be positive")
        return value

    @validator("d")
    def check_depth(cls, value: float) -> float:
        if value < 0:
            raise ValueError("d must be non-negative")
        return value

    @root_validator(skip_on_failure=True)
    def check_impulse_times(cls, values):
        previous = 0.0
        for index, impulse in enumerate(values["impulses"], start=1):
            if not previous < impulse.t < values["T"]:
                raise ValueError(
                    f"impulse times must satisfy 0 < t_1 < ... < t_m < T, "
                    f"got t_{index}={impulse.t} (T={values['T']})"
                )
            previous = impulse.t
        return values

    @root_validator(skip_on_failure=True)
    def check_constant_lag(cls, values):
        delay = values["delay"]
        if delay.form == "constant" and delay.tau > values["d"]:
            raise ValueError(
                f"constant delay tau={delay.tau} reaches before the history "
                f"start -d={-values['d']}"
            )
        return values

    @property
    def dim(self) -> int:
        return self.op.dim

    @property
    def impulse_times(self) -> tuple[float, ...]:
        return tuple(impulse.t for impulse in self.impulses)

    @property
    def breaks(self) -> np.ndarray:
        """0, t_1, ..., t_m, T."""
        return np.array([0.0, *self.impulse_times, self.T])

    def history(self, t: np.ndarray) -> np.ndarray:
        return _history_table(self.phi, t, self.dim, "phi")

    def history_derivative(self, t: np.ndarray) -> np.ndarray:
        return _history_table(self.varphi, t, self.dim, "varphi")


def _history_table(func: HistoryFunction, t: np.ndarray, dim: int, name: str):
    t = np.asarray(t, dtype=float).reshape(-1)
    table = np.asarray(func(t), dtype=float)
    if table.ndim == 1 and dim == 1:
        table = table[:, None]
    if table.shape != (t.size, dim):
        raise ParameterError(
            f"{name} returned shape {table.shape}, expected {(t.size, dim)}"
        )
    if not np.all(np.isfinite(table)):
        raise ParameterError(f"{name} is not finite on the history interval")
    return table


class SolverConfig(BaseModel):
    h: float = 1 / 256
    tol: float = 1e-10
    max_iter: int = 50
    quad_refine: int = 4

    @validator("h", "tol")
    def check_positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("must be positive")
        return value

    @validator("max_iter", "quad_refine")
    def check_count(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value


class OracleConfig(BaseModel):
    h: float = 1 / 256
    picard_inner: int = 100
    tol_inner: float = 1e-14

    @validator("h")
    def check_step(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("h must be positive")
        return value


class Trajectory(BaseModel):
    """
    Piecewise solution on [-d, T].

    Piece k covers [t_k, t_{k+1}] with t_0 = 0 and t_{m+1} = T, so every impulse
    time is stored twice: last node of piece k-1 (left value) and first node of
    piece k (right value). History nodes exclude 0.
    """

    history_times: np.ndarray
    history_values: np.ndarray
    piece_times: list[np.ndarray]
    piece_values: list[np.ndarray]
    impulse_times: tuple[float, ...] = ()
    u1: np.ndarray
    alpha: float
    op: SpectralOperator

    class Config:
        arbitrary_types_allowed = True

    @property
    def T(self) -> float:
        return float(self.piece_times[-1][-1])

    @property
    def d(self) -> float:
        if self.history_times.size == 0:
            return 0.0
        return float(-self.history_times[0])

    @property
    def main_values(self) -> np.ndarray:
        """All nodes on [0, T] stacked in order, impulse nodes twice."""
        return np.concatenate(self.piece_values)

    @property
    def main_times(self) -> np.ndarray:
        return np.concatenate(self.piece_times)

    def left_value(self, k: int) -> np.ndarray:
        """u(t_k^-), k = 1..m."""
        return self.piece_values[k - 1][-1]

    def right_value(self, k: int) -> np.ndarray:
        return self.piece_values[k][0]

    def evaluate(self, r) -> np.ndarray:
        """Left-continuous linear interpolation at times in [-d, T]."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        eps = 1e-12 * max(1.0, self.T)
        if np.any(r < -self.d - eps) or np.any(r > self.T + eps):
            raise ParameterError(
                f"evaluation time outside [{-self.d}, {self.T}]: "
                f"[{r.min()}, {r.max()}]"
            )
        out = np.empty((r.size, self.op.dim))
        past = r <= 0
        if past.any():
            times = np.append(self.history_times, 0.0)
            values = np.vstack([self.history_values, self.piece_values[0][:1]])
            out[past] = _interp_columns(r[past], times, values)
        breaks = np.array([0.0, *self.impulse_times])
        piece = np.searchsorted(breaks, r, side="left") - 1
        for k, (times, values) in enumerate(zip(self.piece_times, self.piece_values)):
            mask = (piece == k) & ~past
            if mask.any():
                out[mask] = _interp_columns(r[mask], times, values)
        return out

    def rows(self) -> list[tuple[float, str, np.ndarray]]:
        """(t, side, state) per stored node; side is L/R at impulse times."""
        result = [
            (float(t), "·", v) for t, v in zip(self.history_times, self.history_values)
        ]
        last = len(self.piece_times) - 1
        for k, (times, values) in enumerate(zip(self.piece_times, self.piece_values)):
            for j, (t, v) in enumerate(zip(times, values)):
                side = "·"
                if j == 0 and k > 0:
                    side = "R"
                elif j == len(times) - 1 and k < last:
                    side = "L"
                result.append((float(t), side, v))
        return result


def _interp_columns(x: np.ndarray, xp: np.ndarray, fp: np.ndarray) -> np.ndarray:
    if xp.size == 1:
        return np.repeat(fp[:1], x.size, axis=0)
    return np.column_stack([np.interp(x, xp, fp[:, n]) for n in range(fp.shape[1])])


class PicardResult(BaseModel):
    trajectory: Trajectory
    iterations: int
    final_delta: float
    differences: list[float] = []

    @property
    def ratios(self) -> list[float]:
        return [
            b / a
            for a, b in zip(self.differences, self.differences[1:])
            if a > 0
        ]


class LipschitzData(BaseModel):
    l_f: Union[float, ScalarFunction] = 0.0
    l_i: float = 0.0
    l_j: float = 0.0
    m_f: Union[float, ScalarFunction] = 0.0
    C_i: float = 0.0
    C_j: float = 0.0
    Omega_f: Optional[ScalarFunction] = None
    m: int = 0
    M: Optional[float] = None
    phi0_norm: float = 0.0
    varphi0_norm: float = 0.0
    s_max: float = 1e6

    @validator("l_i", "l_j", "C_i", "C_j", "m", "phi0_norm", "varphi0_norm")
    def check_non_negative(cls, value):
        if value < 0:
            raise ValueError("must be non-negative")
        return value

    @validator("l_f", "m_f")
    def check_rate(cls, value):
        if not callable(value) and value < 0:
            raise ValueError("must be non-negative")
        return value

    @validator("M")
    def check_bound(cls, value):
        if value is not None and value < 0:
            raise ValueError("M must be non-negative")
        return value

    class Config:
        arbitrary_types_allowed = True


Verdict = Literal["pass", "fail", "skipped"]


class HypothesisReport(BaseModel):
    M: float
    M_source: Literal["given", "scan"]
    delta: float
    theta: float
    r_min: Optional[float]
    C_prime: float
    leray_lhs: float
    leray_rhs: float
    leray_rhs_infinite: bool = False
    s_max: float
    verdicts: dict[str, Verdict]
    # only filled when the operator declares a sectorial type
    sectorial_accepted: Optional[bool] = None
    sectorial_ratio: Optional[float] = None
    sectorial_M: Optional[float] = None

    @property
    def sectorial_within_bound(self) -> Optional[bool]:
        if self.sectorial_ratio is None or self.sectorial_M is None:
            return None
        return self.sectorial_ratio <= self.sectorial_M

    @property
    def any_pass(self) -> bool:
        return any(verdict == "pass" for verdict in self.verdicts.values())


class PieceResidual(BaseModel):
    index: int
    start: float
    end: float
    max_residual: float


class ResidualReport(BaseModel):
    h: float
    pieces: list[PieceResidual]
    initial_defect: float
    jump_defects: list[float] = []

    @property
    def max_residual(self) -> float:
        return max(piece.max_residual for piece in self.pieces)

    @property
    def worst(self) -> float:
        return max([self.max_residual, self.initial_defect, *self.jump_defects])


class CompareResult(BaseModel):
    sup_gap: float
    per_piece_gaps: list[float]


class RefinementRow(BaseModel):
    h: float
    sup_gap: float
    ratio: Optional[float] = None


class SolveSummary(BaseModel):
    problem: str
    iterations: int
    final_delta: float
    h: float
    wall_time: float
    delta: Optional[float] = None
    trajectory: Path
    meta: Path
    field: Optional[Path] = None
