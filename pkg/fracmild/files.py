"""
Result files.

All numbers are written with the shortest round-trip repr, so equal inputs give
byte-identical files.
"""

import csv
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from fracmild.errors import ParameterError
from fracmild.helper import format_float
from fracmild.models import RefinementRow, Trajectory
from fracmild.operators import SpectralOperator, synthesize

TRAJECTORY_FILE = "trajectory.csv"
META_FILE = "run.meta"
REPORT_FILE = "hypotheses.report"
COMPARE_FILE = "compare.csv"
FIELD_FILE = "field.csv"
RESIDUAL_FILE = "residual.report"


def _value(value) -> str:
    match value:
        case bool():
            return "true" if value else "false"
        case float() | np.floating():
            return format_float(value)
        case None:
            return "none"
    return str(value)


def write_key_values(path: Path, values: Mapping[str, object]) -> Path:
    lines = [f"{key}={_value(value)}\n" for key, value in values.items()]
    path.write_text("".join(lines), "utf-8")
    return path


def read_key_values(path: Path) -> dict[str, str]:
    result = {}
    for number, line in enumerate(path.read_text("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        key, separator, value = line.partition("=")
        if not separator:
            raise ParameterError(f"{path}:{number}: expected key=value, got {line!r}")
        result[key.strip()] = value.strip()
    return result


def write_trajectory(path: Path, traj: Trajectory) -> Path:
    dim = traj.op.dim
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["t", "side", *(f"u{n}" for n in range(1, dim + 1))])
        for t, side, state in traj.rows():
            writer.writerow([format_float(t), side, *map(format_float, state)])
    return path


def read_trajectory(
    path: Path,
    *,
    alpha: float,
    op: SpectralOperator,
    u1: np.ndarray,
) -> Trajectory:
    """Rebuild a trajectory; an L row closes a piece and the R row opens the next."""
    history_times, history_values = [], []
    pieces: list[list[tuple[float, list[float]]]] = [[]]
    impulse_times = []
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or header[:2] != ["t", "side"]:
            raise ParameterError(f"{path} is not a trajectory file")
        if len(header) - 2 != op.dim:
            raise ParameterError(
                f"{path} has {len(header) - 2} coordinates, the operator {op.dim}"
            )
        for row in reader:
            t, side, state = float(row[0]), row[1], [float(v) for v in row[2:]]
            if t < 0:
                history_times.append(t)
                history_values.append(state)
                continue
            if side == "R":
                pieces.append([])
            pieces[-1].append((t, state))
            if side == "L":
                impulse_times.append(t)
    if len(pieces) != len(impulse_times) + 1 or not all(pieces):
        raise ParameterError(f"{path} has unmatched L/R rows")
    return Trajectory(
        history_times=np.array(history_times),
        history_values=np.array(history_values).reshape(-1, op.dim),
        piece_times=[np.array([t for t, _ in piece]) for piece in pieces],
        piece_values=[np.array([v for _, v in piece]) for piece in pieces],
        impulse_times=tuple(impulse_times),
        u1=np.asarray(u1, dtype=float),
        alpha=alpha,
        op=op,
    )


def write_field(path: Path, traj: Trajectory, points: int) -> Path:
    """u(t, x) = Σ c_n(t) √(2/π) sin(n x) on ``points`` nodes of [0, π]."""
    x = np.linspace(0.0, np.pi, points)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["t", "side", *(format_float(v) for v in x)])
        for t, side, state in traj.rows():
            writer.writerow(
                [format_float(t), side, *map(format_float, synthesize(state, x))]
            )
    return path


def write_compare(path: Path, rows: Iterable[RefinementRow]) -> Path:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["h", "sup_gap", "ratio"])
        for row in rows:
            writer.writerow(
                [format_float(row.h), format_float(row.sup_gap), _value(row.ratio)]
            )
    return path
