import csv

import numpy as np
import pytest

from fracmild import files
from fracmild.errors import ParameterError
from fracmild.models import RefinementRow, SolverConfig
from fracmild.parser import load_problem
from fracmild.solver import picard_solve


@pytest.fixture
def impulse_trajectory(scalar_impulse):
    return picard_solve(scalar_impulse.spec, SolverConfig(h=1 / 16)).trajectory


def read_rows(path):
    with path.open(newline="", encoding="utf-8") as handle:
        return list(csv.reader(handle))


def test_trajectory_rows(tmp_path, impulse_trajectory):
    path = files.write_trajectory(tmp_path / files.TRAJECTORY_FILE, impulse_trajectory)
    header, *rows = read_rows(path)
    assert header == ["t", "side", "u1"]
    assert [row[0] for row in rows[:2]] == ["-0.125", "-0.0625"]
    sides = {(row[0], row[1]) for row in rows}
    assert ("0.5", "L") in sides
    assert ("0.5", "R") in sides
    assert len(rows) == 2 + 9 + 9


def test_trajectory_survives_a_round_trip(
    tmp_path, scalar_impulse, impulse_trajectory
):
    path = files.write_trajectory(tmp_path / files.TRAJECTORY_FILE, impulse_trajectory)
    spec = scalar_impulse.spec
    loaded = files.read_trajectory(
        path, alpha=spec.alpha, op=spec.op, u1=np.array([0.0])
    )
    assert loaded.impulse_times == (0.5,)
    assert np.array_equal(loaded.history_times, impulse_trajectory.history_times)
    assert np.array_equal(loaded.main_times, impulse_trajectory.main_times)
    assert np.array_equal(loaded.main_values, impulse_trajectory.main_values)
    assert np.array_equal(loaded.left_value(1), impulse_trajectory.left_value(1))
    assert np.array_equal(loaded.right_value(1), impulse_trajectory.right_value(1))


def test_trajectory_files_are_deterministic(tmp_path, scalar_impulse):
    written = []
    for name in ("first.csv", "second.csv"):
        traj = picard_solve(scalar_impulse.spec, SolverConfig(h=1 / 32)).trajectory
        written.append(files.write_trajectory(tmp_path / name, traj).read_bytes())
    assert written[0] == written[1]


TRAJECTORY_ERRORS = [
    pytest.param("", id="empty"),
    pytest.param("h,sup_gap,ratio\n", id="other header"),
    pytest.param("t,side,u1,u2\n0.0,·,1.0,2.0\n", id="too many coordinates"),
    pytest.param("t,side,u1\n0.0,·,1.0\n0.5,L,1.0\n", id="missing right value"),
    pytest.param("t,side,u1\n0.0,·,1.0\n0.5,R,1.0\n", id="missing left value"),
]


@pytest.mark.parametrize("text", TRAJECTORY_ERRORS)
def test_read_trajectory_errors(tmp_path, scalar_impulse, text):
    path = tmp_path / files.TRAJECTORY_FILE
    path.write_text(text, "utf-8")
    spec = scalar_impulse.spec
    with pytest.raises(ParameterError):
        files.read_trajectory(path, alpha=spec.alpha, op=spec.op, u1=np.zeros(1))


def test_key_values(tmp_path):
    path = files.write_key_values(
        tmp_path / files.META_FILE,
        {"iterations": 7, "final_delta": 0.1, "passed": True, "ratio": None},
    )
    assert path.read_text("utf-8") == (
        "iterations=7\nfinal_delta=0.1\npassed=true\nratio=none\n"
    )
    assert files.read_key_values(path) == {
        "iterations": "7",
        "final_delta": "0.1",
        "passed": "true",
        "ratio": "none",
    }


def test_key_values_need_a_separator(tmp_path):
    path = tmp_path / files.META_FILE
    path.write_text("iterations=7\n\nbroken\n", "utf-8")
    with pytest.raises(ParameterError, match=":3:"):
        files.read_key_values(path)


def test_field(tmp_path, problems):
    spec = load_problem(problems / "heat49.toml", modes=2).spec
    traj = picard_solve(spec, SolverConfig(h=1 / 16)).trajectory
    path = files.write_field(tmp_path / files.FIELD_FILE, traj, 5)
    header, *rows = read_rows(path)
    assert header[:3] == ["t", "side", "0.0"]
    assert len(header) == 2 + 5
    assert float(header[-1]) == pytest.approx(np.pi)
    assert len(rows) == len(traj.rows())
    assert all(abs(float(row[2])) < 1e-12 for row in rows)


def test_compare_file(tmp_path):
    rows = [
        RefinementRow(h=0.5, sup_gap=0.25),
        RefinementRow(h=0.25, sup_gap=0.125, ratio=2.0),
    ]
    path = files.write_compare(tmp_path / files.COMPARE_FILE, rows)
    assert path.read_text("utf-8") == (
        "h,sup_gap,ratio\n0.5,0.25,none\n0.25,0.125,2.0\n"
    )
