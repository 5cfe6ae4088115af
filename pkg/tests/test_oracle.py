import math

import numpy as np
import pytest

from fracmild import oracle, solver
from fracmild.errors import HorizonMismatchError, InnerIterationError
from fracmild.mlfunc import mittag_leffler
from fracmild.models import OracleConfig, SolverConfig
from fracmild.parser import load_problem
from tests.helpers import jump_impulse, scalar_problem, with_main_values


def test_free_motion_with_an_impulse_is_exact():
    c, q = 0.3, -0.4
    prob = scalar_problem(0.0, u0=1.0, u1=0.5, impulses=[jump_impulse(0.5, c, q)])
    traj = oracle.volterra_solve(prob, OracleConfig(h=1 / 32))
    before, after = traj.piece_times
    np.testing.assert_allclose(traj.piece_values[0][:, 0], 1.0 + 0.5 * before)
    np.testing.assert_allclose(
        traj.piece_values[1][:, 0], 1.0 + 0.5 * after + c + q * (after - 0.5)
    )


def test_oracle_converges_to_mittag_leffler():
    prob = scalar_problem(-1.0)
    errors = []
    for h in (1 / 64, 1 / 256):
        traj = oracle.volterra_solve(prob, OracleConfig(h=h))
        t = traj.main_times
        exact = mittag_leffler(-(t**1.5), 1.5, 1.0)
        errors.append(np.max(np.abs(traj.main_values[:, 0] - exact)))
    assert errors[1] < errors[0]
    assert math.log(errors[0] / errors[1], 4) == pytest.approx(1.0, abs=0.01)


@pytest.mark.parametrize("name", ["scalar_decay", "scalar_impulse"])
def test_solver_and_oracle_agree(problems, name):
    spec = load_problem(problems / f"{name}.toml").spec
    h = 1 / 512
    mild = solver.picard_solve(spec, SolverConfig(h=h, tol=1e-12)).trajectory
    reference = oracle.volterra_solve(spec, OracleConfig(h=h))
    assert oracle.compare(mild, reference).sup_gap <= 1e-3


def test_gaps_shrink_under_refinement(heat49):
    gaps = []
    for h in (1 / 64, 1 / 128, 1 / 256, 1 / 512):
        mild = solver.picard_solve(heat49.spec, SolverConfig(h=h)).trajectory
        reference = oracle.volterra_solve(heat49.spec, OracleConfig(h=h))
        gaps.append(oracle.compare(mild, reference).sup_gap)
    for coarse, fine in zip(gaps, gaps[1:]):
        assert coarse / fine >= 1.5


def test_compare_with_itself():
    prob = scalar_problem(-1.0, impulses=[jump_impulse(0.5, 0.2, 0.0)])
    traj = solver.picard_solve(prob, SolverConfig(h=1 / 32)).trajectory
    result = oracle.compare(traj, traj)
    assert result.sup_gap == 0.0
    assert result.per_piece_gaps == [0.0, 0.0]


def test_compare_interpolates_the_finer_trajectory():
    prob = scalar_problem(0.0, u0=1.0, u1=1.0)
    coarse = solver.picard_solve(prob, SolverConfig(h=1 / 16)).trajectory
    fine = solver.picard_solve(prob, SolverConfig(h=1 / 64)).trajectory
    shifted = with_main_values(fine, fine.main_values + 0.25)
    assert oracle.compare(shifted, coarse).sup_gap == pytest.approx(0.25)
    assert oracle.compare(coarse, shifted).sup_gap == pytest.approx(0.25)


MISMATCH_TESTS = [
    pytest.param(scalar_problem(T=0.5), id="horizon"),
    pytest.param(
        scalar_problem(impulses=[jump_impulse(0.5, 0.0, 0.0)]), id="impulse times"
    ),
]


@pytest.mark.parametrize("other", MISMATCH_TESTS)
def test_compare_mismatch(other):
    cfg = SolverConfig(h=1 / 16)
    traj = solver.picard_solve(scalar_problem(), cfg).trajectory
    with pytest.raises(HorizonMismatchError):
        oracle.compare(traj, solver.picard_solve(other, cfg).trajectory)


def test_inner_iteration_rejects_a_large_step():
    prob = scalar_problem(100.0)
    with pytest.raises(InnerIterationError):
        oracle.volterra_solve(prob, OracleConfig(h=0.5))
