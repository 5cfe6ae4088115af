import time
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import ValidationError

from fracmild import files
from fracmild.errors import ParameterError, ProblemFileError
from fracmild.hypotheses import build_report, check_contraction, estimate_lipschitz
from fracmild.log import get_logger
from fracmild.mlfunc import MLParams, ml_e
from fracmild.models import (
    HypothesisReport,
    OracleConfig,
    RefinementRow,
    ResidualReport,
    SolverConfig,
    SolveSummary,
)
from fracmild.oracle import compare, volterra_solve
from fracmild.parser import LoadedProblem, load_problem
from fracmild.settings import (
    HypothesisSettings,
    OracleSettings,
    ResidualSettings,
    SolverSettings,
)
from fracmild.solver import picard_solve, residuals

logger = get_logger(__name__)

PROBLEMS_PACKAGE = "fracmild.problems"


def _out_dir(out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def solver_config(
    loaded: LoadedProblem,
    solver_settings: SolverSettings,
    *,
    h: Optional[float] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> SolverConfig:
    """Flags win over the problem file, the file over the settings."""
    values = solver_settings.dict()
    values.update(loaded.solver.dict(exclude_none=True))
    flags = {"h": h, "tol": tol, "max_iter": max_iter}
    values.update({key: value for key, value in flags.items() if value is not None})
    try:
        return SolverConfig(**values)
    except ValidationError as error:
        raise ParameterError(f"invalid solver parameters: {error}") from error


def solve(
    problem_file: Path,
    *,
    solver_settings: SolverSettings,
    out_dir: Path,
    h: Optional[float] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    modes: Optional[int] = None,
    strict: bool = True,
    x_grid: Optional[int] = None,
) -> SolveSummary:
    loaded = load_problem(problem_file, strict=strict, modes=modes)
    cfg = solver_config(loaded, solver_settings, h=h, tol=tol, max_iter=max_iter)
    if x_grid is not None and (x_grid < 2 or loaded.source.operator.type != "heat"):
        raise ParameterError("--x-grid needs a heat operator and at least 2 points")

    delta = None
    if loaded.lipschitz is not None and loaded.lipschitz.M is not None:
        delta, _ = check_contraction(loaded.lipschitz, loaded.spec.T)

    started = time.perf_counter()
    result = picard_solve(loaded.spec, cfg, delta=delta)
    wall_time = time.perf_counter() - started

    out_dir = _out_dir(out_dir)
    trajectory = files.write_trajectory(
        out_dir / files.TRAJECTORY_FILE, result.trajectory
    )
    meta = files.write_key_values(
        out_dir / files.META_FILE,
        {
            "iterations": result.iterations,
            "final_delta": result.final_delta,
            "h": cfg.h,
            "wall_time": wall_time,
        },
    )
    field = None
    if x_grid is not None:
        field = files.write_field(
            out_dir / files.FIELD_FILE, result.trajectory, x_grid
        )
    logger.info("wrote %s", trajectory)
    return SolveSummary(
        problem=loaded.spec.name or Path(problem_file).stem,
        iterations=result.iterations,
        final_delta=result.final_delta,
        h=cfg.h,
        wall_time=wall_time,
        delta=delta,
        trajectory=trajectory,
        meta=meta,
        field=field,
    )


def lipschitz_hints(
    loaded: LoadedProblem, hypothesis_settings: HypothesisSettings
) -> dict[str, float]:
    """Sampled Lipschitz constants of f, I_k and Q_k near the origin."""
    spec = loaded.spec
    options = {
        "samples": hypothesis_settings.estimate_samples,
        "seed": hypothesis_settings.estimate_seed,
    }
    l_f = max(
        estimate_lipschitz(
            lambda u, t=t: spec.forcing(np.array([t]), u[None, :])[0],
            spec.dim,
            **options,
        )
        for t in np.linspace(0.0, spec.T, 5)
    )
    hints = {"l_f": l_f}
    if spec.impulses:
        hints["l_i"] = max(
            estimate_lipschitz(impulse.I, spec.dim, **options)
            for impulse in spec.impulses
        )
        hints["l_j"] = max(
            estimate_lipschitz(impulse.Q, spec.dim, **options)
            for impulse in spec.impulses
        )
    return hints


def check(
    problem_file: Path,
    *,
    hypothesis_settings: HypothesisSettings,
    out_dir: Path,
    M: Optional[float] = None,
    modes: Optional[int] = None,
    strict: bool = True,
    estimate: bool = False,
) -> tuple[HypothesisReport, dict[str, float]]:
    loaded = load_problem(problem_file, strict=strict, modes=modes)
    if loaded.lipschitz is None:
        raise ProblemFileError(f"{problem_file} has no [lipschitz] block")
    data = loaded.lipschitz
    if M is not None:
        if M < 0:
            raise ParameterError(f"M must be non-negative, got {M}")
        data = data.copy(update={"M": M})
    report = build_report(
        data,
        loaded.spec.T,
        op=loaded.spec.op,
        alpha=loaded.spec.alpha,
        bound_points=hypothesis_settings.bound_points,
        bound_margin=hypothesis_settings.bound_margin,
    )
    values = report.dict(exclude={"verdicts"})
    values.update(
        {f"verdict_{name}": verdict for name, verdict in report.verdicts.items()}
    )
    files.write_key_values(_out_dir(out_dir) / files.REPORT_FILE, values)
    hints = lipschitz_hints(loaded, hypothesis_settings) if estimate else {}
    return report, hints


def oracle_compare(
    problem_file: Path,
    *,
    solver_settings: SolverSettings,
    oracle_settings: OracleSettings,
    out_dir: Path,
    h_list: Optional[list[float]] = None,
    modes: Optional[int] = None,
    strict: bool = True,
) -> tuple[list[RefinementRow], bool]:
    """
    Solver against the Volterra oracle for every step in ``h_list``.

    The comparison passes when each halving of h shrinks the gap by at least
    ``min_ratio``, or the gap is already below ``exact_gap``.
    """
    loaded = load_problem(problem_file, strict=strict, modes=modes)
    steps = sorted(h_list or oracle_settings.h_list, reverse=True)
    rows: list[RefinementRow] = []
    passed = True
    for h in steps:
        cfg = solver_config(loaded, solver_settings, h=h)
        mild = picard_solve(loaded.spec, cfg).trajectory
        reference = volterra_solve(
            loaded.spec,
            OracleConfig(
                h=h,
                picard_inner=oracle_settings.picard_inner,
                tol_inner=oracle_settings.tol_inner,
            ),
        )
        gap = compare(mild, reference).sup_gap
        ratio = None
        if rows and gap > 0:
            ratio = rows[-1].sup_gap / gap
        if rows and gap > oracle_settings.exact_gap:
            shrinking = ratio is not None and ratio >= oracle_settings.min_ratio
            passed = passed and shrinking
        logger.info("h=%s: sup gap %.3e", h, gap)
        rows.append(RefinementRow(h=h, sup_gap=gap, ratio=ratio))
    files.write_compare(_out_dir(out_dir) / files.COMPARE_FILE, rows)
    return rows, passed


def ml_eval(alpha: float, beta: float, z: float) -> float:
    try:
        params = MLParams(alpha=alpha, beta=beta)
    except ValidationError as error:
        raise ParameterError(f"invalid Mittag-Leffler parameters: {error}") from error
    return ml_e(params, z)


def verify_residual(
    problem_file: Path,
    trajectory_file: Path,
    *,
    residual_settings: ResidualSettings,
    out_dir: Path,
    threshold: Optional[float] = None,
    modes: Optional[int] = None,
    strict: bool = True,
) -> tuple[ResidualReport, bool]:
    loaded = load_problem(problem_file, strict=strict, modes=modes)
    spec = loaded.spec
    traj = files.read_trajectory(
        Path(trajectory_file),
        alpha=spec.alpha,
        op=spec.op,
        u1=spec.history_derivative(np.array([0.0]))[0],
    )
    report = residuals(traj, spec, interior=residual_settings.interior)
    limit = residual_settings.threshold if threshold is None else threshold
    passed = report.worst <= limit
    values: dict[str, object] = {"h": report.h}
    for piece in report.pieces:
        values[f"max_residual_{piece.index}"] = piece.max_residual
    values["initial_defect"] = report.initial_defect
    for k, defect in enumerate(report.jump_defects, start=1):
        values[f"jump_defect_{k}"] = defect
    values.update({"worst": report.worst, "threshold": limit, "passed": passed})
    files.write_key_values(_out_dir(out_dir) / files.RESIDUAL_FILE, values)
    return report, passed


def example_names() -> list[str]:
    return sorted(
        entry.name.removesuffix(".toml")
        for entry in resources.files(PROBLEMS_PACKAGE).iterdir()
        if entry.name.endswith(".toml")
    )


def example(name: str, dest: Path) -> Path:
    """Write the shipped problem ``name`` to ``dest`` (a file or directory)."""
    names = example_names()
    if name not in names:
        raise ParameterError(f"unknown example {name!r}, choose from {names}")
    text = (resources.files(PROBLEMS_PACKAGE) / f"{name}.toml").read_text("utf-8")
    dest = Path(dest)
    if dest.is_dir():
        dest = dest / f"{name}.toml"
    dest.write_text(text, "utf-8")
    return dest
