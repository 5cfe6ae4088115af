from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import NoReturn, Optional

import typer
from pydantic.json import pydantic_encoder
from rich.console import Console

from fracmild import fracmild, rich_output
from fracmild.errors import (
    AccuracyLossError,
    DelayCausalityError,
    GammaOverflowError,
    NonConvergenceError,
    ParameterError,
)
from fracmild.log import setup_logging
from fracmild.settings import FracMildSettings

app = typer.Typer()

console = Console()
err_console = Console(stderr=True)
settings = FracMildSettings()

EXIT_PARSE = 2
EXIT_NON_CONVERGENCE = 3
EXIT_NO_THEOREM = 4
EXIT_ORACLE = 5
EXIT_RESIDUAL = 6
EXIT_ACCURACY = 1


class Output(str, Enum):
    json = "json"
    rich = "rich"


def _fail(error: Exception, code: int) -> NoReturn:
    err_console.print(f"[red]error:[/] {error}")
    raise typer.Exit(code=code)


@contextmanager
def exit_codes():
    try:
        yield
    except (ParameterError, DelayCausalityError) as error:
        _fail(error, EXIT_PARSE)
    except NonConvergenceError as error:
        _fail(error, EXIT_NON_CONVERGENCE)
    except (GammaOverflowError, AccuracyLossError) as error:
        _fail(error, EXIT_ACCURACY)


def _out_dir(out_dir: Optional[Path]) -> Path:
    return out_dir if out_dir is not None else settings.report.out_dir


@app.callback(no_args_is_help=True)
def callback(
    output: Optional[Output] = None,
    log_level: Optional[str] = None,
):
    global settings
    if output is not None:
        settings.report.output = output.value
    if log_level is not None:
        settings.log_level = log_level
    setup_logging(settings.log_level)


@app.command("s", hidden=True)
@app.command("solve")
def solve(
    problem_file: Path,
    grid: Optional[float] = typer.Option(None, help="step h"),
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    modes: Optional[int] = None,
    out_dir: Optional[Path] = None,
    strict: bool = True,
    x_grid: Optional[int] = typer.Option(None, help="write u(t, x) on this many x"),
):
    with exit_codes():
        data = fracmild.solve(
            problem_file,
            solver_settings=settings.solver,
            out_dir=_out_dir(out_dir),
            h=grid,
            tol=tol,
            max_iter=max_iter,
            modes=modes,
            strict=strict,
            x_grid=x_grid,
        )
    if settings.report.output == "json":
        console.print_json(data=data, default=pydantic_encoder)
    else:
        rich_output.solve_summary(data.dict())


@app.command("c", hidden=True)
@app.command("check")
def check(
    problem_file: Path,
    bound: Optional[float] = typer.Option(None, help="override the bound M"),
    estimate: bool = False,
    modes: Optional[int] = None,
    out_dir: Optional[Path] = None,
    strict: bool = True,
):
    with exit_codes():
        report, hints = fracmild.check(
            problem_file,
            hypothesis_settings=settings.hypotheses,
            out_dir=_out_dir(out_dir),
            M=bound,
            modes=modes,
            strict=strict,
            estimate=estimate,
        )
    if settings.report.output == "json":
        console.print_json(
            data={"report": report, "estimates": hints}, default=pydantic_encoder
        )
    else:
        rich_output.hypotheses_report(report, hints)
    if not report.any_pass:
        raise typer.Exit(code=EXIT_NO_THEOREM)


@app.command("o", hidden=True)
@app.command("oracle-compare")
def oracle_compare(
    problem_file: Path,
    grid: Optional[list[float]] = typer.Option(None, help="steps to compare"),
    modes: Optional[int] = None,
    out_dir: Optional[Path] = None,
    strict: bool = True,
):
    with exit_codes():
        rows, passed = fracmild.oracle_compare(
            problem_file,
            solver_settings=settings.solver,
            oracle_settings=settings.oracle,
            out_dir=_out_dir(out_dir),
            h_list=grid or None,
            modes=modes,
            strict=strict,
        )
    if settings.report.output == "json":
        console.print_json(
            data={"rows": rows, "passed": passed}, default=pydantic_encoder
        )
    else:
        rich_output.refinement_rows(rows, passed)
    if not passed:
        raise typer.Exit(code=EXIT_ORACLE)


@app.command("ml", hidden=True)
@app.command("ml-eval", context_settings={"ignore_unknown_options": True})
def ml_eval(alpha: float, beta: float, z: float):
    try:
        value = fracmild.ml_eval(alpha, beta, z)
    except ParameterError as error:
        raise typer.BadParameter(str(error)) from error
    except (GammaOverflowError, AccuracyLossError) as error:
        _fail(error, EXIT_ACCURACY)
    if settings.report.output == "json":
        console.print_json(data={"alpha": alpha, "beta": beta, "z": z, "value": value})
    else:
        rich_output.ml_value(alpha, beta, z, value)


@app.command("r", hidden=True)
@app.command("verify-residual")
def verify_residual(
    problem_file: Path,
    trajectory_file: Path,
    threshold: Optional[float] = None,
    modes: Optional[int] = None,
    out_dir: Optional[Path] = None,
    strict: bool = True,
):
    with exit_codes():
        report, passed = fracmild.verify_residual(
            problem_file,
            trajectory_file,
            residual_settings=settings.residual,
            out_dir=_out_dir(out_dir),
            threshold=threshold,
            modes=modes,
            strict=strict,
        )
    if settings.report.output == "json":
        console.print_json(
            data={"report": report, "worst": report.worst, "passed": passed},
            default=pydantic_encoder,
        )
    else:
        rich_output.residual_report(
            report,
            settings.residual.threshold if threshold is None else threshold,
        )
    if not passed:
        raise typer.Exit(code=EXIT_RESIDUAL)


@app.command("e", hidden=True)
@app.command("example")
def example(name: str, dest: Path = typer.Argument(Path("."))):
    with exit_codes():
        path = fracmild.example(name, dest)
    console.print(str(path))


@app.command(name="config")
def config():
    console.print_json(data=settings, default=pydantic_encoder)


def entrypoint():
    app()


if __name__ == "__main__":
    entrypoint()
