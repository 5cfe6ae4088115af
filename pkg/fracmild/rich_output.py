from typing import Optional

from rich import box
from rich.console import Console
from rich.table import Table

from fracmild.helper import format_float
from fracmild.models import HypothesisReport, RefinementRow, ResidualReport

console = Console()


def _table(title: str) -> Table:
    return Table(
        title=title,
        show_header=True,
        header_style="bold magenta",
        box=box.SIMPLE,
    )


def _verdict(verdict: str) -> str:
    match verdict:
        case "pass":
            return "[green]pass[/]"
        case "fail":
            return "[red]fail[/]"
    return f"[dim]{verdict}[/]"


def solve_summary(summary: dict) -> None:
    table = _table(f"Solve {summary.get('problem') or ''}".strip())
    table.add_column("Key", style="dim")
    table.add_column("Value")
    for key, value in summary.items():
        if isinstance(value, float):
            value = format_float(value)
        table.add_row(key, str(value))
    console.print(table)


def hypotheses_report(
    report: HypothesisReport, estimates: Optional[dict[str, float]] = None
) -> None:
    table = _table("Hypotheses")
    table.add_column("Check", style="dim", width=16)
    table.add_column("Quantity", width=34)
    table.add_column("Verdict", width=8)
    table.add_row(
        "contraction",
        f"Δ = {report.delta:.6g} (< 1)",
        _verdict(report.verdicts["contraction"]),
    )
    radius = f", r ≥ {report.r_min:.6g}" if report.r_min is not None else ""
    table.add_row(
        "krasnoselskii",
        f"Θ = {report.theta:.6g} (< 1){radius}",
        _verdict(report.verdicts["krasnoselskii"]),
    )
    rhs = "∞" if report.leray_rhs_infinite else f"{report.leray_rhs:.6g}"
    table.add_row(
        "leray_schauder",
        f"{report.leray_lhs:.6g} < {rhs}",
        _verdict(report.verdicts["leray_schauder"]),
    )
    if report.sectorial_ratio is not None:
        table.add_row(
            "sectorial",
            f"ratio = {report.sectorial_ratio:.6g} (≤ {report.sectorial_M:.6g})",
            _verdict("pass" if report.sectorial_within_bound else "fail"),
        )
    console.print(table)
    console.print(
        f"M = {report.M:.6g} ({report.M_source}), C' = {report.C_prime:.6g}, "
        f"s_max = {report.s_max:.3g}"
    )
    if estimates:
        hints = ", ".join(f"{key} ≈ {value:.4g}" for key, value in estimates.items())
        console.print(f"[dim]sampled Lipschitz hints: {hints}[/]")


def refinement_rows(rows: list[RefinementRow], passed: bool) -> None:
    table = _table("Solver against oracle")
    table.add_column("h", style="dim")
    table.add_column("sup gap")
    table.add_column("ratio")
    for row in rows:
        table.add_row(
            format_float(row.h),
            f"{row.sup_gap:.3e}",
            "" if row.ratio is None else f"{row.ratio:.3f}",
        )
    console.print(table)
    console.print("[green]refinement ok[/]" if passed else "[red]refinement failed[/]")


def residual_report(report: ResidualReport, threshold: float) -> None:
    table = _table(f"Residuals (h = {report.h:.4g})")
    table.add_column("Piece", style="dim")
    table.add_column("Interval")
    table.add_column("max residual")
    for piece in report.pieces:
        table.add_row(
            str(piece.index),
            f"[{piece.start:.4g}, {piece.end:.4g}]",
            f"{piece.max_residual:.3e}",
        )
    table.add_row("u(0)", "", f"{report.initial_defect:.3e}")
    for k, defect in enumerate(report.jump_defects, start=1):
        table.add_row(f"jump {k}", "", f"{defect:.3e}")
    console.print(table)
    state = "[green]ok[/]" if report.worst <= threshold else "[red]above threshold[/]"
    console.print(f"worst {report.worst:.3e} against {threshold:.3g}: {state}")


def ml_value(alpha: float, beta: float, z: float, value: float) -> None:
    console.print(f"E_{{{alpha},{beta}}}({z}) = {format_float(value)}")
