# -*- coding: utf-8 -*-
"""
Presentación del reporte: oraciones en lenguaje natural por explicación y
renderizado JSON (canónico) o markdown.
"""
from typing import Optional

from models import CateEstimate, ExplanationReport, ReportFormat

WHOLE_POPULATION = "the whole population"


def describe_explanation(
    subpopulation: str,
    treatment: str,
    outcome: str,
    g1: str,
    g2: str,
    cate_g1: float,
    cate_g2: float,
) -> str:
    """Oración al estilo de las tablas de resultados"""
    scope = subpopulation if subpopulation and subpopulation != "*" else WHOLE_POPULATION
    if cate_g1 * cate_g2 < 0:
        rising, falling = (g1, g2) if cate_g1 > 0 else (g2, g1)
        return (
            f"For {scope}, {treatment} increases {outcome} for {rising}, "
            f"whereas it decreases {outcome} for {falling}."
        )
    stronger, weaker = (g1, g2) if abs(cate_g1) >= abs(cate_g2) else (g2, g1)
    return f"For {scope}, {outcome} is more influenced by {treatment} for {stronger} compared to {weaker}."


def _fmt_cate(cate: Optional[CateEstimate], note: Optional[str] = None) -> str:
    if cate is None:
        return note or "n/a"
    text = f"{cate.value:,.2f} (p={cate.p_value:.3g})"
    if not cate.significant:
        text += " †"
    return text


def _render_markdown(report: ExplanationReport) -> str:
    g1 = report.config.get("g1", "g1")
    g2 = report.config.get("g2", "g2")
    lines = [
        "# Disparity explanations",
        "",
        f"- selector: `{report.selector.value}`",
        f"- seed: {report.seed}",
        f"- subpopulations: {report.num_subpopulations}, candidate explanations: {report.num_candidates}",
        f"- objective (Σ Δ): {report.objective:.6f}",
    ]
    if report.diversity is not None:
        lines.append(f"- diversity: {report.diversity:.4f}")
    if report.global_avg_g1 is not None and report.global_avg_g2 is not None:
        lines.append(f"- overall average: {g1} = {report.global_avg_g1:,.2f}, {g2} = {report.global_avg_g2:,.2f}")
    if report.feasibility_note:
        lines.append(f"- note: {report.feasibility_note}")
    lines += [
        "",
        f"| # | Subpopulation | Treatment | Support | Avg {g1} | Avg {g2} "
        f"| CATE {g1} | CATE {g2} | Global {g1} | Global {g2} | Δ |",
        "|---|---|---|---|---|---|---|---|---|---|---|",
    ]
    for rank, row in enumerate(report.explanations, start=1):
        lines.append(
            f"| {rank} | {row.subpopulation} | {row.treatment} | {row.support:.2%} "
            f"| {row.avg_g1:,.2f} | {row.avg_g2:,.2f} "
            f"| {_fmt_cate(row.cate_g1)} | {_fmt_cate(row.cate_g2)} "
            f"| {_fmt_cate(row.global_cate_g1, row.global_note)} | {_fmt_cate(row.global_cate_g2, row.global_note)} "
            f"| {row.delta:.6f} |"
        )
    if report.explanations:
        lines.append("")
        lines.extend(f"{rank}. {row.sentence}" for rank, row in enumerate(report.explanations, start=1))
        if any(row.global_note for row in report.explanations):
            lines += ["", "† not statistically significant over the whole groups"]
    return "\n".join(lines) + "\n"


def report_render(report: ExplanationReport, fmt: ReportFormat = ReportFormat.JSON) -> str:
    """
    JSON canónico o tabla markdown.

    El JSON descarta los tiempos por etapa (metadatos volátiles), así que
    parsearlo devuelve ``report.canonical()`` y no el reporte original.
    """
    if fmt == ReportFormat.JSON:
        return report.canonical().model_dump_json(indent=2) + "\n"
    return _render_markdown(report)
