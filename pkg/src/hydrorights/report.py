"""Delimited solution tables and rendered figures for a solved case.

Every table is written with a fixed row order and %.12g number formatting and
carries no timestamps, so rerunning a report on the same case reproduces the
files byte for byte.  Figures are rendered with the Agg backend straight to
PNG files next to the tables.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)
import numpy as np  # noqa: E402

from .dispatch import DispatchSolution, MpedCase, merchandising_surplus  # noqa: E402
from .rights import Portfolio, SettlementReport, settle  # noqa: E402

__all__ = [
    "format_number",
    "solution_rows",
    "write_scenarios_csv",
    "write_settlement_csv",
    "render_figures",
    "render_report",
]

FIGURE_NAMES = ("fig_lmp.png", "fig_storage.png", "fig_injections.png",
                "fig_settlement.png")


def format_number(value: float) -> str:
    return "%.12g" % float(value)


def solution_rows(solution: DispatchSolution) -> list[tuple[str, str, int, float]]:
    """Long-form (series, name, period, value) rows in a fixed order."""
    case = solution.case
    rows: list[tuple[str, str, int, float]] = []
    lmp = solution.lmp_per_mwh()
    for bus in range(case.network.bus_count):
        for t in range(case.periods):
            rows.append(("lmp_usd_per_mwh", f"bus{bus}", t, lmp[bus, t]))
    for gen in case.generators:
        series = solution.generator_output[gen.name]
        for t in range(case.periods):
            rows.append(("generator_power_mw", gen.name, t, series[t]))
    for load in case.loads:
        for t in range(case.periods):
            rows.append(("fixed_load_mw", load.name, t, load.demand[t]))
    for res in solution.storage:
        for t in range(case.periods):
            rows.append(("storage_power_mw", res.name, t, res.power[t]))
        for t in range(case.periods):
            rows.append(("storage_volume", res.name, t, res.volume[t]))
        for t in range(case.periods):
            rows.append(("storage_marginal_value", res.name, t,
                         res.marginal_value[t]))
    for k in range(case.network.line_count):
        line = case.network.lines[k]
        tag = f"line{k}_{line.from_bus}to{line.to_bus}"
        for t in range(case.periods):
            rows.append(("line_flow_mw", tag, t, solution.flows[k, t]))
    return rows


def write_scenarios_csv(path, solution: DispatchSolution) -> None:
    lines = ["series,name,period,value"]
    for series, name, t, value in solution_rows(solution):
        lines.append(f"{series},{name},{t},{format_number(value)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_settlement_csv(path, settlement: SettlementReport) -> None:
    lines = ["right,kind,rent_usd"]
    for payment in settlement.payments:
        lines.append(f"{payment.name},{payment.kind},"
                     f"{format_number(payment.rent)}")
    lines.append(f"TOTAL,all,{format_number(settlement.total_rents)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _periods_axis(case: MpedCase) -> np.ndarray:
    return np.arange(case.periods)


def _fig_lmp(case, solution, path):
    fig, ax = plt.subplots(figsize=(7, 4))
    t = _periods_axis(case)
    lmp = solution.lmp_per_mwh()
    for bus in range(case.network.bus_count):
        ax.step(t, lmp[bus], where="mid", label=f"bus {bus}")
    ax.set_xlabel("period")
    ax.set_ylabel("price (usd/MWh)")
    ax.set_title("nodal prices")
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _fig_storage(case, solution, path):
    fig, (ax_p, ax_v) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    t = _periods_axis(case)
    if solution.storage:
        for res in solution.storage:
            ax_p.step(t, res.power, where="mid", label=res.name)
            ax_v.plot(t, res.volume, marker="o", label=res.name)
    else:
        ax_p.text(0.5, 0.5, "no storage units", ha="center", va="center",
                  transform=ax_p.transAxes)
    ax_p.axhline(0.0, color="gray", lw=0.8)
    ax_p.set_ylabel("power (MW)")
    ax_p.set_title("storage dispatch")
    ax_v.set_ylabel("end-of-period volume")
    ax_v.set_xlabel("period")
    if solution.storage:
        ax_p.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _fig_injections(case, solution, path):
    fig, ax = plt.subplots(figsize=(7, 4))
    t = _periods_axis(case)
    for gen in case.generators:
        ax.step(t, solution.generator_output[gen.name], where="mid",
                label=gen.name)
    for res in solution.storage:
        ax.step(t, res.power, where="mid", linestyle="--", label=res.name)
    total_load = np.zeros(case.periods)
    for load in case.loads:
        total_load += load.demand
    ax.step(t, total_load, where="mid", color="black", lw=2,
            label="total fixed load")
    ax.set_xlabel("period")
    ax.set_ylabel("power (MW)")
    ax.set_title("injections and withdrawals")
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _fig_settlement(case, solution, settlement, path):
    fig, ax = plt.subplots(figsize=(7, 4))
    report = settlement.merchandising if settlement is not None \
        else merchandising_surplus(solution)
    labels = ["surplus", "congestion", "storage"]
    values = [report.surplus, report.congestion_component,
              report.storage_component]
    if settlement is not None:
        labels += ["rents paid", "slack"]
        values += [settlement.total_rents, settlement.slack]
    ax.bar(labels, values, color="steelblue")
    ax.axhline(0.0, color="gray", lw=0.8)
    ax.set_ylabel("usd")
    title = "pool surplus"
    if settlement is not None:
        title += ", rights rents, and adequacy slack"
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_figures(solution: DispatchSolution, out_dir,
                   settlement: SettlementReport | None = None) -> tuple[Path, ...]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    case = solution.case
    paths = tuple(out / name for name in FIGURE_NAMES)
    _fig_lmp(case, solution, paths[0])
    _fig_storage(case, solution, paths[1])
    _fig_injections(case, solution, paths[2])
    _fig_settlement(case, solution, settlement, paths[3])
    return paths


def render_report(case: MpedCase, out_dir,
                  portfolio: Portfolio | None = None,
                  solution: DispatchSolution | None = None,
                  tol: float = 1e-8) -> tuple[Path, ...]:
    """Solve (unless given a solution), then write all tables and figures.

    Returns the paths written: scenarios.csv, optionally settlement.csv, and
    the four figures.
    """
    from .dispatch import solve_mped

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if solution is None:
        solution = solve_mped(case, tol=tol)
    settlement = None
    written = []
    csv_path = out / "scenarios.csv"
    write_scenarios_csv(csv_path, solution)
    written.append(csv_path)
    if portfolio is not None and portfolio.all_rights:
        settlement = settle(solution, portfolio)
        settle_path = out / "settlement.csv"
        write_settlement_csv(settle_path, settlement)
        written.append(settle_path)
    written.extend(render_figures(solution, out, settlement))
    return tuple(written)
