"""Command line interface: dispatch, rights screening, settlement, valuation,
and report rendering for YAML case files.

Structured failures are emitted as one JSON object on stderr and a nonzero
exit code, so scripted callers can branch on the error key.  All written
files are deterministic for a given case and tolerance; nothing embeds
timestamps.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .casefile import CasefileError, canonical_digest, load_case_file
from .dispatch import (
    DispatchFailedError,
    DispatchInfeasibleError,
    merchandising_surplus,
    solve_mped,
)
from .report import format_number, render_report
from .rights import (
    PortfolioError,
    settle,
    simultaneous_feasibility_test,
    value_fsr_flat_bid_reallocation,
)

ARTIFACT_NAME = "solution.json"


def _fail(code: int, **payload):
    click.echo(json.dumps(payload, sort_keys=True), err=True)
    sys.exit(code)


def _load(case_source):
    try:
        return load_case_file(case_source)
    except (CasefileError, FileNotFoundError) as exc:
        _fail(2, error="bad_case_file", detail=str(exc))


def _out_dir(out, case) -> Path:
    path = Path(out) if out is not None else Path("runs") / case.name
    path.mkdir(parents=True, exist_ok=True)
    return path


def _solve(case, tol):
    try:
        return solve_mped(case, tol=tol)
    except DispatchInfeasibleError as exc:
        _fail(1, error="infeasible_case", detail=str(exc), rows=list(exc.rows))
    except DispatchFailedError as exc:
        _fail(4, error="solver_failure", detail=str(exc))


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


_case_argument = click.argument("case_source", metavar="CASE")
_out_option = click.option(
    "--out", default=None, type=click.Path(path_type=Path),
    help="Output directory (default: runs/<case name>).")
_tol_option = click.option(
    "--tol", default=1e-8, show_default=True, envvar="HYDRORIGHTS_TOL",
    help="Optimizer tolerance; HYDRORIGHTS_TOL overrides.")


@click.group()
@click.version_option(package_name="hydrorights")
def main():
    """Market clearing, financial rights, and settlement for grids with
    hydro and battery storage.

    CASE is a bundled case name (see `hydrorights cases`) or a path to a
    YAML case file.
    """


@main.command()
def cases():
    """List the bundled case names."""
    from .casefile import list_bundled_cases

    for name in list_bundled_cases():
        click.echo(name)


@main.command()
@_case_argument
@_out_option
@_tol_option
def dispatch(case_source, out, tol):
    """Clear the market and write the dispatch artifact."""
    bundle = _load(case_source)
    case = bundle.case
    out_path = _out_dir(out, case)
    solution = _solve(case, tol)
    surplus = merchandising_surplus(solution)
    dt = case.period_hours
    artifact = {
        "case": case.name,
        "case_digest": canonical_digest(case),
        "tol": tol,
        "objective_usd": float(solution.objective),
        "system_price_usd_per_mwh": [float(v / dt) for v in solution.system_price],
        "lmp_usd_per_mwh": [[float(v) for v in row]
                            for row in solution.lmp_per_mwh()],
        "merchandising_surplus_usd": float(surplus.surplus),
        "iterations": solution.iterations,
    }
    _write_json(out_path / ARTIFACT_NAME, artifact)
    click.echo(f"case: {case.name}")
    click.echo(f"objective: {format_number(solution.objective)} usd")
    click.echo(f"merchandising surplus: {format_number(surplus.surplus)} usd")
    prices = " ".join(format_number(v / dt) for v in solution.system_price)
    click.echo(f"system price (usd/MWh): {prices}")
    click.echo(f"wrote: {out_path / ARTIFACT_NAME}")


@main.command()
@_case_argument
@_out_option
@_tol_option
def sft(case_source, out, tol):
    """Screen the case's portfolio for simultaneous deliverability."""
    bundle = _load(case_source)
    if bundle.portfolio is None or not bundle.portfolio.all_rights:
        _fail(2, error="no_portfolio",
              detail=f"case {bundle.case.name!r} carries no rights portfolio")
    out_path = _out_dir(out, bundle.case)
    try:
        result = simultaneous_feasibility_test(bundle.case, bundle.portfolio,
                                               tol=tol)
    except PortfolioError as exc:
        _fail(2, error="bad_portfolio", detail=str(exc))
    doc = {
        "case": bundle.case.name,
        "feasible": bool(result.feasible),
        "reasons": list(result.reasons),
        "max_violation": float(result.max_violation),
    }
    _write_json(out_path / "sft.json", doc)
    click.echo(f"case: {bundle.case.name}")
    click.echo(f"feasible: {'yes' if result.feasible else 'no'}")
    for reason in result.reasons:
        click.echo(f"  blocked by: {reason}")
    click.echo(f"wrote: {out_path / 'sft.json'}")
    if not result.feasible:
        sys.exit(1)


@main.command(name="settle")
@_case_argument
@_out_option
@_tol_option
def settle_cmd(case_source, out, tol):
    """Pay out the portfolio from the dispatch artifact's case."""
    bundle = _load(case_source)
    case = bundle.case
    if bundle.portfolio is None or not bundle.portfolio.all_rights:
        _fail(2, error="no_portfolio",
              detail=f"case {case.name!r} carries no rights portfolio")
    out_path = _out_dir(out, case)
    artifact_path = out_path / ARTIFACT_NAME
    if not artifact_path.exists():
        _fail(2, error="missing_dispatch_artifact",
              detail="settlement prices come from a cleared market; run the "
                     "dispatch subcommand first",
              expected_path=str(artifact_path))
    artifact = json.loads(artifact_path.read_text(encoding="utf-8"))
    digest = canonical_digest(case)
    if artifact.get("case_digest") != digest:
        _fail(2, error="case_digest_mismatch",
              detail="the dispatch artifact was produced from a different "
                     "case; rerun the dispatch subcommand",
              artifact_digest=artifact.get("case_digest"),
              case_digest=digest)
    solution = _solve(case, tol)
    try:
        settlement = settle(solution, bundle.portfolio)
    except PortfolioError as exc:
        _fail(2, error="bad_portfolio", detail=str(exc))
    from .report import write_settlement_csv

    write_settlement_csv(out_path / "settlement.csv", settlement)
    doc = {
        "case": case.name,
        "case_digest": digest,
        "payments": [{"name": p.name, "kind": p.kind, "rent_usd": float(p.rent)}
                     for p in settlement.payments],
        "total_rents_usd": float(settlement.total_rents),
        "merchandising_surplus_usd": float(settlement.merchandising.surplus),
        "storage_operator_revenue_usd":
            float(settlement.storage_operator_revenue),
        "slack_usd": float(settlement.slack),
        "revenue_adequate": bool(settlement.adequate()),
    }
    _write_json(out_path / "settlement.json", doc)
    click.echo(f"case: {case.name}")
    click.echo(f"total rents: {format_number(settlement.total_rents)} usd")
    click.echo("merchandising surplus: "
               f"{format_number(settlement.merchandising.surplus)} usd")
    click.echo("storage operator revenue: "
               f"{format_number(settlement.storage_operator_revenue)} usd")
    click.echo(f"adequacy slack: {format_number(settlement.slack)} usd")
    click.echo(f"revenue adequate: {'yes' if settlement.adequate() else 'no'}")
    click.echo(f"wrote: {out_path / 'settlement.csv'}")
    click.echo(f"wrote: {out_path / 'settlement.json'}")


@main.command(name="value-fsr")
@_case_argument
@click.argument("storage_name", metavar="STORAGE")
@click.argument("energy_mwh", metavar="ENERGY_MWH", type=float)
@_out_option
@_tol_option
def value_fsr(case_source, storage_name, energy_mwh, out, tol):
    """Value a flat-bid storage power right by cost-saving reallocation."""
    bundle = _load(case_source)
    case = bundle.case
    out_path = _out_dir(out, case)
    try:
        valuation = value_fsr_flat_bid_reallocation(case, storage_name,
                                                    energy_mwh, tol=tol)
    except KeyError as exc:
        _fail(2, error="unknown_storage", detail=str(exc.args[0]))
    except DispatchInfeasibleError as exc:
        _fail(1, error="undeliverable_flat_bid", detail=str(exc),
              rows=list(exc.rows))
    except DispatchFailedError as exc:
        _fail(4, error="solver_failure", detail=str(exc))
    doc = {
        "case": case.name,
        "storage": valuation.storage,
        "energy_mwh": float(valuation.energy_mwh),
        "flat_objective_usd": float(valuation.flat_objective),
        "reallocated_objective_usd": float(valuation.reallocated_objective),
        "value_usd": float(valuation.value),
    }
    _write_json(out_path / "valuation.json", doc)
    click.echo(f"case: {case.name}")
    click.echo(f"storage: {valuation.storage}")
    click.echo(f"flat cost: {format_number(valuation.flat_objective)} usd")
    click.echo("reallocated cost: "
               f"{format_number(valuation.reallocated_objective)} usd")
    click.echo(f"reallocation value: {format_number(valuation.value)} usd")
    click.echo(f"wrote: {out_path / 'valuation.json'}")


@main.command(name="report")
@_case_argument
@_out_option
@_tol_option
def report_cmd(case_source, out, tol):
    """Render the solution tables and figures for a case."""
    bundle = _load(case_source)
    case = bundle.case
    out_path = _out_dir(out, case)
    solution = _solve(case, tol)
    try:
        written = render_report(case, out_path, portfolio=bundle.portfolio,
                                solution=solution, tol=tol)
    except PortfolioError as exc:
        _fail(2, error="bad_portfolio", detail=str(exc))
    click.echo(f"case: {case.name}")
    for path in written:
        click.echo(f"wrote: {path}")


if __name__ == "__main__":
    main()
