"""YAML case files: strict loading with field-path errors and a canonical emitter.

A case file describes one dispatch case and, optionally, a rights portfolio.
The required ``units`` block pins the conventions the numbers are written in
(hydro volumes in hm3, power in MW, time in hours, prices in dollars per MWh);
battery volumes are MWh by construction of the device.  The emitter writes a
canonical form (fixed key order, per-period quantities always as lists), so
emit(load(emit(case))) reproduces its input byte for byte.

Case files bundled with the package are addressed by bare name, for example
``load_case("two_bus_congested")``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .dispatch import (
    CaseStructureError,
    EssStorage,
    FixedLoad,
    Generator,
    HydroStorage,
    MpedCase,
)
from .grid import Line, Network, NetworkTopologyError
from .hydro import CalibrationError, PlantParameters
from .reservoir import CascadeError, CascadeLink
from .rights import (
    CapacityRight,
    FlowgateRight,
    Portfolio,
    PortfolioError,
    StorageRight,
    TransmissionRight,
)

__all__ = [
    "CasefileError",
    "CaseFile",
    "load_case",
    "load_case_file",
    "load_portfolio",
    "emit_case",
    "save_case",
    "list_bundled_cases",
    "canonical_digest",
]

SCHEMA_VERSION = 1
REQUIRED_UNITS = {
    "volume": "hm3",
    "power": "MW",
    "time": "h",
    "price": "usd_per_mwh",
}


class CasefileError(ValueError):
    """Raised for malformed case files; the message names the offending field."""


@dataclass(frozen=True)
class CaseFile:
    """A loaded case plus whatever portfolio the file carried (may be None)."""

    case: MpedCase
    portfolio: Portfolio | None


# --- primitive readers, each carrying the field path in its error ----------


def _expect_mapping(node, path):
    if not isinstance(node, dict):
        raise CasefileError(f"{path}: expected a mapping, got {type(node).__name__}")
    return node


def _expect_list(node, path):
    if not isinstance(node, list):
        raise CasefileError(f"{path}: expected a list, got {type(node).__name__}")
    return node


def _reject_unknown(node: dict, allowed, path):
    unknown = sorted(set(node) - set(allowed))
    if unknown:
        raise CasefileError(f"{path}: unknown keys {unknown}")


_REQUIRED = object()


def _get(node: dict, key: str, path, default=_REQUIRED):
    if key in node:
        return node[key]
    if default is _REQUIRED:
        raise CasefileError(f"{path}: missing required key {key!r}")
    return default


def _as_int(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise CasefileError(f"{path}: expected an integer, got {value!r}")
    return value


def _as_float(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CasefileError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _as_str(value, path):
    if not isinstance(value, str):
        raise CasefileError(f"{path}: expected a string, got {value!r}")
    return value


def _as_series(value, path):
    """A scalar or a list of numbers; returns scalar float or float array."""
    if isinstance(value, list):
        return np.array([_as_float(v, f"{path}[{i}]") for i, v in enumerate(value)])
    return _as_float(value, path)


def _wrap(path, builder):
    """Run a constructor, re-raising its validation error with the field path."""
    try:
        return builder()
    except (CaseStructureError, NetworkTopologyError, CalibrationError,
            CascadeError, PortfolioError) as exc:
        raise CasefileError(f"{path}: {exc}") from exc


# --- section loaders -------------------------------------------------------


def _load_units(node, path):
    units = _expect_mapping(node, path)
    _reject_unknown(units, REQUIRED_UNITS, path)
    for key, expected in REQUIRED_UNITS.items():
        got = _get(units, key, path)
        if got != expected:
            raise CasefileError(f"{path}.{key}: expected {expected!r}, got {got!r}")


def _load_network(node, path):
    net = _expect_mapping(node, path)
    _reject_unknown(net, ("buses", "slack_bus", "lines"), path)
    buses = _as_int(_get(net, "buses", path), f"{path}.buses")
    slack = _as_int(_get(net, "slack_bus", path, 0), f"{path}.slack_bus")
    lines = []
    for i, raw in enumerate(_expect_list(_get(net, "lines", path, []), f"{path}.lines")):
        lp = f"{path}.lines[{i}]"
        item = _expect_mapping(raw, lp)
        fields = ("from_bus", "to_bus", "reactance", "limit_forward", "limit_reverse")
        _reject_unknown(item, fields, lp)
        lines.append(_wrap(lp, lambda item=item, lp=lp: Line(
            from_bus=_as_int(_get(item, "from_bus", lp), f"{lp}.from_bus"),
            to_bus=_as_int(_get(item, "to_bus", lp), f"{lp}.to_bus"),
            reactance=_as_float(_get(item, "reactance", lp), f"{lp}.reactance"),
            limit_forward=_as_float(_get(item, "limit_forward", lp), f"{lp}.limit_forward"),
            limit_reverse=_as_float(_get(item, "limit_reverse", lp), f"{lp}.limit_reverse"))))
    return _wrap(path, lambda: Network(bus_count=buses, lines=tuple(lines),
                                       slack_bus=slack))


def _load_generator(item, path):
    fields = ("name", "bus", "cost_quad", "cost_lin", "power_min", "power_max")
    _reject_unknown(item, fields, path)
    return _wrap(path, lambda: Generator(
        name=_as_str(_get(item, "name", path), f"{path}.name"),
        bus=_as_int(_get(item, "bus", path), f"{path}.bus"),
        cost_quad=_as_float(_get(item, "cost_quad", path), f"{path}.cost_quad"),
        cost_lin=_as_float(_get(item, "cost_lin", path), f"{path}.cost_lin"),
        power_min=_as_float(_get(item, "power_min", path, 0.0), f"{path}.power_min"),
        power_max=_as_float(_get(item, "power_max", path, np.inf), f"{path}.power_max")))


def _load_load(item, path, periods):
    _reject_unknown(item, ("name", "bus", "demand"), path)
    demand = _as_series(_get(item, "demand", path), f"{path}.demand")
    if not isinstance(demand, np.ndarray):
        demand = np.full(periods, demand)
    return _wrap(path, lambda: FixedLoad(
        name=_as_str(_get(item, "name", path), f"{path}.name"),
        bus=_as_int(_get(item, "bus", path), f"{path}.bus"),
        demand=demand))


def _load_plant(node, path):
    item = _expect_mapping(node, path)
    fields = ("efficiency_factor", "forebay", "tailrace_intercept",
              "tailrace_slope", "penstock_loss", "power_cap")
    _reject_unknown(item, fields, path)
    values = {k: _as_float(_get(item, k, path), f"{path}.{k}") for k in fields}
    return _wrap(path, lambda: PlantParameters.build(**values))


def _load_hydro(item, path):
    fields = ("name", "bus", "plant", "initial_volume", "min_volume",
              "max_volume", "inflow")
    _reject_unknown(item, fields, path)
    return _wrap(path, lambda: HydroStorage(
        name=_as_str(_get(item, "name", path), f"{path}.name"),
        bus=_as_int(_get(item, "bus", path), f"{path}.bus"),
        plant=_load_plant(_get(item, "plant", path), f"{path}.plant"),
        initial_volume=_as_float(_get(item, "initial_volume", path),
                                 f"{path}.initial_volume"),
        min_volume=_as_series(_get(item, "min_volume", path), f"{path}.min_volume"),
        max_volume=_as_series(_get(item, "max_volume", path), f"{path}.max_volume"),
        inflow=_as_series(_get(item, "inflow", path, 0.0), f"{path}.inflow")))


def _load_ess(item, path):
    fields = ("name", "bus", "charge_cap", "discharge_cap", "initial_volume",
              "min_volume", "max_volume", "inflow")
    _reject_unknown(item, fields, path)
    return _wrap(path, lambda: EssStorage(
        name=_as_str(_get(item, "name", path), f"{path}.name"),
        bus=_as_int(_get(item, "bus", path), f"{path}.bus"),
        charge_cap=_as_float(_get(item, "charge_cap", path), f"{path}.charge_cap"),
        discharge_cap=_as_float(_get(item, "discharge_cap", path),
                                f"{path}.discharge_cap"),
        initial_volume=_as_float(_get(item, "initial_volume", path),
                                 f"{path}.initial_volume"),
        min_volume=_as_series(_get(item, "min_volume", path), f"{path}.min_volume"),
        max_volume=_as_series(_get(item, "max_volume", path), f"{path}.max_volume"),
        inflow=_as_series(_get(item, "inflow", path, 0.0), f"{path}.inflow")))


def _load_cascade_link(item, path):
    _reject_unknown(item, ("upstream", "downstream", "lag"), path)
    return _wrap(path, lambda: CascadeLink(
        upstream=_as_str(_get(item, "upstream", path), f"{path}.upstream"),
        downstream=_as_str(_get(item, "downstream", path), f"{path}.downstream"),
        lag=_as_int(_get(item, "lag", path), f"{path}.lag")))


def _load_portfolio_block(node, path, periods):
    pf = _expect_mapping(node, path)
    sections = ("transmission", "flowgate", "storage_power", "storage_capacity")
    _reject_unknown(pf, sections, path)

    def series_field(item, key, ip):
        value = _as_series(_get(item, key, ip), f"{ip}.{key}")
        if isinstance(value, np.ndarray) and value.shape != (periods,):
            raise CasefileError(
                f"{ip}.{key}: expected {periods} entries, got {value.shape[0]}")
        return value

    transmission = []
    for i, raw in enumerate(_expect_list(_get(pf, "transmission", path, []),
                                         f"{path}.transmission")):
        ip = f"{path}.transmission[{i}]"
        item = _expect_mapping(raw, ip)
        _reject_unknown(item, ("name", "source_bus", "sink_bus", "quantity"), ip)
        transmission.append(_wrap(ip, lambda item=item, ip=ip: TransmissionRight(
            name=_as_str(_get(item, "name", ip), f"{ip}.name"),
            source_bus=_as_int(_get(item, "source_bus", ip), f"{ip}.source_bus"),
            sink_bus=_as_int(_get(item, "sink_bus", ip), f"{ip}.sink_bus"),
            quantity=series_field(item, "quantity", ip))))

    flowgate = []
    for i, raw in enumerate(_expect_list(_get(pf, "flowgate", path, []),
                                         f"{path}.flowgate")):
        ip = f"{path}.flowgate[{i}]"
        item = _expect_mapping(raw, ip)
        _reject_unknown(item, ("name", "line", "direction", "quantity"), ip)
        flowgate.append(_wrap(ip, lambda item=item, ip=ip: FlowgateRight(
            name=_as_str(_get(item, "name", ip), f"{ip}.name"),
            line=_as_int(_get(item, "line", ip), f"{ip}.line"),
            direction=_as_str(_get(item, "direction", ip), f"{ip}.direction"),
            quantity=series_field(item, "quantity", ip))))

    storage_power = []
    for i, raw in enumerate(_expect_list(_get(pf, "storage_power", path, []),
                                         f"{path}.storage_power")):
        ip = f"{path}.storage_power[{i}]"
        item = _expect_mapping(raw, ip)
        _reject_unknown(item, ("name", "storage", "profile"), ip)
        storage_power.append(_wrap(ip, lambda item=item, ip=ip: StorageRight(
            name=_as_str(_get(item, "name", ip), f"{ip}.name"),
            storage=_as_str(_get(item, "storage", ip), f"{ip}.storage"),
            profile=series_field(item, "profile", ip))))

    storage_capacity = []
    for i, raw in enumerate(_expect_list(_get(pf, "storage_capacity", path, []),
                                         f"{path}.storage_capacity")):
        ip = f"{path}.storage_capacity[{i}]"
        item = _expect_mapping(raw, ip)
        _reject_unknown(item, ("name", "storage", "entitlement"), ip)
        storage_capacity.append(_wrap(ip, lambda item=item, ip=ip: CapacityRight(
            name=_as_str(_get(item, "name", ip), f"{ip}.name"),
            storage=_as_str(_get(item, "storage", ip), f"{ip}.storage"),
            entitlement=series_field(item, "entitlement", ip))))

    return _wrap(path, lambda: Portfolio(
        transmission=tuple(transmission), flowgate=tuple(flowgate),
        storage_power=tuple(storage_power),
        storage_capacity=tuple(storage_capacity)))


# --- top level -------------------------------------------------------------

_TOP_KEYS = ("schema_version", "name", "units", "periods", "period_hours",
             "network", "generators", "loads", "hydro", "ess", "cascade",
             "portfolio")


def _parse(text: str) -> CaseFile:
    try:
        root = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise CasefileError(f"case file is not valid YAML: {exc}") from exc
    root = _expect_mapping(root, "case file root")
    _reject_unknown(root, _TOP_KEYS, "case file root")

    version = _get(root, "schema_version", "case file root")
    if version != SCHEMA_VERSION:
        raise CasefileError(
            f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    _load_units(_get(root, "units", "case file root"), "units")

    name = _as_str(_get(root, "name", "case file root"), "name")
    periods = _as_int(_get(root, "periods", "case file root"), "periods")
    period_hours = _as_float(_get(root, "period_hours", "case file root"),
                             "period_hours")
    network = _load_network(_get(root, "network", "case file root"), "network")

    def section(key, loader):
        out = []
        for i, raw in enumerate(_expect_list(_get(root, key, "case file root", []), key)):
            item = _expect_mapping(raw, f"{key}[{i}]")
            out.append(loader(item, f"{key}[{i}]"))
        return tuple(out)

    case = _wrap("case file root", lambda: MpedCase(
        name=name, network=network, periods=periods, period_hours=period_hours,
        generators=section("generators", _load_generator),
        loads=section("loads", lambda item, path: _load_load(item, path, periods)),
        hydro_units=section("hydro", _load_hydro),
        ess_units=section("ess", _load_ess),
        cascade=section("cascade", _load_cascade_link)))

    portfolio = None
    if "portfolio" in root:
        portfolio = _load_portfolio_block(root["portfolio"], "portfolio", periods)
    return CaseFile(case=case, portfolio=portfolio)


def _bundled_text(name: str) -> str:
    package = resources.files("hydrorights.cases")
    candidate = package / f"{name}.yaml"
    if not candidate.is_file():
        raise CasefileError(
            f"no bundled case named {name!r}; available: "
            f"{', '.join(list_bundled_cases())}")
    return candidate.read_text(encoding="utf-8")


def _read_source(source) -> str:
    if isinstance(source, Path):
        return source.read_text(encoding="utf-8")
    if isinstance(source, str):
        looks_like_path = ("/" in source or "\\" in source
                          or source.endswith((".yaml", ".yml")))
        if looks_like_path:
            return Path(source).read_text(encoding="utf-8")
        return _bundled_text(source)
    raise CasefileError(f"cannot read a case from {type(source).__name__}")


def load_case_file(source) -> CaseFile:
    """Load a case file from a path, bundled name, or Path object."""
    return _parse(_read_source(source))


def load_case(source) -> MpedCase:
    """Load just the dispatch case from a case file."""
    return load_case_file(source).case


def load_portfolio(source) -> Portfolio | None:
    """Load the portfolio block of a case file; None if the file has none."""
    return load_case_file(source).portfolio


def list_bundled_cases() -> tuple[str, ...]:
    """Names accepted by load_case without a path."""
    package = resources.files("hydrorights.cases")
    names = [entry.name[:-5] for entry in package.iterdir()
             if entry.name.endswith(".yaml")]
    return tuple(sorted(names))


# --- canonical emitter -----------------------------------------------------


def _series_out(value, periods):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(periods, float(arr))
    return [float(v) for v in arr]


def _emit_dict(case: MpedCase, portfolio: Portfolio | None) -> dict:
    T = case.periods
    doc: dict = {
        "schema_version": SCHEMA_VERSION,
        "name": case.name,
        "units": dict(REQUIRED_UNITS),
        "periods": T,
        "period_hours": float(case.period_hours),
        "network": {
            "buses": case.network.bus_count,
            "slack_bus": case.network.slack_bus,
            "lines": [{
                "from_bus": ln.from_bus,
                "to_bus": ln.to_bus,
                "reactance": float(ln.reactance),
                "limit_forward": float(ln.limit_forward),
                "limit_reverse": float(ln.limit_reverse),
            } for ln in case.network.lines],
        },
    }
    if case.generators:
        doc["generators"] = [{
            "name": g.name, "bus": g.bus,
            "cost_quad": float(g.cost_quad), "cost_lin": float(g.cost_lin),
            "power_min": float(g.power_min), "power_max": float(g.power_max),
        } for g in case.generators]
    if case.loads:
        doc["loads"] = [{
            "name": ld.name, "bus": ld.bus,
            "demand": _series_out(ld.demand, T),
        } for ld in case.loads]
    if case.hydro_units:
        doc["hydro"] = [{
            "name": u.name, "bus": u.bus,
            "plant": {
                "efficiency_factor": float(u.plant.efficiency_factor),
                "forebay": float(u.plant.forebay),
                "tailrace_intercept": float(u.plant.tailrace_intercept),
                "tailrace_slope": float(u.plant.tailrace_slope),
                "penstock_loss": float(u.plant.penstock_loss),
                "power_cap": float(u.plant.declared_cap),
            },
            "initial_volume": float(u.initial_volume),
            "min_volume": _series_out(u.min_volume, T),
            "max_volume": _series_out(u.max_volume, T),
            "inflow": _series_out(u.inflow, T),
        } for u in case.hydro_units]
    if case.ess_units:
        doc["ess"] = [{
            "name": u.name, "bus": u.bus,
            "charge_cap": float(u.charge_cap),
            "discharge_cap": float(u.discharge_cap),
            "initial_volume": float(u.initial_volume),
            "min_volume": _series_out(u.min_volume, T),
            "max_volume": _series_out(u.max_volume, T),
            "inflow": _series_out(u.inflow, T),
        } for u in case.ess_units]
    if case.cascade:
        doc["cascade"] = [{
            "upstream": link.upstream, "downstream": link.downstream,
            "lag": link.lag,
        } for link in case.cascade]
    if portfolio is not None and portfolio.all_rights:
        block: dict = {}
        if portfolio.transmission:
            block["transmission"] = [{
                "name": r.name, "source_bus": r.source_bus,
                "sink_bus": r.sink_bus,
                "quantity": _series_out(r.quantity, T),
            } for r in portfolio.transmission]
        if portfolio.flowgate:
            block["flowgate"] = [{
                "name": r.name, "line": r.line, "direction": r.direction,
                "quantity": _series_out(r.quantity, T),
            } for r in portfolio.flowgate]
        if portfolio.storage_power:
            block["storage_power"] = [{
                "name": r.name, "storage": r.storage,
                "profile": _series_out(r.profile, T),
            } for r in portfolio.storage_power]
        if portfolio.storage_capacity:
            block["storage_capacity"] = [{
                "name": r.name, "storage": r.storage,
                "entitlement": _series_out(r.entitlement, T),
            } for r in portfolio.storage_capacity]
        doc["portfolio"] = block
    return doc


def emit_case(case: MpedCase, portfolio: Portfolio | None = None) -> str:
    """Render the canonical YAML form; stable under load/emit round trips."""
    return yaml.safe_dump(_emit_dict(case, portfolio), sort_keys=False,
                          default_flow_style=False, width=100)


def save_case(path, case: MpedCase, portfolio: Portfolio | None = None) -> None:
    Path(path).write_text(emit_case(case, portfolio), encoding="utf-8")


def canonical_digest(case: MpedCase, portfolio: Portfolio | None = None) -> str:
    """sha256 of the canonical emitted form; identifies case content, not files."""
    return hashlib.sha256(emit_case(case, portfolio).encode("utf-8")).hexdigest()
