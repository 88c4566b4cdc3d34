"""Multi-period economic dispatch over a DC network with storage.

The decision program is convex: thermal costs are quadratic in output,
flow limits are linear in nodal injections through shift factors, and each
hydro unit's released volume is tied to its generation by a convex epigraph
row, so volume accounting stays linear in releases.  Duals of the balance
and flow rows give nodal prices, duals of the volume rows give storage
value, and the same assembler serves dispatch, feasibility screening of
issued rights, and storage valuation by pinning or targeting storage power.

All prices inside solutions are in dollars per MW-period (objective units);
divide by period_hours for dollars per MWh.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Network, build_shift_factors, capacity_vector
from .hydro import PlantParameters
from .qp import QpSolution, QuadraticProgram, QuadRow, solve_qp
from .reservoir import (
    CascadeLink,
    build_arrival_matrix,
    storage_trajectory,
    validate_cascade,
)

__all__ = [
    "CaseStructureError",
    "DispatchInfeasibleError",
    "DispatchFailedError",
    "Generator",
    "FixedLoad",
    "HydroStorage",
    "EssStorage",
    "MpedCase",
    "ProgramOptions",
    "ProgramLayout",
    "BuiltProgram",
    "build_program",
    "solve_mped",
    "StorageResult",
    "DispatchSolution",
    "MerchandisingReport",
    "merchandising_surplus",
]


class CaseStructureError(ValueError):
    """Raised for malformed case descriptions."""


class DispatchInfeasibleError(RuntimeError):
    """Raised when no dispatch satisfies the constraints; names binding rows."""

    def __init__(self, message, rows=(), max_violation=float("nan")):
        super().__init__(message)
        self.rows = tuple(rows)
        self.max_violation = float(max_violation)


class DispatchFailedError(RuntimeError):
    """Raised when the optimizer ends in a state other than optimal/infeasible."""


@dataclass(frozen=True)
class Generator:
    """Dispatchable injection with cost cost_quad*P^2 + cost_lin*P per hour."""

    name: str
    bus: int
    cost_quad: float
    cost_lin: float
    power_min: float = 0.0
    power_max: float = np.inf

    def __post_init__(self):
        if self.cost_quad < 0.0:
            raise CaseStructureError(
                f"generator {self.name!r} cost_quad must be >= 0, got {self.cost_quad}")
        if not self.power_min <= self.power_max:
            raise CaseStructureError(
                f"generator {self.name!r} power_min {self.power_min} exceeds "
                f"power_max {self.power_max}")


@dataclass(frozen=True)
class FixedLoad:
    """Inelastic withdrawal; demand is MW per period, negative for net injection."""

    name: str
    bus: int
    demand: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "demand", np.asarray(self.demand, dtype=float))


@dataclass(frozen=True)
class HydroStorage:
    """Reservoir plant: generation only, release tied to power by the plant curve."""

    name: str
    bus: int
    plant: PlantParameters
    initial_volume: float
    min_volume: float | np.ndarray
    max_volume: float | np.ndarray
    inflow: float | np.ndarray = 0.0

    def __post_init__(self):
        if self.initial_volume < 0.0:
            raise CaseStructureError(
                f"storage {self.name!r} initial_volume must be >= 0")


@dataclass(frozen=True)
class EssStorage:
    """Battery-style unit: signed power, volume in MWh, unit conversion."""

    name: str
    bus: int
    charge_cap: float
    discharge_cap: float
    initial_volume: float
    min_volume: float | np.ndarray
    max_volume: float | np.ndarray
    inflow: float | np.ndarray = 0.0

    def __post_init__(self):
        if self.charge_cap < 0.0 or self.discharge_cap < 0.0:
            raise CaseStructureError(
                f"storage {self.name!r} power caps must be >= 0, got "
                f"({self.charge_cap}, {self.discharge_cap})")
        if self.initial_volume < 0.0:
            raise CaseStructureError(
                f"storage {self.name!r} initial_volume must be >= 0")


def _per_period(value, periods, what):
    series = np.asarray(value, dtype=float)
    if series.ndim == 0:
        return np.full(periods, float(series))
    if series.shape != (periods,):
        raise CaseStructureError(
            f"{what} must be scalar or shape ({periods},), got {series.shape}")
    return series


@dataclass(frozen=True)
class MpedCase:
    name: str
    network: Network
    periods: int
    period_hours: float
    generators: tuple[Generator, ...] = ()
    loads: tuple[FixedLoad, ...] = ()
    hydro_units: tuple[HydroStorage, ...] = ()
    ess_units: tuple[EssStorage, ...] = ()
    cascade: tuple[CascadeLink, ...] = ()

    def __post_init__(self):
        for f in ("generators", "loads", "hydro_units", "ess_units", "cascade"):
            object.__setattr__(self, f, tuple(getattr(self, f)))
        if self.periods < 1:
            raise CaseStructureError(f"periods must be >= 1, got {self.periods}")
        if not self.period_hours > 0.0:
            raise CaseStructureError(
                f"period_hours must be positive, got {self.period_hours}")
        names = [d.name for d in (self.generators + self.loads
                                  + self.hydro_units + self.ess_units)]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise CaseStructureError(f"duplicate device names: {dupes}")
        n = self.network.bus_count
        for d in self.generators + self.loads + self.hydro_units + self.ess_units:
            if not 0 <= d.bus < n:
                raise CaseStructureError(
                    f"device {d.name!r} references bus {d.bus} outside 0..{n - 1}")
        for ld in self.loads:
            if ld.demand.shape != (self.periods,):
                raise CaseStructureError(
                    f"load {ld.name!r} demand has shape {ld.demand.shape}, "
                    f"expected ({self.periods},)")
        for unit in self.hydro_units + self.ess_units:
            lo = _per_period(unit.min_volume, self.periods, f"{unit.name!r} min_volume")
            hi = _per_period(unit.max_volume, self.periods, f"{unit.name!r} max_volume")
            _per_period(unit.inflow, self.periods, f"{unit.name!r} inflow")
            if np.any(lo > hi):
                raise CaseStructureError(
                    f"storage {unit.name!r} min_volume exceeds max_volume")
        hydro_names = [u.name for u in self.hydro_units]
        for link in self.cascade:
            for end in (link.upstream, link.downstream):
                if end not in hydro_names:
                    raise CaseStructureError(
                        f"cascade link references {end!r}, which is not a "
                        f"hydro unit")
        validate_cascade(hydro_names, self.cascade)

    @property
    def storage_units(self):
        """All storage devices with a kind tag, hydro first, in case order."""
        return tuple((u, "hydro") for u in self.hydro_units) + \
            tuple((u, "ess") for u in self.ess_units)

    def storage_unit(self, name):
        for unit, kind in self.storage_units:
            if unit.name == name:
                return unit, kind
        raise KeyError(f"no storage unit named {name!r}")


@dataclass(frozen=True)
class ProgramOptions:
    """Assembly knobs shared by dispatch, rights screening, and valuation.

    extra_injection: (n, T) constant nodal injections added to loads.
    flow_margin: (2m, T) amounts subtracted from directional flow limits.
    volume_margin: name -> (T,) amounts subtracted from max volume.
    fixed_power: name -> (T,) pin a storage unit's power to a series.
    energy_target: name -> total MWh the unit must inject over the horizon.
    include_devices: when False, drop generators and loads (storage only).
    regularization: adds 0.5*reg*||x||^2 to the objective for a unique point.
    """

    extra_injection: np.ndarray | None = None
    flow_margin: np.ndarray | None = None
    volume_margin: dict | None = None
    fixed_power: dict | None = None
    energy_target: dict | None = None
    include_devices: bool = True
    regularization: float = 0.0


@dataclass(frozen=True)
class ProgramLayout:
    """Column and row bookkeeping for an assembled program."""

    periods: int
    bus_count: int
    line_count: int
    period_hours: float
    var_labels: tuple[str, ...]
    var_bus: np.ndarray
    var_period: np.ndarray
    gen_slices: dict
    power_slices: dict
    release_slices: dict
    energy_rows: dict
    storage_lower_rows: dict
    storage_upper_rows: dict
    quad_row_labels: tuple[str, ...]
    fixed_injection: np.ndarray
    shift_factors: np.ndarray
    flow_limits: np.ndarray

    def describe_equality(self, idx) -> str:
        if idx < self.periods:
            return f"power balance, period {idx}"
        for name, row in self.energy_rows.items():
            if row == idx:
                return f"energy target for {name}"
        return f"equality row {idx}"

    def describe_inequality(self, idx) -> str:
        flow_count = self.periods * 2 * self.line_count
        if idx < flow_count:
            t, r = divmod(idx, 2 * self.line_count)
            line = r % self.line_count
            direction = "forward" if r < self.line_count else "reverse"
            return f"flow limit, line {line} {direction}, period {t}"
        for name, rows in self.storage_lower_rows.items():
            if rows.start <= idx < rows.stop:
                return f"{name} min volume, period {idx - rows.start}"
        for name, rows in self.storage_upper_rows.items():
            if rows.start <= idx < rows.stop:
                return f"{name} max volume, period {idx - rows.start}"
        return f"inequality row {idx}"

    def describe_row(self, kind, idx) -> str:
        if kind == "eq":
            return self.describe_equality(idx)
        if kind == "ineq":
            return self.describe_inequality(idx)
        if kind == "quad":
            return self.quad_row_labels[idx]
        if kind in ("box_lower", "box_upper"):
            side = "lower" if kind == "box_lower" else "upper"
            return f"{self.var_labels[idx]}, {side} bound"
        return f"{kind} row {idx}"


@dataclass(frozen=True)
class BuiltProgram:
    program: QuadraticProgram
    layout: ProgramLayout


def build_program(case: MpedCase, options: ProgramOptions | None = None) -> BuiltProgram:
    """Assemble the convex program for a case under the given knobs."""
    opt = options or ProgramOptions()
    periods, dt = case.periods, case.period_hours
    net = case.network
    n_bus, m = net.bus_count, net.line_count
    factors = build_shift_factors(net)
    limits = capacity_vector(net)

    generators = case.generators if opt.include_devices else ()
    loads = case.loads if opt.include_devices else ()
    storage = case.storage_units

    labels, var_bus, var_period = [], [], []
    gen_slices, power_slices, release_slices = {}, {}, {}

    def add_block(label_fmt, bus, count):
        start = len(labels)
        for t in range(count):
            labels.append(label_fmt.format(t=t))
            var_bus.append(bus)
            var_period.append(t)
        return slice(start, start + count)

    for g in generators:
        gen_slices[g.name] = add_block(f"{g.name} output, period {{t}}", g.bus, periods)
    for unit, kind in storage:
        power_slices[unit.name] = add_block(
            f"{unit.name} power, period {{t}}", unit.bus, periods)
        if kind == "hydro":
            release_slices[unit.name] = add_block(
                f"{unit.name} release, period {{t}}", -1, periods)
    n_var = len(labels)
    var_bus = np.array(var_bus, dtype=int)
    var_period = np.array(var_period, dtype=int)

    fixed = np.zeros((n_bus, periods))
    for ld in loads:
        fixed[ld.bus] -= ld.demand
    if opt.extra_injection is not None:
        extra = np.asarray(opt.extra_injection, dtype=float)
        if extra.shape != (n_bus, periods):
            raise CaseStructureError(
                f"extra_injection must have shape ({n_bus}, {periods}), "
                f"got {extra.shape}")
        fixed = fixed + extra

    lower = np.full(n_var, -np.inf)
    upper = np.full(n_var, np.inf)
    for g in generators:
        lower[gen_slices[g.name]] = g.power_min
        upper[gen_slices[g.name]] = g.power_max
    for unit, kind in storage:
        cols = power_slices[unit.name]
        if kind == "hydro":
            lower[cols] = 0.0
            upper[cols] = unit.plant.power_cap
            lower[release_slices[unit.name]] = 0.0
        else:
            lower[cols] = -unit.charge_cap
            upper[cols] = unit.discharge_cap
    if opt.fixed_power:
        for name, series in opt.fixed_power.items():
            pinned = _per_period(series, periods, f"fixed_power[{name!r}]")
            cols = power_slices[name]
            lower[cols] = pinned
            upper[cols] = pinned

    q = np.zeros((n_var, n_var))
    c = np.zeros(n_var)
    for g in generators:
        cols = gen_slices[g.name]
        diag = np.arange(cols.start, cols.stop)
        q[diag, diag] += 2.0 * g.cost_quad * dt
        c[cols] = g.cost_lin * dt
    if opt.regularization:
        q[np.arange(n_var), np.arange(n_var)] += opt.regularization

    # equalities: one balance row per period, then any energy targets
    energy_items = sorted((opt.energy_target or {}).items())
    a_eq = np.zeros((periods + len(energy_items), n_var))
    b_eq = np.zeros(periods + len(energy_items))
    power_cols = var_bus >= 0
    for t in range(periods):
        a_eq[t, power_cols & (var_period == t)] = 1.0
        b_eq[t] = -fixed[:, t].sum()
    energy_rows = {}
    for k, (name, total) in enumerate(energy_items):
        row = periods + k
        a_eq[row, power_slices[name]] = dt
        b_eq[row] = float(total)
        energy_rows[name] = row

    # inequalities: flow rows period-major, then per-unit volume rows
    flow_count = periods * 2 * m
    storage_row_count = 2 * periods * len(storage)
    a_ineq = np.zeros((flow_count + storage_row_count, n_var))
    b_ineq = np.zeros(flow_count + storage_row_count)
    if m:
        flow_margin = np.zeros((2 * m, periods))
        if opt.flow_margin is not None:
            flow_margin = np.asarray(opt.flow_margin, dtype=float)
            if flow_margin.shape != (2 * m, periods):
                raise CaseStructureError(
                    f"flow_margin must have shape ({2 * m}, {periods}), "
                    f"got {flow_margin.shape}")
        for j in np.flatnonzero(power_cols):
            t = var_period[j]
            a_ineq[t * 2 * m:(t + 1) * 2 * m, j] = factors[:, var_bus[j]]
        for t in range(periods):
            b_ineq[t * 2 * m:(t + 1) * 2 * m] = (
                limits - flow_margin[:, t] - factors @ fixed[:, t])

    cum = np.tril(np.ones((periods, periods)))
    release_cols = {}
    release_scale = {}
    for unit, kind in storage:
        if kind == "hydro":
            release_cols[unit.name] = release_slices[unit.name]
            release_scale[unit.name] = 1.0
        else:
            release_cols[unit.name] = power_slices[unit.name]
            release_scale[unit.name] = dt

    storage_lower_rows, storage_upper_rows = {}, {}
    offset = flow_count
    for unit, kind in storage:
        low_rows = slice(offset, offset + periods)
        high_rows = slice(offset + periods, offset + 2 * periods)
        offset += 2 * periods
        storage_lower_rows[unit.name] = low_rows
        storage_upper_rows[unit.name] = high_rows

        own = cum * release_scale[unit.name]
        a_ineq[low_rows, release_cols[unit.name]] = own
        a_ineq[high_rows, release_cols[unit.name]] = -own
        for link in case.cascade:
            if link.downstream != unit.name:
                continue
            arr = build_arrival_matrix(periods, link.lag) * release_scale[link.upstream]
            a_ineq[low_rows, release_cols[link.upstream]] -= arr
            a_ineq[high_rows, release_cols[link.upstream]] += arr

        cum_inflow = np.cumsum(_per_period(unit.inflow, periods, "inflow"))
        z_min = _per_period(unit.min_volume, periods, "min_volume")
        z_max = _per_period(unit.max_volume, periods, "max_volume")
        margin = np.zeros(periods)
        if opt.volume_margin and unit.name in opt.volume_margin:
            margin = _per_period(opt.volume_margin[unit.name], periods,
                                 f"volume_margin[{unit.name!r}]")
        b_ineq[low_rows] = unit.initial_volume + cum_inflow - z_min
        b_ineq[high_rows] = z_max - unit.initial_volume - cum_inflow - margin

    quad_rows = []
    quad_labels = []
    for unit, kind in storage:
        if kind != "hydro":
            continue
        a_coef = unit.plant.discharge_quad * dt
        b_coef = unit.plant.discharge_lin * dt
        u_cols = power_slices[unit.name]
        w_cols = release_slices[unit.name]
        for t in range(periods):
            lin = np.zeros(n_var)
            lin[u_cols.start + t] = b_coef
            lin[w_cols.start + t] = -1.0
            quad_rows.append(QuadRow((u_cols.start + t,), (a_coef,), lin, 0.0))
            quad_labels.append(f"{unit.name} release conversion, period {t}")

    program = QuadraticProgram(
        q, c, a_eq, b_eq, a_ineq, b_ineq,
        lower=lower, upper=upper, quad_rows=tuple(quad_rows))
    layout = ProgramLayout(
        periods=periods, bus_count=n_bus, line_count=m, period_hours=dt,
        var_labels=tuple(labels), var_bus=var_bus, var_period=var_period,
        gen_slices=gen_slices, power_slices=power_slices,
        release_slices=release_slices, energy_rows=energy_rows,
        storage_lower_rows=storage_lower_rows,
        storage_upper_rows=storage_upper_rows,
        quad_row_labels=tuple(quad_labels),
        fixed_injection=fixed, shift_factors=factors, flow_limits=limits)
    return BuiltProgram(program, layout)


@dataclass(frozen=True)
class StorageResult:
    """Per-unit dispatch outcome and storage duals."""

    name: str
    bus: int
    kind: str
    power: np.ndarray
    release: np.ndarray
    conversion_volume: np.ndarray
    volume: np.ndarray
    eta_lo: np.ndarray
    eta_hi: np.ndarray
    power_floor_dual: np.ndarray
    power_ceiling_dual: np.ndarray
    marginal_value: np.ndarray

    @property
    def spill(self) -> np.ndarray:
        return self.release - self.conversion_volume


@dataclass(frozen=True)
class DispatchSolution:
    """Primal dispatch with the duals needed for pricing and settlement."""

    case: MpedCase
    objective: float
    system_price: np.ndarray
    lmp: np.ndarray
    flow_duals: np.ndarray
    flows: np.ndarray
    generator_output: dict
    nonstorage_injection: np.ndarray
    storage_injection: np.ndarray
    storage: tuple
    energy_target_duals: dict
    residuals: tuple
    iterations: int

    @property
    def period_hours(self) -> float:
        return self.case.period_hours

    def lmp_per_mwh(self) -> np.ndarray:
        return self.lmp / self.period_hours

    def storage_result(self, name) -> StorageResult:
        for res in self.storage:
            if res.name == name:
                return res
        raise KeyError(f"no storage unit named {name!r}")


def _tail_sums(series) -> np.ndarray:
    return np.cumsum(series[::-1])[::-1]


def _extract(case, built, sol) -> DispatchSolution:
    layout = built.layout
    periods, dt = layout.periods, layout.period_hours
    n_bus, m = layout.bus_count, layout.line_count
    factors = layout.shift_factors
    x = sol.x

    nu = sol.eq_duals[:periods]
    mu = sol.ineq_duals[: periods * 2 * m].reshape(periods, 2 * m).T
    lmp = nu[None, :] - factors.T @ mu

    generator_output = {name: x[cols].copy()
                        for name, cols in layout.gen_slices.items()}
    nonstorage = layout.fixed_injection.copy()
    for name, cols in layout.gen_slices.items():
        bus = layout.var_bus[cols.start]
        nonstorage[bus] += x[cols]

    storage_injection = np.zeros((n_bus, periods))
    results = []
    release_by_name = {}
    for unit, kind in case.storage_units:
        u = x[layout.power_slices[unit.name]]
        storage_injection[unit.bus] += u
        if kind == "hydro":
            release_by_name[unit.name] = x[layout.release_slices[unit.name]].copy()
        else:
            release_by_name[unit.name] = dt * u

    quad_cursor = 0
    for unit, kind in case.storage_units:
        cols = layout.power_slices[unit.name]
        u = x[cols].copy()
        if kind == "hydro":
            w = release_by_name[unit.name]
            a_coef, b_coef = unit.plant.discharge_quad, unit.plant.discharge_lin
            conv = dt * (a_coef * u * u + b_coef * u)
        else:
            w = release_by_name[unit.name]
            conv = w.copy()
        upstream = [(release_by_name[lk.upstream], lk.lag)
                    for lk in case.cascade if lk.downstream == unit.name]
        volume = storage_trajectory(
            unit.initial_volume, _per_period(unit.inflow, periods, "inflow"),
            w, upstream)
        eta_lo = sol.ineq_duals[layout.storage_lower_rows[unit.name]].copy()
        eta_hi = sol.ineq_duals[layout.storage_upper_rows[unit.name]].copy()
        if kind == "hydro":
            value = sol.quad_duals[quad_cursor:quad_cursor + periods].copy()
            quad_cursor += periods
        else:
            value = _tail_sums(eta_lo - eta_hi)
        results.append(StorageResult(
            name=unit.name, bus=unit.bus, kind=kind, power=u, release=w,
            conversion_volume=conv, volume=volume, eta_lo=eta_lo,
            eta_hi=eta_hi,
            power_floor_dual=sol.box_lower_duals[cols].copy(),
            power_ceiling_dual=sol.box_upper_duals[cols].copy(),
            marginal_value=value))

    total = nonstorage + storage_injection
    flows = factors[:m] @ total if m else np.zeros((0, periods))
    energy_duals = {name: float(sol.eq_duals[row])
                    for name, row in layout.energy_rows.items()}

    return DispatchSolution(
        case=case, objective=sol.objective, system_price=nu.copy(), lmp=lmp,
        flow_duals=mu.copy(), flows=flows, generator_output=generator_output,
        nonstorage_injection=nonstorage, storage_injection=storage_injection,
        storage=tuple(results), energy_target_duals=energy_duals,
        residuals=(sol.stationarity_residual, sol.primal_residual,
                   sol.complementarity_residual),
        iterations=sol.iterations)


def solve_mped(case: MpedCase, options: ProgramOptions | None = None,
               tol: float = 1e-8) -> DispatchSolution:
    """Solve the dispatch program; raise with named rows when infeasible."""
    built = build_program(case, options)
    sol = solve_qp(built.program, tol=tol)
    if sol.status == "infeasible":
        rows = tuple(built.layout.describe_row(kind, idx)
                     for kind, idx, _ in sol.infeasibility.rows)
        detail = "; ".join(rows) if rows else "no certificate rows"
        raise DispatchInfeasibleError(
            f"case {case.name!r} has no feasible dispatch "
            f"(worst violation {sol.infeasibility.max_violation:.3g}): {detail}",
            rows, sol.infeasibility.max_violation)
    if sol.status != "optimal":
        raise DispatchFailedError(
            f"optimizer returned status {sol.status!r} for case {case.name!r}")
    return _extract(case, built, sol)


@dataclass(frozen=True)
class MerchandisingReport:
    """Network revenue split into congestion and storage components.

    surplus is what the settlement pool collects from non-storage trade at
    nodal prices.  It decomposes exactly into the congestion component plus
    the storage component; the storage component is evaluated twice, once
    from prices times power and once from storage-row duals, and the gap
    between the two routes measures dual consistency.
    """

    surplus: float
    congestion_component: float
    storage_component: float
    storage_component_dual: float

    @property
    def identity_residual(self) -> float:
        return abs(self.surplus - self.congestion_component
                   - self.storage_component)

    @property
    def route_gap(self) -> float:
        return abs(self.storage_component - self.storage_component_dual)


def merchandising_surplus(solution: DispatchSolution) -> MerchandisingReport:
    """Pool revenue at nodal prices, decomposed and cross-checked."""
    case = solution.case
    dt = case.period_hours
    lmp = solution.lmp
    surplus = -float(np.sum(lmp * solution.nonstorage_injection))

    mu = solution.flow_duals
    m = case.network.line_count
    congestion = float(np.sum((mu[:m] - mu[m:]) * solution.flows)) if m else 0.0

    storage_price = float(np.sum(lmp * solution.storage_injection))

    storage_dual = 0.0
    for res in solution.storage:
        unit, kind = case.storage_unit(res.name)
        box_term = float(np.dot(res.power_ceiling_dual - res.power_floor_dual,
                                res.power))
        if kind == "hydro":
            a_coef, b_coef = unit.plant.discharge_quad, unit.plant.discharge_lin
            curve = dt * (2.0 * a_coef * res.power ** 2 + b_coef * res.power)
            storage_dual += float(np.dot(res.marginal_value, curve)) + box_term
        else:
            cum_inflow = np.cumsum(_per_period(unit.inflow, case.periods, "inflow"))
            drawdown = res.volume - unit.initial_volume - cum_inflow
            storage_dual += float(np.dot(res.eta_hi - res.eta_lo, drawdown)) \
                + box_term
    return MerchandisingReport(
        surplus=surplus, congestion_component=congestion,
        storage_component=storage_price, storage_component_dual=storage_dual)
