"""Financial rights: issuance screening, settlement, and adequacy.

Four instruments are settled from dispatch duals: point-to-point rights pay
the nodal price difference on a quantity, flowgate rights pay the flow dual
on a directed line, storage power rights pay the nodal price on a signed
power profile delivered by the storage fleet, and storage capacity rights
pay the max-volume dual on reserved headspace.

Before issuance a portfolio is screened: the fleet must be able to deliver
every sold profile while the network carries the implied injections with
flowgate quantities set aside and reserved headspace removed, all at once.
Screening and dispatch share one program assembler; the settlement pool
then covers every screened portfolio out of the merchandising surplus.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dispatch import (
    DispatchInfeasibleError,
    DispatchSolution,
    MpedCase,
    ProgramOptions,
    merchandising_surplus,
    solve_mped,
)
from .grid import build_shift_factors, capacity_vector

__all__ = [
    "PortfolioError",
    "TransmissionRight",
    "FlowgateRight",
    "StorageRight",
    "CapacityRight",
    "Portfolio",
    "AggregateClaims",
    "aggregate",
    "SftResult",
    "simultaneous_feasibility_test",
    "RightPayment",
    "SettlementReport",
    "settle",
    "FsrValuation",
    "value_fsr_flat_bid_reallocation",
]

_SFT_REGULARIZATION = 1e-6


class PortfolioError(ValueError):
    """Raised for malformed rights or rights that reference missing assets."""


@dataclass(frozen=True)
class TransmissionRight:
    """Point-to-point right: paid (price at sink - price at source) * quantity."""

    name: str
    source_bus: int
    sink_bus: int
    quantity: float | np.ndarray

    def __post_init__(self):
        if self.source_bus == self.sink_bus:
            raise PortfolioError(
                f"right {self.name!r} must span two buses, got bus "
                f"{self.source_bus} twice")


@dataclass(frozen=True)
class FlowgateRight:
    """Directed line right: paid the flow dual times the reserved quantity."""

    name: str
    line: int
    direction: str
    quantity: float | np.ndarray

    def __post_init__(self):
        if self.direction not in ("forward", "reverse"):
            raise PortfolioError(
                f"right {self.name!r} direction must be 'forward' or "
                f"'reverse', got {self.direction!r}")


@dataclass(frozen=True)
class StorageRight:
    """Storage power right: paid the nodal price on a signed power profile."""

    name: str
    storage: str
    profile: float | np.ndarray


@dataclass(frozen=True)
class CapacityRight:
    """Storage capacity right: paid the max-volume dual on reserved headspace."""

    name: str
    storage: str
    entitlement: float | np.ndarray


@dataclass(frozen=True)
class Portfolio:
    transmission: tuple = ()
    flowgate: tuple = ()
    storage_power: tuple = ()
    storage_capacity: tuple = ()

    def __post_init__(self):
        for f in ("transmission", "flowgate", "storage_power", "storage_capacity"):
            object.__setattr__(self, f, tuple(getattr(self, f)))
        names = [r.name for r in self.all_rights]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise PortfolioError(f"duplicate right names: {dupes}")

    @property
    def all_rights(self):
        return self.transmission + self.flowgate + self.storage_power \
            + self.storage_capacity


@dataclass(frozen=True)
class AggregateClaims:
    """Portfolio quantities summed into case-shaped arrays."""

    ftr_injection: np.ndarray      # (n, T) net injections implied by ftrs
    storage_profile: np.ndarray    # (n, T) promised storage power by bus
    flow_claims: np.ndarray        # (2m, T) reserved directed line capacity
    capacity_claims: dict          # storage name -> (T,) reserved headspace

    @property
    def net_injection(self) -> np.ndarray:
        return self.ftr_injection - self.storage_profile


def _series(value, periods, what):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(periods, float(arr))
    if arr.shape != (periods,):
        raise PortfolioError(
            f"{what} must be scalar or shape ({periods},), got {arr.shape}")
    return arr


def aggregate(case: MpedCase, portfolio: Portfolio) -> AggregateClaims:
    """Sum rights into nodal, line, and storage claims, validating references."""
    n = case.network.bus_count
    m = case.network.line_count
    periods = case.periods
    storage_names = {u.name: u for u, _ in case.storage_units}

    r = np.zeros((n, periods))
    for right in portfolio.transmission:
        qty = _series(right.quantity, periods, f"right {right.name!r} quantity")
        if np.any(qty < 0.0):
            raise PortfolioError(f"right {right.name!r} quantity must be >= 0")
        for bus in (right.source_bus, right.sink_bus):
            if not 0 <= bus < n:
                raise PortfolioError(
                    f"right {right.name!r} references bus {bus} outside 0..{n - 1}")
        r[right.source_bus] += qty
        r[right.sink_bus] -= qty

    f = np.zeros((2 * m, periods))
    for right in portfolio.flowgate:
        qty = _series(right.quantity, periods, f"right {right.name!r} quantity")
        if np.any(qty < 0.0):
            raise PortfolioError(f"right {right.name!r} quantity must be >= 0")
        if not 0 <= right.line < m:
            raise PortfolioError(
                f"right {right.name!r} references line {right.line} "
                f"outside 0..{m - 1}")
        row = right.line + (0 if right.direction == "forward" else m)
        f[row] += qty

    s = np.zeros((n, periods))
    for right in portfolio.storage_power:
        if right.storage not in storage_names:
            raise PortfolioError(
                f"right {right.name!r} references unknown storage "
                f"{right.storage!r}")
        profile = _series(right.profile, periods, f"right {right.name!r} profile")
        s[storage_names[right.storage].bus] += profile

    e = {}
    for right in portfolio.storage_capacity:
        if right.storage not in storage_names:
            raise PortfolioError(
                f"right {right.name!r} references unknown storage "
                f"{right.storage!r}")
        ent = _series(right.entitlement, periods, f"right {right.name!r} entitlement")
        if np.any(ent < 0.0):
            raise PortfolioError(f"right {right.name!r} entitlement must be >= 0")
        e[right.storage] = e.get(right.storage, np.zeros(periods)) + ent

    return AggregateClaims(ftr_injection=r, storage_profile=s, flow_claims=f,
                           capacity_claims=e)


@dataclass(frozen=True)
class SftResult:
    """Outcome of screening a portfolio for simultaneous deliverability."""

    feasible: bool
    reasons: tuple
    witness_power: dict
    witness_release: dict
    max_violation: float


def _per_period_bounds(unit, periods):
    lo = np.asarray(unit.min_volume, dtype=float)
    hi = np.asarray(unit.max_volume, dtype=float)
    lo = np.full(periods, float(lo)) if lo.ndim == 0 else lo
    hi = np.full(periods, float(hi)) if hi.ndim == 0 else hi
    return lo, hi


def simultaneous_feasibility_test(case: MpedCase, portfolio: Portfolio,
                                  tol: float = 1e-8) -> SftResult:
    """Can the network and fleet honor every right in the portfolio at once?

    Immediate rejects name the offending claim rows; otherwise the storage
    fleet is redispatched (devices and loads removed) against the implied
    injections with flow and volume claims set aside.
    """
    claims = aggregate(case, portfolio)
    m = case.network.line_count
    periods = case.periods
    limits = capacity_vector(case.network)

    reasons = []
    worst = 0.0
    if m:
        excess = claims.flow_claims - limits[:, None]
        for row, t in zip(*np.nonzero(excess > 1e-9)):
            line = row % m
            direction = "forward" if row < m else "reverse"
            reasons.append(
                f"flow claims exceed limit, line {line} {direction}, period {t}")
            worst = max(worst, float(excess[row, t]))
    for unit, _ in case.storage_units:
        ent = claims.capacity_claims.get(unit.name)
        if ent is None:
            continue
        lo, hi = _per_period_bounds(unit, periods)
        shortfall = lo - (hi - ent)
        for t in np.nonzero(shortfall > 1e-9)[0]:
            reasons.append(
                f"capacity claims exceed usable volume range for "
                f"{unit.name}, period {t}")
            worst = max(worst, float(shortfall[t]))
    if reasons:
        return SftResult(False, tuple(reasons), {}, {}, worst)

    if not case.storage_units:
        # nothing to redispatch: evaluate the implied flows directly
        if m:
            flows = build_shift_factors(case.network) @ claims.net_injection
            resid = flows + claims.flow_claims - limits[:, None]
            for row, t in zip(*np.nonzero(resid > tol * (1 + limits[:, None]))):
                line = row % m
                direction = "forward" if row < m else "reverse"
                reasons.append(
                    f"flow limit, line {line} {direction}, period {t}")
                worst = max(worst, float(resid[row, t]))
        if reasons:
            return SftResult(False, tuple(reasons), {}, {}, worst)
        return SftResult(True, (), {}, {}, 0.0)

    options = ProgramOptions(
        include_devices=False,
        extra_injection=claims.net_injection,
        flow_margin=claims.flow_claims if m else None,
        volume_margin=claims.capacity_claims or None,
        regularization=_SFT_REGULARIZATION)
    try:
        witness = solve_mped(case, options, tol=tol)
    except DispatchInfeasibleError as err:
        return SftResult(False, err.rows, {}, {}, err.max_violation)
    power = {res.name: res.power.copy() for res in witness.storage}
    release = {res.name: res.release.copy() for res in witness.storage}
    return SftResult(True, (), power, release, 0.0)


@dataclass(frozen=True)
class RightPayment:
    name: str
    kind: str
    rent: float


@dataclass(frozen=True)
class SettlementReport:
    """Rents by right, pool revenue, and the adequacy margin.

    Prices are internal (dollars per MW-period), so each rent is in dollars.
    slack = pool surplus - total rents; the pool covers the portfolio when
    slack is nonnegative to tolerance.
    """

    payments: tuple
    total_rents: float
    merchandising: object
    storage_operator_revenue: float
    slack: float

    def adequate(self, rel: float = 1e-5) -> bool:
        return self.slack >= -rel * (1.0 + abs(self.merchandising.surplus))

    def rents_by_kind(self) -> dict:
        totals = {}
        for p in self.payments:
            totals[p.kind] = totals.get(p.kind, 0.0) + p.rent
        return totals


def settle(solution: DispatchSolution, portfolio: Portfolio) -> SettlementReport:
    """Pay every right from dispatch duals and compare with pool revenue."""
    case = solution.case
    aggregate(case, portfolio)   # surface reference errors before paying
    periods = case.periods
    storage_names = {u.name: u for u, _ in case.storage_units}
    lmp = solution.lmp
    payments = []

    for right in portfolio.transmission:
        qty = _series(right.quantity, periods, f"right {right.name!r} quantity")
        spread = lmp[right.sink_bus] - lmp[right.source_bus]
        payments.append(RightPayment(right.name, "transmission",
                                     float(np.dot(spread, qty))))
    for right in portfolio.flowgate:
        qty = _series(right.quantity, periods, f"right {right.name!r} quantity")
        row = right.line + (0 if right.direction == "forward"
                            else case.network.line_count)
        payments.append(RightPayment(right.name, "flowgate",
                                     float(np.dot(solution.flow_duals[row], qty))))
    for right in portfolio.storage_power:
        profile = _series(right.profile, periods, f"right {right.name!r} profile")
        bus = storage_names[right.storage].bus
        payments.append(RightPayment(right.name, "storage_power",
                                     float(np.dot(lmp[bus], profile))))
    for right in portfolio.storage_capacity:
        ent = _series(right.entitlement, periods,
                      f"right {right.name!r} entitlement")
        eta_hi = solution.storage_result(right.storage).eta_hi
        payments.append(RightPayment(right.name, "storage_capacity",
                                     float(np.dot(eta_hi, ent))))

    total = float(sum(p.rent for p in payments))
    report = merchandising_surplus(solution)
    operator = float(np.sum(lmp * solution.storage_injection))
    return SettlementReport(
        payments=tuple(payments), total_rents=total, merchandising=report,
        storage_operator_revenue=operator, slack=report.surplus - total)


@dataclass(frozen=True)
class FsrValuation:
    """Value of letting a storage unit reshape a fixed-energy flat schedule."""

    storage: str
    energy_mwh: float
    flat_objective: float
    reallocated_objective: float

    @property
    def value(self) -> float:
        return self.flat_objective - self.reallocated_objective


def value_fsr_flat_bid_reallocation(case: MpedCase, storage: str,
                                    energy_mwh: float,
                                    tol: float = 1e-8) -> FsrValuation:
    """Cost saved by freeing a flat storage schedule to any same-energy one.

    The flat schedule injects the same power every period; the comparison
    schedule may reshape across periods but must deliver the same total
    energy.  Freeing a constraint can only help, so the value is >= 0 up to
    solver tolerance.
    """
    case.storage_unit(storage)   # raise KeyError early for unknown units
    periods, dt = case.periods, case.period_hours
    flat = np.full(periods, energy_mwh / (periods * dt))
    pinned = solve_mped(case, ProgramOptions(fixed_power={storage: flat}), tol=tol)
    freed = solve_mped(case, ProgramOptions(energy_target={storage: energy_mwh}),
                       tol=tol)
    return FsrValuation(storage=storage, energy_mwh=float(energy_mwh),
                        flat_objective=pinned.objective,
                        reallocated_objective=freed.objective)
