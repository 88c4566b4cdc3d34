"""Storage volume accounting over discrete periods.

Volumes evolve from an initial fill by exogenous inflow, own releases, and
lagged arrivals from upstream units in a cascade.  The helpers here build
the cumulative-sum matrices used in optimization rows and evaluate the
resulting trajectories directly for reporting and verification.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CascadeError",
    "CascadeLink",
    "build_cumulative_matrix",
    "build_arrival_matrix",
    "validate_cascade",
    "storage_trajectory",
]


class CascadeError(ValueError):
    """Raised for malformed upstream/downstream relations."""


@dataclass(frozen=True)
class CascadeLink:
    """Water released at upstream reaches downstream after lag whole periods."""

    upstream: str
    downstream: str
    lag: int

    def __post_init__(self):
        if self.upstream == self.downstream:
            raise CascadeError(f"unit {self.upstream!r} cannot feed itself")
        if not isinstance(self.lag, int) or self.lag < 0:
            raise CascadeError(
                f"lag must be a nonnegative integer, got {self.lag!r}")


def build_cumulative_matrix(periods: int) -> np.ndarray:
    """Matrix M with M[t, s] = -1 for s <= t, so M @ w = -cumsum(w)."""
    if periods < 1:
        raise ValueError(f"periods must be >= 1, got {periods}")
    return -np.tril(np.ones((periods, periods)))


def build_arrival_matrix(periods: int, lag: int) -> np.ndarray:
    """Matrix A with A[t, s] = 1 for s + lag <= t, accumulating lagged arrivals."""
    if lag < 0:
        raise ValueError(f"lag must be >= 0, got {lag}")
    a = np.zeros((periods, periods))
    for t in range(periods):
        a[t, : max(0, t - lag + 1)] = 1.0
    return a


def validate_cascade(names, links) -> tuple[str, ...]:
    """Check link endpoints and acyclicity; return names upstream-first.

    Raises CascadeError naming any unknown endpoint, duplicated link, or the
    units forming a cycle.
    """
    known = list(names)
    if len(set(known)) != len(known):
        dupes = sorted({n for n in known if known.count(n) > 1})
        raise CascadeError(f"duplicate unit names: {dupes}")
    seen_pairs = set()
    succ: dict[str, list[str]] = {n: [] for n in known}
    indegree = {n: 0 for n in known}
    for link in links:
        for end in (link.upstream, link.downstream):
            if end not in indegree:
                raise CascadeError(f"link references unknown unit {end!r}")
        pair = (link.upstream, link.downstream)
        if pair in seen_pairs:
            raise CascadeError(f"duplicate link {link.upstream!r} -> {link.downstream!r}")
        seen_pairs.add(pair)
        succ[link.upstream].append(link.downstream)
        indegree[link.downstream] += 1

    order = []
    ready = sorted(n for n, d in indegree.items() if d == 0)
    while ready:
        n = ready.pop(0)
        order.append(n)
        for d in sorted(succ[n]):
            indegree[d] -= 1
            if indegree[d] == 0:
                ready.append(d)
        ready.sort()
    if len(order) < len(known):
        cyclic = sorted(n for n, d in indegree.items() if d > 0)
        raise CascadeError(f"cascade contains a cycle through units: {cyclic}")
    return tuple(order)


def storage_trajectory(initial_volume, inflow, own_release, upstream=()) -> np.ndarray:
    """End-of-period volumes from releases and lagged upstream arrivals.

    inflow and own_release are (T,) volume series; upstream is a sequence of
    (release_series, lag) pairs feeding this unit.
    """
    y = np.asarray(inflow, dtype=float)
    w = np.asarray(own_release, dtype=float)
    if y.shape != w.shape or y.ndim != 1:
        raise ValueError(
            f"inflow and own_release must be matching (T,) series, got "
            f"{y.shape} and {w.shape}")
    periods = y.shape[0]
    net = y - w
    for series, lag in upstream:
        s = np.asarray(series, dtype=float)
        if s.shape != (periods,):
            raise ValueError(
                f"upstream series has shape {s.shape}, expected ({periods},)")
        if lag < 0:
            raise ValueError(f"lag must be >= 0, got {lag}")
        arrivals = np.zeros(periods)
        if lag < periods:
            arrivals[lag:] = s[: periods - lag]
        net += arrivals
    return initial_volume + np.cumsum(net)
