"""Lossless DC network model with injection-shift factors.

A network is a set of buses joined by reactive branches.  Flow limits are
enforced with a stacked sensitivity matrix holding one row per branch
direction, so forward and reverse limits may differ.  One bus is designated
as the slack; its shift-factor column is identically zero and balanced
injections determine flows uniquely.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Line",
    "Network",
    "NetworkTopologyError",
    "InjectionBalanceError",
    "build_shift_factors",
    "capacity_vector",
    "line_flows",
]

_BALANCE_TOL = 1e-6


class NetworkTopologyError(ValueError):
    """Raised for malformed or disconnected network descriptions."""


class InjectionBalanceError(ValueError):
    """Raised when a nodal injection vector does not sum to zero."""


@dataclass(frozen=True)
class Line:
    """Directed branch: positive flow runs from_bus -> to_bus."""

    from_bus: int
    to_bus: int
    reactance: float
    limit_forward: float
    limit_reverse: float

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise NetworkTopologyError(
                f"line endpoints must differ, got bus {self.from_bus} twice")
        if not self.reactance > 0.0:
            raise NetworkTopologyError(
                f"line reactance must be positive, got {self.reactance}")
        if self.limit_forward < 0.0 or self.limit_reverse < 0.0:
            raise NetworkTopologyError(
                f"line limits must be nonnegative, got "
                f"({self.limit_forward}, {self.limit_reverse})")


def _components(bus_count, lines):
    """Connected components of the undirected branch graph, as sorted tuples."""
    parent = list(range(bus_count))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for ln in lines:
        a, b = find(ln.from_bus), find(ln.to_bus)
        if a != b:
            parent[a] = b
    groups: dict[int, list[int]] = {}
    for i in range(bus_count):
        groups.setdefault(find(i), []).append(i)
    return sorted(tuple(g) for g in groups.values())


@dataclass(frozen=True)
class Network:
    bus_count: int
    lines: tuple[Line, ...]
    slack_bus: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        if self.bus_count < 1:
            raise NetworkTopologyError(f"bus_count must be >= 1, got {self.bus_count}")
        if not 0 <= self.slack_bus < self.bus_count:
            raise NetworkTopologyError(
                f"slack_bus {self.slack_bus} outside 0..{self.bus_count - 1}")
        for k, ln in enumerate(self.lines):
            for end in (ln.from_bus, ln.to_bus):
                if not 0 <= end < self.bus_count:
                    raise NetworkTopologyError(
                        f"line {k} references bus {end} outside 0..{self.bus_count - 1}")
        comps = _components(self.bus_count, self.lines)
        if len(comps) > 1:
            raise NetworkTopologyError(
                f"network is disconnected, components: {comps}")

    @property
    def line_count(self) -> int:
        return len(self.lines)


def build_shift_factors(network: Network) -> np.ndarray:
    """Stacked injection-shift factors, shape (2m, n).

    Row l gives the forward flow on line l per unit of injection at each
    bus (withdrawn at the slack); row m + l is its negation for the reverse
    limit.  The slack column is zero.
    """
    n, m = network.bus_count, network.line_count
    if m == 0:
        return np.zeros((0, n))
    b_bus = np.zeros((n, n))
    b_flow = np.zeros((m, n))
    for k, ln in enumerate(network.lines):
        w = 1.0 / ln.reactance
        f, t = ln.from_bus, ln.to_bus
        b_bus[f, f] += w
        b_bus[t, t] += w
        b_bus[f, t] -= w
        b_bus[t, f] -= w
        b_flow[k, f] = w
        b_flow[k, t] = -w
    keep = [i for i in range(n) if i != network.slack_bus]
    factors = np.zeros((m, n))
    if keep:
        reduced = b_bus[np.ix_(keep, keep)]
        factors[:, keep] = np.linalg.solve(reduced, b_flow[:, keep].T).T
    return np.vstack([factors, -factors])


def capacity_vector(network: Network) -> np.ndarray:
    """Per-direction flow limits aligned with build_shift_factors rows."""
    fwd = np.array([ln.limit_forward for ln in network.lines])
    rev = np.array([ln.limit_reverse for ln in network.lines])
    return np.concatenate([fwd, rev])


def line_flows(network: Network, injections) -> np.ndarray:
    """Forward-oriented flows for balanced injections, shape (m,) or (m, T)."""
    p = np.asarray(injections, dtype=float)
    if p.shape[0] != network.bus_count:
        raise InjectionBalanceError(
            f"injection vector has {p.shape[0]} rows, network has "
            f"{network.bus_count} buses")
    imbalance = np.atleast_1d(p.sum(axis=0))
    scale = max(1.0, float(np.max(np.abs(p))) if p.size else 1.0)
    worst = float(np.max(np.abs(imbalance)))
    if worst > _BALANCE_TOL * scale:
        raise InjectionBalanceError(
            f"injections must sum to zero per period, worst imbalance {worst:g}")
    factors = build_shift_factors(network)[: network.line_count]
    return factors @ p
