"""Hydroelectric conversion: reservoir head, tailrace, and the discharge-power
curve with its calibrated quadratic inverse.

Unit conventions: volumes in hm3, discharge in hm3 per period, power in MW,
heights in meters.  The efficiency factor absorbs density, gravity, and the
hm3-to-MWh conversion, so power = efficiency_factor * net_head * discharge.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class CalibrationError(ValueError):
    """A physical parameter violates the calibration preconditions."""


class DischargeDomainError(ValueError):
    """Discharge or power outside the curve's valid domain."""


class GeometryError(ValueError):
    """Malformed or non-monotone reservoir geometry."""


# --- reservoir geometry ----------------------------------------------------


@dataclass(frozen=True)
class ReservoirGeometry:
    """Surface height as a function of stored volume.

    shape 'planar': constant height (head insensitive to volume).
    shape 'cuboidal': vertical walls, height = floor_height + volume / base_area.
    shape 'trapezoidal': sloped banks, height = offset + scale * sqrt(volume).
    """

    shape: str
    height: float | None = None
    floor_height: float | None = None
    base_area: float | None = None
    offset: float | None = None
    scale: float | None = None

    def __post_init__(self) -> None:
        if self.shape == "planar":
            if self.height is None:
                raise GeometryError("planar geometry needs a height")
        elif self.shape == "cuboidal":
            if self.floor_height is None or self.base_area is None:
                raise GeometryError("cuboidal geometry needs floor_height and base_area")
            if self.base_area <= 0:
                raise GeometryError("base_area must be positive")
        elif self.shape == "trapezoidal":
            if self.offset is None or self.scale is None:
                raise GeometryError("trapezoidal geometry needs offset and scale")
            if self.scale < 0:
                raise GeometryError("trapezoidal scale must be >= 0 (height monotone in volume)")
        else:
            raise GeometryError(f"unknown geometry shape {self.shape!r}")


def forebay_height(geometry: ReservoirGeometry, volume):
    """Surface height at the given stored volume (volume >= 0)."""
    v = np.asarray(volume, dtype=float)
    if np.any(v < 0):
        raise GeometryError("volume must be >= 0")
    if geometry.shape == "planar":
        out = np.full_like(v, geometry.height)
    elif geometry.shape == "cuboidal":
        out = geometry.floor_height + v / geometry.base_area
    else:
        out = geometry.offset + geometry.scale * np.sqrt(v)
    return float(out) if np.isscalar(volume) or np.ndim(volume) == 0 else out


def fit_trapezoidal(waypoints) -> ReservoirGeometry:
    """Least-squares fit of height = offset + scale*sqrt(volume) to (volume, height) pairs."""
    pts = np.asarray(waypoints, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise GeometryError("need at least two (volume, height) waypoints")
    v, h = pts[:, 0], pts[:, 1]
    if np.any(v < 0):
        raise GeometryError("waypoint volumes must be >= 0")
    if np.unique(v).size < 2:
        raise GeometryError("waypoint volumes must not be all identical")
    basis = np.column_stack([np.ones_like(v), np.sqrt(v)])
    coef, *_ = np.linalg.lstsq(basis, h, rcond=None)
    offset, scale = float(coef[0]), float(coef[1])
    if scale < -1e-12:
        raise GeometryError("fitted surface height decreases with volume")
    return ReservoirGeometry(shape="trapezoidal", offset=offset, scale=max(scale, 0.0))


# --- plant calibration -----------------------------------------------------


def calibrate(efficiency_factor: float, forebay: float, tailrace_intercept: float,
              tailrace_slope: float, penstock_loss: float) -> tuple[float, float, float, float]:
    """Derive the power curve u(q) = -power_quad*q^2 + power_lin*q and the
    quadratic inverse q(u) = discharge_quad*u^2 + discharge_lin*u.

    Returns (power_quad, power_lin, discharge_quad, discharge_lin).
    """
    if efficiency_factor <= 0:
        raise CalibrationError("efficiency_factor must be > 0")
    if tailrace_slope < 0:
        raise CalibrationError("tailrace_slope must be >= 0")
    if penstock_loss < 0:
        raise CalibrationError("penstock_loss must be >= 0")
    if not tailrace_intercept > penstock_loss:
        raise CalibrationError(
            f"tailrace_intercept ({tailrace_intercept}) must exceed penstock_loss ({penstock_loss})")
    if not forebay > tailrace_intercept:
        raise CalibrationError(
            f"forebay_height ({forebay}) must exceed tailrace_intercept ({tailrace_intercept})")
    net_head = forebay - tailrace_intercept - penstock_loss
    if net_head <= 0:
        raise CalibrationError(
            f"net head (forebay - tailrace_intercept - penstock_loss = {net_head}) must be positive")
    power_quad = efficiency_factor * tailrace_slope
    power_lin = efficiency_factor * net_head
    discharge_quad = power_quad / power_lin ** 3
    discharge_lin = 1.0 / power_lin
    return power_quad, power_lin, discharge_quad, discharge_lin


@dataclass(frozen=True)
class PlantParameters:
    """Calibrated plant: physical inputs plus the derived conversion curves.

    power_cap is the effective limit min(declared_cap, peak of the power curve).
    """

    efficiency_factor: float
    forebay: float
    tailrace_intercept: float
    tailrace_slope: float
    penstock_loss: float
    power_quad: float
    power_lin: float
    discharge_quad: float
    discharge_lin: float
    power_cap: float
    declared_cap: float

    @classmethod
    def build(cls, efficiency_factor: float, forebay: float, tailrace_intercept: float,
              tailrace_slope: float, penstock_loss: float, power_cap: float) -> "PlantParameters":
        if power_cap <= 0:
            raise CalibrationError("power_cap must be > 0")
        pq, pl, dq, dl = calibrate(
            efficiency_factor, forebay, tailrace_intercept, tailrace_slope, penstock_loss)
        vertex = np.inf if pq == 0 else pl ** 2 / (4.0 * pq)
        return cls(
            efficiency_factor=efficiency_factor, forebay=forebay,
            tailrace_intercept=tailrace_intercept, tailrace_slope=tailrace_slope,
            penstock_loss=penstock_loss, power_quad=pq, power_lin=pl,
            discharge_quad=dq, discharge_lin=dl,
            power_cap=float(min(power_cap, vertex)), declared_cap=float(power_cap))

    @property
    def peak_power(self) -> float:
        """Top of the power curve; inf for a volume-insensitive tailrace."""
        if self.power_quad == 0:
            return np.inf
        return self.power_lin ** 2 / (4.0 * self.power_quad)


def tailrace_height(plant: PlantParameters, discharge):
    """Downstream water level at the given discharge rate."""
    q = np.asarray(discharge, dtype=float)
    if np.any(q < 0):
        raise DischargeDomainError("discharge must be >= 0")
    out = plant.tailrace_intercept + plant.tailrace_slope * q
    return float(out) if np.ndim(discharge) == 0 else out


def max_power(plant: PlantParameters) -> float:
    """Effective power limit: declared cap clamped at the power-curve peak."""
    return plant.power_cap


def power_from_discharge(plant: PlantParameters, discharge):
    """u(q) = -power_quad q^2 + power_lin q on the rising branch of the curve."""
    q = np.asarray(discharge, dtype=float)
    if np.any(q < 0):
        raise DischargeDomainError("discharge must be >= 0")
    if plant.power_quad > 0:
        q_top = plant.power_lin / (2.0 * plant.power_quad)
        if np.any(q > q_top * (1 + 1e-12) + 1e-12):
            raise DischargeDomainError(
                f"discharge beyond the rising branch (limit {q_top:.6g})")
    out = -plant.power_quad * q ** 2 + plant.power_lin * q
    return float(out) if np.ndim(discharge) == 0 else out


def discharge_from_power_exact(plant: PlantParameters, power):
    """Exact inverse of the power curve (smaller root), stable as power_quad -> 0."""
    u = np.asarray(power, dtype=float)
    if np.any(u < 0):
        raise DischargeDomainError("power must be >= 0")
    peak = plant.peak_power
    if np.any(u > peak * (1 + 1e-12) + 1e-9):
        raise DischargeDomainError(f"power exceeds the curve peak ({peak:.6g})")
    disc = np.maximum(plant.power_lin ** 2 - 4.0 * plant.power_quad * np.minimum(u, peak), 0.0)
    out = 2.0 * u / (plant.power_lin + np.sqrt(disc))
    return float(out) if np.ndim(power) == 0 else out


def discharge_from_power_quadratic(plant: PlantParameters, power):
    """Calibrated quadratic inverse q(u) = discharge_quad u^2 + discharge_lin u."""
    u = np.asarray(power, dtype=float)
    if np.any(u < 0):
        raise DischargeDomainError("power must be >= 0")
    out = plant.discharge_quad * u ** 2 + plant.discharge_lin * u
    return float(out) if np.ndim(power) == 0 else out
