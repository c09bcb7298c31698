"""Heater thermometry from a linear resistance-temperature calibration.

``alpha`` is a slope in ohms per kelvin, so a temperature rise is a
resistance change divided by alpha.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..device import AMBIENT_K
from ..errors import DomainError

# Measured slopes for the three heater sizes (ohm/K).
REFERENCE_ALPHA = {"8um": 0.0162, "4um": 0.0190, "2um": 0.0208}


@dataclass(frozen=True)
class TcrCalibration:
    alpha: float
    r0: float
    size_label: str = ""

    def __post_init__(self):
        if not (self.alpha > 0 and self.r0 > 0):
            raise DomainError("alpha and r0 must be > 0")


def tcr_fit(pairs, size_label: str = "", reference_temperature: float = AMBIENT_K) -> TcrCalibration:
    """Least-squares R = r0 + alpha * (T - reference_temperature)."""
    pts = np.asarray(pairs, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise DomainError("need at least two (temperature, resistance) pairs")
    if np.unique(pts[:, 0]).size < 2:
        raise DomainError("need at least two distinct temperatures")
    alpha, r0 = np.polyfit(pts[:, 0] - reference_temperature, pts[:, 1], 1)
    return TcrCalibration(float(alpha), float(r0), size_label)


def temperature_from_resistance(cal: TcrCalibration, r):
    """Temperature rise in kelvin above the calibration reference."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("resistance must be > 0")
    out = (r - cal.r0) / cal.alpha
    return float(out) if out.ndim == 0 else out


def read_calibration(path) -> list[tuple[float, float]]:
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"temperature_k", "resistance_ohms"} <= set(rows[0]):
        raise DomainError(f"{path}: expected columns temperature_k,resistance_ohms")
    return [(float(r["temperature_k"]), float(r["resistance_ohms"])) for r in rows]
