"""Regenerate the bundled example noise spectrum and power-scaling points.

Both are reconstructions: the spectrum follows the measured shape (1/f up
to a few hundred hertz, then a flat floor) and the power points follow the
published fit, with scatter. Run from the repository root.
"""

import csv
from pathlib import Path

import numpy as np

DATA = Path(__file__).resolve().parents[1] / "src" / "etcram" / "data"
SEED = 1601


def noise_spectrum(rng):
    f = np.arange(1.0, 2001.0)
    floor = 2.55e-22  # A^2/Hz; the 1/f tail lifts the 1-1.6 kHz mean to ~3e-22
    corner = 200.0
    psd = (floor + floor * corner / f) * rng.lognormal(0.0, 0.15, f.size)
    with open(DATA / "example_noise_spectrum.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frequency_hz", "psd_per_hz"])
        for fi, pi in zip(f, psd):
            w.writerow([f"{fi:.1f}", f"{pi:.6e}"])


def power_points():
    # 8 um Pt heater, 4 um Pt and MoSi2 heaters, 2 um MoSi2 heater
    pts = [(8e-6, 61.0e-3), (4e-6, 13.9e-3), (4e-6, 10.4e-3), (2e-6, 2.55e-3)]
    with open(DATA / "heater_power_scaling.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature_size_m", "power_w", "heater"])
        for (f, p), h in zip(pts, ["Pt", "Pt", "MoSi2", "MoSi2"]):
            w.writerow([f"{f:.1e}", f"{p:.4e}", h])


if __name__ == "__main__":
    noise_spectrum(np.random.default_rng(SEED))
    power_points()
