"""Energy arithmetic, noise spectra and heater thermometry."""

from .energy import (
    REFERENCE_SCENARIOS,
    EnergyScenario,
    driver_overhead_fraction,
    encoding_energy_factor,
    overall_energy_advantage,
    reference_advantage,
)
from .noise import NoiseSpectrum, example_spectrum, integrate_noise, psd_estimate
from .tcr import TcrCalibration, tcr_fit, temperature_from_resistance

__all__ = [
    "REFERENCE_SCENARIOS", "EnergyScenario", "NoiseSpectrum", "TcrCalibration", "driver_overhead_fraction",
    "encoding_energy_factor", "example_spectrum", "integrate_noise", "overall_energy_advantage",
    "psd_estimate", "reference_advantage", "tcr_fit", "temperature_from_resistance",
]
