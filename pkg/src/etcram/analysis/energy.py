"""Peripheral-energy comparison between input encodings and devices."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import DomainError


def encoding_energy_factor(baseline_cycles: float = 8, target_cycles: float = 2, overhead: float = 0.36) -> float:
    """Energy ratio of a baseline encoding to a multi-level one.

    Output-circuit energy is paid once per cycle; the multi-level drivers
    add ``overhead`` (as a fraction of the output energy) to each of their
    cycles.
    """
    if baseline_cycles <= 0 or target_cycles <= 0 or overhead < 0:
        raise DomainError("cycle counts must be > 0 and overhead >= 0")
    return baseline_cycles / (target_cycles * (1.0 + overhead))


def driver_overhead_fraction(driver_energy: float = 110e-12, drivers_measured: int = 1152,
                             adc_energy: float = 300e-12, adcs_measured: int = 256,
                             inputs: int = 4608, outputs: int = 512,
                             output_circuits_per_column: float = 2.0) -> float:
    """Input-driver energy as a fraction of output-circuit energy per cycle.

    Per-unit energies are scaled to ``inputs`` drivers and ``outputs``
    converters. ``output_circuits_per_column = 2`` counts a virtual-ground
    amplifier costing about as much as the converter on every column.
    """
    drivers = driver_energy / drivers_measured * inputs
    adcs = adc_energy / adcs_measured * outputs
    return drivers / (adcs * output_circuits_per_column)


@dataclass(frozen=True)
class EnergyScenario:
    cycles: int = 2
    per_input_overhead_fraction: float = 0.36
    array_size_ratio: float = 1.0
    label: str = ""
    baseline_cycles: int = 8

    def __post_init__(self):
        if self.cycles < 1 or self.baseline_cycles < 1:
            raise DomainError("cycle counts must be >= 1")
        if self.per_input_overhead_fraction < 0 or self.array_size_ratio < 0:
            raise DomainError("fractions and ratios must be >= 0")

    @property
    def encoding_factor(self) -> float:
        return encoding_energy_factor(self.baseline_cycles, self.cycles, self.per_input_overhead_fraction)


def overall_energy_advantage(scenario: EnergyScenario, linearity_applies: bool) -> float:
    """Array-size advantage, times the encoding gain when the comparison
    device is known to need 1-bit inputs."""
    return scenario.array_size_ratio * (scenario.encoding_factor if linearity_applies else 1.0)


# Iso-accuracy array-size ratios versus each device, and whether the
# comparison device is restricted to binary inputs.
REFERENCE_SCENARIOS = {
    "sonos": (EnergyScenario(array_size_ratio=3.2, label="sonos"), True),
    "pcm": (EnergyScenario(array_size_ratio=22.0, label="pcm"), True),
    "memristor": (EnergyScenario(array_size_ratio=64.0, label="memristor"), False),
}


def reference_advantage(device: str) -> float:
    try:
        scenario, linear = REFERENCE_SCENARIOS[device.lower()]
    except KeyError:
        raise DomainError(f"no energy scenario for {device!r}; choose from {sorted(REFERENCE_SCENARIOS)}") from None
    return overall_energy_advantage(scenario, linear)


def truncate_sig(x: float, digits: int) -> float:
    """``x`` cut (not rounded) to ``digits`` significant figures."""
    if x == 0:
        return 0.0
    e = math.floor(math.log10(abs(x))) - digits + 1
    # the epsilon keeps exact decimals such as 9.4 from dropping a digit
    return math.copysign(math.floor(abs(x) / 10.0**e * (1 + 1e-12)) * 10.0**e, x)


def round_sig(x: float, digits: int) -> float:
    if x == 0:
        return 0.0
    return round(x, digits - 1 - math.floor(math.log10(abs(x))))
