"""Closed-loop programming, sigma_G characterisation, state counting and
update-map construction."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .device import (
    DeviceState,
    ErrorModel,
    PulseSpec,
    UpdateMap,
    apply_pulse,
    sigma_at,
)
from .errors import DomainError

# Ladder voltages used for closed-loop state selection between 10 nS and
# 50 nS. The +2.4/+2.2/+2.0 V rungs extend the single +2.6 V coarse step so
# that upward corrections below a few percent exist.
POTENTIATION_VOLTAGES = (2.6, 2.4, 2.2, 2.0)
DEPRESSION_VOLTAGES = (-2.3, -2.1, -2.0, -1.9, -1.8)
LADDER_DURATIONS = (50e-6, 20e-6, 10e-6, 5e-6, 2e-6, 1e-6, 500e-9, 200e-9, 100e-9)


def _ladder(voltages, durations):
    return tuple(PulseSpec(v, t) for v in voltages for t in durations)


@dataclass(frozen=True)
class ProgramPolicy:
    tolerance: float = 0.006
    max_pulses: int = 10
    potentiation: tuple[PulseSpec, ...] = _ladder(POTENTIATION_VOLTAGES, LADDER_DURATIONS)
    depression: tuple[PulseSpec, ...] = _ladder(DEPRESSION_VOLTAGES, LADDER_DURATIONS)
    one_shot: bool = False

    def __post_init__(self):
        if not self.tolerance > 0:
            raise DomainError("tolerance must be > 0")
        if self.max_pulses < 1:
            raise DomainError("max_pulses must be >= 1")
        if not self.potentiation or not self.depression:
            raise DomainError("pulse ladders must be non-empty")
        if any(p.voltage <= 0 for p in self.potentiation) or any(p.voltage >= 0 for p in self.depression):
            raise DomainError("potentiation ladder needs V > 0, depression ladder V < 0")


@dataclass
class ProgramResult:
    pulses_used: int
    final_conductance: float
    final_error_fraction: float
    trajectory: list[tuple[int, float]]
    converged: bool
    target: float = math.nan
    final_state: DeviceState | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("final_state")
        d["trajectory"] = [[i, g] for i, g in self.trajectory]
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    CSV_FIELDS = ("target", "pulses_used", "final_conductance", "final_error_fraction", "converged")

    def csv_row(self) -> dict:
        return {k: getattr(self, k) for k in self.CSV_FIELDS}


def write_results_csv(results: Sequence[ProgramResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=ProgramResult.CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in results:
            w.writerow(r.csv_row())


def _pick(g, need, ladder, fracs, model, k_sigma, one_shot):
    """Index of the ladder pulse to apply for a remaining change ``need``."""
    limit = k_sigma * sigma_at(model, g)
    steps = np.abs(g * fracs)
    steps = np.where(steps > limit, steps, 0.0)
    usable = steps > 0
    if one_shot and usable.any():
        # lookup-table write: closest expected step, overshoot allowed
        cand = np.where(usable, np.abs(steps - abs(need)), np.inf)
        return int(np.argmin(cand))
    fits = usable & (steps <= abs(need))
    if fits.any():
        return int(np.argmax(np.where(fits, steps, -1.0)))
    if usable.any():
        return int(np.argmin(np.where(usable, steps, np.inf)))
    return len(ladder) - 1


def write_verify(state: DeviceState, target: float, policy: ProgramPolicy, update_map: UpdateMap,
                 rng: np.random.Generator | None = None, relative_noise: float = 0.10) -> ProgramResult:
    """Read, compare with ``target``, pulse; repeat until within tolerance.

    The pulse is the largest ladder rung whose expected step does not carry
    the state past the target. When no rung fits, the smallest resolvable
    rung is used (it overshoots, and the next iteration comes back).
    """
    params = state.params
    if not (params.g_min <= target <= params.g_max):
        raise DomainError(f"target {target} outside [{params.g_min}, {params.g_max}]")
    model = params.error_model
    k = update_map.significance_sigma_multiple
    fr_pot = np.array([update_map.fraction(p.voltage, p.duration) for p in policy.potentiation])
    fr_dep = np.array([update_map.fraction(p.voltage, p.duration) for p in policy.depression])

    trajectory = [(0, state.conductance)]
    pulses = 0
    first = True
    while True:
        g = state.conductance
        err = abs(g - target) / target
        if err <= policy.tolerance or pulses >= policy.max_pulses:
            break
        need = target - g
        if need > 0:
            ladder, fr = policy.potentiation, fr_pot
        else:
            ladder, fr = policy.depression, fr_dep
        i = _pick(g, need, ladder, fr, model, k, policy.one_shot and first)
        first = False
        state = apply_pulse(state, ladder[i], update_map, relative_noise, rng)
        pulses += 1
        trajectory.append((pulses, state.conductance))

    g = state.conductance
    err = abs(g - target) / target
    return ProgramResult(
        pulses_used=pulses,
        final_conductance=g,
        final_error_fraction=err,
        trajectory=trajectory,
        converged=err <= policy.tolerance,
        target=target,
        final_state=state,
    )


@dataclass
class SigmaCharacterization:
    sigma: float
    samples: np.ndarray
    n_failed_writes: int
    results: list[ProgramResult]


def characterize_sigma(device_factory: Callable[[], DeviceState], target: float, policy: ProgramPolicy,
                       update_map: UpdateMap, rng: np.random.Generator, n_writes: int = 10,
                       n_reads: int = 100, relative_noise: float = 0.10,
                       read_noise_share: float = 0.5) -> SigmaCharacterization:
    """Write ``target`` n_writes times from a fresh state, read each n_reads times.

    Each read is perturbed by the read share of sigma_G: a Gaussian with
    variance ``read_noise_share * sigma_G(G)**2``. The reported sigma is
    the standard deviation of all n_writes * n_reads samples; failed writes
    stay in the sample and are counted.
    """
    if n_writes < 2 or n_reads < 2:
        raise DomainError("need n_writes >= 2 and n_reads >= 2")
    if not 0 <= read_noise_share <= 1:
        raise DomainError("read_noise_share must lie in [0, 1]")
    samples = np.empty((n_writes, n_reads))
    results = []
    for w in range(n_writes):
        res = write_verify(device_factory(), target, policy, update_map, rng, relative_noise)
        results.append(res)
        g = res.final_conductance
        s_read = math.sqrt(read_noise_share) * sigma_at(res.final_state.params.error_model, g)
        if s_read > 0:
            samples[w] = g + rng.normal(0.0, s_read, n_reads)
        else:
            samples[w] = g
    flat = samples.ravel()
    # centring on one sample keeps identical samples at exactly zero spread
    return SigmaCharacterization(
        sigma=float(np.std(flat - flat[0], ddof=1)),
        samples=flat,
        n_failed_writes=sum(not r.converged for r in results),
        results=results,
    )


def count_states(model: ErrorModel, g_lo: float, g_hi: float, points_per_decade: int = 1000) -> float:
    """Number of distinguishable levels, the integral of dG / sigma_G(G).

    Trapezoid rule in ln G on a lattice of ``points_per_decade`` nodes per
    decade that is shared by every call, with the anchor conductances and
    the end points inserted. The shared lattice keeps counts additive over
    adjacent ranges; at 1000 nodes per decade the split of a single lattice
    cell moves the total by well under 1e-6.
    """
    if not (0 < g_lo < g_hi):
        raise DomainError(f"need 0 < g_lo < g_hi, got {g_lo}, {g_hi}")
    lo, hi = math.log10(g_lo), math.log10(g_hi)
    k0, k1 = math.floor(lo * points_per_decade), math.ceil(hi * points_per_decade)
    lattice = np.arange(k0, k1 + 1) / points_per_decade
    anchors = np.log10([a[0] for a in model.anchors])
    x = np.concatenate([[lo, hi], lattice[(lattice > lo) & (lattice < hi)], anchors[(anchors > lo) & (anchors < hi)]])
    x = np.unique(x)
    g = 10.0 ** x
    g[0], g[-1] = g_lo, g_hi
    f = g / sigma_at(model, g)
    u = np.log(g)
    return float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(u)))


@dataclass
class SimulatedDevice:
    """A device under test for update-map measurement.

    Each call resets to ``state``, applies one pulse using the hidden
    ``response`` map and returns the measured fractional change.
    """

    state: DeviceState
    response: UpdateMap
    relative_noise: float = 0.0

    def __call__(self, pulse: PulseSpec, rng=None) -> float:
        after = apply_pulse(self.state, pulse, self.response, self.relative_noise, rng)
        g0 = self.state.conductance
        return (after.conductance - g0) / g0


def _load_measurements(path):
    if not os.path.exists(path):
        raise OSError(f"update-map data file not found: {path}")
    sums: dict[tuple[float, float], list[float]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"v_volts", "t_seconds", "delta_fraction"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise OSError(f"{path}: expected columns v_volts,t_seconds,delta_fraction")
        for r in reader:
            key = (float(r["v_volts"]), float(r["t_seconds"]))
            sums.setdefault(key, []).append(float(r["delta_fraction"]))
    return {k: float(np.mean(v)) for k, v in sums.items()}


def build_update_map(source, voltage_grid: Sequence[float], duration_grid: Sequence[float], model: ErrorModel,
                     g0: float | None = None, n_trials: int = 5, rng: np.random.Generator | None = None,
                     significance_sigma_multiple: float = 3.0) -> UpdateMap:
    """Mean fractional update per (V, t) cell from a fixed initial state.

    ``source`` is either a callable ``source(pulse, rng) -> dG/G0`` (for
    example :class:`SimulatedDevice`) or a path to a CSV of repeated
    measurements ``v_volts,t_seconds,delta_fraction``. Cells whose mean
    change is within ``k * sigma_G(g0)`` are set to zero, which traces the
    boundary of the significant-update region.
    """
    v = np.asarray(voltage_grid, dtype=float)
    t = np.asarray(duration_grid, dtype=float)
    if v.size == 0 or t.size == 0:
        raise DomainError("grids must be non-empty")
    if np.any(np.diff(v) <= 0) or np.any(np.diff(t) <= 0):
        raise DomainError("grids must be ascending")
    if g0 is None:
        if isinstance(source, SimulatedDevice):
            g0 = source.state.conductance
        else:
            raise DomainError("g0 is required unless the source is a SimulatedDevice")

    delta = np.zeros((v.size, t.size))
    if isinstance(source, (str, os.PathLike)):
        meas = _load_measurements(source)
        for i, vi in enumerate(v):
            for j, tj in enumerate(t):
                try:
                    delta[i, j] = meas[(float(vi), float(tj))]
                except KeyError:
                    raise DomainError(f"no measurement for ({vi} V, {tj} s)") from None
    else:
        for i, vi in enumerate(v):
            for j, tj in enumerate(t):
                pulse = PulseSpec(float(vi), float(tj))
                delta[i, j] = np.mean([source(pulse, rng) for _ in range(n_trials)])

    limit = significance_sigma_multiple * sigma_at(model, g0)
    delta[np.abs(delta * g0) <= limit] = 0.0
    return UpdateMap(v, t, delta, significance_sigma_multiple)
