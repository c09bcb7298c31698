"""Behavioral model of a single ETCRAM cell.

The cell is a conductance state machine: write pulses move the channel
conductance by a fraction looked up in a measured (or synthetic) update map,
reads are ideal Ohmic, and all stochasticity is summarised by the
state-dependent conductance error sigma_G(G). SONOS, PCM and memristor
stand-ins only carry a conductance range and an error curve.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from importlib import resources
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError, GridClampWarning, OhmicWindowWarning

G_FLOOR = 1e-13
OHMIC_WINDOW = 0.05
AMBIENT_K = 293.15


@dataclass(frozen=True)
class ErrorModel:
    """sigma_G(G) as anchor points, interpolated linearly in log-log space."""

    anchors: tuple[tuple[float, float], ...]

    def __post_init__(self):
        anchors = tuple((float(g), float(s)) for g, s in self.anchors)
        if not anchors:
            raise DomainError("error model needs at least one anchor")
        g = np.array([a[0] for a in anchors])
        s = np.array([a[1] for a in anchors])
        if np.any(g <= 0) or np.any(s <= 0):
            raise DomainError("anchor conductances and sigmas must be > 0")
        if np.any(np.diff(g) <= 0):
            raise DomainError("anchors must be strictly ascending in conductance")
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "_log_g", np.log(g))
        object.__setattr__(self, "_log_s", np.log(s))

    @classmethod
    def from_csv(cls, path) -> "ErrorModel":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or set(reader.fieldnames) != {"g_siemens", "sigma_siemens"}:
                raise DomainError(f"{path}: expected header g_siemens,sigma_siemens")
            rows = [(float(r["g_siemens"]), float(r["sigma_siemens"])) for r in reader]
        return cls(tuple(rows))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("g_siemens,sigma_siemens\n")
            for g, s in self.anchors:
                fh.write(f"{float(g)!r},{float(s)!r}\n")

    def scaled(self, k: float) -> "ErrorModel":
        return ErrorModel(tuple((g, s * k) for g, s in self.anchors))

    def sigma(self, g):
        return sigma_at(self, g)


def sigma_at(model: ErrorModel, g):
    """Conductance error at ``g`` (scalar or array).

    Constant beyond the outermost anchors, exact at the anchors.
    """
    arr = np.asarray(g, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("sigma_at requires g > 0")
    if len(model.anchors) == 1:
        out = np.full(arr.shape, model.anchors[0][1])
    else:
        out = np.exp(np.interp(np.log(arr), model._log_g, model._log_s))
        # exp(log(x)) can be off by an ulp; anchors are returned verbatim
        for gi, si in model.anchors:
            out = np.where(arr == gi, si, out)
    return float(out) if np.ndim(out) == 0 else out


def _zero_error_model() -> ErrorModel:
    return ErrorModel(((1.0, 1e-300),))


ZERO_ERROR = _zero_error_model()


@dataclass(frozen=True)
class DeviceParams:
    g_min: float
    g_max: float
    error_model: ErrorModel
    iv_linear: bool = False
    label: str = ""

    def __post_init__(self):
        if not (0 < self.g_min < self.g_max):
            raise DomainError(f"need 0 < g_min < g_max, got {self.g_min}, {self.g_max}")

    def with_error_model(self, model: ErrorModel) -> "DeviceParams":
        return replace(self, error_model=model)


@dataclass(frozen=True)
class PulseSpec:
    voltage: float
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise DomainError("pulse duration must be > 0")


@dataclass(frozen=True)
class DeviceState:
    conductance: float
    params: DeviceParams
    write_count: int = 0

    def __post_init__(self):
        if not self.conductance > 0:
            raise DomainError("conductance must be > 0")
        if self.write_count < 0:
            raise DomainError("write_count must be non-negative")


@dataclass(frozen=True)
class RetentionParams:
    fraction_per_decade: float
    onset_time: float
    reference_temperature: float = 473.15

    def __post_init__(self):
        if self.fraction_per_decade < 0:
            raise DomainError("fraction_per_decade must be >= 0")
        if not self.onset_time > 0:
            raise DomainError("onset_time must be > 0")

    @classmethod
    def from_loss(cls, loss_fraction, elapsed, onset_time=60.0, reference_temperature=473.15):
        """Calibrate so that ``elapsed`` seconds produce ``loss_fraction``."""
        decades = math.log10(1.0 + elapsed / onset_time)
        return cls(loss_fraction / decades, onset_time, reference_temperature)


# Retention at 200 C: 10.3 % loss after ~20 h in the 300 nS state,
# 0.09 % after ~3 h in the 500 uS state.
RETENTION_LOW_STATE = RetentionParams.from_loss(0.103, 20 * 3600.0)
RETENTION_HIGH_STATE = RetentionParams.from_loss(0.0009, 3 * 3600.0)


@dataclass(frozen=True, eq=False)
class UpdateMap:
    """Fractional conductance change dG/G0 tabulated over (voltage, duration).

    ``delta_fraction[i, j]`` belongs to ``voltage_grid[i]`` and
    ``duration_grid[j]``. Interpolation is bilinear in (V, log10 t).
    """

    voltage_grid: np.ndarray
    duration_grid: np.ndarray
    delta_fraction: np.ndarray
    significance_sigma_multiple: float = 3.0

    def __post_init__(self):
        v = np.array(self.voltage_grid, dtype=float)
        t = np.array(self.duration_grid, dtype=float)
        d = np.array(self.delta_fraction, dtype=float)
        if v.ndim != 1 or t.ndim != 1 or v.size == 0 or t.size == 0:
            raise DomainError("grids must be non-empty 1-D sequences")
        if np.any(np.diff(v) <= 0) or np.any(np.diff(t) <= 0):
            raise DomainError("grids must be strictly ascending")
        if np.any(t <= 0):
            raise DomainError("durations must be > 0")
        if d.shape != (v.size, t.size):
            raise DomainError(f"delta_fraction shape {d.shape} != {(v.size, t.size)}")
        if not np.all(np.isfinite(d)):
            raise DomainError("delta_fraction must be finite")
        vv = np.broadcast_to(v[:, None], d.shape)
        if np.any((vv > 0) & (d < 0)) or np.any((vv < 0) & (d > 0)):
            raise DomainError("update sign must follow the write-voltage sign")
        for name, arr in (("voltage_grid", v), ("duration_grid", t), ("delta_fraction", d)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def fraction(self, voltage: float, duration: float, warn: bool = True) -> float:
        v, t = self.voltage_grid, self.duration_grid
        vq, tq = float(voltage), float(duration)
        if not (v[0] <= vq <= v[-1]) or not (t[0] <= tq <= t[-1]):
            if warn:
                warnings.warn(
                    f"pulse ({vq} V, {tq} s) outside update map; clamped to grid edge",
                    GridClampWarning,
                    stacklevel=3,
                )
            vq = min(max(vq, v[0]), v[-1])
            tq = min(max(tq, t[0]), t[-1])
        i, wi = _bracket(v, vq)
        j, wj = _bracket(np.log10(t), math.log10(tq))
        d = self.delta_fraction
        i1, j1 = min(i + 1, v.size - 1), min(j + 1, t.size - 1)
        return float(
            (1 - wi) * (1 - wj) * d[i, j]
            + wi * (1 - wj) * d[i1, j]
            + (1 - wi) * wj * d[i, j1]
            + wi * wj * d[i1, j1]
        )

    @classmethod
    def from_csv(cls, path, significance_sigma_multiple=3.0) -> "UpdateMap":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or set(reader.fieldnames) != {"v_volts", "t_seconds", "delta_fraction"}:
                raise DomainError(f"{path}: expected header v_volts,t_seconds,delta_fraction")
            rows = [(float(r["v_volts"]), float(r["t_seconds"]), float(r["delta_fraction"])) for r in reader]
        vs = sorted({r[0] for r in rows})
        ts = sorted({r[1] for r in rows})
        if len(rows) != len(vs) * len(ts):
            raise DomainError(f"{path}: update map is not a rectangular grid")
        vi = {x: k for k, x in enumerate(vs)}
        ti = {x: k for k, x in enumerate(ts)}
        d = np.full((len(vs), len(ts)), np.nan)
        for v, t, f in rows:
            d[vi[v], ti[t]] = f
        if np.isnan(d).any():
            raise DomainError(f"{path}: duplicate or missing grid cells")
        return cls(np.array(vs), np.array(ts), d, significance_sigma_multiple)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("v_volts,t_seconds,delta_fraction\n")
            for i, v in enumerate(self.voltage_grid):
                for j, t in enumerate(self.duration_grid):
                    fh.write(f"{float(v)!r},{float(t)!r},{float(self.delta_fraction[i, j])!r}\n")


def _bracket(grid, x):
    if grid.size == 1:
        return 0, 0.0
    i = int(np.searchsorted(grid, x, side="right") - 1)
    i = min(max(i, 0), grid.size - 2)
    w = (x - grid[i]) / (grid[i + 1] - grid[i])
    return i, float(min(max(w, 0.0), 1.0))


def read_current(state: DeviceState, v_read: float, window: float = OHMIC_WINDOW,
                 allow_nonlinear: bool = False) -> float:
    """Channel current for a read bias; reads are noiseless (sigma_G covers them)."""
    if abs(v_read) > window and not allow_nonlinear:
        warnings.warn(
            f"|v_read| = {abs(v_read)} V exceeds the Ohmic window of {window} V",
            OhmicWindowWarning,
            stacklevel=2,
        )
    return state.conductance * v_read


def nominal_delta(state: DeviceState, pulse: PulseSpec, update_map: UpdateMap, warn=True) -> float:
    """Noise-free conductance change of ``pulse``; zero when not resolvable above k*sigma_G."""
    g0 = state.conductance
    dg = g0 * update_map.fraction(pulse.voltage, pulse.duration, warn=warn)
    limit = update_map.significance_sigma_multiple * sigma_at(state.params.error_model, g0)
    if abs(dg) <= limit:
        return 0.0
    return dg


def apply_pulse(state: DeviceState, pulse: PulseSpec, update_map: UpdateMap,
                relative_noise: float = 0.10, rng: np.random.Generator | None = None) -> DeviceState:
    dg = nominal_delta(state, pulse, update_map)
    if dg != 0.0 and relative_noise > 0:
        if rng is None:
            raise DomainError("a random generator is required when relative_noise > 0")
        dg *= 1.0 + rng.normal(0.0, relative_noise)
    g = state.conductance + dg
    # cell saturates at its programmable ceiling
    g = min(max(g, G_FLOOR), max(state.params.g_max, state.conductance))
    return replace(state, conductance=g, write_count=state.write_count + 1)


def drift(state: DeviceState, temperature: float, elapsed: float, params: RetentionParams) -> DeviceState:
    """Log-time retention loss. ``temperature`` is recorded only; the model is single-temperature."""
    if elapsed < 0:
        raise DomainError("elapsed time must be >= 0")
    del temperature
    loss = params.fraction_per_decade * math.log10(1.0 + elapsed / params.onset_time)
    g = max(state.conductance * (1.0 - loss), G_FLOOR)
    return replace(state, conductance=g)


class CorrectedWidth(NamedTuple):
    seconds: float
    sub_transient: bool


def correct_pulse_width(nominal: float, slope: float = 0.99, intercept: float = -102e-9) -> CorrectedWidth:
    """Effective heater pulse width from the programmed width.

    Below ~103 ns the affine correction goes negative: the pulse never leaves
    the cable transient, so the width is reported as 0 and flagged.
    """
    if not nominal > 0:
        raise DomainError("nominal pulse width must be > 0")
    actual = slope * nominal + intercept
    if actual < 0:
        return CorrectedWidth(0.0, True)
    return CorrectedWidth(actual, False)


# ---------------------------------------------------------------------------
# presets

def load_error_model(name: str) -> ErrorModel:
    with resources.as_file(resources.files("etcram.data") / f"{name}_sigma.csv") as p:
        return ErrorModel.from_csv(p)


def _preset(name, g_min, g_max, iv_linear):
    return DeviceParams(g_min, g_max, load_error_model(name), iv_linear=iv_linear, label=name)


ETCRAM = _preset("etcram", 1e-9, 1.6e-6, True)
SONOS = _preset("sonos", 10e-12, 16.0e-6, False)
PCM = _preset("pcm", 0.47e-6, 25.0e-6, False)
MEMRISTOR = _preset("memristor", 0.57e-6, 39.3e-6, False)
# single-cell programming uses the full demonstrated window (0.7e9 dynamic range)
ETCRAM_CELL = DeviceParams(1e-12, 0.7e-3, ETCRAM.error_model, iv_linear=True, label="etcram-cell")

DEVICES = {p.label: p for p in (ETCRAM, SONOS, PCM, MEMRISTOR)}


def get_device(name: str) -> DeviceParams:
    try:
        return DEVICES[name.lower()]
    except KeyError:
        raise DomainError(f"unknown device {name!r}; choose from {sorted(DEVICES)}") from None


# ---------------------------------------------------------------------------
# synthetic update maps

@dataclass(frozen=True)
class SyntheticUpdateLaw:
    """Closed-form stand-in for a measured update map.

    Potentiation grows as expm1((V - v_pot)/v_scale) and depression as
    expm1((|V| - v_dep)/v_scale), both times (t / 1 us)**time_exponent.
    Depression is applied multiplicatively so it never crosses -100 %.
    """

    v_pot: float = 1.5
    v_dep: float = 1.2
    v_scale: float = 0.15
    a_pot: float = 7.5e-5
    a_dep: float = 1.5e-4
    time_exponent: float = 0.5
    t_ref: float = 1e-6

    def __call__(self, voltage, duration):
        v = np.asarray(voltage, dtype=float)
        tt = (np.asarray(duration, dtype=float) / self.t_ref) ** self.time_exponent
        pot = self.a_pot * np.expm1(np.clip((v - self.v_pot) / self.v_scale, 0, None)) * tt
        dep = self.a_dep * np.expm1(np.clip((-v - self.v_dep) / self.v_scale, 0, None)) * tt
        return np.where(v > 0, pot, 0.0) - np.where(v < 0, -np.expm1(-dep), 0.0)


def log_duration_grid(t_lo: float, t_hi: float, per_decade: int = 3) -> np.ndarray:
    n = int(math.ceil(per_decade * math.log10(t_hi / t_lo) - 1e-9)) + 1
    return np.geomspace(t_lo, t_hi, max(n, 2))


def voltage_grid(v_lo: float, v_hi: float, step: float = 0.1) -> np.ndarray:
    n = int(round((v_hi - v_lo) / step)) + 1
    return np.round(np.linspace(v_lo, v_hi, n), 10)


# bounds of the measured heat maps
MAP_VOLTAGES = voltage_grid(-1.6, 2.4)
MAP_DURATIONS = log_duration_grid(100e-9, 800e-9)
# wider grid covering the closed-loop programming ladders (50 us pulses)
PROGRAM_VOLTAGES = voltage_grid(-2.4, 2.8)
PROGRAM_DURATIONS = log_duration_grid(100e-9, 100e-6)


def synthetic_update_map(voltages: Sequence[float] | None = None, durations: Sequence[float] | None = None,
                         law: SyntheticUpdateLaw | None = None,
                         significance_sigma_multiple: float = 3.0) -> UpdateMap:
    law = law or SyntheticUpdateLaw()
    v = MAP_VOLTAGES if voltages is None else np.asarray(voltages, dtype=float)
    t = MAP_DURATIONS if durations is None else np.asarray(durations, dtype=float)
    vv, tt = np.meshgrid(v, t, indexing="ij")
    return UpdateMap(v, t, law(vv, tt), significance_sigma_multiple)


def programming_map() -> UpdateMap:
    return synthetic_update_map(PROGRAM_VOLTAGES, PROGRAM_DURATIONS)

