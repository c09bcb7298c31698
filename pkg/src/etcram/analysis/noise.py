"""Noise power spectral density estimation and band integration."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy import signal

from ..errors import DomainError

FLOOR_BAND = (1e3, 1.598e3)
READ_BAND = (1e3, 100e6)


@dataclass(frozen=True, eq=False)
class NoiseSpectrum:
    frequencies: np.ndarray
    psd: np.ndarray
    averages: int = 1

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        p = np.asarray(self.psd, dtype=float)
        if f.shape != p.shape or f.ndim != 1 or f.size == 0:
            raise DomainError("frequencies and psd must be equal-length 1D arrays")
        if np.any(np.diff(f) <= 0):
            raise DomainError("frequencies must be strictly ascending")
        if np.any(p < 0):
            raise DomainError("psd must be non-negative")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "psd", p)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["frequency_hz", "psd_per_hz"])
            for f, p in zip(self.frequencies, self.psd):
                w.writerow([repr(float(f)), repr(float(p))])

    @classmethod
    def from_csv(cls, path) -> "NoiseSpectrum":
        with open(path) as fh:
            return cls._parse(fh.read())

    @classmethod
    def _parse(cls, text: str) -> "NoiseSpectrum":
        rows = list(csv.DictReader(text.splitlines()))
        if not rows or not {"frequency_hz", "psd_per_hz"} <= set(rows[0]):
            raise DomainError("spectrum CSV needs columns frequency_hz,psd_per_hz")
        return cls(np.array([float(r["frequency_hz"]) for r in rows]), np.array([float(r["psd_per_hz"]) for r in rows]))


def example_spectrum() -> NoiseSpectrum:
    """Bundled channel-current spectrum (A^2/Hz): 1/f at low frequency,
    then a flat floor."""
    return NoiseSpectrum._parse((resources.files("etcram.data") / "example_noise_spectrum.csv").read_text())


def psd_estimate(timeseries, sample_rate: float, segments: int = 50, normalize: bool = True,
                 window: str = "boxcar") -> NoiseSpectrum:
    """One-sided PSD averaged over ``segments`` non-overlapping segments.

    With ``normalize`` the density is divided by the squared mean of the
    series, giving units of 1/Hz. The DC bin is dropped.
    """
    x = np.asarray(timeseries, dtype=float)
    if x.ndim != 1:
        raise DomainError("timeseries must be 1D")
    if segments < 1 or x.size < 2 * segments:
        raise DomainError(f"need at least {2 * segments} samples for {segments} segments")
    if not sample_rate > 0:
        raise DomainError("sample_rate must be > 0")
    nper = x.size // segments
    f, p = signal.welch(x[: nper * segments], fs=sample_rate, window=window, nperseg=nper, noverlap=0,
                        detrend=False, scaling="density", return_onesided=True)
    if normalize:
        m2 = np.mean(x) ** 2
        if m2 == 0:
            raise DomainError("cannot normalize a zero-mean series")
        p = p / m2
    return NoiseSpectrum(f[1:], p[1:], averages=segments)


def integrate_noise(spectrum: NoiseSpectrum, floor_band=FLOOR_BAND, integration_band=READ_BAND,
                    include_measured_below: bool = False) -> float:
    """Integrated noise with the measured floor extended over a read band.

    The floor is the mean PSD inside ``floor_band``; it is integrated flat
    over ``integration_band``. Optionally the measured spectrum below the
    band start is added by trapezoid.
    """
    f, p = spectrum.frequencies, spectrum.psd
    lo, hi = floor_band
    sel = (f >= lo) & (f <= hi)
    if not sel.any():
        raise DomainError(f"no spectrum points inside floor band {floor_band}")
    band = p[sel]
    # shifted mean: exact for a flat band, where np.mean can lose an ulp
    floor = float(band[0] + np.mean(band - band[0]))
    total = floor * (integration_band[1] - integration_band[0])
    if include_measured_below:
        below = f <= integration_band[0]
        if below.sum() >= 2:
            total += float(np.trapezoid(p[below], f[below]))
    return total


def low_frequency_slope(spectrum: NoiseSpectrum, f_lo: float, f_hi: float) -> float:
    """Log-log slope of the PSD between ``f_lo`` and ``f_hi``."""
    f, p = spectrum.frequencies, spectrum.psd
    sel = (f >= f_lo) & (f <= f_hi) & (p > 0)
    if sel.sum() < 2:
        raise DomainError("fewer than two points in the slope band")
    return float(np.polyfit(np.log10(f[sel]), np.log10(p[sel]), 1)[0])


def synthetic_noise_series(n: int, sample_rate: float, mean: float, white_psd: float, flicker_psd_at_1hz: float,
                           rng: np.random.Generator) -> np.ndarray:
    """Series with one-sided PSD ``white_psd + flicker_psd_at_1hz / f``.

    Built by shaping Gaussian white noise in the frequency domain.
    """
    f = np.fft.rfftfreq(n, 1.0 / sample_rate)
    target = np.empty_like(f)
    target[1:] = white_psd + flicker_psd_at_1hz / f[1:]
    target[0] = 0.0
    # one-sided PSD S maps to |X_k|^2 = S * fs * n / 2 for the numpy rfft convention
    amp = np.sqrt(target * sample_rate * n / 2.0)
    spec = amp * (rng.standard_normal(f.size) + 1j * rng.standard_normal(f.size)) / np.sqrt(2.0)
    if n % 2 == 0:
        spec[-1] = amp[-1] * rng.standard_normal()
    return mean + np.fft.irfft(spec, n)


def read_trace(path) -> tuple[np.ndarray, np.ndarray, float]:
    """(t, current, sample_rate) from a ``t_seconds,current_amperes`` CSV."""
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"t_seconds", "current_amperes"} <= set(rows[0]):
        raise DomainError(f"{path}: expected columns t_seconds,current_amperes")
    t = np.array([float(r["t_seconds"]) for r in rows])
    i = np.array([float(r["current_amperes"]) for r in rows])
    dt = np.diff(t)
    if dt.size == 0 or np.any(dt <= 0):
        raise DomainError(f"{path}: time stamps must be strictly ascending")
    return t, i, float(1.0 / np.median(dt))
