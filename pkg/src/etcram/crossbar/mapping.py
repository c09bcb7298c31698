"""Weight-to-conductance mapping and input encoding."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..device import G_FLOOR, DeviceParams, ErrorModel, sigma_at
from ..errors import DomainError


@dataclass(frozen=True)
class CrossbarConfig:
    wire_resistance: float = 0.35
    full_scale_voltage: float = 0.1
    interleave: bool = True
    solver_tolerance: float = 1e-9
    max_iterations: int = 2000

    def __post_init__(self):
        if not self.wire_resistance >= 0:
            raise DomainError("wire_resistance must be >= 0")
        if not self.full_scale_voltage > 0:
            raise DomainError("full_scale_voltage must be > 0")
        if not self.solver_tolerance > 0:
            raise DomainError("solver_tolerance must be > 0")


@dataclass(frozen=True, eq=False)
class MappedArray:
    """Differential conductance pairs with programming errors frozen in.

    ``weights`` keeps the matrix the array was programmed from so that ideal
    references can be computed without the sampled errors.
    """

    g_plus: np.ndarray
    g_minus: np.ndarray
    weight_scale: float
    params: DeviceParams
    weights: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.g_plus.shape

    def physical(self, interleave: bool = True) -> np.ndarray:
        """Conductances in physical column order.

        Interleaved layout puts logical column k at physical columns 2k (+)
        and 2k+1 (-); otherwise all + columns precede all - columns.
        """
        rows, cols = self.shape
        out = np.empty((rows, 2 * cols))
        if interleave:
            out[:, 0::2] = self.g_plus
            out[:, 1::2] = self.g_minus
        else:
            out[:, :cols] = self.g_plus
            out[:, cols:] = self.g_minus
        return out

    def reconstructed_weights(self) -> np.ndarray:
        return (self.g_plus - self.g_minus) * self.weight_scale


def split_physical(currents: np.ndarray, interleave: bool) -> tuple[np.ndarray, np.ndarray]:
    """Split physical-column currents (last axis) into (+, -) logical halves."""
    if interleave:
        return currents[..., 0::2], currents[..., 1::2]
    half = currents.shape[-1] // 2
    return currents[..., :half], currents[..., half:]


def target_conductances(w: np.ndarray, params: DeviceParams, w_max: float | None = None):
    """Error-free (g_plus, g_minus, weight_scale) targets for ``w``."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.size == 0:
        raise DomainError("weight matrix must be a non-empty 2D array")
    if not np.all(np.isfinite(w)):
        raise DomainError("weight matrix contains non-finite values")
    if w_max is None:
        w_max = float(np.max(np.abs(w)))
    if not w_max > 0:
        raise DomainError("all-zero weight matrix: mapping scale undefined")
    if np.max(np.abs(w)) > w_max * (1 + 1e-12):
        raise DomainError("|w| exceeds w_max")
    span = params.g_max - params.g_min
    siemens_per_weight = span / w_max
    g_plus = params.g_min + np.clip(w, 0, None) * siemens_per_weight
    g_minus = params.g_min + np.clip(-w, 0, None) * siemens_per_weight
    return g_plus, g_minus, w_max / span


def map_weights(w: np.ndarray, params: DeviceParams, model: ErrorModel | None, rng: np.random.Generator,
                w_max: float | None = None) -> MappedArray:
    """Program ``w`` into a differential array.

    Each target gets one Normal(0, sigma_G(target)) draw that stays fixed for
    every later MVM. ``w_max`` sets a shared scale when a large matrix is
    split over several arrays; it defaults to max |w| of this block.
    """
    g_plus, g_minus, weight_scale = target_conductances(w, params, w_max)
    if model is None:
        model = params.error_model
    noise = rng.standard_normal((2,) + g_plus.shape)
    g_plus = np.maximum(g_plus + noise[0] * sigma_at(model, g_plus), G_FLOOR)
    g_minus = np.maximum(g_minus + noise[1] * sigma_at(model, g_minus), G_FLOOR)
    weights = np.array(w, dtype=float)
    for a in (g_plus, g_minus, weights):
        a.setflags(write=False)
    return MappedArray(g_plus, g_minus, weight_scale, params, weights)


def quantize_inputs(x, bits: int = 8, x_max: float | None = None) -> np.ndarray:
    """Clamp to [0, x_max] and round half away from zero onto 2**bits - 1 levels."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("inputs must be non-negative")
    if x_max is None:
        x_max = float(np.max(x)) if x.size else 0.0
    if not x_max > 0:
        raise DomainError("x_max must be > 0")
    levels = 2**bits - 1
    scaled = np.clip(x, 0.0, x_max) / x_max * levels
    return np.floor(scaled + 0.5).astype(np.int64)


class InputEncoding(str, Enum):
    BIT_SERIAL_1X8 = "bit_serial_1x8"
    NIBBLE_4X2 = "nibble_4x2"

    @property
    def cycles(self) -> int:
        return 8 if self is InputEncoding.BIT_SERIAL_1X8 else 2

    def recombination_weights(self) -> np.ndarray:
        """Digital weight of each cycle so that the sum gives q * v_fs back."""
        if self is InputEncoding.BIT_SERIAL_1X8:
            return 2.0 ** np.arange(8)
        return 15.0 * 16.0 ** np.arange(2)


def encode_inputs(q, encoding: InputEncoding | str, v_fs: float) -> np.ndarray:
    """Per-cycle row voltages, shape (cycles, ...) + q.shape.

    Bit-serial cycle k drives v_fs on rows whose bit k is set. The nibble
    scheme drives v_fs * nibble / 15, low nibble first.
    """
    encoding = InputEncoding(encoding)
    q = np.asarray(q)
    if not np.issubdtype(q.dtype, np.integer):
        if np.any(q != np.round(q)):
            raise DomainError("quantized inputs must be integers")
        q = q.astype(np.int64)
    if np.any(q < 0) or np.any(q > 255):
        raise DomainError("quantized inputs must lie in [0, 255]")
    if encoding is InputEncoding.BIT_SERIAL_1X8:
        out = np.stack([((q >> k) & 1) * v_fs for k in range(8)]).astype(float)
    else:
        out = np.stack([(q & 0xF) * (v_fs / 15.0), (q >> 4) * (v_fs / 15.0)])
    return out


def default_encoding(params: DeviceParams) -> InputEncoding:
    """Multi-level inputs only for devices with a linear I-V."""
    return InputEncoding.NIBBLE_4X2 if params.iv_linear else InputEncoding.BIT_SERIAL_1X8
