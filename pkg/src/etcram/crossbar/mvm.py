"""Encoded multi-cycle MVMs, partitioning, error metrics and the
array-size sweep."""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..device import DeviceParams, ErrorModel
from ..errors import DomainError
from ..rng import task_rng
from .circuit import solve_network
from .mapping import (
    CrossbarConfig,
    InputEncoding,
    MappedArray,
    default_encoding,
    encode_inputs,
    map_weights,
    quantize_inputs,
    split_physical,
)

DEFAULT_ROWS = (72, 144, 288, 576, 1152, 2304, 4608)
DESK_ROWS = (72, 144, 288, 512)


@dataclass
class MvmResult:
    analog_outputs: np.ndarray  # (n, cycles, physical cols) amperes
    recombined: np.ndarray  # (n, cols) weight * input units
    ideal: np.ndarray  # (n, cols)
    rms_error: float
    normalized_rms_error: float
    signal_range: float


def ideal_mvm(w, x) -> np.ndarray:
    """y = x @ w for x of shape (rows,) or (n, rows) and w of shape (rows, cols)."""
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    if w.ndim != 2 or x.shape[-1] != w.shape[0]:
        raise DomainError(f"cannot multiply inputs of shape {x.shape} by a {w.shape} matrix")
    return x @ w


def partition_matrix(w, array_rows: int) -> list[np.ndarray]:
    """Contiguous row blocks of at most ``array_rows`` rows."""
    if array_rows < 1:
        raise DomainError("array_rows must be >= 1")
    w = np.asarray(w)
    n = math.ceil(w.shape[0] / array_rows)
    return [w[k * array_rows:(k + 1) * array_rows] for k in range(n)]


def normalized_rms(simulated, ideal, inner_fraction: float = 0.999) -> tuple[float, float, float]:
    """(rms, signal_range, rms / signal_range).

    The signal range is the zero-symmetric interval holding ``inner_fraction``
    of the ideal values.
    """
    sim = np.asarray(simulated, dtype=float).ravel()
    ref = np.asarray(ideal, dtype=float).ravel()
    if sim.size == 0 or sim.size != ref.size:
        raise DomainError("simulated and ideal must be non-empty and equally long")
    rms = float(np.sqrt(np.mean((sim - ref) ** 2)))
    signal_range = 2.0 * float(np.quantile(np.abs(ref), inner_fraction))
    norm = rms / signal_range if signal_range > 0 else (0.0 if rms == 0 else math.inf)
    return rms, signal_range, norm


def run_mvm(mapped: MappedArray, q, encoding: InputEncoding | str, config: CrossbarConfig,
            input_scale: float = 1.0) -> MvmResult:
    """Multiply quantized inputs ``q`` (rows,) or (n, rows) through the array.

    Each cycle is a separate circuit solve. Differential column currents are
    recombined with the cycle weights and converted to weight * input units;
    ``input_scale`` is the input value of one quantization step.
    """
    encoding = InputEncoding(encoding)
    q = np.asarray(q)
    single = q.ndim == 1
    q2 = q[None, :] if single else q
    rows, cols = mapped.shape
    if q2.shape[1] != rows:
        raise DomainError(f"{q2.shape[1]} inputs for an array with {rows} rows")
    v_fs = config.full_scale_voltage
    volts = encode_inputs(q2, encoding, v_fs)  # (cycles, n, rows)
    n_cyc, n = volts.shape[0], q2.shape[0]
    g = mapped.physical(config.interleave)
    sol = solve_network(g, volts.reshape(n_cyc * n, rows), config.wire_resistance,
                        config.solver_tolerance, config.max_iterations)
    analog = sol.column_currents.reshape(n_cyc, n, 2 * cols).transpose(1, 0, 2)
    i_plus, i_minus = split_physical(analog, config.interleave)
    diff = i_plus - i_minus  # (n, cycles, cols)
    weights = encoding.recombination_weights()
    recombined = np.einsum("k,nkc->nc", weights, diff) * (mapped.weight_scale / v_fs * input_scale)
    ideal = ideal_mvm(mapped.weights, q2 * input_scale)
    rms, rng_, norm = normalized_rms(recombined, ideal) if ideal.size else (0.0, 0.0, 0.0)
    if single:
        analog, recombined, ideal = analog[0], recombined[0], ideal[0]
    return MvmResult(analog, recombined, ideal, rms, norm, rng_)


def synthetic_weights(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Gaussian weight matrix standing in for a trained layer."""
    return rng.standard_normal((rows, cols))


def synthetic_inputs(n: int, rows: int, rng: np.random.Generator) -> np.ndarray:
    """Non-negative activations: a ReLU applied to Gaussian samples."""
    return np.maximum(rng.standard_normal((n, rows)), 0.0)


@dataclass(frozen=True)
class SweepRow:
    device: str
    array_rows: int
    rw_ohms: float
    encoding: str
    normalized_rms: float
    rms: float
    signal_range: float
    seed: int


def _label_key(label: str) -> int:
    return zlib.crc32(label.encode())


def _partition_outputs(args):
    block, params, model, seed, array_rows, k, w_max, q_block, encoding, config, input_scale = args
    rng = task_rng(seed, _label_key(params.label), array_rows, k)
    mapped = map_weights(block, params, model, rng, w_max=w_max)
    res = run_mvm(mapped, q_block, encoding, config, input_scale)
    return res.recombined, res.ideal


def mvm_error_sweep(devices: list[DeviceParams | tuple[DeviceParams, ErrorModel]], rows_list, w, inputs,
                    config: CrossbarConfig, seed: int, encoding: InputEncoding | str | None = None,
                    x_max: float | None = None, workers: int = 1) -> list[SweepRow]:
    """Normalized MVM error of each device at each array size.

    ``w`` is partitioned into blocks of ``array_rows`` rows; every block is
    mapped with its own RNG stream keyed by (seed, device, array_rows,
    block) and all blocks share the scale of the full matrix. Partial dot
    products of every block and input vector are pooled into one error
    metric. ``encoding=None`` picks nibble inputs for linear devices and
    bit-serial inputs otherwise.
    """
    w = np.asarray(w, dtype=float)
    x = np.asarray(inputs, dtype=float)
    if x.ndim != 2 or x.shape[1] != w.shape[0]:
        raise DomainError("inputs must be (n, rows) matching the weight matrix")
    if x_max is None:
        x_max = float(np.max(x))
    q = quantize_inputs(x, 8, x_max)
    input_scale = x_max / 255.0
    w_max = float(np.max(np.abs(w)))
    table = []
    for dev in devices:
        params, model = dev if isinstance(dev, tuple) else (dev, dev.error_model)
        enc = InputEncoding(encoding) if encoding is not None else default_encoding(params)
        for array_rows in rows_list:
            blocks = partition_matrix(w, array_rows)
            jobs = [
                (blk, params, model, seed, array_rows, k, w_max,
                 q[:, k * array_rows:k * array_rows + blk.shape[0]], enc, config, input_scale)
                for k, blk in enumerate(blocks)
            ]
            if workers > 1:
                with ThreadPoolExecutor(workers) as pool:
                    outs = list(pool.map(_partition_outputs, jobs))
            else:
                outs = [_partition_outputs(j) for j in jobs]
            sim = np.concatenate([o[0].ravel() for o in outs])
            ref = np.concatenate([o[1].ravel() for o in outs])
            rms, srange, norm = normalized_rms(sim, ref)
            table.append(SweepRow(params.label, int(array_rows), float(config.wire_resistance), enc.value,
                                  norm, rms, srange, int(seed)))
    return table
