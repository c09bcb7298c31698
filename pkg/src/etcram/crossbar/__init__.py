"""Crossbar arrays: weight mapping, circuit solve, encoded MVMs and sweeps."""

from .circuit import NetworkSolution, solve_array, solve_network
from .mapping import (
    CrossbarConfig,
    InputEncoding,
    MappedArray,
    default_encoding,
    encode_inputs,
    map_weights,
    quantize_inputs,
    target_conductances,
)
from .mvm import (
    DEFAULT_ROWS,
    DESK_ROWS,
    MvmResult,
    SweepRow,
    ideal_mvm,
    mvm_error_sweep,
    normalized_rms,
    partition_matrix,
    run_mvm,
    synthetic_inputs,
    synthetic_weights,
)

__all__ = [
    "CrossbarConfig", "DEFAULT_ROWS", "DESK_ROWS", "InputEncoding", "MappedArray", "MvmResult",
    "NetworkSolution", "SweepRow", "default_encoding", "encode_inputs", "ideal_mvm", "map_weights",
    "mvm_error_sweep", "normalized_rms", "partition_matrix", "quantize_inputs", "run_mvm",
    "solve_array", "solve_network", "synthetic_inputs", "synthetic_weights", "target_conductances",
]
