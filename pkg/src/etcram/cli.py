"""Command-line front end.

Every command writes its primary output (to ``--out`` or stdout) and a JSON
sidecar holding the effective configuration, seed, configuration hash and
package versions. ``--replay SIDECAR`` reruns a command from a sidecar.

Exit codes: 0 success, 1 usage error, 2 data error, 3 non-convergence.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import platform
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .device import DEVICES, ZERO_ERROR, DeviceState, ErrorModel, UpdateMap, get_device, programming_map
from .errors import ConvergenceError, DomainError, SolverError
from .rng import DEFAULT_SEED, task_rng

log = logging.getLogger("etcram")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NONCONVERGED = 0, 1, 2, 3
BUILTIN = "@builtin"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


DEFAULTS = {
    "mvm-sweep": {
        "device": ["etcram", "sonos", "pcm", "memristor"],
        "rows": None,
        "rw": [0.35],
        "encoding": None,
        "weights": None,
        "inputs": None,
        "preset": "full",
        "n_vectors": None,
        "calib": [],
        "zero_error": False,
        "full_scale_voltage": 0.1,
        "tolerance": 1e-9,
        "no_interleave": False,
        "workers": 1,
    },
    "program": {
        "device": "etcram",
        "start": 10e-9,
        "target": 50e-9,
        "tolerance": 0.006,
        "max_pulses": 10,
        "noise": 0.10,
        "one_shot": False,
        "map": None,
    },
    "thermal": {"length": [100e-9], "stack": None, "half_width": None, "target_rise": 300.0},
    "energy": {"device": "sonos", "overhead": 0.36, "cycles": 2, "array_ratio": None, "linearity": None},
    "states": {"calib": None, "device": None, "glo": 1e-9, "ghi": 1e-3, "points_per_decade": 1000},
    "calibrate": {"kind": None, "input": None, "sample_rate": None, "segments": 50, "raw": False},
}

PRESETS = {
    "desk": {"matrix_rows": 512, "matrix_cols": 512, "n_vectors": 100, "rows": [72, 144, 288, 512]},
    "full": {"matrix_rows": 4608, "matrix_cols": 512, "n_vectors": 19600,
             "rows": [72, 144, 288, 576, 1152, 2304, 4608]},
}


def _floats(text):
    return [float(v) for v in text.split(",") if v]


def _ints(text):
    return [int(v) for v in text.split(",") if v]


def _build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help=f"master seed (default {DEFAULT_SEED})")
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON file of option defaults")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output file (stdout when omitted)")
    common.add_argument("--sidecar", default=argparse.SUPPRESS,
                        help="reproducibility record path (default OUT.run.json, or stderr)")
    common.add_argument("--replay", default=argparse.SUPPRESS, help="rerun from a sidecar file")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = _Parser(prog="etcram", description="ETCRAM device, array and thermal simulator")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    S = argparse.SUPPRESS

    m = sub.add_parser("mvm-sweep", parents=[common], help="MVM error vs array size")
    m.add_argument("--device", action="append", choices=sorted(DEVICES), default=S)
    m.add_argument("--rows", type=_ints, default=S, help="comma-separated array row counts")
    m.add_argument("--rw", type=_floats, default=S, help="comma-separated wire resistances (ohm)")
    m.add_argument("--encoding", choices=["bit_serial_1x8", "nibble_4x2"], default=S)
    m.add_argument("--weights", default=S, help="weight matrix (CSV or binary)")
    m.add_argument("--inputs", default=S, help="input vectors, one per row (CSV or binary)")
    m.add_argument("--preset", choices=sorted(PRESETS), default=S)
    m.add_argument("--n-vectors", dest="n_vectors", type=int, default=S)
    m.add_argument("--calib", action="append", default=S, metavar="DEVICE=CSV",
                   help="replace a device's error model")
    m.add_argument("--zero-error", dest="zero_error", action="store_true", default=S)
    m.add_argument("--full-scale-voltage", dest="full_scale_voltage", type=float, default=S)
    m.add_argument("--tolerance", type=float, default=S, help="circuit solver relative residual")
    m.add_argument("--no-interleave", dest="no_interleave", action="store_true", default=S)
    m.add_argument("--workers", type=int, default=S)

    g = sub.add_parser("program", parents=[common], help="closed-loop write-verify")
    g.add_argument("--device", choices=sorted(DEVICES), default=S)
    g.add_argument("--start", type=float, default=S, help="initial conductance (S)")
    g.add_argument("--target", type=float, default=S, help="target conductance (S)")
    g.add_argument("--tolerance", type=float, default=S)
    g.add_argument("--max-pulses", dest="max_pulses", type=int, default=S)
    g.add_argument("--noise", type=float, default=S, help="relative pulse-to-pulse noise")
    g.add_argument("--one-shot", dest="one_shot", action="store_true", default=S)
    g.add_argument("--map", default=S, help="update map CSV (v_volts,t_seconds,delta_fraction)")

    t = sub.add_parser("thermal", parents=[common], help="critical heater power vs wire length")
    t.add_argument("--length", type=_floats, default=S, help="comma-separated wire lengths (m)")
    t.add_argument("--stack", default=S, help="stack JSON")
    t.add_argument("--half-width", dest="half_width", type=float, default=S)
    t.add_argument("--target-rise", dest="target_rise", type=float, default=S)

    e = sub.add_parser("energy", parents=[common], help="energy advantage over a device")
    e.add_argument("--device", choices=["sonos", "pcm", "memristor"], default=S)
    e.add_argument("--overhead", type=float, default=S)
    e.add_argument("--cycles", type=int, default=S)
    e.add_argument("--array-ratio", dest="array_ratio", type=float, default=S)
    lin = e.add_mutually_exclusive_group()
    lin.add_argument("--linearity", dest="linearity", action="store_true", default=S)
    lin.add_argument("--no-linearity", dest="linearity", action="store_false", default=S)

    s = sub.add_parser("states", parents=[common], help="count distinguishable levels")
    s.add_argument("--calib", default=S, help="error model CSV (g_siemens,sigma_siemens)")
    s.add_argument("--device", choices=sorted(DEVICES), default=S, help="use a bundled error model")
    s.add_argument("--glo", type=float, default=S)
    s.add_argument("--ghi", type=float, default=S)
    s.add_argument("--points-per-decade", dest="points_per_decade", type=int, default=S)

    c = sub.add_parser("calibrate", parents=[common], help="TCR, power-law or noise fits")
    c.add_argument("--kind", choices=["tcr", "powerlaw", "noise"], default=S)
    c.add_argument("--input", default=S, help=f"data file, or {BUILTIN} for the bundled set")
    c.add_argument("--sample-rate", dest="sample_rate", type=float, default=S)
    c.add_argument("--segments", type=int, default=S)
    c.add_argument("--raw", action="store_true", default=S, help="do not normalize a trace PSD")
    return p


def _versions() -> dict:
    import numba
    import scipy

    return {"etcram": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "python": platform.python_version()}


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def effective_config(command: str, cli: dict, file_cfg: dict | None) -> dict:
    """Built-in defaults, overridden by the config file, overridden by flags."""
    cfg = dict(DEFAULTS[command])
    cfg["seed"] = DEFAULT_SEED
    for source in (file_cfg or {}, cli):
        for k, v in source.items():
            if k not in cfg:
                raise UsageError(f"unknown option {k!r} for {command}")
            cfg[k] = v
    return cfg


# ---- commands -----------------------------------------------------------


def _load_model(path) -> ErrorModel:
    if not Path(path).is_file():
        raise FileNotFoundError(f"calibration file not found: {path}")
    return ErrorModel.from_csv(path)


def cmd_mvm_sweep(cfg: dict, out: io.TextIOBase) -> int:
    from .crossbar import CrossbarConfig, mvm_error_sweep, synthetic_inputs, synthetic_weights
    from .crossbar.io import read_matrix, write_sweep_csv

    preset = PRESETS[cfg["preset"]]
    seed = cfg["seed"]
    overrides = {}
    for item in cfg["calib"]:
        name, sep, path = item.partition("=")
        if not sep or name not in DEVICES:
            raise UsageError(f"--calib expects DEVICE=CSV, got {item!r}")
        overrides[name] = _load_model(path)
    devices = []
    for name in cfg["device"]:
        params = get_device(name)
        model = ZERO_ERROR if cfg["zero_error"] else overrides.get(name, params.error_model)
        devices.append((params, model))

    if cfg["weights"] is not None:
        w = read_matrix(cfg["weights"])
    else:
        w = synthetic_weights(preset["matrix_rows"], preset["matrix_cols"], task_rng(seed, 1))
    if cfg["inputs"] is not None:
        x = read_matrix(cfg["inputs"])
        if cfg["n_vectors"] is not None:
            x = x[: cfg["n_vectors"]]
    else:
        n = cfg["n_vectors"] or preset["n_vectors"]
        x = synthetic_inputs(n, w.shape[0], task_rng(seed, 2))
    if x.shape[1] != w.shape[0]:
        raise DomainError(f"inputs have {x.shape[1]} columns, weights have {w.shape[0]} rows")
    rows = cfg["rows"] or [r for r in preset["rows"] if r <= w.shape[0]] or [w.shape[0]]

    table = []
    for rw in cfg["rw"]:
        config = CrossbarConfig(wire_resistance=rw, full_scale_voltage=cfg["full_scale_voltage"],
                                interleave=not cfg["no_interleave"], solver_tolerance=cfg["tolerance"])
        log.info("sweeping R_w = %g ohm over rows %s", rw, rows)
        table += mvm_error_sweep(devices, rows, w, x, config, seed, encoding=cfg["encoding"],
                                 workers=cfg["workers"])
    write_sweep_csv(table, out)
    return EXIT_OK


def cmd_program(cfg: dict, out) -> int:
    from .programming import ProgramPolicy, write_verify

    params = get_device(cfg["device"])
    if cfg["map"] is not None:
        if not Path(cfg["map"]).is_file():
            raise FileNotFoundError(f"update map not found: {cfg['map']}")
        update_map = UpdateMap.from_csv(cfg["map"])
    else:
        update_map = programming_map()
    policy = ProgramPolicy(tolerance=cfg["tolerance"], max_pulses=cfg["max_pulses"], one_shot=cfg["one_shot"])
    state = DeviceState(cfg["start"], params)
    res = write_verify(state, cfg["target"], policy, update_map, task_rng(cfg["seed"], 3), cfg["noise"])
    json.dump(res.to_dict(), out, indent=2)
    out.write("\n")
    log.warning("pulses used: %d, final error: %.4f%%, converged: %s",
                res.pulses_used, 100 * res.final_error_fraction, res.converged)
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_thermal(cfg: dict, out) -> int:
    from .thermal import ThermalStack, sweep_length, write_sweep_csv

    if cfg["stack"] is not None:
        if not Path(cfg["stack"]).is_file():
            raise FileNotFoundError(f"stack file not found: {cfg['stack']}")
        stack = ThermalStack.from_json(cfg["stack"])
    else:
        stack = ThermalStack.default()
    if cfg["half_width"] is not None:
        stack = replace(stack, half_width=cfg["half_width"])
    points = sweep_length(stack, cfg["length"], cfg["target_rise"])
    write_sweep_csv(points, out)
    return EXIT_OK


def cmd_energy(cfg: dict, out) -> int:
    from .analysis.energy import REFERENCE_SCENARIOS, EnergyScenario, overall_energy_advantage, truncate_sig

    ref, ref_linear = REFERENCE_SCENARIOS[cfg["device"]]
    ratio = ref.array_size_ratio if cfg["array_ratio"] is None else cfg["array_ratio"]
    linear = ref_linear if cfg["linearity"] is None else cfg["linearity"]
    scenario = EnergyScenario(cycles=cfg["cycles"], per_input_overhead_fraction=cfg["overhead"],
                              array_size_ratio=ratio, label=cfg["device"])
    adv = overall_energy_advantage(scenario, linear)
    record = {"device": cfg["device"], "array_size_ratio": ratio, "encoding_factor": scenario.encoding_factor,
              "linearity_applies": linear, "advantage": adv, "advantage_2sf": truncate_sig(adv, 2)}
    json.dump(record, out, indent=2)
    out.write("\n")
    log.warning("energy advantage over %s: %sx", cfg["device"], f"{truncate_sig(adv, 2):g}")
    return EXIT_OK


def cmd_states(cfg: dict, out) -> int:
    from .programming import count_states

    if cfg["calib"] is not None:
        model = _load_model(cfg["calib"])
    elif cfg["device"] is not None:
        model = get_device(cfg["device"]).error_model
    else:
        raise UsageError("states needs --calib CSV or --device NAME")
    n = count_states(model, cfg["glo"], cfg["ghi"], cfg["points_per_decade"])
    out.write(f"g_lo,g_hi,states\n{cfg['glo']!r},{cfg['ghi']!r},{n!r}\n")
    log.warning("%.0f distinguishable levels", n)
    return EXIT_OK


def cmd_calibrate(cfg: dict, out) -> int:
    from .analysis.noise import NoiseSpectrum, example_spectrum, integrate_noise, psd_estimate, read_trace
    from .analysis.tcr import read_calibration, tcr_fit
    from .thermal import fit_power_law, load_power_points

    kind, src = cfg["kind"], cfg["input"]
    if kind is None or src is None:
        raise UsageError("calibrate needs --kind and --input")
    if src != BUILTIN and not Path(src).is_file():
        raise FileNotFoundError(f"input file not found: {src}")
    if kind == "tcr":
        if src == BUILTIN:
            raise UsageError("no bundled TCR calibration; pass a temperature_k,resistance_ohms CSV")
        cal = tcr_fit(read_calibration(src), size_label=Path(src).stem)
        record = {"alpha_ohm_per_k": cal.alpha, "r0_ohm": cal.r0}
    elif kind == "powerlaw":
        exponent, prefactor, std = fit_power_law(load_power_points(None if src == BUILTIN else src))
        record = {"exponent": exponent, "prefactor": prefactor, "exponent_std": std}
    else:
        if src == BUILTIN:
            spectrum = example_spectrum()
        else:
            header = Path(src).read_text().split("\n", 1)[0]
            if "frequency_hz" in header:
                spectrum = NoiseSpectrum.from_csv(src)
            else:
                _, current, fs = read_trace(src)
                fs = cfg["sample_rate"] or fs
                spectrum = psd_estimate(current, fs, cfg["segments"], normalize=not cfg["raw"])
        record = {"integrated_noise": integrate_noise(spectrum), "points": int(spectrum.frequencies.size)}
    json.dump({"kind": kind, **record}, out, indent=2)
    out.write("\n")
    return EXIT_OK


COMMANDS = {
    "mvm-sweep": cmd_mvm_sweep,
    "program": cmd_program,
    "thermal": cmd_thermal,
    "energy": cmd_energy,
    "states": cmd_states,
    "calibrate": cmd_calibrate,
}


def _write_sidecar(record: dict, args: dict) -> None:
    text = json.dumps(record, indent=2, sort_keys=True) + "\n"
    path = args.get("sidecar") or (args["out"] + ".run.json" if args.get("out") else None)
    if path:
        Path(path).write_text(text)
    else:
        sys.stderr.write(text)


def main(argv=None) -> int:
    parser = _build_parser()
    ns = vars(parser.parse_args(argv))
    command = ns.pop("command")
    logging.basicConfig(level=logging.INFO if ns.pop("verbose", False) else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    io_args = {k: ns.pop(k) for k in ("out", "sidecar", "replay", "config") if k in ns}
    try:
        file_cfg = None
        if "replay" in io_args:
            side = json.loads(Path(io_args["replay"]).read_text())
            if side.get("command") != command:
                raise UsageError(f"sidecar is for {side.get('command')!r}, not {command!r}")
            file_cfg = side["config"]
        elif "config" in io_args:
            file_cfg = json.loads(Path(io_args["config"]).read_text())
        cfg = effective_config(command, ns, file_cfg)
        record = {"command": command, "config": cfg, "seed": cfg["seed"], "config_hash": config_hash(cfg),
                  "versions": _versions()}
        log.info("effective config: %s", json.dumps(cfg, sort_keys=True))

        buf = io.StringIO()
        code = COMMANDS[command](cfg, buf)
        if io_args.get("out"):
            Path(io_args["out"]).write_text(buf.getvalue())
        else:
            sys.stdout.write(buf.getvalue())
        _write_sidecar(record, io_args)
        return code
    except UsageError as exc:
        log.error("usage error: %s", exc)
        return EXIT_USAGE
    except ConvergenceError as exc:
        log.error("did not converge: %s", exc)
        return EXIT_NONCONVERGED
    except (DomainError, SolverError, OSError, ValueError, KeyError) as exc:
        log.error("error: %s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
