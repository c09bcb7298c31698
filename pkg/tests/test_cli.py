import json
import subprocess
import sys

import numpy as np
import pytest

from etcram.cli import DEFAULTS, UsageError, config_hash, effective_config, main
from etcram.crossbar.io import write_matrix


def _run(tmp_path, *argv):
    out = tmp_path / "out.txt"
    code = main([*argv, "--out", str(out)])
    return code, out.read_text() if out.exists() else ""


@pytest.fixture
def small_problem(tmp_path):
    rng = np.random.default_rng(0)
    write_matrix(tmp_path / "w.bin", rng.standard_normal((24, 6)))
    write_matrix(tmp_path / "x.csv", np.maximum(rng.standard_normal((5, 24)), 0))
    return ["mvm-sweep", "--weights", str(tmp_path / "w.bin"), "--inputs", str(tmp_path / "x.csv"),
            "--rows", "8,24", "--device", "etcram", "--device", "pcm"]


def test_config_precedence():
    cfg = effective_config("program", {"target": 1e-7}, {"target": 2e-7, "noise": 0.0})
    assert cfg["target"] == 1e-7 and cfg["noise"] == 0.0
    assert cfg["tolerance"] == DEFAULTS["program"]["tolerance"]
    with pytest.raises(UsageError):
        effective_config("program", {}, {"bogus": 1})


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})


def test_mvm_sweep_replay_is_byte_identical(tmp_path, small_problem):
    code, first = _run(tmp_path, *small_problem, "--seed", "7")
    assert code == 0
    lines = first.splitlines()
    assert lines[0].startswith("device,array_rows") and len(lines) == 5
    side = tmp_path / "out.txt.run.json"
    record = json.loads(side.read_text())
    assert record["seed"] == 7 and record["config"]["rows"] == [8, 24]
    again = tmp_path / "again.txt"
    assert main(["mvm-sweep", "--replay", str(side), "--out", str(again), "--sidecar", str(tmp_path / "s2.json")]) == 0
    assert again.read_bytes() == first.encode()
    assert json.loads((tmp_path / "s2.json").read_text())["config_hash"] == record["config_hash"]


def test_seed_changes_output(tmp_path, small_problem):
    _, a = _run(tmp_path, *small_problem, "--seed", "1")
    _, b = _run(tmp_path, *small_problem, "--seed", "2")
    assert a != b


def test_program_converges(tmp_path):
    code, text = _run(tmp_path, "program")
    record = json.loads(text)
    assert code == 0 and record["converged"]
    assert record["trajectory"][0] == [0, 10e-9]


def test_program_nonconvergence_exit_code(tmp_path):
    code, text = _run(tmp_path, "program", "--tolerance", "1e-9")
    assert code == 3
    assert json.loads(text)["converged"] is False


def test_energy_command(tmp_path):
    code, text = _run(tmp_path, "energy", "--device", "pcm")
    assert code == 0 and json.loads(text)["advantage_2sf"] == 64.0


def test_states_command(tmp_path):
    code, text = _run(tmp_path, "states", "--device", "etcram")
    assert code == 0
    assert 2700 < float(text.splitlines()[1].split(",")[2]) < 3700


def test_thermal_command(tmp_path):
    code, text = _run(tmp_path, "thermal", "--length", "100e-9")
    assert code == 0
    assert text.splitlines()[0] == "length_m,p_crit_w,grid_levels,rise_per_watt"


@pytest.mark.parametrize("kind", ["powerlaw", "noise"])
def test_calibrate_builtin(tmp_path, kind):
    code, text = _run(tmp_path, "calibrate", "--kind", kind, "--input", "@builtin")
    assert code == 0 and json.loads(text)["kind"] == kind


def test_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"device": "memristor"}))
    code, text = _run(tmp_path, "energy", "--config", str(cfg))
    assert code == 0 and json.loads(text)["device"] == "memristor"


@pytest.mark.parametrize("argv,code", [
    (["energy", "--cycles", "two"], 1),
    (["nonsense"], 1),
    (["states"], 1),
    (["calibrate", "--kind", "tcr", "--input", "@builtin"], 1),
    (["states", "--calib", "/nonexistent.csv"], 2),
    (["mvm-sweep", "--weights", "/nonexistent.bin"], 2),
    (["states", "--device", "etcram", "--glo", "1e-3", "--ghi", "1e-9"], 2),
    (["thermal", "--length", "200e-9,100e-9"], 2),
])
def test_exit_codes(tmp_path, argv, code):
    try:
        got = main(argv + ["--out", str(tmp_path / "o")])
    except SystemExit as exc:  # argparse rejects the command line
        got = exc.code
    assert got == code


def test_unknown_config_key_is_usage_error(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"colour": "blue"}))
    assert main(["energy", "--config", str(cfg)]) == 1


def test_replay_for_other_command_rejected(tmp_path):
    _run(tmp_path, "energy")
    assert main(["states", "--replay", str(tmp_path / "out.txt.run.json")]) == 1


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "etcram.cli", "energy", "--device", "sonos"],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["advantage_2sf"] == 9.4
    assert json.loads(proc.stderr[proc.stderr.index("{"):])["command"] == "energy"
