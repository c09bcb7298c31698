import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etcram.crossbar import (
    CrossbarConfig,
    InputEncoding,
    SweepRow,
    encode_inputs,
    ideal_mvm,
    map_weights,
    mvm_error_sweep,
    normalized_rms,
    default_encoding,
    partition_matrix,
    quantize_inputs,
    run_mvm,
    synthetic_inputs,
    synthetic_weights,
    target_conductances,
)
from etcram.crossbar.io import read_matrix, read_sweep_csv, write_matrix, write_sweep_csv
from etcram.crossbar.mapping import split_physical
from etcram.device import ETCRAM, PCM, SONOS, ZERO_ERROR
from etcram.errors import DomainError
from oracles import loop_matvec

IDEAL = CrossbarConfig(wire_resistance=0.0)


def _exact(w, params=ETCRAM):
    return map_weights(w, params, ZERO_ERROR, np.random.default_rng(0))


def test_target_conductances_span():
    w = np.array([[1.0, -0.5], [0.0, -1.0]])
    gp, gm, scale = target_conductances(w, PCM)
    assert gp[0, 0] == pytest.approx(PCM.g_max) and gm[1, 1] == pytest.approx(PCM.g_max)
    assert gp[1, 0] == gm[1, 0] == PCM.g_min
    np.testing.assert_allclose((gp - gm) * scale, w, rtol=1e-12, atol=1e-15)


def test_target_conductances_rejects_bad_matrices():
    with pytest.raises(DomainError):
        target_conductances(np.zeros((2, 2)), PCM)
    with pytest.raises(DomainError):
        target_conductances(np.array([[np.inf]]), PCM)
    with pytest.raises(DomainError):
        target_conductances(np.array([[2.0]]), PCM, w_max=1.0)


def test_mapping_errors_frozen_and_seeded():
    w = synthetic_weights(16, 8, np.random.default_rng(1))
    a = map_weights(w, SONOS, None, np.random.default_rng(5))
    b = map_weights(w, SONOS, None, np.random.default_rng(5))
    np.testing.assert_array_equal(a.g_plus, b.g_plus)
    with pytest.raises(ValueError):
        a.g_plus[0, 0] = 1.0
    assert not np.array_equal(a.g_plus, target_conductances(w, SONOS)[0])


def test_physical_layout_and_split():
    m = _exact(np.array([[1.0, -1.0, 0.5]]))
    inter = m.physical(True)
    np.testing.assert_array_equal(inter[:, 0::2], m.g_plus)
    np.testing.assert_array_equal(inter[:, 1::2], m.g_minus)
    block = m.physical(False)
    np.testing.assert_array_equal(block[:, :3], m.g_plus)
    for layout in (inter, block):
        p, n = split_physical(layout, layout is inter)
        np.testing.assert_array_equal(p, m.g_plus)
        np.testing.assert_array_equal(n, m.g_minus)


def test_quantize_inputs():
    assert quantize_inputs([0.0, 0.5, 1.0, 2.0], 8, 1.0).tolist() == [0, 128, 255, 255]
    assert quantize_inputs([1.5 / 255], 8, 1.0)[0] == 2  # half rounds up
    with pytest.raises(DomainError):
        quantize_inputs([-0.1], 8, 1.0)


@settings(max_examples=100)
@given(q=st.lists(st.integers(0, 255), min_size=1, max_size=20), enc=st.sampled_from(list(InputEncoding)))
def test_encoding_recombines_to_input(q, enc):
    q = np.array(q)
    volts = encode_inputs(q, enc, 0.1)
    assert volts.shape == (enc.cycles, q.size)
    assert np.all((volts >= 0) & (volts <= 0.1 + 1e-15))
    back = np.einsum("k,kn->n", enc.recombination_weights(), volts) / 0.1
    np.testing.assert_allclose(back, q, rtol=1e-12, atol=1e-12)


def test_encode_validation():
    with pytest.raises(DomainError):
        encode_inputs([256], "nibble_4x2", 0.1)
    with pytest.raises(DomainError):
        encode_inputs([1.5], "nibble_4x2", 0.1)


def test_default_encoding_follows_iv_linearity():
    assert default_encoding(ETCRAM) is InputEncoding.NIBBLE_4X2
    assert default_encoding(PCM) is InputEncoding.BIT_SERIAL_1X8


def test_ideal_mvm_against_loops():
    rng = np.random.default_rng(2)
    w = rng.standard_normal((5, 3))
    x = rng.uniform(0, 1, 5)
    np.testing.assert_allclose(ideal_mvm(w, x), loop_matvec(w.tolist(), x.tolist()), rtol=1e-13)
    with pytest.raises(DomainError):
        ideal_mvm(w, np.ones(4))


@pytest.mark.parametrize("enc", list(InputEncoding))
@pytest.mark.parametrize("interleave", [True, False])
def test_zero_parasitics_zero_errors_is_exact(enc, interleave):
    rng = np.random.default_rng(6)
    w = synthetic_weights(12, 7, rng)
    q = rng.integers(0, 256, (4, 12))
    cfg = CrossbarConfig(wire_resistance=0.0, interleave=interleave)
    res = run_mvm(_exact(w), q, enc, cfg, input_scale=0.01)
    np.testing.assert_allclose(res.recombined, res.ideal, rtol=1e-9, atol=1e-12 * np.abs(res.ideal).max())
    assert res.analog_outputs.shape == (4, enc.cycles, 14)


def test_nibble_and_bit_serial_agree_when_ideal():
    rng = np.random.default_rng(7)
    m = _exact(synthetic_weights(20, 6, rng))
    q = rng.integers(0, 256, (3, 20))
    a = run_mvm(m, q, InputEncoding.BIT_SERIAL_1X8, IDEAL).recombined
    b = run_mvm(m, q, InputEncoding.NIBBLE_4X2, IDEAL).recombined
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12 * np.abs(a).max())


def test_single_vector_shapes():
    m = _exact(np.ones((3, 2)))
    res = run_mvm(m, np.array([1, 2, 3]), "nibble_4x2", IDEAL)
    assert res.recombined.shape == (2,)
    np.testing.assert_allclose(res.recombined, [6.0, 6.0], rtol=1e-12)
    with pytest.raises(DomainError):
        run_mvm(m, np.array([1, 2]), "nibble_4x2", IDEAL)


def test_wire_resistance_attenuates_outputs():
    m = _exact(np.full((64, 4), 1.0), PCM)
    q = np.full(64, 255)
    ideal = run_mvm(m, q, "bit_serial_1x8", IDEAL).recombined
    lossy = run_mvm(m, q, "bit_serial_1x8", CrossbarConfig(wire_resistance=1.0)).recombined
    assert np.all(lossy < ideal)


@settings(max_examples=50)
@given(n=st.integers(1, 300), rows=st.integers(1, 100))
def test_partition_is_complete(n, rows):
    w = np.arange(n * 2, dtype=float).reshape(n, 2)
    blocks = partition_matrix(w, rows)
    assert all(b.shape[0] <= rows for b in blocks)
    np.testing.assert_array_equal(np.vstack(blocks), w)


def test_normalized_rms_definition():
    ref = np.linspace(-1, 1, 100001)
    sim = ref + 0.01
    rms, srange, norm = normalized_rms(sim, ref)
    assert rms == pytest.approx(0.01, rel=1e-9)
    assert srange == pytest.approx(2 * 0.999, rel=1e-6)
    assert norm == pytest.approx(0.01 / 1.998, rel=1e-6)
    assert normalized_rms([0.0], [0.0]) == (0.0, 0.0, 0.0)
    with pytest.raises(DomainError):
        normalized_rms([1.0], [1.0, 2.0])


def _small_sweep(seed, rw=0.35, devices=(ETCRAM, PCM), workers=1):
    rng = np.random.default_rng(0)
    w = synthetic_weights(64, 16, rng)
    x = synthetic_inputs(10, 64, rng)
    return mvm_error_sweep(list(devices), (16, 64), w, x, CrossbarConfig(wire_resistance=rw), seed,
                           workers=workers)


def test_sweep_is_seed_deterministic():
    a, b = _small_sweep(3), _small_sweep(3)
    assert a == b
    assert _small_sweep(3, workers=2) == a
    assert _small_sweep(4) != a


def test_sweep_table_contents():
    rows = _small_sweep(3)
    assert [(r.device, r.array_rows) for r in rows] == [("etcram", 16), ("etcram", 64), ("pcm", 16), ("pcm", 64)]
    assert rows[0].encoding == "nibble_4x2" and rows[2].encoding == "bit_serial_1x8"
    etc, pcm = rows[1], rows[3]
    assert etc.normalized_rms < pcm.normalized_rms


def test_sweep_error_grows_with_wire_resistance():
    # error-free programming isolates the parasitic contribution
    errs = [_small_sweep(3, rw, devices=((ETCRAM, ZERO_ERROR),))[1].normalized_rms for rw in (0.0, 0.35, 1.0)]
    assert errs[0] < 1e-12
    assert errs[0] < errs[1] < errs[2]


def test_matrix_io_round_trip(tmp_path):
    a = np.random.default_rng(0).standard_normal((3, 4))
    for name in ("m.bin", "m.csv"):
        write_matrix(tmp_path / name, a)
        np.testing.assert_array_equal(read_matrix(tmp_path / name), a)


def test_matrix_io_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_matrix(tmp_path / "missing.bin")
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"ETCMAT01" + b"\x02\x00\x00\x00\x02\x00\x00\x00" + b"\x00" * 8)
    with pytest.raises(DomainError):
        read_matrix(bad)
    text = tmp_path / "bad.csv"
    text.write_text("1,2\nx,4\n")
    with pytest.raises(DomainError):
        read_matrix(text)


def test_sweep_csv_round_trip(tmp_path):
    rows = [SweepRow("ETCRAM", 72, 0.35, "nibble_4x2", 0.0026, 1e-3, 0.4, 7)]
    write_sweep_csv(rows, tmp_path / "s.csv")
    assert read_sweep_csv(tmp_path / "s.csv") == rows
    buf = io.StringIO()
    write_sweep_csv(rows, buf)
    assert buf.getvalue() == (tmp_path / "s.csv").read_text()
