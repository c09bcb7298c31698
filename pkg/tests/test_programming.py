import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etcram.device import (
    ETCRAM,
    MAP_DURATIONS,
    MAP_VOLTAGES,
    DeviceParams,
    DeviceState,
    ErrorModel,
    PulseSpec,
    UpdateMap,
    apply_pulse,
    programming_map,
    sigma_at,
    synthetic_update_map,
)
from etcram.errors import DomainError
from etcram.programming import (
    ProgramPolicy,
    ProgramResult,
    SimulatedDevice,
    build_update_map,
    characterize_sigma,
    count_states,
    write_results_csv,
    write_verify,
)

MAP = programming_map()
POLICY = ProgramPolicy()


def test_policy_validation():
    with pytest.raises(DomainError):
        ProgramPolicy(tolerance=0)
    with pytest.raises(DomainError):
        ProgramPolicy(max_pulses=0)
    with pytest.raises(DomainError):
        ProgramPolicy(potentiation=())
    with pytest.raises(DomainError):
        ProgramPolicy(potentiation=(PulseSpec(-1.0, 1e-6),))


def test_default_ladder_contains_reference_voltages():
    volts = {p.voltage for p in POLICY.potentiation} | {p.voltage for p in POLICY.depression}
    assert {2.6, -2.0, -1.9, -1.8} <= volts


def test_already_at_target():
    r = write_verify(DeviceState(50e-9, ETCRAM), 50e-9, POLICY, MAP, np.random.default_rng(0))
    assert r.converged and r.pulses_used == 0
    assert r.trajectory == [(0, 50e-9)]


def test_target_out_of_range():
    with pytest.raises(DomainError):
        write_verify(DeviceState(50e-9, ETCRAM), 5e-6, POLICY, MAP, np.random.default_rng(0))


def test_typical_write_converges_fast():
    rng = np.random.default_rng(11)
    pulses = []
    for _ in range(200):
        r = write_verify(DeviceState(10e-9, ETCRAM), 50e-9, POLICY, MAP, rng, 0.10)
        assert r.converged
        pulses.append(r.pulses_used)
    # the reference experiment needed five writes
    assert np.median(pulses) <= 5


def test_large_step_to_half_microsiemens():
    rng = np.random.default_rng(5)
    res = [write_verify(DeviceState(10e-9, ETCRAM), 0.5e-6, ProgramPolicy(tolerance=0.007), MAP, rng)
           for _ in range(100)]
    assert np.mean([r.converged for r in res]) >= 0.95
    assert max(r.pulses_used for r in res) <= 10


@settings(max_examples=60, deadline=None)
@given(start=st.floats(2e-9, 1.5e-6), target=st.floats(2e-9, 1.5e-6), seed=st.integers(0, 2**31))
def test_write_verify_invariants(start, target, seed):
    r = write_verify(DeviceState(start, ETCRAM), target, POLICY, MAP, np.random.default_rng(seed))
    assert r.pulses_used <= POLICY.max_pulses
    assert len(r.trajectory) == r.pulses_used + 1
    assert [i for i, _ in r.trajectory] == list(range(r.pulses_used + 1))
    assert r.converged == (r.final_error_fraction <= POLICY.tolerance)
    assert r.final_state.write_count == r.pulses_used
    # no pulse after the tolerance was met
    for _, g in r.trajectory[:-1]:
        assert abs(g - target) / target > POLICY.tolerance


def test_impossible_tolerance_reports_failure():
    r = write_verify(DeviceState(10e-9, ETCRAM), 50e-9, ProgramPolicy(tolerance=1e-9), MAP,
                     np.random.default_rng(2))
    assert not r.converged
    assert r.pulses_used == 10


def test_one_shot_variant_runs():
    rng = np.random.default_rng(4)
    r = write_verify(DeviceState(10e-9, ETCRAM), 50e-9, ProgramPolicy(one_shot=True), MAP, rng)
    assert r.pulses_used <= 10


def test_result_serialization(tmp_path):
    r = write_verify(DeviceState(10e-9, ETCRAM), 50e-9, POLICY, MAP, np.random.default_rng(1))
    d = json.loads(r.to_json())
    assert d["pulses_used"] == r.pulses_used
    assert d["trajectory"][0] == [0, 10e-9]
    assert "final_state" not in d
    write_results_csv([r, r], tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == ",".join(ProgramResult.CSV_FIELDS)
    assert len(lines) == 3


def _fresh(g):
    return lambda: DeviceState(g, ETCRAM)


def test_characterize_deterministic_device_gives_zero():
    flat = ETCRAM.with_error_model(ErrorModel(((1e-9, 1e-300),)))
    out = characterize_sigma(lambda: DeviceState(20e-9, flat), 50e-9, POLICY, MAP, np.random.default_rng(0),
                             relative_noise=0.0, read_noise_share=0.0)
    assert out.sigma == 0.0
    assert out.samples.size == 1000


def test_characterize_recovers_pure_read_noise():
    s = 5e-11
    params = DeviceParams(1e-9, 1e-6, ErrorModel(((1e-9, s),)))
    n_w, n_r = 20, 500
    out = characterize_sigma(lambda: DeviceState(100e-9, params), 100e-9, POLICY, MAP, np.random.default_rng(9),
                             n_writes=n_w, n_reads=n_r, relative_noise=0.0, read_noise_share=1.0)
    assert out.sigma == pytest.approx(s, abs=3 * s / math.sqrt(n_w * n_r))
    assert out.n_failed_writes == 0


def test_characterize_etcram_one_nanosiemens():
    # reset state above the target so the loop programs downwards
    out = characterize_sigma(_fresh(2e-9), 1e-9, POLICY, MAP, np.random.default_rng(21))
    anchor = 2.1384e-11
    assert anchor / 2 <= out.sigma <= 2 * anchor


def test_characterize_argument_checks():
    with pytest.raises(DomainError):
        characterize_sigma(_fresh(2e-9), 1e-9, POLICY, MAP, np.random.default_rng(0), n_writes=1)


def test_count_states_degenerate_range():
    assert count_states(ETCRAM.error_model, 1e-6, 1e-6 * (1 + 1e-12)) == pytest.approx(0.0, abs=1e-6)


def test_count_states_constant_relative_error():
    c = 0.01
    model = ErrorModel(tuple((g, c * g) for g in np.geomspace(1e-12, 1e0, 13)))
    assert count_states(model, 1e-6, 1e-5) == pytest.approx(math.log(10) / c, rel=1e-3)


def test_count_states_order_validation():
    with pytest.raises(DomainError):
        count_states(ETCRAM.error_model, 1e-6, 1e-7)
    with pytest.raises(DomainError):
        count_states(ETCRAM.error_model, 0.0, 1e-7)


def test_count_states_shipped_calibration():
    n = count_states(ETCRAM.error_model, 1e-9, 1e-3)
    assert 3180 * 0.85 <= n <= 3180 * 1.15


@settings(max_examples=100, deadline=None)
@given(a=st.floats(-10.0, -3.5), frac1=st.floats(0.01, 0.99), span=st.floats(1e-4, 3.0))
def test_count_states_additive(a, frac1, span):
    lo, hi = 10**a, 10 ** (a + span)
    mid = 10 ** (a + frac1 * span)
    m = ETCRAM.error_model
    whole = count_states(m, lo, hi)
    assert count_states(m, lo, mid) + count_states(m, mid, hi) == pytest.approx(whole, rel=1e-6)


@pytest.mark.parametrize("k", [0.5, 2.0, 7.0])
def test_count_states_homogeneous(k):
    m = ETCRAM.error_model
    assert count_states(m.scaled(k), 1e-9, 1e-3) == pytest.approx(count_states(m, 1e-9, 1e-3) / k, rel=1e-12)


def test_count_states_minimum_density_close():
    m = ETCRAM.error_model
    assert count_states(m, 1e-9, 1e-3, 100) == pytest.approx(count_states(m, 1e-9, 1e-3), rel=1e-4)


def test_count_states_density_insensitive():
    m = ETCRAM.error_model
    a, b = count_states(m, 1e-9, 1e-3, 1000), count_states(m, 1e-9, 1e-3, 2000)
    assert abs(a - b) / b < 1e-4


def test_build_map_all_zero_measurements(tmp_path):
    p = tmp_path / "zeros.csv"
    with open(p, "w") as fh:
        fh.write("v_volts,t_seconds,delta_fraction\n")
        for v in (1.0, 2.0):
            for t in (1e-7, 1e-6):
                fh.write(f"{v},{t},0.0\n{v},{t},0.0\n")
    m = build_update_map(str(p), [1.0, 2.0], [1e-7, 1e-6], ETCRAM.error_model, g0=50e-9)
    assert np.all(m.delta_fraction == 0)


def test_build_map_missing_file():
    with pytest.raises(OSError):
        build_update_map("/nonexistent/map.csv", [1.0], [1e-7], ETCRAM.error_model, g0=50e-9)


def test_build_map_round_trip_with_simulated_device():
    truth = synthetic_update_map()
    dev = SimulatedDevice(DeviceState(100e-9, ETCRAM), truth, relative_noise=0.0)
    got = build_update_map(dev, MAP_VOLTAGES, MAP_DURATIONS, ETCRAM.error_model, n_trials=2)
    limit = 3 * sigma_at(ETCRAM.error_model, 100e-9)
    expected = np.where(np.abs(truth.delta_fraction * 100e-9) > limit, truth.delta_fraction, 0.0)
    np.testing.assert_allclose(got.delta_fraction, expected, rtol=1e-12, atol=0)
    # zero cells trace the inner boundary: some are zero, some are not
    assert 0 < np.count_nonzero(got.delta_fraction) < got.delta_fraction.size
    # replaying every node through apply_pulse gives the measured change back
    s = DeviceState(100e-9, ETCRAM)
    for i, v in enumerate(got.voltage_grid):
        for j, t in enumerate(got.duration_grid):
            after = apply_pulse(s, PulseSpec(v, t), got, 0.0)
            assert (after.conductance - s.conductance) / s.conductance == pytest.approx(
                got.delta_fraction[i, j], rel=1e-9, abs=1e-15)


def test_build_map_grid_validation():
    dev = SimulatedDevice(DeviceState(100e-9, ETCRAM), synthetic_update_map())
    with pytest.raises(DomainError):
        build_update_map(dev, [], [1e-7], ETCRAM.error_model)
    with pytest.raises(DomainError):
        build_update_map(dev, [2.0, 1.0], [1e-7], ETCRAM.error_model)
    with pytest.raises(DomainError):
        build_update_map(lambda p, r: 0.0, [1.0], [1e-7], ETCRAM.error_model)


def test_build_map_averages_noisy_trials():
    truth = UpdateMap(np.array([2.0, 2.4]), np.array([1e-7, 1e-6]), np.array([[0.2, 0.3], [0.4, 0.5]]))
    dev = SimulatedDevice(DeviceState(100e-9, ETCRAM), truth, relative_noise=0.1)
    got = build_update_map(dev, [2.0, 2.4], [1e-7, 1e-6], ETCRAM.error_model, n_trials=4000,
                           rng=np.random.default_rng(8))
    np.testing.assert_allclose(got.delta_fraction, truth.delta_fraction, rtol=0.02)
