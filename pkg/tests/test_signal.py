import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asyncamc.constellation import build_constellation
from asyncamc.exceptions import ConfigurationError
from asyncamc.frontend import MatchedFilterBank, mf_samples
from asyncamc.signal import (
    ScenarioConfig,
    SensorParams,
    SymbolSequence,
    draw_sensor_params,
    draw_symbols,
    noiseless_waveform,
    rrc_pulse,
    rrc_value,
    synthesize_received,
    waveform_length,
)


def test_default_pulse_shape(pulse):
    assert pulse.taps.size == 129
    np.testing.assert_allclose(pulse.taps, pulse.taps[::-1], atol=1e-12, rtol=0)
    assert abs(pulse.energy - 1.0) < 1e-9


@given(
    rolloff=st.floats(0.05, 1.0),
    half_span=st.integers(1, 6),
    Q=st.integers(4, 24),
)
def test_pulse_symmetric_and_unit_energy(rolloff, half_span, Q):
    p = rrc_pulse(rolloff, 2 * half_span, Q)
    np.testing.assert_allclose(p.taps, p.taps[::-1], atol=1e-12, rtol=0)
    assert abs(p.energy - 1.0) < 1e-9


def test_peak_matches_closed_form_limit():
    a = 0.3
    p = rrc_pulse(a, 8, 32)
    peak = p.taps[p.taps.size // 2] / p.scale
    assert abs(peak - (1 - a + 4 * a / np.pi)) < 1e-12


def test_edge_singularity_is_continuous():
    a = 0.25
    t0 = 1 / (4 * a)
    near = rrc_value(np.array([t0 - 1e-5, t0 + 1e-5]), a)
    at = rrc_value(np.array([t0]), a)
    np.testing.assert_allclose(near, at[0], atol=1e-4)


def test_analytic_kernel_matches_taps(pulse):
    # eps = 0 puts sample 8 * Q on the pulse centre
    h = pulse.kernel(0.0)
    np.testing.assert_allclose(h[: pulse.taps.size], pulse.taps, atol=1e-12)
    assert np.all(h[pulse.taps.size :] == 0)


@pytest.mark.parametrize("eps", [0.0, 0.13, 0.5, 0.999])
def test_kernel_matches_numpy_reference(pulse, eps):
    t = np.arange(pulse.kernel_length) * pulse.dt - pulse.half_span - eps
    np.testing.assert_allclose(pulse.kernel(eps), pulse.evaluate(t), atol=1e-12)


@pytest.mark.parametrize("kw", [dict(rolloff=0.0), dict(rolloff=1.5), dict(span_symbols=7), dict(samples_per_symbol=3)])
def test_pulse_rejects_bad_arguments(kw):
    with pytest.raises(ConfigurationError):
        rrc_pulse(**kw)


@pytest.mark.parametrize("kw", [dict(amplitude=0.0), dict(phase=np.pi), dict(timing=1.0), dict(timing=-0.1)])
def test_sensor_params_ranges(kw):
    args = dict(amplitude=1.0, phase=0.0, timing=0.0) | kw
    with pytest.raises(ConfigurationError):
        SensorParams(**args)


def test_snr_mapping():
    cfg = ScenarioConfig.from_snr_db(10.0)
    assert abs(cfg.rayleigh_scale**2 - 5.0) < 1e-12
    assert abs(cfg.snr - 10.0) < 1e-12


def test_rayleigh_second_moment():
    rng = np.random.default_rng(1)
    a2 = np.array([draw_sensor_params(1.0, rng).amplitude ** 2 for _ in range(100_000)])
    se = a2.std(ddof=1) / np.sqrt(a2.size)
    assert abs(a2.mean() - 2.0) < 3 * se


def test_draws_are_reproducible_and_in_range():
    a = [draw_sensor_params(2.0, np.random.default_rng(5)) for _ in range(2)]
    assert a[0] == a[1]
    rng = np.random.default_rng(6)
    for _ in range(1000):
        p = draw_sensor_params(1.0, rng)
        assert -np.pi <= p.phase < np.pi and 0 <= p.timing < 1 and p.amplitude > 0


def _identity_case(pulse, phase):
    rng = np.random.default_rng(3)
    c = build_constellation("16QAM")
    sym = draw_symbols(c, 50, rng)
    w = noiseless_waveform(sym, c, SensorParams(1.0, phase, 0.0), pulse)
    y = mf_samples(MatchedFilterBank(w, pulse, 50), 0.0)
    return y, sym.values(c)


def _worst_case_isi(pulse, peak):
    # sum of |r(kT)|, k != 0, of the truncated pulse autocorrelation
    r = pulse.dt * np.correlate(pulse.taps, pulse.taps, "full")
    c = r.size // 2
    Q = pulse.samples_per_symbol
    return peak * (np.abs(r[c + Q :: Q]).sum() + np.abs(r[c - Q :: -Q]).sum())


def test_noiseless_identity_channel(pulse):
    y, I = _identity_case(pulse, 0.0)
    err = np.abs(y - I)
    # truncation ISI: 1e-2 holds in RMS; the peak is bounded by the ISI sum
    assert np.sqrt(np.mean(err**2)) < 1e-2
    assert err.max() <= _worst_case_isi(pulse, np.abs(I).max()) + 1e-12


def test_noiseless_rotation(pulse):
    y, I = _identity_case(pulse, np.pi / 2)
    err = np.abs(y - 1j * I)
    assert np.sqrt(np.mean(err**2)) < 1e-2
    assert err.max() <= _worst_case_isi(pulse, np.abs(I).max()) + 1e-12


def test_waveform_length(pulse):
    c = build_constellation("8PSK")
    rng = np.random.default_rng(0)
    sym = draw_symbols(c, 30, rng)
    w = synthesize_received(sym, c, SensorParams(1, 0, 0.5), pulse, ScenarioConfig(symbol_count=30), rng)
    assert w.samples.size == waveform_length(30, pulse) == (30 + 8) * 16 + 1


def test_symbol_count_mismatch(pulse):
    c = build_constellation("8PSK")
    with pytest.raises(ConfigurationError):
        synthesize_received(
            SymbolSequence(np.zeros(5, int)), c, SensorParams(1, 0, 0), pulse, ScenarioConfig(symbol_count=6), None
        )


def test_linearity_in_amplitude(pulse):
    c = build_constellation("8QAM")
    sym = draw_symbols(c, 20, np.random.default_rng(2))
    w1 = noiseless_waveform(sym, c, SensorParams(1.0, 0.3, 0.41), pulse)
    w2 = noiseless_waveform(sym, c, SensorParams(2.0, 0.3, 0.41), pulse)
    np.testing.assert_allclose(w2, 2 * w1, atol=1e-13)


def test_synthesis_is_deterministic(pulse):
    c = build_constellation("16PSK")
    out = []
    for _ in range(2):
        rng = np.random.default_rng(11)
        sym = draw_symbols(c, 20, rng)
        out.append(synthesize_received(sym, c, SensorParams(1.3, -1.0, 0.7), pulse, ScenarioConfig(symbol_count=20), rng))
    assert np.array_equal(out[0].samples, out[1].samples)


def test_pulse_centre_position(pulse):
    # symbol n sits at (n + span/2 + eps) T on the buffer grid
    sym = SymbolSequence(np.array([0, 0, 0]))
    c = build_constellation("BPSK")
    w = noiseless_waveform(sym, c, SensorParams(1.0, 0.0, 0.25), pulse)
    t = np.arange(w.size) * pulse.dt
    expected = sum(c.symbols[0] * pulse.evaluate(t - (n + 4 + 0.25)) for n in range(3))
    np.testing.assert_allclose(w[: t.size], expected, atol=1e-12)
