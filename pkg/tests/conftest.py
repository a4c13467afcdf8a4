import numpy as np
import pytest
from hypothesis import settings

from asyncamc.constellation import build_constellation
from asyncamc.frontend import ObservationSet
from asyncamc.likelihood import ParamVector
from asyncamc.signal import (
    ScenarioConfig,
    SensorParams,
    SymbolSequence,
    draw_symbols,
    noiseless_waveform,
    rrc_pulse,
    synthesize_received,
)

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def pulse():
    return rrc_pulse(0.3, 8, 16)


def make_observation(
    format_id="16QAM",
    params=None,
    N=40,
    noise_psd=1.0,
    seed=0,
    noiseless=False,
    pulse=None,
    symbols=None,
):
    """Synthesize one multi-sensor observation with known truth.

    Returns ``(obs, symbols, constellation)``.
    """
    pulse = pulse or rrc_pulse(0.3, 8, 16)
    rng = np.random.default_rng(seed)
    c = build_constellation(format_id)
    params = params or [SensorParams(1.0, 0.0, 0.0)]
    if symbols is None:
        symbols = draw_symbols(c, N, rng)
    elif not isinstance(symbols, SymbolSequence):
        symbols = SymbolSequence(np.asarray(symbols))
    scenario = ScenarioConfig(sensor_count=len(params), symbol_count=N, noise_psd=noise_psd)
    if noiseless:
        waves = [noiseless_waveform(symbols, c, p, pulse) for p in params]
    else:
        waves = [synthesize_received(symbols, c, p, pulse, scenario, rng).samples for p in params]
    obs = ObservationSet.from_waveforms(
        waves, pulse, N, noise_psd, truth=ParamVector.from_sensors(params), rayleigh_scale=1.0
    )
    return obs, symbols, c


# -- acceptance reporting ------------------------------------------------------

ACCEPTANCE_LINES = {}


def report(criterion, ok, detail):
    """Record one acceptance line and fail the calling test when ``ok`` is false."""
    line = f"[{'PASS' if ok else 'FAIL'}] C{criterion:<2d} {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
