"""Oversampled synthesis of the multi-sensor received signal.

Time is measured in symbol periods (T = 1 unless configured otherwise). A
waveform buffer holds ``(N + span) * Q + 1`` samples at ``t_k = k * T / Q``;
symbol ``n`` observed with timing offset ``eps`` is centred at
``(n + span / 2 + eps) * T``, so the pulse spill of the first and last
symbols fits inside the buffer with zeros beyond it.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .exceptions import ConfigurationError

_SINGULAR_TOL = 1e-8
_EDGE_TOL = 1e-12


def rrc_value(t, rolloff, symbol_duration=1.0):
    """Untruncated root-raised-cosine pulse (unit-energy continuous form).

    Removable singularities at ``t = 0`` and ``|t| = T / (4 * rolloff)`` are
    replaced by their analytic limits.
    """
    T = symbol_duration
    a = rolloff
    x = np.asarray(t, dtype=float) / T
    out = np.empty_like(x)

    at_zero = np.abs(x) < _SINGULAR_TOL
    at_edge = np.abs(np.abs(x) - 1.0 / (4.0 * a)) < _SINGULAR_TOL
    regular = ~(at_zero | at_edge)

    xr = x[regular]
    num = np.sin(np.pi * xr * (1 - a)) + 4 * a * xr * np.cos(np.pi * xr * (1 + a))
    den = np.pi * xr * (1 - (4 * a * xr) ** 2)
    out[regular] = num / den
    out[at_zero] = 1 - a + 4 * a / np.pi
    out[at_edge] = (a / np.sqrt(2)) * (
        (1 + 2 / np.pi) * np.sin(np.pi / (4 * a)) + (1 - 2 / np.pi) * np.cos(np.pi / (4 * a))
    )
    return out / np.sqrt(T)


def _support_weight(t, half_span):
    """1 inside the truncation window, 1/2 on its edges, 0 outside.

    The truncated pulse jumps at +-half_span; taking the midpoint of the
    jump there keeps sample-aligned timing offsets from picking up an extra
    full-height edge sample.
    """
    d = np.abs(np.asarray(t, dtype=float)) - half_span
    return np.where(d > _EDGE_TOL, 0.0, np.where(d >= -_EDGE_TOL, 0.5, 1.0))


@dataclass(frozen=True)
class PulseSpec:
    """Symmetrically truncated RRC pulse sampled at ``Q`` samples per symbol.

    ``scale`` is applied to the analytic pulse so that the Riemann-sum
    energy of ``taps`` equals one; ``energy`` records that discrete energy.
    """

    rolloff: float
    span_symbols: int
    samples_per_symbol: int
    symbol_duration: float
    scale: float
    taps: np.ndarray = field(repr=False)
    energy: float

    @property
    def dt(self):
        return self.symbol_duration / self.samples_per_symbol

    @property
    def half_span(self):
        return 0.5 * self.span_symbols * self.symbol_duration

    @property
    def kernel_length(self):
        """Samples touched by one symbol for any offset in [0, 1)."""
        return (self.span_symbols + 1) * self.samples_per_symbol + 1

    def evaluate(self, t):
        """Normalized, truncated pulse g(t) at arbitrary times."""
        t = np.asarray(t, dtype=float)
        g = self.scale * rrc_value(t, self.rolloff, self.symbol_duration)
        return g * _support_weight(t, self.half_span)

    @cached_property
    def tables(self):
        return _kernels.PulseTables(
            self.rolloff,
            self.span_symbols,
            self.samples_per_symbol,
            self.scale / np.sqrt(self.symbol_duration),
            self.kernel_length,
        )

    def kernel(self, eps):
        """Pulse values g(j*dt - span*T/2 - eps*T) for j in [0, kernel_length).

        ``eps`` may be a scalar (1-D result) or an array (one row per value).
        """
        eps = np.asarray(eps, dtype=float)
        flat = np.ascontiguousarray(eps.reshape(-1))
        out = np.empty((flat.size, self.kernel_length))
        _kernels.kernel_rows(flat, *self.tables.args, out)
        return out.reshape(eps.shape + (self.kernel_length,))


def rrc_pulse(rolloff=0.3, span_symbols=8, samples_per_symbol=16, symbol_duration=1.0):
    """Build the unit-energy truncated RRC pulse.

    Raises:
        ConfigurationError: rolloff outside (0, 1], odd/non-positive span, or
            fewer than 4 samples per symbol.
    """
    if not 0.0 < rolloff <= 1.0:
        raise ConfigurationError(f"rolloff must lie in (0, 1], got {rolloff}")
    if int(span_symbols) != span_symbols or span_symbols <= 0 or span_symbols % 2:
        raise ConfigurationError(f"span_symbols must be a positive even integer, got {span_symbols}")
    if int(samples_per_symbol) != samples_per_symbol or samples_per_symbol < 4:
        raise ConfigurationError(f"samples_per_symbol must be an integer >= 4, got {samples_per_symbol}")
    if symbol_duration <= 0:
        raise ConfigurationError("symbol_duration must be positive")
    span_symbols = int(span_symbols)
    samples_per_symbol = int(samples_per_symbol)

    dt = symbol_duration / samples_per_symbol
    half = span_symbols * samples_per_symbol // 2
    t = np.arange(-half, half + 1) * dt
    raw = rrc_value(t, rolloff, symbol_duration) * _support_weight(t, 0.5 * span_symbols * symbol_duration)
    scale = 1.0 / np.sqrt(dt * np.sum(raw**2))
    taps = scale * raw
    # force exact symmetry against last-ulp differences in the formula
    taps = 0.5 * (taps + taps[::-1])
    taps.setflags(write=False)
    return PulseSpec(
        rolloff=float(rolloff),
        span_symbols=span_symbols,
        samples_per_symbol=samples_per_symbol,
        symbol_duration=float(symbol_duration),
        scale=float(scale),
        taps=taps,
        energy=float(dt * np.sum(taps**2)),
    )


@dataclass(frozen=True)
class SensorParams:
    amplitude: float
    phase: float
    timing: float

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ConfigurationError(f"amplitude must be positive, got {self.amplitude}")
        if not -np.pi <= self.phase < np.pi:
            raise ConfigurationError(f"phase must lie in [-pi, pi), got {self.phase}")
        if not 0.0 <= self.timing < 1.0:
            raise ConfigurationError(f"timing must lie in [0, 1), got {self.timing}")


@dataclass(frozen=True)
class ScenarioConfig:
    sensor_count: int = 1
    symbol_count: int = 100
    symbol_duration: float = 1.0
    noise_psd: float = 1.0
    rayleigh_scale: float = 1.0

    def __post_init__(self):
        if self.sensor_count < 1 or self.symbol_count < 1:
            raise ConfigurationError("sensor_count and symbol_count must be >= 1")
        if self.noise_psd < 0 or self.rayleigh_scale <= 0 or self.symbol_duration <= 0:
            raise ConfigurationError("noise_psd must be >= 0; rayleigh_scale, symbol_duration > 0")

    @property
    def snr(self):
        """Linear channel SNR E{a^2 |I|^2} / N0."""
        return 2.0 * self.rayleigh_scale**2 / self.noise_psd

    @classmethod
    def from_snr_db(cls, snr_db, noise_psd=1.0, **kwargs):
        sigma = np.sqrt(10.0 ** (snr_db / 10.0) * noise_psd / 2.0)
        return cls(noise_psd=noise_psd, rayleigh_scale=float(sigma), **kwargs)


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray = field(repr=False)
    samples_per_symbol: int


@dataclass(frozen=True)
class SymbolSequence:
    indices: np.ndarray

    def __len__(self):
        return self.indices.size

    def values(self, constellation):
        return constellation.symbols[self.indices]


def waveform_length(symbol_count, pulse):
    return (symbol_count + pulse.span_symbols) * pulse.samples_per_symbol + 1


def draw_symbols(constellation, symbol_count, rng):
    return SymbolSequence(rng.integers(0, constellation.cardinality, size=symbol_count))


def draw_sensor_params(sigma, rng):
    """Rayleigh(sigma) gain, uniform phase on [-pi, pi), uniform timing on [0, 1)."""
    amplitude = rng.rayleigh(sigma)
    phase = rng.uniform(-np.pi, np.pi)
    timing = rng.uniform(0.0, 1.0)
    # the open upper ends are only reachable through rounding
    if phase >= np.pi:
        phase = -np.pi
    if timing >= 1.0:
        timing = 0.0
    return SensorParams(float(max(amplitude, np.finfo(float).tiny)), float(phase), float(timing))


def noiseless_waveform(symbols, constellation, params, pulse, symbol_count=None):
    """a * exp(j*theta) * sum_n I_n g(t_k - (n + span/2 + eps) T) on the buffer grid."""
    values = symbols.values(constellation)
    n_sym = len(values) if symbol_count is None else symbol_count
    Q = pulse.samples_per_symbol
    train = np.zeros((n_sym - 1) * Q + 1, dtype=complex)
    train[::Q] = values
    shaped = np.convolve(train, pulse.kernel(params.timing))
    return params.amplitude * np.exp(1j * params.phase) * shaped


def synthesize_received(symbols, constellation, params, pulse, config, rng):
    """One sensor's oversampled received record.

    Noise samples are circular complex Gaussian with variance ``N0 / dt`` so
    that the discrete matched filter output has variance ``N0 * E_g``.
    """
    if len(symbols) != config.symbol_count:
        raise ConfigurationError(
            f"symbol sequence has length {len(symbols)}, scenario expects {config.symbol_count}"
        )
    clean = noiseless_waveform(symbols, constellation, params, pulse)
    n = clean.size
    std = np.sqrt(config.noise_psd / (2.0 * pulse.dt))
    noise = std * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return Waveform(clean + noise, pulse.samples_per_symbol)
