"""Matched filtering of sensor waveforms at arbitrary fractional timing.

Every classifier reads the waveform only through ``mf_samples``:

    y_n(eps) = dt * sum_k y[k] * g(t_k - (n + span/2 + eps) T)

Symbol ``n`` touches samples ``n*Q .. n*Q + kernel_length - 1`` for every
eps in [0, 1), so the bank keeps an ``N x kernel_length`` strided window
matrix and each query is one matrix-vector product with the pulse kernel.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._kernels import EPS_RESOLUTION
from .exceptions import ContractViolation
from .signal import waveform_length


def quantize_epsilon(eps):
    """Snap timing offsets onto the 1e-6 grid used for caching."""
    return np.rint(np.asarray(eps, dtype=float) / EPS_RESOLUTION) * EPS_RESOLUTION


def _cache_key(eps):
    return int(np.rint(eps / EPS_RESOLUTION))


class MatchedFilterBank:
    """Matched-filter front end bound to one sensor's waveform."""

    def __init__(self, waveform, pulse, symbol_count):
        samples = np.asarray(getattr(waveform, "samples", waveform), dtype=complex)
        expected = waveform_length(symbol_count, pulse)
        if samples.size != expected:
            raise ContractViolation(
                f"waveform has {samples.size} samples, expected {expected} for "
                f"N={symbol_count}, span={pulse.span_symbols}, Q={pulse.samples_per_symbol}"
            )
        self.pulse = pulse
        self.symbol_count = symbol_count
        self.samples = samples
        Q = pulse.samples_per_symbol
        self.windows = np.ascontiguousarray(
            sliding_window_view(samples, pulse.kernel_length)[::Q][:symbol_count]
        )
        self._cache = {}

    def __call__(self, eps):
        return mf_samples(self, eps)

    def correlate(self, weights):
        """Collapse the symbol axis: ``weights^H @ windows`` (length kernel_length).

        With ``v = correlate(w)``, ``sum_n conj(w_n) y_n(eps) = dt * v @ kernel(eps)``.
        """
        return np.conj(weights) @ self.windows


def mf_samples(bank, eps, N=None):
    """Matched-filter outputs y_n(eps), n = 0..N-1.

    Raises:
        ContractViolation: eps outside [0, 1) or N larger than the bank.
    """
    eps = float(eps)
    if not 0.0 <= eps < 1.0:
        raise ContractViolation(f"timing offset must lie in [0, 1), got {eps}")
    N = bank.symbol_count if N is None else N
    if N > bank.symbol_count:
        raise ContractViolation(f"requested {N} symbols from a bank holding {bank.symbol_count}")
    key = _cache_key(eps)
    out = bank._cache.get(key)
    if out is None:
        pulse = bank.pulse
        out = pulse.dt * (bank.windows @ pulse.kernel(key * EPS_RESOLUTION))
        out.setflags(write=False)
        bank._cache[key] = out
    return out[:N]


def _pulse_key(p):
    return (p.rolloff, p.span_symbols, p.samples_per_symbol, p.symbol_duration, p.scale)


@dataclass
class ObservationSet:
    """Matched-filter banks for the L sensors observing one transmission.

    ``truth`` optionally carries the synthesis-time parameters; only
    genie-aided baselines and the perturbed-truth initializer read it.
    """

    banks: list
    N: int
    N0: float = 1.0
    truth: object = None
    rayleigh_scale: float = None
    _windows: np.ndarray = field(default=None, init=False, repr=False)
    _flat: np.ndarray = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if not self.banks:
            raise ContractViolation("an observation needs at least one sensor")
        ref = _pulse_key(self.banks[0].pulse)
        for b in self.banks:
            if b.symbol_count != self.N or _pulse_key(b.pulse) != ref:
                raise ContractViolation("all banks must share N and sampling parameters")

    @classmethod
    def from_waveforms(cls, waveforms, pulse, N, N0=1.0, truth=None, rayleigh_scale=None):
        banks = [MatchedFilterBank(w, pulse, N) for w in waveforms]
        return cls(banks, N, N0, truth, rayleigh_scale)

    @property
    def L(self):
        return len(self.banks)

    @property
    def pulse(self):
        return self.banks[0].pulse

    @property
    def windows(self):
        """Stacked ``(L, N, kernel_length)`` window tensor."""
        if self._windows is None:
            self._windows = np.stack([b.windows for b in self.banks])
        return self._windows

    def correlate(self, weights):
        """``(L, kernel_length)`` array of ``weights^H @ windows_l`` for every sensor."""
        if self._flat is None:
            w = self.windows
            self._flat = np.ascontiguousarray(w.transpose(1, 0, 2).reshape(self.N, -1))
        return (np.conj(weights) @ self._flat).reshape(self.L, -1)

    def samples(self, timings):
        """``(L, N)`` matched-filter outputs, sensor l read at ``timings[l]``."""
        return np.stack([mf_samples(b, e) for b, e in zip(self.banks, timings)])
