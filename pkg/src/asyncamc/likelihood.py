"""Symbol-marginalized log-likelihood of the multi-sensor observation."""

from dataclasses import dataclass

import numpy as np

from .exceptions import ContractViolation, NumericalError
from .frontend import ObservationSet  # noqa: F401  (re-exported)
from .signal import SensorParams


@dataclass(frozen=True)
class ParamVector:
    """Per-sensor (amplitude, phase, timing), stored as three length-L arrays."""

    amplitude: np.ndarray
    phase: np.ndarray
    timing: np.ndarray

    def __post_init__(self):
        for name in ("amplitude", "phase", "timing"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float)).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.amplitude.shape == self.phase.shape == self.timing.shape):
            raise ContractViolation("amplitude, phase and timing must have equal length")

    @property
    def L(self):
        return self.amplitude.size

    @property
    def per_sensor(self):
        return [SensorParams(*map(float, t)) for t in zip(self.amplitude, self.phase, self.timing)]

    @classmethod
    def from_sensors(cls, params):
        params = list(params)
        return cls(
            [p.amplitude for p in params], [p.phase for p in params], [p.timing for p in params]
        )

    def replace(self, amplitude=None, phase=None, timing=None):
        return ParamVector(
            self.amplitude if amplitude is None else amplitude,
            self.phase if phase is None else phase,
            self.timing if timing is None else timing,
        )

    def as_array(self):
        """``[a_1..a_L, theta_1..theta_L, eps_1..eps_L]``."""
        return np.concatenate([self.amplitude, self.phase, self.timing])


def symbol_exponents(samples, amplitude, phase, symbols, N0, Eg):
    """Per-symbol, per-candidate exponent of the conditional likelihood.

    Returns the ``(N, M)`` array
    ``(2/N0) Re{conj(I_k) sum_l a_l e^{-j theta_l} y_{n,l}} - (Eg/N0) |I_k|^2 sum_l a_l^2``.
    """
    combined = (amplitude * np.exp(-1j * phase)) @ samples
    cross = np.real(np.conj(symbols)[None, :] * combined[:, None])
    return (2.0 / N0) * cross - (Eg / N0) * np.sum(amplitude**2) * (np.abs(symbols) ** 2)[None, :]


def logsumexp_rows(x):
    """Row-wise log(sum(exp(x))) with max subtraction."""
    peak = np.max(x, axis=1)
    return peak + np.log(np.sum(np.exp(x - peak[:, None]), axis=1))


def log_likelihood_from_samples(samples, amplitude, phase, constellation, N0=1.0, Eg=1.0):
    """Log-likelihood given matched-filter outputs already read at each sensor's timing."""
    exps = symbol_exponents(samples, amplitude, phase, constellation.symbols, N0, Eg)
    value = float(np.sum(logsumexp_rows(exps)) - exps.shape[0] * np.log(constellation.cardinality))
    if not np.isfinite(value):
        raise NumericalError(
            "non-finite log-likelihood",
            {"amplitude": np.array(amplitude), "phase": np.array(phase), "N0": N0, "Eg": Eg},
        )
    return value


def log_likelihood(obs, u, constellation):
    """Marginal log-likelihood of hypothesis ``constellation`` at parameters ``u``.

    Raises:
        ContractViolation: ``u`` has a different sensor count than ``obs``.
        NumericalError: a non-finite intermediate was produced.
    """
    if u.L != obs.L:
        raise ContractViolation(f"parameter vector has {u.L} sensors, observation has {obs.L}")
    samples = obs.samples(u.timing)
    return log_likelihood_from_samples(
        samples, u.amplitude, u.phase, constellation, obs.N0, obs.pulse.energy
    )
