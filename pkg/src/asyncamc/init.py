"""Starting points for the estimator: perturbed truth and simulated annealing."""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, ContractViolation
from .likelihood import ParamVector, log_likelihood_from_samples


@dataclass(frozen=True)
class SAConfig:
    iterations: int = 200
    temperature_param: float = 1.6
    grid_points_a: int = 10
    grid_points_theta: int = 10
    grid_points_epsilon: int = 10
    amplitude_upper_quantile: float = 0.99
    mode: str = "joint"

    def __post_init__(self):
        if self.iterations < 2:
            raise ConfigurationError("SA needs at least 2 iterations")
        if min(self.grid_points_a, self.grid_points_theta, self.grid_points_epsilon) < 2:
            raise ConfigurationError("SA grid counts must be >= 2")
        if not 0.0 < self.amplitude_upper_quantile < 1.0:
            raise ConfigurationError("amplitude_upper_quantile must lie in (0, 1)")
        if self.temperature_param <= 0:
            raise ConfigurationError("temperature_param must be positive")
        if self.mode not in ("joint", "per_sensor"):
            raise ConfigurationError(f"SA mode must be 'joint' or 'per_sensor', got {self.mode!r}")

    @classmethod
    def uniform(cls, **kw):
        return cls(**kw)

    @classmethod
    def nonuniform(cls, **kw):
        """5 amplitude, 20 phase and 10 timing points: same 1000-point grid size."""
        return cls(grid_points_a=5, grid_points_theta=20, grid_points_epsilon=10, **kw)


@dataclass(frozen=True)
class PerturbedTruth:
    delta_a: float = 5.0
    delta_theta: float = np.pi / 10
    delta_epsilon: float = 0.1

    def __post_init__(self):
        if min(self.delta_a, self.delta_theta, self.delta_epsilon) < 0:
            raise ConfigurationError("perturbation bounds must be non-negative")


@dataclass(frozen=True)
class SimulatedAnnealing:
    config: SAConfig = SAConfig()
    sigma: float = None  # Rayleigh scale for the amplitude grid; None -> read from the observation


@dataclass(frozen=True)
class Fixed:
    params: ParamVector = None  # None -> start at the synthesis-time truth


InitScheme = (PerturbedTruth, SimulatedAnnealing, Fixed)


def _wrap_phase(theta):
    return (np.asarray(theta) + np.pi) % (2 * np.pi) - np.pi


def perturbed_truth_init(truth, deltas, rng, floor=1e-6):
    """Uniform errors around the true parameters.

    Amplitude is drawn from U[0, a + delta_a] (exactly ``a`` when
    ``delta_a == 0``); phase from U[theta - delta_theta, theta + delta_theta]
    wrapped to [-pi, pi); timing from U[eps - delta_eps, eps + delta_eps]
    wrapped to [0, 1).
    """
    if isinstance(deltas, PerturbedTruth):
        deltas = (deltas.delta_a, deltas.delta_theta, deltas.delta_epsilon)
    da, dth, de = deltas
    if min(da, dth, de) < 0:
        raise ContractViolation("perturbation bounds must be non-negative")
    L = truth.L
    a = rng.uniform(0.0, truth.amplitude + da, size=L) if da > 0 else truth.amplitude.copy()
    th = truth.phase.copy()
    if dth > 0:
        th = _wrap_phase(th + rng.uniform(-dth, dth, size=L))
    ep = truth.timing.copy()
    if de > 0:
        ep = np.mod(ep + rng.uniform(-de, de, size=L), 1.0)
        ep = np.where(ep >= 1.0, 0.0, ep)
    return ParamVector(np.maximum(a, floor), th, ep)


@dataclass(frozen=True)
class SAGrid:
    amplitude: np.ndarray
    phase: np.ndarray
    timing: np.ndarray

    @property
    def size(self):
        return self.amplitude.size * self.phase.size * self.timing.size

    @property
    def shape(self):
        return (self.amplitude.size, self.phase.size, self.timing.size)


def rayleigh_quantile(p, sigma):
    return sigma * np.sqrt(-2.0 * np.log1p(-p))


def build_grid(config, sigma):
    """Per-sensor grid: amplitudes up to the Rayleigh quantile, phases, timings."""
    if not sigma > 0:
        raise ContractViolation("sigma must be positive")
    a_upper = rayleigh_quantile(config.amplitude_upper_quantile, sigma)
    Ga, Gt, Ge = config.grid_points_a, config.grid_points_theta, config.grid_points_epsilon
    return SAGrid(
        amplitude=a_upper / Ga * np.arange(1, Ga + 1),
        phase=-np.pi + 2 * np.pi / Gt * np.arange(Gt),
        timing=np.arange(Ge) / Ge,
    )


class _GridLikelihood:
    """Log-likelihood on grid points, with matched filtering done once per timing."""

    def __init__(self, obs, constellation, grid, sensors):
        self.grid = grid
        self.constellation = constellation
        self.N0 = obs.N0
        self.Eg = obs.pulse.energy
        banks = [obs.banks[l] for l in sensors]
        # (L, G_eps, N)
        self.samples = np.stack([[b(e) for e in grid.timing] for b in banks])
        self.rows = np.arange(len(banks))
        self.evaluations = 0

    def __call__(self, state):
        self.evaluations += 1
        ia, it, ie = state[:, 0], state[:, 1], state[:, 2]
        return log_likelihood_from_samples(
            self.samples[self.rows, ie],
            self.grid.amplitude[ia],
            self.grid.phase[it],
            self.constellation,
            self.N0,
            self.Eg,
        )


def _neighbor(state, shape, rng):
    # one sensor, one coordinate, one grid step; phase wraps, others reflect
    new = state.copy()
    l = rng.integers(state.shape[0])
    c = rng.integers(3)
    step = 1 if rng.random() < 0.5 else -1
    g = shape[c]
    x = new[l, c] + step
    if c == 1:
        x %= g
    elif x < 0 or x >= g:
        x = new[l, c] - step
    new[l, c] = x
    return new


def _anneal(target, shape, config, rng):
    L = target.rows.size
    state = np.column_stack([rng.integers(g, size=L) for g in shape])
    value = target(state)
    best, best_value = state, value
    d = config.temperature_param
    for k in range(2, config.iterations + 1):
        temp = d / np.log(k)
        proposal = _neighbor(state, shape, rng)
        prop_value = target(proposal)
        if value <= prop_value:
            accept = True
        elif value == 0:
            accept = True
        else:
            accept = rng.random() < np.exp((prop_value - value) / (temp * abs(value)))
        if accept:
            state, value = proposal, prop_value
        if best_value <= value:
            best, best_value = state, value
    return best, best_value


def sa_init(obs, constellation, config, rng, sigma=None, return_evaluations=False):
    """Simulated annealing over the coarse product grid.

    In ``joint`` mode a single chain walks the 3L-dimensional grid and costs
    exactly ``config.iterations`` likelihood evaluations; ``per_sensor`` mode
    runs one single-sensor chain per sensor.
    """
    if sigma is None:
        sigma = getattr(obs, "rayleigh_scale", None)
        if sigma is None:
            raise ContractViolation("sa_init needs the Rayleigh scale sigma for its amplitude grid")
    grid = build_grid(config, sigma)
    L = obs.L
    if config.mode == "joint":
        target = _GridLikelihood(obs, constellation, grid, range(L))
        best, _ = _anneal(target, grid.shape, config, rng)
        evaluations = target.evaluations
    else:
        rows = []
        evaluations = 0
        for l in range(L):
            target = _GridLikelihood(obs, constellation, grid, [l])
            b, _ = _anneal(target, grid.shape, config, rng)
            rows.append(b[0])
            evaluations += target.evaluations
        best = np.array(rows)
    u = ParamVector(grid.amplitude[best[:, 0]], grid.phase[best[:, 1]], grid.timing[best[:, 2]])
    return (u, evaluations) if return_evaluations else u


def initialize(scheme, obs, constellation, rng, floor=1e-6):
    """Dispatch an init scheme to a starting ParamVector."""
    if isinstance(scheme, PerturbedTruth):
        if obs.truth is None:
            raise ContractViolation("perturbed-truth initialization needs obs.truth")
        return perturbed_truth_init(obs.truth, scheme, rng, floor)
    if isinstance(scheme, SimulatedAnnealing):
        return sa_init(obs, constellation, scheme.config, rng, scheme.sigma)
    if isinstance(scheme, Fixed):
        params = scheme.params if scheme.params is not None else obs.truth
        if params is None:
            raise ContractViolation("fixed initialization without parameters needs obs.truth")
        return params
    raise ConfigurationError(f"unknown init scheme {scheme!r}")
