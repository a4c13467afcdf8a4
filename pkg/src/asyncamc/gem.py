"""Generalized EM estimation of per-sensor (amplitude, phase, timing).

One iteration computes symbol posteriors at the current estimate, then for
every sensor improves the timing by a line search, sets the phase and the
amplitude to their closed-form maximizers, and re-evaluates the marginal
log-likelihood. Each coordinate update never lowers the expected
complete-data log-likelihood, so the likelihood trace is non-decreasing.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .exceptions import ConfigurationError, ContractViolation, DegeneratePosteriorError
from .frontend import quantize_epsilon
from .likelihood import ParamVector, log_likelihood_from_samples, symbol_exponents

VARIANTS = ("gem", "em_joint", "known_epsilon")



@dataclass(frozen=True)
class GemConfig:
    """Estimator settings.

    ``theta_grid`` is only read by the ``em_joint`` variant, which replaces
    the timing line search and closed-form phase by an exhaustive
    ``theta_grid x epsilon_grid`` search.
    """

    stop_delta: float = 1e-3
    max_iterations: int = 200
    epsilon_grid: int = 50
    refine_tol: float = 1e-4
    variant: str = "gem"
    theta_grid: int = 60
    amplitude_floor: float = 1e-6

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        for name in ("stop_delta", "max_iterations", "epsilon_grid", "refine_tol", "theta_grid", "amplitude_floor"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"GemConfig.{name} must be positive")


@dataclass(frozen=True)
class PosteriorTable:
    probs: np.ndarray

    @property
    def N(self):
        return self.probs.shape[0]


@dataclass(frozen=True)
class PosteriorStats:
    symbol_means: np.ndarray
    mean_energy: float


@dataclass
class GemResult:
    estimate: ParamVector
    log_likelihood: float
    posterior: PosteriorTable
    iterations: int
    likelihood_trace: np.ndarray = field(repr=False)


# -- E-step ---------------------------------------------------------------


def posterior_from_samples(samples, amplitude, phase, constellation, N0=1.0):
    """Symbol posteriors from ``(L, N)`` matched-filter outputs."""
    symbols = constellation.symbols
    # -sum_l |y - a e^{j theta} I|^2 / N0, dropping the m-independent |y|^2 term
    logits = symbol_exponents(samples, amplitude, phase, symbols, N0, 1.0)
    logits -= logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    w /= w.sum(axis=1, keepdims=True)
    return PosteriorTable(w)


def e_step(obs, u, constellation):
    """Posterior probability of every candidate symbol at every symbol slot."""
    return posterior_from_samples(obs.samples(u.timing), u.amplitude, u.phase, constellation, obs.N0)


def posterior_stats(table, constellation):
    """Posterior symbol means and total expected symbol energy."""
    if table.probs.shape[1] != constellation.cardinality:
        raise ContractViolation(
            f"posterior has {table.probs.shape[1]} columns, alphabet has {constellation.cardinality}"
        )
    means = table.probs @ constellation.symbols
    energy = float(np.sum(table.probs @ constellation.energies))
    return PosteriorStats(means, energy)


# -- M-step pieces ----------------------------------------------------------

_GRID_KERNELS = {}


def _grid_kernels(pulse, points):
    key = (pulse.rolloff, pulse.span_symbols, pulse.samples_per_symbol, pulse.symbol_duration, points)
    h = _GRID_KERNELS.get(key)
    if h is None:
        grid = np.arange(points) / points
        h = (grid, pulse.kernel(grid))
        _GRID_KERNELS[key] = h
    return h


def _timing_objective(rotated, pulse, eps):
    """sum_n Re{conj(I_n) e^{-j theta} y_n(eps)} for each row of ``rotated``.

    ``rotated`` is ``Re{e^{-j theta} I^H W}`` per sensor, shape (L, K); ``eps``
    is (L,) and is snapped to the cache resolution before evaluation.
    """
    return pulse.dt * np.einsum("lk,lk->l", rotated, pulse.kernel(quantize_epsilon(eps)))


def update_epsilon(bank, stats, theta, eps_prev, grid_points=50, tol=1e-4):
    """Improve one sensor's timing offset for fixed phase and posteriors.

    Maximizes ``sum_n Re{conj(I_n) e^{-j theta} y_n(eps)}`` by a uniform grid
    scan followed by golden-section refinement in the winning cell. The
    previous offset is always a candidate and wins ties, so the objective
    never decreases.
    """
    rotated = np.real(np.exp(-1j * theta) * bank.correlate(stats.symbol_means))[None, :]
    return float(
        _update_epsilons(rotated, bank.pulse, np.array([eps_prev]), grid_points, tol)[0]
    )


def _update_epsilons(rotated, pulse, eps_prev, grid_points, tol):
    grid, h_grid = _grid_kernels(pulse, grid_points)
    scores = pulse.dt * rotated @ h_grid.T
    return _kernels.line_search(
        np.ascontiguousarray(rotated),
        np.ascontiguousarray(eps_prev, dtype=float),
        grid,
        scores,
        tol,
        pulse.dt,
        *pulse.tables.args,
    )


def update_theta(y_vec, stats, previous=0.0):
    """Phase maximizing Re{e^{-j theta} I^H y}: the four-quadrant angle of I^H y.

    Returns ``previous`` when the inner product vanishes.
    """
    z = np.vdot(stats.symbol_means, y_vec)
    if z == 0:
        return float(previous)
    return float(_wrap_phase(np.angle(z)))


def _wrap_phase(theta):
    return (np.asarray(theta) + np.pi) % (2 * np.pi) - np.pi


def update_amplitude(y_vec, stats, theta, Eg=1.0, floor=1e-6):
    """Closed-form amplitude maximizer of the per-sensor Q function, floored.

    Raises:
        DegeneratePosteriorError: the posterior expected energy is zero.
    """
    if not stats.mean_energy > 0:
        raise DegeneratePosteriorError("posterior expected symbol energy is zero")
    corr = np.real(np.exp(-1j * theta) * np.vdot(stats.symbol_means, y_vec))
    return float(max(floor, corr / (Eg * stats.mean_energy)))


def em_update_joint(bank, stats, theta_points, eps_points, previous=None, theta_grid=None):
    """Exhaustive (theta, eps) maximization over a uniform product grid.

    ``previous`` (theta, eps), when given, is kept unless a grid point is
    strictly better, which preserves the ascent property. ``theta_grid``
    overrides the uniform phase grid (e.g. a single known phase).
    """
    v = bank.correlate(stats.symbol_means)
    return _joint_search(v[None, :], bank.pulse, theta_points, eps_points, previous, theta_grid)


def _joint_search(v, pulse, theta_points, eps_points, previous=None, theta_grid=None):
    # v: (L, K) complex. Returns (theta, eps) arrays of length L.
    grid, h_grid = _grid_kernels(pulse, eps_points)
    thetas = -np.pi + 2 * np.pi * np.arange(theta_points) / theta_points if theta_grid is None else np.atleast_1d(theta_grid)
    corr = pulse.dt * v @ h_grid.T  # (L, G_eps), sum_n conj(I_n) y_n(eps)
    rot = np.exp(-1j * thetas)
    obj = np.real(rot[None, :, None] * corr[:, None, :])  # (L, G_theta, G_eps)
    flat = obj.reshape(obj.shape[0], -1)
    best = np.argmax(flat, axis=1)
    ti, ei = np.unravel_index(best, obj.shape[1:])
    theta_new = thetas[ti].astype(float)
    eps_new = grid[ei].astype(float)
    if previous is not None:
        th_prev = np.atleast_1d(np.asarray(previous[0], dtype=float))
        ep_prev = quantize_epsilon(np.atleast_1d(np.asarray(previous[1], dtype=float)))
        c_prev = pulse.dt * np.einsum("lk,lk->l", v, pulse.kernel(ep_prev))
        prev_val = np.real(np.exp(-1j * th_prev) * c_prev)
        keep = flat[np.arange(flat.shape[0]), best] <= prev_val
        theta_new = np.where(keep, th_prev, theta_new)
        eps_new = np.where(keep, ep_prev, eps_new)
    return theta_new, eps_new


# -- driver -------------------------------------------------------------------


def run_gem(obs, constellation, u0, config=GemConfig()):
    """Iterate posteriors and per-sensor updates until the likelihood gain is <= delta.

    ``known_epsilon`` keeps ``u0.timing`` fixed throughout; ``em_joint``
    replaces the timing line search and phase update by a grid search.

    Raises:
        NumericalError: the likelihood became non-finite.
    """
    if u0.L != obs.L:
        raise ContractViolation(f"initial estimate has {u0.L} sensors, observation has {obs.L}")
    pulse = obs.pulse
    Eg = pulse.energy
    N0 = obs.N0

    amp = np.maximum(u0.amplitude, config.amplitude_floor)
    theta = _wrap_phase(u0.phase).astype(float)
    eps = quantize_epsilon(u0.timing)
    eps = np.where(eps >= 1.0, 0.0, eps)
    samples = obs.samples(eps)
    ll = log_likelihood_from_samples(samples, amp, theta, constellation, N0, Eg)
    trace = [ll]

    iterations = 0
    for _ in range(config.max_iterations):
        iterations += 1
        table = posterior_from_samples(samples, amp, theta, constellation, N0)
        stats = posterior_stats(table, constellation)
        if stats.mean_energy <= 0:
            raise DegeneratePosteriorError("posterior expected symbol energy is zero")

        if config.variant != "known_epsilon":
            # v_l = I^H W_l, shape (L, K)
            v = obs.correlate(stats.symbol_means)
            if config.variant == "gem":
                rotated = np.real(np.exp(-1j * theta)[:, None] * v)
                eps = _update_epsilons(rotated, pulse, eps, config.epsilon_grid, config.refine_tol)
            else:
                theta, eps = _joint_search(
                    v, pulse, config.theta_grid, config.epsilon_grid, previous=(theta, eps)
                )
            samples = obs.samples(eps)

        corr = samples @ np.conj(stats.symbol_means)  # I^H y_l per sensor
        if config.variant != "em_joint":
            nonzero = corr != 0
            theta = np.where(nonzero, _wrap_phase(np.angle(corr)), theta)
        proj = np.real(np.exp(-1j * theta) * corr)
        amp = np.maximum(config.amplitude_floor, proj / (Eg * stats.mean_energy))

        new_ll = log_likelihood_from_samples(samples, amp, theta, constellation, N0, Eg)
        trace.append(new_ll)
        gain = new_ll - ll
        ll = new_ll
        if gain <= config.stop_delta:
            break

    estimate = ParamVector(amp, theta, eps)
    final_table = posterior_from_samples(samples, amp, theta, constellation, N0)
    return GemResult(estimate, ll, final_table, iterations, np.asarray(trace))


def classify_hml(obs, hypotheses, init, config=GemConfig(), rng=None, known_timing=None):
    """Estimate parameters under every hypothesis and pick the largest likelihood.

    Args:
        obs: ObservationSet for one transmission.
        hypotheses: HypothesisSet; the returned decision indexes into it.
        init: an init scheme (see ``asyncamc.init``).
        config: GemConfig; with the ``known_epsilon`` variant ``known_timing``
            is required and overrides the initializer's timing.
        rng: numpy Generator for stochastic initializers.

    Returns:
        ``(decision, results)`` with one GemResult per hypothesis; ties go to
        the lowest index.
    """
    from .init import PerturbedTruth, initialize

    rng = np.random.default_rng() if rng is None else rng
    if config.variant == "known_epsilon" and known_timing is None:
        raise ContractViolation("the known_epsilon variant needs known_timing")

    # a perturbed-truth start is drawn once and shared by all hypotheses;
    # per-hypothesis searches (SA) get independent streams
    shared = None
    if isinstance(init, PerturbedTruth):
        shared = initialize(init, obs, hypotheses[0], rng, config.amplitude_floor)
    streams = rng.spawn(len(hypotheses))

    results = []
    for constellation, stream in zip(hypotheses, streams):
        u0 = shared if shared is not None else initialize(init, obs, constellation, stream, config.amplitude_floor)
        if known_timing is not None:
            u0 = u0.replace(timing=np.broadcast_to(np.asarray(known_timing, dtype=float), (obs.L,)))
        results.append(run_gem(obs, constellation, u0, config))
    scores = np.array([r.log_likelihood for r in results])
    return int(np.argmax(scores)), results


def map_decode(result):
    """Per-symbol MAP decisions from the final posteriors (ties to the lowest index)."""
    from .signal import SymbolSequence

    return SymbolSequence(np.argmax(result.posterior.probs, axis=1))
