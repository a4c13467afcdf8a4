"""Monte Carlo classification experiments.

Every (cell, trial, true format) work item derives its own random streams
from the master seed, so results do not depend on execution order or on
how work is split across processes. All classifiers in a cell see the same
observation; classifiers sharing an init scheme also share its random draws.
"""

import logging
import time
import zlib
from fractions import Fraction
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .baselines import clairvoyant_classify
from .constellation import QUATERNARY_SET, build_hypothesis_set
from .exceptions import ConfigurationError, ContractViolation
from .frontend import ObservationSet
from .gem import GemConfig, classify_hml
from .init import PerturbedTruth
from .likelihood import ParamVector
from .signal import ScenarioConfig, draw_sensor_params, draw_symbols, rrc_pulse, synthesize_received

log = logging.getLogger(__name__)

CLASSIFIER_KINDS = ("clairvoyant", "clairvoyant_em", "gem", "em_joint", "zero_offset_em")
# reserved ids: accepted by the output schema, not implemented here
RESERVED_KINDS = ("qhlrt",)

ASCENT_SLACK = 1e-6


@dataclass(frozen=True)
class ClassifierSpec:
    """One classifier column of an experiment."""

    name: str
    kind: str = "gem"
    init: object = PerturbedTruth()
    gem: GemConfig = GemConfig()

    def __post_init__(self):
        if self.kind in RESERVED_KINDS:
            raise ConfigurationError(f"classifier kind {self.kind!r} is reserved but not implemented")
        if self.kind not in CLASSIFIER_KINDS:
            raise ConfigurationError(f"unknown classifier kind {self.kind!r}; expected one of {CLASSIFIER_KINDS}")
        variant = {"em_joint": "em_joint", "gem": "gem"}.get(self.kind, "known_epsilon")
        if self.gem.variant != variant:
            object.__setattr__(self, "gem", _with_variant(self.gem, variant))


def _with_variant(config, variant):
    from dataclasses import replace

    return replace(config, variant=variant)


@dataclass(frozen=True)
class ExperimentConfig:
    snr_db_list: tuple = (0.0, 5.0, 10.0, 15.0)
    sensor_counts: tuple = (1, 5)
    symbol_count: int = 100
    formats: tuple = QUATERNARY_SET
    trials: int = 500
    master_seed: int = 0
    classifiers: tuple = (ClassifierSpec("gem"),)
    samples_per_symbol: int = 16
    rolloff: float = 0.3
    span_symbols: int = 8
    noise_psd: float = 1.0
    jobs: int = 1

    def __post_init__(self):
        for name in ("snr_db_list", "sensor_counts", "formats", "classifiers"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            if not getattr(self, name):
                raise ConfigurationError(f"{name} must be nonempty")
        if self.trials < 1:
            raise ConfigurationError(f"trials must be >= 1, got {self.trials}")
        if self.symbol_count < 1:
            raise ConfigurationError(f"symbol_count must be >= 1, got {self.symbol_count}")
        if any(L < 1 for L in self.sensor_counts):
            raise ConfigurationError("sensor counts must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigurationError("master_seed must be a 64-bit unsigned integer")
        if self.jobs < 1:
            raise ConfigurationError("jobs must be >= 1")
        names = [c.name for c in self.classifiers]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"classifier names must be unique: {names}")
        build_hypothesis_set(self.formats)

    @property
    def cells(self):
        return [(float(s), int(L)) for s in self.snr_db_list for L in self.sensor_counts]


@dataclass
class CellResult:
    """Aggregates for one (classifier, SNR, L) cell."""

    counts: np.ndarray
    seconds: float = 0.0
    classifications: int = 0
    gem_runs: int = 0
    gem_iterations: int = 0
    ascent_violations: int = 0
    worst_ascent_step: float = 0.0
    errors: list = field(default_factory=list)

    @property
    def p_correct(self):
        return np.diag(self.counts) / self.counts.sum(axis=1)

    @property
    def pcc(self):
        return pcc(self.counts)

    @property
    def mean_ms(self):
        return 1e3 * self.seconds / max(self.classifications, 1)

    def merge(self, other):
        self.counts = self.counts + other.counts
        self.seconds += other.seconds
        self.classifications += other.classifications
        self.gem_runs += other.gem_runs
        self.gem_iterations += other.gem_iterations
        self.ascent_violations += other.ascent_violations
        self.worst_ascent_step = min(self.worst_ascent_step, other.worst_ascent_step)
        self.errors.extend(other.errors)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    cells: dict
    started_at: str = ""
    finished_at: str = ""

    def cell(self, classifier, snr_db, L):
        return self.cells[(classifier, float(snr_db), int(L))]

    def pcc(self, classifier, snr_db, L):
        return self.cell(classifier, snr_db, L).pcc

    @property
    def ascent_violations(self):
        return sum(c.ascent_violations for c in self.cells.values())

    @property
    def gem_runs(self):
        return sum(c.gem_runs for c in self.cells.values())


def pcc(matrix):
    """Average probability of correct classification from a confusion matrix.

    Raises:
        ContractViolation: a row (true hypothesis) has no trials.
    """
    counts = np.asarray(matrix)
    rows = counts.sum(axis=1)
    if np.any(rows <= 0):
        raise ContractViolation("every true hypothesis needs at least one trial")
    # exact rational mean, rounded once
    total = sum(Fraction(int(d), int(r)) for d, r in zip(np.diag(counts), rows))
    return float(total / len(rows))


# -- seeding -----------------------------------------------------------------


def _snr_key(snr_db):
    return int(round(float(snr_db) * 1000)) + 10**6


def _stable_key(obj):
    return zlib.crc32(repr(obj).encode())


def trial_seed(master_seed, cell, trial_index, true_format, stream=0):
    snr, L = cell
    return np.random.SeedSequence(
        master_seed, spawn_key=(_snr_key(snr), int(L), int(trial_index), int(true_format), int(stream))
    )


# -- trials -------------------------------------------------------------------


def _pulse(config):
    return rrc_pulse(config.rolloff, config.span_symbols, config.samples_per_symbol)


def simulate_observation(config, cell, trial_index, true_format, hypotheses=None, pulse=None):
    """Draw symbols, channels and noise for one work item."""
    hypotheses = hypotheses or build_hypothesis_set(config.formats)
    pulse = pulse or _pulse(config)
    snr, L = cell
    scenario = ScenarioConfig.from_snr_db(
        snr, noise_psd=config.noise_psd, sensor_count=L, symbol_count=config.symbol_count
    )
    rng = np.random.default_rng(trial_seed(config.master_seed, cell, trial_index, true_format))
    constellation = hypotheses[true_format]
    symbols = draw_symbols(constellation, config.symbol_count, rng)
    params = [draw_sensor_params(scenario.rayleigh_scale, rng) for _ in range(L)]
    waves = [synthesize_received(symbols, constellation, p, pulse, scenario, rng) for p in params]
    obs = ObservationSet.from_waveforms(
        waves,
        pulse,
        config.symbol_count,
        config.noise_psd,
        truth=ParamVector.from_sensors(params),
        rayleigh_scale=scenario.rayleigh_scale,
    )
    return obs, symbols


def run_classifier(spec, obs, hypotheses, rng):
    """Returns ``(decision, per-hypothesis GemResults or [])``."""
    if spec.kind == "clairvoyant":
        return clairvoyant_classify(obs, obs.truth, hypotheses), []
    known = None
    if spec.kind == "clairvoyant_em":
        known = obs.truth.timing
    elif spec.kind == "zero_offset_em":
        known = np.zeros(obs.L)
    return classify_hml(obs, hypotheses, spec.init, spec.gem, rng, known_timing=known)


@dataclass
class TrialOutcome:
    decisions: dict
    seconds: dict
    results: dict
    errors: dict


def run_trial(config, cell, trial_index, true_format, keep_results=False):
    """Run every classifier on one shared observation."""
    hypotheses = build_hypothesis_set(config.formats)
    obs, _ = simulate_observation(config, cell, trial_index, true_format, hypotheses)
    decisions, seconds, results, errors = {}, {}, {}, {}
    for spec in config.classifiers:
        rng = np.random.default_rng(
            trial_seed(config.master_seed, cell, trial_index, true_format, 1 + _stable_key(spec.init))
        )
        start = time.perf_counter()
        try:
            decision, gem_results = run_classifier(spec, obs, hypotheses, rng)
        except Exception as exc:  # recorded per trial; the experiment continues
            log.warning("classifier %s failed on %s trial %d: %s", spec.name, cell, trial_index, exc)
            errors[spec.name] = f"{type(exc).__name__}: {exc}"
            continue
        seconds[spec.name] = time.perf_counter() - start
        decisions[spec.name] = decision
        results[spec.name] = gem_results
    if not keep_results:
        results = {k: [_trace_summary(r) for r in v] for k, v in results.items()}
    return TrialOutcome(decisions, seconds, results, errors)


def _trace_summary(result):
    steps = np.diff(result.likelihood_trace)
    return {
        "iterations": result.iterations,
        "worst_step": float(steps.min()) if steps.size else 0.0,
    }


def _work_chunk(args):
    config, cell, trial_indices = args
    S = len(config.formats)
    out = {spec.name: CellResult(np.zeros((S, S), dtype=np.int64)) for spec in config.classifiers}
    for t in trial_indices:
        for f in range(S):
            outcome = run_trial(config, cell, t, f)
            for spec in config.classifiers:
                agg = out[spec.name]
                if spec.name in outcome.errors:
                    agg.errors.append((t, f, outcome.errors[spec.name]))
                    continue
                agg.counts[f, outcome.decisions[spec.name]] += 1
                agg.seconds += outcome.seconds[spec.name]
                agg.classifications += 1
                for summary in outcome.results[spec.name]:
                    agg.gem_runs += 1
                    agg.gem_iterations += summary["iterations"]
                    if summary["worst_step"] < -ASCENT_SLACK:
                        agg.ascent_violations += 1
                    agg.worst_ascent_step = min(agg.worst_ascent_step, summary["worst_step"])
    return cell, out


def run_experiment(config, progress=None):
    """All cells x trials x true formats; each format gets ``trials`` runs per cell."""
    started = _utc_now()
    S = len(config.formats)
    cells = {
        (spec.name, snr, L): CellResult(np.zeros((S, S), dtype=np.int64))
        for snr, L in config.cells
        for spec in config.classifiers
    }
    chunk = max(1, config.trials // (4 * config.jobs)) if config.jobs > 1 else config.trials
    work = [
        (config, cell, range(start, min(start + chunk, config.trials)))
        for cell in config.cells
        for start in range(0, config.trials, chunk)
    ]
    if config.jobs > 1:
        with ProcessPoolExecutor(config.jobs) as pool:
            parts = list(pool.map(_work_chunk, work))
    else:
        parts = []
        for item in work:
            parts.append(_work_chunk(item))
            if progress:
                progress(item[1])
    for cell, out in parts:
        for name, agg in out.items():
            cells[(name, cell[0], cell[1])].merge(agg)
    return ExperimentResult(config, cells, started, _utc_now())


def _utc_now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")
