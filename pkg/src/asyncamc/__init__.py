"""Modulation classification with multiple asynchronous sensors.

Hybrid maximum-likelihood classification: per-hypothesis parameter
estimation with a generalized EM loop, simulated-annealing starts, genie
and offset-ignorant baselines, and a Monte Carlo experiment harness.
"""

__version__ = "0.1.0"

from .baselines import clairvoyant_classify, clairvoyant_em_classify, zero_offset_em_classify
from .constellation import (
    QUATERNARY_SET,
    SUPPORTED_FORMATS,
    ConstellationSet,
    HypothesisSet,
    build_constellation,
    build_hypothesis_set,
)
from .estimator import GemEstimator, HMLClassifier
from .exceptions import ConfigurationError, ContractViolation, DegeneratePosteriorError, NumericalError
from .frontend import MatchedFilterBank, ObservationSet, mf_samples
from .gem import GemConfig, GemResult, classify_hml, e_step, map_decode, run_gem
from .harness import ClassifierSpec, ExperimentConfig, ExperimentResult, pcc, run_experiment, run_trial, simulate_observation
from .init import Fixed, PerturbedTruth, SAConfig, SimulatedAnnealing, sa_init
from .likelihood import ParamVector, log_likelihood
from .signal import (
    PulseSpec,
    ScenarioConfig,
    SensorParams,
    draw_sensor_params,
    draw_symbols,
    rrc_pulse,
    synthesize_received,
)
