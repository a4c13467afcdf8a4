"""Reference classifiers that bracket the full estimator.

* clairvoyant: knows every sensor's amplitude, phase and timing.
* clairvoyant EM: knows the timing offsets, estimates amplitude and phase.
* zero-offset EM: estimates amplitude and phase while assuming no timing offset.
"""

from dataclasses import replace

import numpy as np

from .gem import GemConfig, classify_hml
from .likelihood import log_likelihood


def clairvoyant_classify(obs, truth, hypotheses):
    """Pick the hypothesis with the largest likelihood at the true parameters."""
    scores = [log_likelihood(obs, truth, c) for c in hypotheses]
    return int(np.argmax(scores))


def _known_timing_config(config):
    return replace(config, variant="known_epsilon")


def clairvoyant_em_classify(obs, true_epsilons, hypotheses, init, config=GemConfig(), rng=None):
    decision, _ = classify_hml(
        obs, hypotheses, init, _known_timing_config(config), rng, known_timing=np.asarray(true_epsilons)
    )
    return decision


def zero_offset_em_classify(obs, hypotheses, init, config=GemConfig(), rng=None):
    decision, _ = classify_hml(
        obs, hypotheses, init, _known_timing_config(config), rng, known_timing=np.zeros(obs.L)
    )
    return decision
