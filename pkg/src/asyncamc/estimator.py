"""scikit-learn style wrappers around the classifier and the parameter estimator.

Samples are ObservationSet instances (one multi-sensor record each), so
``X`` is a sequence of observations rather than a 2-D array.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .constellation import QUATERNARY_SET, build_constellation, build_hypothesis_set
from .exceptions import ConfigurationError, ContractViolation
from .frontend import ObservationSet
from .gem import VARIANTS, GemConfig, classify_hml, map_decode, run_gem
from .init import Fixed, InitScheme, PerturbedTruth, SimulatedAnnealing, initialize
from .likelihood import ParamVector


def check_observations(X, allow_single=False):
    """Return ``X`` as a list of ObservationSets.

    Raises:
        ContractViolation: empty input, or an element that is not an
            ObservationSet.
    """
    if isinstance(X, ObservationSet):
        if not allow_single:
            raise ContractViolation("expected a sequence of ObservationSet; wrap a single one in a list")
        X = [X]
    try:
        X = list(X)
    except TypeError:
        raise ContractViolation(f"expected a sequence of ObservationSet, got {type(X).__name__}") from None
    if not X:
        raise ContractViolation("no observations given")
    for i, obs in enumerate(X):
        if not isinstance(obs, ObservationSet):
            raise ContractViolation(f"X[{i}] is {type(obs).__name__}, expected ObservationSet")
    return X


def check_init(init):
    """Accept an init scheme instance or a short name: 'sa', 'perturbed', 'fixed'."""
    if isinstance(init, InitScheme):
        return init
    named = {"sa": SimulatedAnnealing, "perturbed": PerturbedTruth, "fixed": Fixed}
    if isinstance(init, str) and init in named:
        return named[init]()
    raise ConfigurationError(f"init must be an init scheme or one of {sorted(named)}, got {init!r}")


def _gem_config(est):
    try:
        return GemConfig(
            stop_delta=est.stop_delta,
            max_iterations=est.max_iterations,
            epsilon_grid=est.epsilon_grid,
            theta_grid=est.theta_grid,
            variant=est.variant,
        )
    except ConfigurationError:
        raise
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None


class HMLClassifier(ClassifierMixin, BaseEstimator):
    """Hybrid maximum-likelihood modulation classifier.

    For each observation, parameters are estimated under every candidate
    format and the format with the largest maximized likelihood wins.

    Args:
        formats: candidate format ids.
        variant: 'gem', 'em_joint' or 'known_epsilon'.
        init: init scheme or short name ('sa', 'perturbed', 'fixed').
            Perturbed and fixed starts need ``obs.truth``.
        stop_delta, max_iterations, epsilon_grid, theta_grid: GemConfig fields.
        known_timing: per-sensor offsets for the known_epsilon variant.
        random_state: seed for stochastic initializers.

    Example:
        >>> clf = HMLClassifier(init="sa", random_state=0).fit()
        >>> clf.predict([obs])        # doctest: +SKIP
        array(['16QAM'], dtype='<U5')
    """

    def __init__(
        self,
        formats=QUATERNARY_SET,
        variant="gem",
        init="sa",
        stop_delta=1e-3,
        max_iterations=200,
        epsilon_grid=50,
        theta_grid=60,
        known_timing=None,
        random_state=None,
    ):
        self.formats = formats
        self.variant = variant
        self.init = init
        self.stop_delta = stop_delta
        self.max_iterations = max_iterations
        self.epsilon_grid = epsilon_grid
        self.theta_grid = theta_grid
        self.known_timing = known_timing
        self.random_state = random_state

    def fit(self, X=None, y=None):
        """Validate settings and build the hypothesis set; nothing is learned from data."""
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        self.hypotheses_ = build_hypothesis_set(list(self.formats))
        self.classes_ = np.array(self.hypotheses_.format_ids)
        self.init_ = check_init(self.init)
        self.config_ = _gem_config(self)
        if self.variant == "known_epsilon" and self.known_timing is None:
            raise ConfigurationError("the known_epsilon variant needs known_timing")
        if y is not None:
            unknown = set(np.asarray(y).tolist()) - set(self.classes_.tolist())
            if unknown:
                raise ContractViolation(f"labels {sorted(unknown)} are not candidate formats")
        return self

    def _rngs(self, n):
        return [np.random.default_rng(s) for s in np.random.SeedSequence(self.random_state).spawn(n)]

    def decision_function(self, X):
        """Maximized log-likelihood per (observation, format), shape (n, S)."""
        check_is_fitted(self, "hypotheses_")
        X = check_observations(X)
        scores = np.empty((len(X), len(self.hypotheses_)))
        for i, (obs, rng) in enumerate(zip(X, self._rngs(len(X)))):
            _, results = classify_hml(obs, self.hypotheses_, self.init_, self.config_, rng, self.known_timing)
            scores[i] = [r.log_likelihood for r in results]
        return scores

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]


class GemEstimator(BaseEstimator):
    """Joint amplitude, phase and timing estimates for one known format.

    ``fit`` takes a single ObservationSet. After fitting, ``estimate_``
    holds the ParamVector, ``log_likelihood_`` the final likelihood and
    ``posterior_`` the (N, M) symbol posteriors; ``predict`` returns the
    MAP symbol indices and ``transform`` the posteriors.
    """

    def __init__(
        self,
        format_id="16QAM",
        variant="gem",
        init="sa",
        stop_delta=1e-3,
        max_iterations=200,
        epsilon_grid=50,
        theta_grid=60,
        random_state=None,
    ):
        self.format_id = format_id
        self.variant = variant
        self.init = init
        self.stop_delta = stop_delta
        self.max_iterations = max_iterations
        self.epsilon_grid = epsilon_grid
        self.theta_grid = theta_grid
        self.random_state = random_state

    def fit(self, X, y=None):
        (obs,) = check_observations(X, allow_single=True)
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        constellation = build_constellation(self.format_id)
        init = self.init if isinstance(self.init, ParamVector) else check_init(self.init)
        rng = np.random.default_rng(self.random_state)
        u0 = init if isinstance(init, ParamVector) else initialize(init, obs, constellation, rng)
        result = run_gem(obs, constellation, u0, _gem_config(self))
        self.result_ = result
        self.estimate_ = result.estimate
        self.log_likelihood_ = result.log_likelihood
        self.posterior_ = result.posterior.probs
        self.n_iter_ = result.iterations
        return self

    def predict(self, X=None):
        """MAP symbol indices of the fitted observation."""
        check_is_fitted(self, "result_")
        if X is not None:
            self.fit(X)
        return map_decode(self.result_).indices

    def transform(self, X=None):
        check_is_fitted(self, "result_")
        if X is not None:
            self.fit(X)
        return self.posterior_
