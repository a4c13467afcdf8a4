import numpy as np
import pytest
from sklearn.base import clone

from asyncamc.estimator import GemEstimator, HMLClassifier, check_init, check_observations
from asyncamc.exceptions import ConfigurationError, ContractViolation
from asyncamc.harness import ExperimentConfig, simulate_observation
from asyncamc.init import PerturbedTruth, SimulatedAnnealing
from asyncamc.signal import SensorParams

from conftest import make_observation


def _observations(n, snr=15.0, L=3):
    cfg = ExperimentConfig(snr_db_list=(snr,), sensor_counts=(L,), trials=1)
    obs, labels = [], []
    for t in range(n):
        o, _ = simulate_observation(cfg, (snr, L), t, t % 4)
        obs.append(o)
        labels.append(cfg.formats[t % 4])
    return obs, np.array(labels)


def test_params_round_trip_through_clone():
    clf = HMLClassifier(formats=("8PSK", "16QAM"), init="perturbed", random_state=3)
    twin = clone(clf)
    assert twin.get_params() == clf.get_params()
    clf.set_params(theta_grid=20)
    assert clf.theta_grid == 20


def test_fit_sets_classes():
    clf = HMLClassifier().fit()
    assert list(clf.classes_) == ["8PSK", "8QAM", "16PSK", "16QAM"]


def test_predict_and_score_at_high_snr():
    X, y = _observations(8)
    clf = HMLClassifier(init=PerturbedTruth(1.0, 0.1, 0.05), random_state=0).fit(X, y)
    assert clf.score(X, y) >= 7 / 8
    scores = clf.decision_function(X[:2])
    assert scores.shape == (2, 4) and np.all(np.isfinite(scores))


def test_predict_is_reproducible_with_random_state():
    X, _ = _observations(2, snr=5.0, L=1)
    a = HMLClassifier(init="sa", random_state=4).fit().decision_function(X)
    b = HMLClassifier(init="sa", random_state=4).fit().decision_function(X)
    assert np.array_equal(a, b)


def test_predict_before_fit():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        HMLClassifier().predict([])


def test_bad_settings():
    with pytest.raises(ConfigurationError):
        HMLClassifier(variant="fast").fit()
    with pytest.raises(ConfigurationError):
        HMLClassifier(init="oracle").fit()
    with pytest.raises(ConfigurationError):
        HMLClassifier(variant="known_epsilon").fit()
    with pytest.raises(ContractViolation):
        HMLClassifier().fit(None, ["64QAM"])


def test_input_validation():
    obs, _, _ = make_observation("8PSK", N=10)
    assert check_observations([obs]) == [obs]
    assert check_observations(obs, allow_single=True) == [obs]
    with pytest.raises(ContractViolation):
        check_observations(obs)
    with pytest.raises(ContractViolation):
        check_observations([])
    with pytest.raises(ContractViolation):
        check_observations([np.zeros(3)])
    with pytest.raises(ContractViolation):
        check_observations(5)
    assert isinstance(check_init("sa"), SimulatedAnnealing)


def test_gem_estimator_recovers_parameters():
    params = [SensorParams(1.4, 0.5, 0.3), SensorParams(0.9, -1.0, 0.7)]
    obs, sym, _ = make_observation("16QAM", params, N=100, noise_psd=1e-3, seed=1)
    est = GemEstimator("16QAM", init="fixed").fit(obs)
    np.testing.assert_allclose(est.estimate_.as_array(), obs.truth.as_array(), atol=1e-2)
    assert np.array_equal(est.predict(), sym.indices)
    np.testing.assert_allclose(est.transform().sum(axis=1), 1.0, atol=1e-9)
    assert est.n_iter_ >= 1 and np.isfinite(est.log_likelihood_)
