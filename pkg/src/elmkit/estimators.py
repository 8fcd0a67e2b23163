"""Scikit-learn style classifiers wrapping the functional core.

These estimators follow the usual (n_samples, n_features) convention and
compose with model selection and pipelines; internally samples are moved to
columns and handed to the solver functions.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets, unique_labels
from sklearn.utils.validation import check_is_fitted, validate_data

from .ensemble import EnsembleModel, ensemble_predict
from .hidden import ACTIVATIONS, forward_hidden, hidden_layer_from_dims, init_hidden_layer
from .seeding import spawn_seed
from .solvers import (
    LDA,
    PI,
    build_targets,
    class_stats,
    posteriors,
    score,
    solve_lda,
    solve_pi,
)


def _resolve_seed(random_state) -> int:
    if random_state is None:
        return int(np.random.SeedSequence().generate_state(1, np.uint64)[0])
    if isinstance(random_state, (int, np.integer)) and random_state >= 0:
        return int(random_state)
    raise ValueError(f"random_state must be None or a non-negative int, got {random_state!r}")


def _encoded_labels(self, y):
    check_classification_targets(y)
    self.classes_ = unique_labels(y)
    if len(self.classes_) < 2:
        raise ValueError("need at least two classes in y")
    lookup = {c: i for i, c in enumerate(self.classes_)}
    return np.asarray([lookup[v] for v in y], dtype=np.int64)


class ELMClassifier(ClassifierMixin, BaseEstimator):
    """Single-hidden-layer network with random input weights and a
    closed-form linear output stage.

    Parameters
    ----------
    fan_out : int, default=5
        Hidden units per input feature; ignored when `n_hidden` is given.
    n_hidden : int or None, default=None
        Exact number of hidden units.
    solver : {'lda', 'pi'}, default='lda'
        'pi' fits the output weights by regularized least squares against
        one-hot targets; 'lda' fits a shared-covariance Gaussian model of
        the hidden activations and uses the class log-posterior weights.
    activation : {'sigmoid', 'tanh', 'relu'}, default='sigmoid'
    weight_low, weight_high : float, default=(-0.5, 0.5)
        Range of the uniform random input weights.
    priors : 'empirical', 'uniform' or array-like, default='empirical'
        Class priors for the 'lda' solver.
    ridge : float, default=0.0
        Tikhonov term for the 'pi' solver.
    jitter : float, default=0.0
        Starting diagonal loading for the covariance inverse ('lda').
    random_state : int or None, default=None
        Seed for the hidden-layer draw. None draws a fresh seed at fit time.

    Attributes
    ----------
    classes_ : ndarray of original class labels.
    hidden_layer_ : the fitted random projection.
    output_weights_ : trained output-stage weights.
    seed_ : the seed actually used for the hidden layer.
    """

    def __init__(
        self,
        fan_out=5,
        n_hidden=None,
        solver=LDA,
        activation="sigmoid",
        weight_low=-0.5,
        weight_high=0.5,
        priors="empirical",
        ridge=0.0,
        jitter=0.0,
        random_state=None,
    ):
        self.fan_out = fan_out
        self.n_hidden = n_hidden
        self.solver = solver
        self.activation = activation
        self.weight_low = weight_low
        self.weight_high = weight_high
        self.priors = priors
        self.ridge = ridge
        self.jitter = jitter
        self.random_state = random_state

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64)
        encoded = _encoded_labels(self, y)
        if self.solver not in (PI, LDA):
            raise ValueError(f"solver must be 'pi' or 'lda', got {self.solver!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.seed_ = _resolve_seed(self.random_state)
        n_features = X.shape[1]
        if self.n_hidden is not None:
            self.hidden_layer_ = hidden_layer_from_dims(
                self.n_hidden, n_features, self.weight_low, self.weight_high, self.activation, self.seed_
            )
        else:
            self.hidden_layer_ = init_hidden_layer(
                n_features, self.fan_out, self.weight_low, self.weight_high, self.activation, self.seed_
            )
        acts = forward_hidden(self.hidden_layer_, X.T)
        if self.solver == PI:
            targets = build_targets(encoded, len(self.classes_))
            self.output_weights_ = solve_pi(acts, targets, self.ridge)
        else:
            stats = class_stats(acts, encoded, self.priors, len(self.classes_))
            self.output_weights_ = solve_lda(stats, self.jitter)
        return self

    def decision_function(self, X):
        """Raw output-stage scores, shape (n_samples, n_classes)."""
        check_is_fitted(self)
        X = validate_data(self, X, reset=False, dtype=np.float64)
        acts = forward_hidden(self.hidden_layer_, X.T)
        return score(self.output_weights_, acts).T

    def predict_proba(self, X):
        """Softmax of the scores.

        Calibrated class posteriors for the 'lda' solver; for 'pi' this is
        only a monotone squashing of least-squares scores.
        """
        return posteriors(self.decision_function(X).T).T

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[scores.argmax(axis=1)]


class ELMEnsembleClassifier(ClassifierMixin, BaseEstimator):
    """Average of posterior probabilities over independently seeded members.

    Each member is an ELM with its own random hidden layer, trained by the
    'lda' solver (least-squares members require `allow_least_squares=True`
    and are averaged after the same softmax). Prediction takes the argmax
    of the unweighted mean of member posteriors.
    """

    def __init__(
        self,
        n_members=5,
        fan_out=5,
        n_hidden=None,
        solver=LDA,
        activation="sigmoid",
        weight_low=-0.5,
        weight_high=0.5,
        priors="empirical",
        ridge=0.0,
        jitter=0.0,
        allow_least_squares=False,
        random_state=None,
    ):
        self.n_members = n_members
        self.fan_out = fan_out
        self.n_hidden = n_hidden
        self.solver = solver
        self.activation = activation
        self.weight_low = weight_low
        self.weight_high = weight_high
        self.priors = priors
        self.ridge = ridge
        self.jitter = jitter
        self.allow_least_squares = allow_least_squares
        self.random_state = random_state

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64)
        encoded = _encoded_labels(self, y)
        if self.n_members < 1:
            raise ValueError(f"n_members must be >= 1, got {self.n_members}")
        if self.solver not in (PI, LDA):
            raise ValueError(f"solver must be 'pi' or 'lda', got {self.solver!r}")
        self.seed_ = _resolve_seed(self.random_state)
        n_features = X.shape[1]
        xt = X.T
        members = []
        for m in range(self.n_members):
            seed = spawn_seed(self.seed_, m)
            if self.n_hidden is not None:
                layer = hidden_layer_from_dims(
                    self.n_hidden, n_features, self.weight_low, self.weight_high, self.activation, seed
                )
            else:
                layer = init_hidden_layer(
                    n_features, self.fan_out, self.weight_low, self.weight_high, self.activation, seed
                )
            acts = forward_hidden(layer, xt)
            if self.solver == PI:
                weights = solve_pi(acts, build_targets(encoded, len(self.classes_)), self.ridge)
            else:
                weights = solve_lda(class_stats(acts, encoded, self.priors, len(self.classes_)), self.jitter)
            members.append((layer, weights))
        self.ensemble_model_ = EnsembleModel(
            members=tuple(members), allow_least_squares=self.allow_least_squares
        )
        return self

    def predict_proba(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, reset=False, dtype=np.float64)
        combined, _ = ensemble_predict(self.ensemble_model_, X.T)
        return combined.T

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[proba.argmax(axis=1)]
