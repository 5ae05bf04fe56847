"""Estimator facade over the trainable network.

``NstmClassifier`` follows the scikit-learn protocol (``fit`` / ``predict`` /
``get_params``) so the recognizer drops into pipelines, grid searches, and
``cross_val_score`` like any other text classifier.  X is a sequence of
bracket words; y holds binary labels.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .dyck import Sample, alphabet
from .errors import AlphabetError
from .trainer import TrainConfig, evaluate, init_model, run_word, train


def _check_words(X, k: int) -> list[str]:
    allowed = set(alphabet(k))
    words = []
    for row, x in enumerate(X):
        if not isinstance(x, str):
            raise TypeError(f"X[{row}] is {type(x).__name__}, expected str")
        if not set(x) <= allowed:
            raise AlphabetError(f"X[{row}] uses symbols outside {k} bracket pairs")
        words.append(x)
    return words


class NstmClassifier(BaseEstimator, ClassifierMixin):
    """Bracket-word acceptor trained with forward-mode gradients.

    Parameters mirror the training defaults: 8 neurons, plain SGD at 1e-2
    with patience halving, squared error on the acceptance neuron.  A slice
    of the training data (``validation_fraction``) drives early stopping and
    checkpoint selection.
    """

    def __init__(self, k=2, n_neurons=8, epochs=400, learning_rate=1e-2,
                 patience=10, early_stop=30, validation_fraction=0.1,
                 init_scale=0.5, scale=4.0, ramp=None, random_state=0):
        self.k = k
        self.n_neurons = n_neurons
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.patience = patience
        self.early_stop = early_stop
        self.validation_fraction = validation_fraction
        self.init_scale = init_scale
        self.scale = scale
        self.ramp = ramp
        self.random_state = random_state

    def fit(self, X, y):
        words = _check_words(X, self.k)
        y = np.asarray(y)
        if y.shape != (len(words),):
            raise ValueError(f"y has shape {y.shape}, expected ({len(words)},)")
        classes = np.unique(y)
        if not set(classes) <= {0, 1, False, True}:
            raise ValueError("labels must be binary (0/1)")
        if len(words) < 2:
            raise ValueError("need at least two samples")

        samples = [Sample(w, int(lbl)) for w, lbl in zip(words, y)]
        rng = np.random.default_rng(self.random_state)
        order = rng.permutation(len(samples))
        n_val = max(1, int(round(self.validation_fraction * len(samples))))
        n_val = min(n_val, len(samples) - 1)
        val = [samples[i] for i in order[:n_val]]
        tr = [samples[i] for i in order[n_val:]]

        cfg = TrainConfig(epochs=self.epochs, lr=self.learning_rate,
                          patience=self.patience, early_stop=self.early_stop,
                          seed=self.random_state, ramp=self.ramp)
        model = init_model(self.random_state, n_neurons=self.n_neurons,
                           x_width=2 * self.k + 1, init_scale=self.init_scale,
                           scale=self.scale)
        self.model_, self.history_ = train(cfg, model, {"train": tr, "val": val},
                                           self.k)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = 1
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("fit this classifier before predicting")

    def decision_function(self, X):
        """Acceptance-neuron activation after the end marker, in (0, 1)."""
        self._check_fitted()
        words = _check_words(X, self.k)
        return np.array([run_word(self.model_, w, self.k)[0] for w in words])

    def predict_proba(self, X):
        p1 = self.decision_function(X)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return (self.decision_function(X) >= 0.5).astype(int)

    def evaluate_samples(self, samples):
        """Accuracy with a per-length breakdown on loaded dataset rows."""
        self._check_fitted()
        return evaluate(self.model_, samples, self.k)
