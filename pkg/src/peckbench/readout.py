"""Softmax (multinomial logistic) readout trained by full-batch gradient
descent on cross-entropy.

The readout is deliberately minimal: per-feature standardization fitted on
the training data, a bias-augmented linear score per class, max-shifted
softmax probabilities, and plain gradient descent from a zero parameter
matrix. It follows the scikit-learn estimator protocol (fit / predict /
predict_proba / get_params) so it composes with the wider ecosystem, but
the optimization loop is self-contained.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

# Scale floor for (near-)constant features; keeps standardization finite.
SCALE_FLOOR = 1e-9


@dataclass(frozen=True)
class TrainSpec:
    """Gradient-descent hyperparameters for the readout."""

    learning_rate: float = 0.1
    epochs: int = 500
    l2_penalty: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.l2_penalty < 0.0:
            raise ValueError("l2_penalty must be >= 0")


def softmax(scores: np.ndarray) -> np.ndarray:
    """Row-wise max-shifted softmax."""
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy_and_grad(theta: np.ndarray, xb: np.ndarray, onehot: np.ndarray,
                           l2_penalty: float):
    """Loss J(theta) + l2/2 * ||theta||^2 and its gradient.

    xb is the bias-augmented design matrix (bias column first); the bias
    row of theta is excluded from the penalty.
    """
    m = xb.shape[0]
    probs = softmax(xb @ theta)
    # clip keeps log finite for confidently-wrong probabilities
    logp = np.log(np.clip(probs, 1e-300, None))
    loss = -float((onehot * logp).sum()) / m
    grad = xb.T @ (probs - onehot) / m
    if l2_penalty > 0.0:
        loss += 0.5 * l2_penalty * float((theta[1:] ** 2).sum())
        grad = grad.copy()
        grad[1:] += l2_penalty * theta[1:]
    return loss, grad


class SoftmaxReadout(BaseEstimator, ClassifierMixin):
    """Linear softmax classifier with per-feature standardization.

    Parameters mirror TrainSpec. Training is deterministic: theta starts
    at zero and full-batch gradient descent runs for exactly ``epochs``
    steps; ``seed`` is accepted for interface symmetry but no randomness
    is used.
    """

    def __init__(self, learning_rate: float = 0.1, epochs: int = 500,
                 l2_penalty: float = 1e-4, seed: int = 0):
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.l2_penalty = l2_penalty
        self.seed = seed

    # -- estimator API ------------------------------------------------

    def fit(self, X, y):
        spec = TrainSpec(self.learning_rate, self.epochs, self.l2_penalty,
                         self.seed)
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError("X must be 2-D with one row per label")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        classes, y_idx = np.unique(y, return_inverse=True)
        if classes.shape[0] < 2:
            raise ValueError("need at least 2 classes present in y")
        if X.shape[0] < classes.shape[0]:
            raise ValueError("need at least one row per class")
        self.classes_ = classes
        k = classes.shape[0]

        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        self.scale_ = np.where(scale < SCALE_FLOOR, SCALE_FLOOR, scale)

        xb = self._augment(X)
        onehot = np.zeros((X.shape[0], k))
        onehot[np.arange(X.shape[0]), y_idx] = 1.0

        theta = np.zeros((xb.shape[1], k))
        self.loss_curve_ = []
        for _ in range(spec.epochs):
            loss, grad = cross_entropy_and_grad(theta, xb, onehot,
                                                spec.l2_penalty)
            self.loss_curve_.append(loss)
            theta -= spec.learning_rate * grad
        self.theta_ = theta
        return self

    def decision_function(self, X):
        """Linear softmax scores, one column per class."""
        return self._augment(np.asarray(X, dtype=float)) @ self.theta_

    def predict_proba(self, X):
        return softmax(self.decision_function(X))

    def predict(self, X):
        probs = self.predict_proba(X)
        # argmax breaks ties toward the lowest class index
        return self.classes_[np.argmax(probs, axis=1)]

    # -- helpers ------------------------------------------------------

    def _augment(self, X):
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.mean_.shape[0]:
            raise ValueError(
                f"expected {self.mean_.shape[0]} features, got {X.shape[1]}")
        z = (X - self.mean_) / self.scale_
        return np.concatenate([np.ones((z.shape[0], 1)), z], axis=1)

    def export_csv(self, path) -> None:
        """Audit dump of theta: one row per parameter, one column per class."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["parameter"]
                            + [f"class_{c}" for c in self.classes_])
            names = ["bias"] + [f"x{i}" for i in range(self.mean_.shape[0])]
            for name, row in zip(names, self.theta_):
                writer.writerow([name] + [repr(float(v)) for v in row])


def train(X, y, spec: TrainSpec = TrainSpec()) -> SoftmaxReadout:
    """Fit a SoftmaxReadout with the given hyperparameters."""
    model = SoftmaxReadout(learning_rate=spec.learning_rate,
                           epochs=spec.epochs,
                           l2_penalty=spec.l2_penalty,
                           seed=spec.seed)
    return model.fit(X, y)


def scores(model: SoftmaxReadout, x) -> np.ndarray:
    """Per-class linear scores for a single sample."""
    return model.decision_function(np.atleast_2d(x))[0]


def predict_proba(model: SoftmaxReadout, x) -> np.ndarray:
    return model.predict_proba(np.atleast_2d(x))[0]


def predict(model: SoftmaxReadout, x):
    return model.predict(np.atleast_2d(x))[0]
