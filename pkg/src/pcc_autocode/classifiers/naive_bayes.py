"""Multinomial naive Bayes over non-negative (possibly fractional) feature weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .base import Dataset, Model, check_training_set, first_argmax


@dataclass(frozen=True)
class NBParams:
    alpha: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")


class NaiveBayesModel(Model):
    algorithm = "NB"

    def __init__(self, classes, log_prior, log_likelihood, params: NBParams):
        self.classes = tuple(classes)
        self.log_prior = log_prior
        self.log_likelihood = log_likelihood  # (n_classes, n_features)
        self.n_features = log_likelihood.shape[1]
        self.params = params

    def joint_log_likelihood(self, X) -> np.ndarray:
        return np.asarray(X @ self.log_likelihood.T) + self.log_prior

    def predict_indices(self, X) -> np.ndarray:
        return first_argmax(self.joint_log_likelihood(X))

    def posterior(self, X) -> np.ndarray:
        jll = self.joint_log_likelihood(self._check(X))
        return np.exp(jll - logsumexp(jll, axis=1, keepdims=True))

    def dump(self) -> str:
        lines = [f"NB alpha={self.params.alpha!r} features={self.n_features}"]
        for c, prior, row in zip(self.classes, self.log_prior, self.log_likelihood):
            lines.append(f"{c.value}\tlog_prior={prior!r}\t" + " ".join(repr(v) for v in row))
        return "\n".join(lines) + "\n"


def train_naive_bayes(dataset: Dataset, params: NBParams = NBParams()) -> NaiveBayesModel:
    check_training_set(dataset)
    n_classes = len(dataset.classes)
    onehot = np.zeros((len(dataset), n_classes))
    onehot[np.arange(len(dataset)), dataset.y] = 1.0
    feature_mass = np.asarray((dataset.X.T @ onehot).T)  # (classes, features)
    smoothed = feature_mass + params.alpha
    log_likelihood = np.log(smoothed) - np.log(smoothed.sum(axis=1, keepdims=True))
    log_prior = np.log(onehot.sum(axis=0) / len(dataset))
    return NaiveBayesModel(dataset.classes, log_prior, log_likelihood, params)
