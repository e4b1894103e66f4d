"""Naive Bayes, random forest and linear SVM behind one train/predict contract.

Every model assigns exactly one class per vector. Ties (equal posteriors,
equal votes) go to the class declared first in :class:`~pcc_autocode.corpus.Code`.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np
import scipy.sparse as sp

from ..corpus import Code
from .base import Dataset, Model
from .forest import RandomForestModel, RFParams, train_random_forest
from .naive_bayes import NaiveBayesModel, NBParams, train_naive_bayes
from .svm import LinearSVMModel, SVMParams, train_svm

ALGORITHMS = ("NB", "RF", "SVM")

DEFAULT_PARAMS = {"NB": NBParams(), "RF": RFParams(), "SVM": SVMParams()}

_TRAINERS = {"NB": train_naive_bayes, "RF": train_random_forest, "SVM": train_svm}

__all__ = [
    "ALGORITHMS",
    "DEFAULT_PARAMS",
    "Dataset",
    "Model",
    "NBParams",
    "RFParams",
    "SVMParams",
    "NaiveBayesModel",
    "RandomForestModel",
    "LinearSVMModel",
    "train",
    "predict",
    "predict_batch",
]


def train(algorithm: str, dataset: Dataset, params=None) -> Model:
    try:
        trainer = _TRAINERS[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}") from None
    return trainer(dataset, DEFAULT_PARAMS[algorithm] if params is None else params)


def _as_row(vector, n_features: int) -> sp.csr_matrix:
    if isinstance(vector, Mapping):
        cols = [int(c) for c in vector]
        if cols and (min(cols) < 0 or max(cols) >= n_features):
            raise ValueError(f"dimension mismatch: feature index outside [0, {n_features})")
        return sp.csr_matrix(
            (np.array(list(vector.values()), dtype=np.float64), (np.zeros(len(cols), dtype=np.int64), cols)),
            shape=(1, n_features),
        )
    if sp.issparse(vector):
        return sp.csr_matrix(vector.reshape(1, -1))
    return sp.csr_matrix(np.asarray(vector, dtype=np.float64).reshape(1, -1))


def predict(model: Model, vector) -> Code:
    """Classify one vector (a ``{column: weight}`` map, dense array or sparse row)."""
    return model.predict_matrix(_as_row(vector, model.n_features))[0]


def predict_batch(model: Model, dataset: Dataset) -> list[tuple[object, Code]]:
    if len(dataset) == 0:
        return []
    return list(zip(dataset.ids, model.predict_matrix(dataset.X)))
