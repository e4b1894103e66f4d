from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ..corpus import Code, sort_codes


@dataclass(frozen=True)
class Dataset:
    """Vectorised instances with labels as indices into ``classes``.

    ``classes`` is always in canonical Code order, so "first maximum" in any
    argmax is the documented tie-break.
    """

    X: sp.csr_matrix
    y: np.ndarray
    classes: tuple[Code, ...]
    ids: tuple = ()

    def __post_init__(self):
        X = self.X if sp.issparse(self.X) else sp.csr_matrix(np.asarray(self.X, dtype=np.float64))
        object.__setattr__(self, "X", sp.csr_matrix(X, dtype=np.float64))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=np.int64))
        if tuple(sort_codes(self.classes)) != tuple(self.classes):
            raise ValueError("classes must be distinct and in canonical Code order")
        if not self.ids:
            object.__setattr__(self, "ids", tuple(range(self.X.shape[0])))
        if len(self.ids) != self.X.shape[0] or len(self.y) != self.X.shape[0]:
            raise ValueError("X, y and ids disagree on the number of instances")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("instance ids must be unique")
        if len(self.y) and (self.y.min() < 0 or self.y.max() >= len(self.classes)):
            raise ValueError("label index outside the class set")

    @classmethod
    def from_labels(cls, X, labels: Sequence[Code], ids=(), classes=None) -> "Dataset":
        classes = tuple(sort_codes(labels if classes is None else classes))
        index = {c: i for i, c in enumerate(classes)}
        return cls(X, np.array([index[c] for c in labels], dtype=np.int64), classes, tuple(ids))

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def labels(self) -> list[Code]:
        return [self.classes[i] for i in self.y]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.X[rows], self.y[rows], self.classes, tuple(self.ids[i] for i in rows))


class Model:
    """Trained classifier. Subclasses implement ``predict_indices``."""

    algorithm = ""
    classes: tuple[Code, ...]
    n_features: int

    def predict_indices(self, X: sp.csr_matrix) -> np.ndarray:
        raise NotImplementedError

    def _check(self, X):
        X = sp.csr_matrix(X, dtype=np.float64) if not sp.issparse(X) else X.tocsr()
        if X.shape[1] != self.n_features:
            raise ValueError(
                f"dimension mismatch: model has {self.n_features} features, input has {X.shape[1]}"
            )
        return X

    def predict_matrix(self, X) -> list[Code]:
        idx = self.predict_indices(self._check(X))
        return [self.classes[i] for i in idx]

    def predict_dataset(self, dataset: Dataset) -> list[Code]:
        if len(dataset) == 0:
            return []
        return self.predict_matrix(dataset.X)

    def dump(self) -> str:
        raise NotImplementedError


def check_training_set(dataset: Dataset) -> None:
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    present = np.unique(dataset.y)
    if len(dataset.classes) < 2 or len(present) < 2:
        raise ValueError("training needs at least two classes")
    if len(present) != len(dataset.classes):
        missing = [dataset.classes[i].value for i in range(len(dataset.classes)) if i not in present]
        raise ValueError(f"classes without training instances: {missing}")
    if not np.all(np.isfinite(dataset.X.data)):
        raise ValueError("non-finite feature weights")


def first_argmax(scores: np.ndarray) -> np.ndarray:
    """Row-wise argmax; ties go to the lowest column (canonical class order)."""
    return np.argmax(scores, axis=1)
