"""Linear soft-margin SVM, one-vs-one, trained by dual coordinate descent.

Each class pair solves the hinge-loss dual

    min_a  1/2 a^T Q a - sum(a),   0 <= a_i <= C,   Q_ij = y_i y_j <x_i, x_j>

with a constant 1 appended to every vector so the bias is learned (and
regularised) like any other weight. Every coordinate step minimises the dual
exactly over its box, so the tracked objective never increases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .base import Dataset, Model, check_training_set, first_argmax
from .forest import _below


@dataclass(frozen=True)
class SVMParams:
    C: float = 1.0
    max_epochs: int = 1000
    tol: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if not (self.C > 0 and self.tol > 0 and self.max_epochs > 0):
            raise ValueError("C, tol and max_epochs must be positive")


@numba.njit(cache=True)
def _dual_cd(indptr, indices, data, y, n_features, C, max_epochs, tol, seed):
    n = y.shape[0]
    w = np.zeros(n_features + 1)  # last entry is the bias weight
    alpha = np.zeros(n)
    qii = np.ones(n)
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            qii[i] += data[p] * data[p]
    order = np.arange(n)
    state = np.empty(1, np.uint64)
    state[0] = seed
    history = np.empty(max_epochs + 1)
    history[0] = 0.0
    objective = 0.0
    epochs = 0
    for epoch in range(max_epochs):
        for i in range(n - 1, 0, -1):
            j = _below(state, i + 1)
            tmp = order[i]
            order[i] = order[j]
            order[j] = tmp
        pg_max = -np.inf
        pg_min = np.inf
        for k in range(n):
            i = order[k]
            yi = y[i]
            margin = w[n_features]
            for p in range(indptr[i], indptr[i + 1]):
                margin += w[indices[p]] * data[p]
            g = yi * margin - 1.0
            a = alpha[i]
            if a == 0.0:
                pg = min(g, 0.0)
            elif a == C:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg > pg_max:
                pg_max = pg
            if pg < pg_min:
                pg_min = pg
            if pg != 0.0:
                new = min(max(a - g / qii[i], 0.0), C)
                d = new - a
                if d != 0.0:
                    alpha[i] = new
                    objective += g * d + 0.5 * qii[i] * d * d
                    for p in range(indptr[i], indptr[i + 1]):
                        w[indices[p]] += d * yi * data[p]
                    w[n_features] += d * yi
        epochs = epoch + 1
        history[epochs] = objective
        if pg_max - pg_min < tol:
            break
    return w, alpha, history[: epochs + 1].copy()


@dataclass
class PairwiseSVM:
    positive: int  # class index voted for when the decision value is >= 0
    negative: int
    w: np.ndarray
    bias: float
    objective_history: np.ndarray = field(repr=False)

    @property
    def converged_epochs(self) -> int:
        return len(self.objective_history) - 1


class LinearSVMModel(Model):
    algorithm = "SVM"

    def __init__(self, classes, n_features, machines, params: SVMParams):
        self.classes = tuple(classes)
        self.n_features = n_features
        self.machines = machines
        self.params = params

    def votes(self, X) -> np.ndarray:
        votes = np.zeros((X.shape[0], len(self.classes)), dtype=np.int64)
        for m in self.machines:
            decision = np.asarray(X @ m.w).ravel() + m.bias
            pos = decision >= 0
            votes[pos, m.positive] += 1
            votes[~pos, m.negative] += 1
        return votes

    def predict_indices(self, X) -> np.ndarray:
        return first_argmax(self.votes(X))

    def dump(self) -> str:
        lines = [f"SVM {self.params!r}"]
        for m in self.machines:
            lines.append(
                f"{self.classes[m.positive].value} vs {self.classes[m.negative].value}\t"
                f"bias={m.bias!r}\tepochs={m.converged_epochs}\t" + " ".join(repr(v) for v in m.w)
            )
        return "\n".join(lines) + "\n"


def train_binary(X, signs, params: SVMParams, seed) -> tuple[np.ndarray, float, np.ndarray]:
    """Train one soft-margin machine on ``signs`` in {+1, -1}; returns (w, bias, history)."""
    X = X.tocsr()
    X.sort_indices()
    w, _, history = _dual_cd(
        X.indptr.astype(np.int64), X.indices.astype(np.int64), X.data.astype(np.float64),
        np.asarray(signs, dtype=np.float64), X.shape[1], float(params.C),
        int(params.max_epochs), float(params.tol), np.uint64(seed),
    )
    return w[:-1].copy(), float(w[-1]), history


def train_svm(dataset: Dataset, params: SVMParams = SVMParams()) -> LinearSVMModel:
    check_training_set(dataset)
    k = len(dataset.classes)
    seeds = np.random.SeedSequence(params.seed).generate_state(k * (k - 1) // 2, dtype=np.uint64)
    machines = []
    pair = 0
    for a in range(k):
        for b in range(a + 1, k):
            rows = np.flatnonzero((dataset.y == a) | (dataset.y == b))
            signs = np.where(dataset.y[rows] == a, 1.0, -1.0)
            w, bias, history = train_binary(dataset.X[rows], signs, params, seeds[pair])
            machines.append(PairwiseSVM(a, b, w, bias, history))
            pair += 1
    return LinearSVMModel(dataset.classes, dataset.n_features, machines, params)
