"""Vocabulary, chi-square feature selection and tf-idf vectorisation.

Everything here is fitted on training instances only; the test fold is
vectorised against the training vocabulary and document frequencies.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence, TextIO

import numpy as np
import scipy.sparse as sp

from .corpus import Code, sort_codes
from .preprocess import Instance

DEFAULT_K_PER_CLASS = 100


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]  # sorted; position is the feature index
    df: np.ndarray
    n_docs: int

    def __post_init__(self):
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.terms)})
        object.__setattr__(self, "_idf", np.log((self.n_docs + 1) / (self.df + 1)) + 1.0)

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term):
        return term in self._index

    def index(self, term: str) -> int:
        return self._index[term]

    def get(self, term: str, default=None):
        return self._index.get(term, default)

    def idf(self) -> np.ndarray:
        """Smoothed idf, ``ln((N + 1) / (df + 1)) + 1``, per vocabulary index."""
        return self._idf


@dataclass(frozen=True)
class FeatureSet:
    vocabulary: Vocabulary
    selected: np.ndarray  # sorted vocabulary indices
    classes: tuple[Code, ...]
    scores: np.ndarray  # (n_classes, |V|) chi-square
    k_per_class: int

    def __post_init__(self):
        object.__setattr__(self, "_column", {int(v): j for j, v in enumerate(self.selected)})

    def __len__(self):
        return len(self.selected)

    @property
    def selected_terms(self) -> tuple[str, ...]:
        return tuple(self.vocabulary.terms[i] for i in self.selected)

    def column(self, vocab_index: int):
        return self._column.get(vocab_index)

    def top_terms(self, code: Code, k: int | None = None) -> list[str]:
        row = self.scores[self.classes.index(code)]
        order = _rank(row)
        return [self.vocabulary.terms[i] for i in order[: k or self.k_per_class]]

    def write_report(self, fh: TextIO) -> None:
        """CSV ``class,term,chi2,selected`` over the whole vocabulary."""
        sel = set(int(i) for i in self.selected)
        fh.write("class,term,chi2,selected\n")
        for ci, code in enumerate(self.classes):
            for i in _rank(self.scores[ci]):
                fh.write(f"{code.value},{self.vocabulary.terms[i]},{self.scores[ci, i]!r},"
                         f"{int(i in sel)}\n")


def build_vocabulary(instances: Sequence[Instance]) -> Vocabulary:
    if not instances:
        raise ValueError("cannot build a vocabulary from an empty training set")
    df: Counter[str] = Counter()
    for inst in instances:
        df.update(set(inst.terms))
    terms = tuple(sorted(df))
    return Vocabulary(terms, np.array([df[t] for t in terms], dtype=np.int64), len(instances))


def chi_square_table(a, b, c, d):
    """N(AD-BC)^2 / ((A+B)(C+D)(A+C)(B+D)) with 0 for any empty marginal.

    Works elementwise on arrays; A = in class with term, B = other classes
    with term, C = in class without term, D = other classes without term.
    """
    a, b, c, d = (np.asarray(x, dtype=np.float64) for x in (a, b, c, d))
    n = a + b + c + d
    denom = (a + b) * (c + d) * (a + c) * (b + d)
    num = n * (a * d - b * c) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(denom > 0, num / np.where(denom > 0, denom, 1.0), 0.0)
    return out


def chi_square(term: str, cls: Code, instances: Sequence[Instance]) -> float:
    a = b = c = d = 0
    for inst in instances:
        has = term in inst.terms
        if inst.label is cls:
            a, c = (a + 1, c) if has else (a, c + 1)
        else:
            b, d = (b + 1, d) if has else (b, d + 1)
    return float(chi_square_table(a, b, c, d))


def presence_matrix(instances: Sequence[Instance], vocabulary: Vocabulary) -> sp.csr_matrix:
    """Binary instance x term matrix over ``vocabulary`` (unknown terms ignored)."""
    indptr = [0]
    indices: list[int] = []
    for inst in instances:
        cols = sorted({vocabulary.get(t) for t in inst.terms} - {None})
        indices.extend(cols)
        indptr.append(len(indices))
    data = np.ones(len(indices), dtype=np.float64)
    return sp.csr_matrix(
        (data, np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(instances), len(vocabulary)),
    )


def chi_square_scores(
    instances: Sequence[Instance], vocabulary: Vocabulary, classes: Sequence[Code]
) -> np.ndarray:
    """Chi-square of every (class, term) pair, shape ``(len(classes), |V|)``."""
    presence = presence_matrix(instances, vocabulary)
    labels = np.array([classes.index(inst.label) for inst in instances])
    n = len(instances)
    df = np.asarray(presence.sum(axis=0)).ravel()
    onehot = np.zeros((n, len(classes)))
    onehot[np.arange(n), labels] = 1.0
    a = np.asarray((presence.T @ onehot).T)  # (classes, V)
    n_class = onehot.sum(axis=0)[:, None]
    b = df[None, :] - a
    c = n_class - a
    d = n - a - b - c
    return chi_square_table(a, b, c, d)


def _rank(row: np.ndarray) -> np.ndarray:
    # score descending, then vocabulary index (= lexicographic term order) ascending
    return np.lexsort((np.arange(len(row)), -row))


def select_features(
    instances: Sequence[Instance],
    k_per_class: int = DEFAULT_K_PER_CLASS,
    vocabulary: Vocabulary | None = None,
    classes: Sequence[Code] | None = None,
) -> FeatureSet:
    """Union over classes of each class's ``k_per_class`` highest chi-square terms."""
    if k_per_class < 1:
        raise ValueError("k_per_class must be >= 1")
    if vocabulary is None:
        vocabulary = build_vocabulary(instances)
    if classes is None:
        classes = sort_codes(inst.label for inst in instances)
    classes = tuple(classes)
    scores = chi_square_scores(instances, vocabulary, classes)
    chosen: set[int] = set()
    for row in scores:
        chosen.update(int(i) for i in _rank(row)[:k_per_class])
    selected = np.array(sorted(chosen), dtype=np.int64)
    return FeatureSet(vocabulary, selected, classes, scores, k_per_class)


def vectorize(instance: Instance, vocabulary: Vocabulary, feature_set: FeatureSet) -> dict[int, float]:
    """tf * idf over selected terms, L2-normalised; keys are feature-set columns."""
    counts = Counter(instance.terms)
    idf = vocabulary.idf()
    weights = {}
    for term in sorted(counts):
        v = vocabulary.get(term)
        if v is None:
            continue
        col = feature_set.column(v)
        if col is None:
            continue
        weights[col] = counts[term] * idf[v]
    norm = math.sqrt(sum(w * w for w in weights.values()))
    if norm == 0.0:
        return {}
    return {col: w / norm for col, w in sorted(weights.items())}


def vectorize_many(
    instances: Sequence[Instance], vocabulary: Vocabulary, feature_set: FeatureSet
) -> sp.csr_matrix:
    rows: list[Mapping[int, float]] = [vectorize(i, vocabulary, feature_set) for i in instances]
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    indices = []
    data = []
    for r, vec in enumerate(rows):
        indices.extend(vec.keys())
        data.extend(vec.values())
        indptr[r + 1] = len(indices)
    return sp.csr_matrix(
        (np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64), indptr),
        shape=(len(rows), len(feature_set)),
    )
