import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcc_autocode.corpus import Code
from pcc_autocode.features import (
    build_vocabulary,
    chi_square,
    chi_square_table,
    select_features,
    vectorize,
    vectorize_many,
)
from pcc_autocode.preprocess import Instance, InstanceId

CLASSES = (Code.FurQol, Code.Curability, Code.SurvTime)


def inst(terms, label=Code.Curability, n=[0]):
    n[0] += 1
    return Instance(InstanceId("c", n[0], label), label, tuple(terms))


def test_vocabulary_counts():
    v = build_vocabulary([inst("ab"), inst("bc")])
    assert dict(zip(v.terms, v.df.tolist())) == {"a": 1, "b": 2, "c": 1}
    assert v.n_docs == 2
    assert build_vocabulary([inst("aa")]).df.tolist() == [1]
    assert len(build_vocabulary([inst("ab"), inst("cd")])) == 4
    with pytest.raises(ValueError):
        build_vocabulary([])


@pytest.mark.parametrize("table, expected", [((4, 0, 0, 4), 8.0), ((2, 2, 2, 2), 0.0), ((3, 5, 0, 0), 0.0)])
def test_chi_square_table(table, expected):
    assert chi_square_table(*table) == expected


def test_chi_square_from_instances():
    data = [inst("x", Code.FurQol) for _ in range(4)] + [inst("y", Code.SurvTime) for _ in range(4)]
    assert chi_square("x", Code.FurQol, data) == 8.0
    assert chi_square("x", Code.SurvTime, data) == 8.0


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_chi_square_non_negative(a, b, c, d):
    assert chi_square_table(a, b, c, d) >= 0.0


def test_full_budget_selects_everything():
    data = [inst("abc", Code.FurQol), inst("cde", Code.SurvTime)]
    fs = select_features(data, k_per_class=100)
    assert fs.selected_terms == ("a", "b", "c", "d", "e")


def test_single_class_ties_are_lexicographic():
    data = [inst("zyx", Code.FurQol), inst("cba", Code.FurQol)]
    fs = select_features(data, k_per_class=2)
    assert fs.selected_terms == ("a", "b")
    assert np.all(fs.scores == 0.0)


def test_per_class_union():
    data = [inst(["cure", "rid"], Code.Curability) for _ in range(3)]
    data += [inst(["month", "year"], Code.SurvTime) for _ in range(3)]
    data += [inst(["energy"], Code.FurQol) for _ in range(3)]
    fs = select_features(data, k_per_class=1)
    assert set(fs.selected_terms) == {"cure", "energy", "month"}
    assert fs.top_terms(Code.SurvTime, 2) == ["month", "year"]


@settings(max_examples=30)
@given(st.lists(st.tuples(st.text("abcde", min_size=1, max_size=4), st.sampled_from(CLASSES)), min_size=2, max_size=15),
       st.randoms(use_true_random=False))
def test_selection_permutation_invariant(rows, rnd):
    data = [inst(t, c) for t, c in rows]
    shuffled = list(data)
    rnd.shuffle(shuffled)
    a = select_features(data, 2, classes=CLASSES)
    b = select_features(shuffled, 2, classes=CLASSES)
    assert a.selected_terms == b.selected_terms


def test_vectorize_examples():
    train = [inst(["cure"]), inst(["month"], Code.SurvTime)]
    v = build_vocabulary(train)
    fs = select_features(train, 10)
    vec = vectorize(inst(["cure", "cure"]), v, fs)
    assert vec == {fs.column(v.index("cure")): 1.0}
    assert vectorize(inst(["unseen"]), v, fs) == {}
    two = vectorize(inst(["cure", "month"]), v, fs)
    assert all(math.isclose(w, 1 / math.sqrt(2)) for w in two.values())


def test_vectorize_scaling_invariance():
    train = [inst("ab"), inst("bcc", Code.SurvTime), inst("a", Code.FurQol)]
    v = build_vocabulary(train)
    fs = select_features(train, 10)
    x1 = vectorize(inst("abc"), v, fs)
    x3 = vectorize(inst("aaabbbccc"), v, fs)
    assert x1.keys() == x3.keys()
    assert all(math.isclose(x1[k], x3[k]) for k in x1)
    norm = math.sqrt(sum(w * w for w in x1.values()))
    assert math.isclose(norm, 1.0)


def test_idf_formula():
    train = [inst("ab"), inst("b"), inst("c")]
    v = build_vocabulary(train)
    assert v.idf()[v.index("b")] == pytest.approx(math.log(4 / 3) + 1)


def test_vectorize_many_matches_single():
    train = [inst("abc"), inst("cde", Code.SurvTime)]
    v = build_vocabulary(train)
    fs = select_features(train, 10)
    X = vectorize_many(train, v, fs)
    for row, i in enumerate(train):
        dense = X[row].toarray().ravel()
        for col, w in vectorize(i, v, fs).items():
            assert dense[col] == w


def test_feature_report():
    train = [inst("ab"), inst("bc", Code.SurvTime)]
    fs = select_features(train, 1)
    buf = io.StringIO()
    fs.write_report(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "class,term,chi2,selected"
    assert len(lines) == 1 + 2 * 3
