"""Acceptance suite: one test per criterion, each tagged with ``criterion``.

The end-to-end criteria share one CLI run on the default seed-42 corpus. The
terminal summary prints a PASS/FAIL line per criterion.
"""

import csv
import io
import math
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

import reference_cart
from pcc_autocode.classifiers import Dataset, Model, RFParams, SVMParams, predict, train
from pcc_autocode.classifiers.svm import train_binary
from pcc_autocode.cli import main
from pcc_autocode.corpus import EXPERIMENT_CODES, SEVEN_CLASSES, Code, load_corpus
from pcc_autocode.evaluation import (
    EvalReport,
    balanced_sample,
    derive_seed,
    fold_feature_sets,
    read_predictions,
    stratified_folds,
)
from pcc_autocode.experiments import Exp1Config, Exp3Config, run_exp1, run_exp3
from pcc_autocode.features import chi_square_table
from pcc_autocode.preprocess import stem
from pcc_autocode.synth import GenConfig, generate

ALGS = ("NB", "RF", "SVM")
PORTER_REFERENCE = Path(__file__).parent / "data" / "porter_reference.tsv"


# ---------------------------------------------------------------------------
# shared end-to-end run


def run_all(root: Path, jobs: int) -> dict[str, float]:
    corpus = root.parent / "corpus"
    if not corpus.exists():
        assert main(["gen-corpus", "--seed", "42", "--out", str(corpus)]) == 0
    times = {}
    for exp in ("exp1", "exp2", "exp3"):
        start = time.perf_counter()
        assert main([exp, str(corpus), "--seed", "42", "--jobs", str(jobs), "--out", str(root)]) == 0
        times[exp] = time.perf_counter() - start
    return times


@pytest.fixture(scope="session")
def e2e(tmp_path_factory):
    base = tmp_path_factory.mktemp("e2e")
    times = run_all(base / "run1", jobs=1)
    return base, times


def grid(directory: Path) -> tuple[dict, list[dict]]:
    text = (directory / "grid.csv").read_text(encoding="utf-8")
    header = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition(" = ")
            header[k] = v
        else:
            body.append(line)
    return header, list(csv.DictReader(io.StringIO("\n".join(body))))


def cell_reports(directory: Path) -> dict[tuple[str, str, int], EvalReport]:
    """Rebuild every cell's report from its predictions file."""
    header, rows = grid(directory)
    classes = tuple(Code.parse(c) for c in header["classes"].split())
    axis = "group" if "group" in rows[0] else "condition"
    out = {}
    for row in rows:
        records = read_predictions(directory / "cells" / row["cell"] / "predictions.tsv")
        out[(row[axis], row["algorithm"], int(row["resample"]))] = EvalReport.from_records(classes, records)
    return out


def mean_accuracy(reports, axis, alg) -> float:
    values = [r.accuracy for (a, g, _), r in reports.items() if a == axis and g == alg]
    assert values
    return float(np.mean(values))


# ---------------------------------------------------------------------------
# 1


class _Uniform(Model):
    def __init__(self, dataset, seed):
        self.classes = dataset.classes
        self.n_features = dataset.n_features
        self.rng = np.random.default_rng(seed)

    def predict_indices(self, X):
        return self.rng.integers(0, len(self.classes), size=X.shape[0])


def uniform(dataset, seed):
    return _Uniform(dataset, seed)


@pytest.mark.criterion(1, "random baseline identity")
def test_random_baseline(e2e, record_property):
    base, _ = e2e
    pool = load_corpus(base / "corpus").pool()
    config = Exp1Config(groups={"C": 5}, algorithms=(uniform,), seed=42)
    start = time.perf_counter()
    report = run_exp1(pool, config)
    elapsed = time.perf_counter() - start
    acc = report.pooled_accuracy("C", "uniform")
    record_property("detail", f"pooled accuracy {acc:.4f}, {elapsed:.1f}s")
    assert abs(acc - 1 / 7) <= 0.02
    assert elapsed < 10


# ---------------------------------------------------------------------------
# 2


@pytest.mark.criterion(2, "micro-F1 equals accuracy on every report")
def test_micro_f1_is_accuracy(e2e, record_property):
    base, _ = e2e
    worst = 0.0
    n = 0
    for exp in ("exp1", "exp2", "exp3"):
        for report in cell_reports(base / "run1" / exp).values():
            worst = max(worst, abs(report.micro_f1 - report.accuracy))
            n += 1
    record_property("detail", f"{n} reports, max |micro_f1 - accuracy| = {worst:.1e}")
    assert n == 36 + 24 + 24
    assert worst < 1e-12


# ---------------------------------------------------------------------------
# 3 and 4


@pytest.mark.criterion(3, "every algorithm beats random on group C")
def test_beats_random(e2e, record_property):
    base, times = e2e
    reports = cell_reports(base / "run1" / "exp1")
    accs = {alg: mean_accuracy(reports, "C", alg) for alg in ALGS}
    total = sum(times.values())
    record_property("detail", " ".join(f"{a} {v:.3f}" for a, v in accs.items()) + f", exp1-3 took {total:.0f}s")
    assert all(v >= 0.40 for v in accs.values())
    assert total < 300


@pytest.mark.criterion(4, "group C accuracy above group A")
def test_group_trend(e2e, record_property):
    base, _ = e2e
    reports = cell_reports(base / "run1" / "exp1")
    gaps = {alg: mean_accuracy(reports, "C", alg) - mean_accuracy(reports, "A", alg) for alg in ALGS}
    record_property("detail", " ".join(f"{a} {g:+.3f}" for a, g in gaps.items()))
    assert all(g > 0 for g in gaps.values())


# ---------------------------------------------------------------------------
# 5


@pytest.mark.criterion(5, "tracked lines beat their group's accuracy")
def test_tracked_consistency(e2e, record_property):
    base, _ = e2e
    _, rows = grid(base / "run1" / "exp2")
    reports = cell_reports(base / "run1" / "exp2")
    details = []
    ok = True
    for g in ("A", "B"):
        for alg in ALGS:
            mine = [r for r in rows if r["group"] == g and r["algorithm"] == alg]
            correct = sum(int(r["tracked_correct"]) for r in mine)
            total = sum(int(r["tracked"]) for r in mine)
            rate = correct / total
            acc = mean_accuracy(reports, g, alg)
            details.append(f"{g}/{alg} {rate:.3f}>{acc:.3f}")
            ok &= rate > acc
    record_property("detail", " ".join(details))
    assert ok


# ---------------------------------------------------------------------------
# 6


@pytest.mark.criterion(6, "context helps only when context carries signal")
def test_context_gain(e2e, record_property):
    base, _ = e2e
    reports = cell_reports(base / "run1" / "exp3")
    deltas = {a: mean_accuracy(reports, "with_context", a) - mean_accuracy(reports, "single", a) for a in ALGS}

    flat = generate(GenConfig(context_signal_rate=0.0, seed=42))
    flat.write(base / "flat")
    pool = load_corpus(base / "flat").pool()
    null = run_exp3(pool, Exp3Config(seed=42)).deltas()
    record_property("detail", "default " + " ".join(f"{a} {d:+.3f}" for a, d in deltas.items())
                    + "; no context signal " + " ".join(f"{a} {d:+.3f}" for a, d in null.items()))
    assert all(d > 0 for d in deltas.values())
    assert all(abs(d) <= 0.03 for d in null.values())


# ---------------------------------------------------------------------------
# 7


@pytest.mark.criterion(7, "Porter stemmer matches the reference vocabulary")
def test_porter_oracle(record_property):
    pairs = [line.split("\t") for line in PORTER_REFERENCE.read_text(encoding="utf-8").splitlines() if line]
    wrong = [w for w, s in pairs if stem(w) != s]
    record_property("detail", f"{len(pairs)} pairs, {len(wrong)} mismatches")
    assert len(pairs) >= 20000
    assert not wrong


# ---------------------------------------------------------------------------
# 8


@pytest.mark.criterion(8, "chi-square matches the closed form")
def test_chi_square_oracle(record_property):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(200):
        a, b, c, d = (int(v) for v in rng.integers(0, 60, size=4))
        n = a + b + c + d
        denom = (a + b) * (c + d) * (a + c) * (b + d)
        expected = 0.0 if denom == 0 else float(Fraction(n * (a * d - b * c) ** 2, denom))
        worst = max(worst, abs(float(chi_square_table(a, b, c, d)) - expected))
    degenerate = [(0, 0, 3, 4), (3, 4, 0, 0), (0, 5, 0, 7), (5, 0, 7, 0), (0, 0, 0, 0)]
    zeros = [float(chi_square_table(*t)) for t in degenerate]
    record_property("detail", f"max error {worst:.1e}")
    assert worst <= 1e-9
    assert zeros == [0.0] * len(degenerate)


# ---------------------------------------------------------------------------
# 9


def nb_by_hand(X, y, x, n_classes, alpha=Fraction(1)):
    V = len(X[0])
    joint = []
    for c in range(n_classes):
        rows = [X[i] for i in range(len(X)) if y[i] == c]
        prior = Fraction(len(rows), len(X))
        mass = [sum((Fraction(r[j]) for r in rows), Fraction(0)) for j in range(V)]
        total = sum(mass) + alpha * V
        p = math.log(prior)
        for j in range(V):
            p += float(x[j]) * math.log((mass[j] + alpha) / total)
        joint.append(p)
    top = max(joint)
    weights = [math.exp(p - top) for p in joint]
    return [w / sum(weights) for w in weights]


@pytest.mark.criterion(9, "naive Bayes posteriors match hand computation")
def test_nb_hand_oracle(record_property):
    X = [[2, 1, 0], [1, 0, 0], [0, 1, 3], [0, 0, 1]]
    y = [0, 0, 1, 1]
    classes = (Code.Curability, Code.SurvTime)
    ds = Dataset(sp.csr_matrix(np.array(X, dtype=float)), np.array(y), classes)
    model = train("NB", ds)
    worst = 0.0
    queries = [[1, 0, 0], [0, 0, 1], [1, 1, 1], [0, 0, 0], [3, 0, 2]]
    for q in queries:
        got = model.posterior(sp.csr_matrix(np.array([q], dtype=float)))[0]
        want = nb_by_hand(X, y, q, 2)
        worst = max(worst, max(abs(g - w) for g, w in zip(got, want)))
        assert abs(got.sum() - 1.0) <= 1e-9
    record_property("detail", f"max posterior error {worst:.1e}")
    assert worst <= 1e-9


# ---------------------------------------------------------------------------
# 10


@pytest.mark.criterion(10, "single full tree reproduces reference CART")
def test_rf_degenerates_to_cart(record_property):
    rng = np.random.default_rng(10)
    classes = SEVEN_CLASSES[:3]
    mismatches = 0
    for trial in range(50):
        n, f = int(rng.integers(5, 30)), int(rng.integers(1, 7))
        X = rng.choice([0.0, 0.0, 0.2, 0.4, 0.5, 0.9, 1.0], size=(n, f))
        y = rng.integers(0, 3, size=n)
        y[:3] = [0, 1, 2]
        ds = Dataset(sp.csr_matrix(X), y, classes)
        model = train("RF", ds, RFParams(n_trees=1, bootstrap=False, features_per_split=f, seed=trial))
        ref = reference_cart.grow(X.tolist(), y.tolist(), 3)
        Q = np.vstack([X, rng.choice([0.0, 0.1, 0.3, 0.45, 0.7, 0.95, 1.2], size=(30, f))])
        for q in Q:
            if predict(model, q) is not classes[reference_cart.predict(ref, q.tolist())]:
                mismatches += 1
    record_property("detail", f"50 datasets, {mismatches} mismatching predictions")
    assert mismatches == 0


# ---------------------------------------------------------------------------
# 11


@pytest.mark.criterion(11, "SVM separates separable data with non-increasing objective")
def test_svm_separable(record_property):
    rng = np.random.default_rng(11)
    classes = (Code.Curability, Code.SurvTime)
    for trial in range(20):
        f = int(rng.integers(2, 10))
        w = rng.normal(size=f)
        X = rng.normal(size=(200, f))
        margin = X @ w
        X = X[np.abs(margin) > 0.3][:40]
        y = (X @ w > 0).astype(int)
        model = train("SVM", Dataset(sp.csr_matrix(X), y, classes), SVMParams(C=100.0))
        assert [predict(model, x) for x in X] == [classes[i] for i in y]
        history = model.machines[0].objective_history
        assert np.all(np.diff(history) <= 1e-12)
        _, _, again = train_binary(sp.csr_matrix(X), np.where(y == 0, 1.0, -1.0), SVMParams(C=100.0), trial)
        assert np.all(np.diff(again) <= 1e-12)
    record_property("detail", "20 trials, 100% training accuracy")


# ---------------------------------------------------------------------------
# 12


@pytest.mark.criterion(12, "stratified folds and no test-fold leakage")
def test_stratification_and_leakage(e2e, record_property):
    base, _ = e2e
    rng = np.random.default_rng(12)
    for _ in range(200):
        labels = rng.choice(SEVEN_CLASSES, size=int(rng.integers(10, 300)))
        k = int(rng.integers(2, 11))
        plan = stratified_folds(list(enumerate(labels)), k, int(rng.integers(1 << 30)))
        for code in SEVEN_CLASSES:
            per_fold = [sum(1 for i in fold if labels[i] is code) for fold in plan.folds]
            assert max(per_fold) - min(per_fold) <= 1

    pool = load_corpus(base / "corpus").pool()
    checks = 0
    for trial in range(20):
        lines = balanced_sample(pool, EXPERIMENT_CODES, 40, 3, derive_seed(12, trial))
        items = [((cl.case_id, cl.line_no, cl.code), cl.code) for cl in lines]
        plan = stratified_folds(items, 5, trial)
        id_plan = plan_for(lines, plan)
        before = fold_feature_sets(lines, plan=id_plan)
        f = int(rng.integers(5))
        victim = plan.folds[f][int(rng.integers(len(plan.folds[f])))]
        kept = [cl for cl in lines if (cl.case_id, cl.line_no, cl.code) != victim]
        after = fold_feature_sets(kept, plan=plan_for(kept, plan, drop=victim))
        assert after[f].selected_terms == before[f].selected_terms
        assert np.array_equal(after[f].scores, before[f].scores)
        assert after[f].vocabulary.terms == before[f].vocabulary.terms
        checks += 1
    record_property("detail", f"200 fold plans balanced, {checks} deletion spot checks identical")


def plan_for(lines, plan, drop=None):
    """Translate a plan over (case, line, code) keys into one over instance ids."""
    from pcc_autocode.evaluation import FoldPlan
    from pcc_autocode.preprocess import InstanceId

    folds = tuple(tuple(InstanceId(*key) for key in fold if key != drop) for fold in plan.folds)
    return FoldPlan(folds, plan.seed)


# ---------------------------------------------------------------------------
# 13


@pytest.mark.criterion(13, "identical seeds give byte-identical output trees")
def test_end_to_end_determinism(e2e, record_property):
    base, _ = e2e
    run_all(base / "run2", jobs=2)
    one = sorted(p.relative_to(base / "run1") for p in (base / "run1").rglob("*") if p.is_file())
    two = sorted(p.relative_to(base / "run2") for p in (base / "run2").rglob("*") if p.is_file())
    assert one == two
    differing = [p for p in one if (base / "run1" / p).read_bytes() != (base / "run2" / p).read_bytes()]
    record_property("detail", f"{len(one)} files compared, jobs 1 vs 2, {len(differing)} differ")
    assert not differing
