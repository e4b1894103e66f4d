"""Balanced sampling, stratified k-fold cross-validation and metrics."""

from __future__ import annotations

import dataclasses
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

from .classifiers import DEFAULT_PARAMS, Dataset, Model, train
from .corpus import Code, CodedLine, InstancePool, sort_codes
from .features import DEFAULT_K_PER_CLASS, build_vocabulary, select_features, vectorize_many
from .preprocess import SINGLE, Instance, InstanceId, PreprocessConfig, preprocess_line


class InsufficientInstances(ValueError):
    def __init__(self, code: Code, available: int, requested: int, min_words: int):
        self.code = code
        self.available = available
        self.requested = requested
        super().__init__(
            f"class {code.value} has {available} instances with >= {min_words} words, "
            f"{requested} requested"
        )


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from a mix of ints and strings."""
    words = []
    for p in parts:
        if isinstance(p, str):
            words.append(zlib.crc32(p.encode("utf-8")))
        elif isinstance(p, Code):
            words.append(p.order)
        else:
            words.append(int(p) & 0xFFFFFFFFFFFFFFFF)
    return int(np.random.SeedSequence(words).generate_state(1, dtype=np.uint64)[0])


def _line_key(line_id: InstanceId):
    return (line_id.case_id, line_id.line_no, line_id.code.order)


# ---------------------------------------------------------------------------
# sampling and folds


def eligible(
    bucket: Iterable[CodedLine],
    min_words: int,
    config: PreprocessConfig = PreprocessConfig(),
    variant: str = SINGLE,
) -> list[CodedLine]:
    """Lines whose preprocessed length (on ``config.word_count_basis``) reaches ``min_words``."""
    out = []
    for cl in bucket:
        inst = preprocess_line(cl, variant, config)
        if inst.usable and inst.length(config.word_count_basis) >= min_words:
            out.append(cl)
    return out


def balanced_sample(
    pool: InstancePool,
    classes: Sequence[Code],
    n_per_class: int,
    min_words: int,
    seed: int,
    config: PreprocessConfig = PreprocessConfig(),
    exclude: Iterable = (),
) -> list[CodedLine]:
    """Draw exactly ``n_per_class`` lines per class, uniformly without replacement.

    Each class draws from its own stream derived from ``(seed, class)``, so
    adding or dropping a class leaves the other draws unchanged. ``exclude``
    holds line ids (``(case_id, line_no, code)``) that may not be drawn.
    """
    excluded = set(exclude)
    out = []
    for code in sort_codes(classes):
        candidates = [
            cl for cl in eligible(pool[code], min_words, config)
            if (cl.case_id, cl.line_no, cl.code) not in excluded
        ]
        if len(candidates) < n_per_class:
            raise InsufficientInstances(code, len(candidates), n_per_class, min_words)
        rng = np.random.default_rng(derive_seed(seed, code))
        chosen = np.sort(rng.choice(len(candidates), size=n_per_class, replace=False))
        out.extend(candidates[i] for i in chosen)
    return out


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[tuple, ...]
    seed: int

    @property
    def k(self) -> int:
        return len(self.folds)

    def fold_of(self) -> dict:
        return {i: f for f, ids in enumerate(self.folds) for i in ids}


def stratified_folds(items: Sequence[tuple[object, Code]], k: int, seed: int) -> FoldPlan:
    """Shuffle each class by seed and deal its ids round-robin into ``k`` folds.

    ``items`` is a sequence of ``(id, label)``. Dealing continues from the
    fold where the previous class stopped, so fold sizes also differ by at
    most one overall.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > len(items):
        raise ValueError(f"k={k} exceeds dataset size {len(items)}")
    by_class: dict[Code, list] = {}
    for iid, label in items:
        by_class.setdefault(label, []).append(iid)
    folds: list[list] = [[] for _ in range(k)]
    cursor = 0
    for code in sort_codes(by_class):
        ids = by_class[code]
        perm = np.random.default_rng(derive_seed(seed, "folds", code)).permutation(len(ids))
        for i in perm:
            folds[cursor % k].append(ids[i])
            cursor += 1
    return FoldPlan(tuple(tuple(f) for f in folds), seed)


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    micro_f1: float
    macro_f1: float
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    f1: tuple[float, ...]


def _ratio(num, den):
    return num / den if den else 0.0


def metrics(confusion) -> Metrics:
    """Accuracy, pooled (micro) F1 and unweighted (macro) F1 of a true x predicted matrix."""
    cm = np.asarray(confusion)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.size == 0:
        raise ValueError("confusion matrix must be square and non-empty")
    if np.any(cm < 0):
        raise ValueError("confusion matrix has negative counts")
    total = int(cm.sum())
    if total == 0:
        raise ValueError("confusion matrix is empty")
    tp = np.diag(cm).astype(np.int64)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    precision = tuple(_ratio(int(a), int(a + b)) for a, b in zip(tp, fp))
    recall = tuple(_ratio(int(a), int(a + b)) for a, b in zip(tp, fn))
    f1 = tuple(_ratio(2 * p * r, p + r) for p, r in zip(precision, recall))
    t = int(tp.sum())
    micro = _ratio(2 * t, 2 * t + int(fp.sum()) + int(fn.sum()))
    return Metrics(t / total, micro, float(np.mean(f1)), precision, recall, f1)


# ---------------------------------------------------------------------------
# cross-validation


@dataclass(frozen=True)
class Record:
    id: InstanceId
    true: Code
    pred: Code
    fold: int

    @property
    def correct(self) -> bool:
        return self.true is self.pred


@dataclass
class EvalReport:
    classes: tuple[Code, ...]
    confusion: np.ndarray
    records: list[Record]
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        self._metrics = metrics(self.confusion)

    @property
    def accuracy(self) -> float:
        return self._metrics.accuracy

    @property
    def micro_f1(self) -> float:
        return self._metrics.micro_f1

    @property
    def macro_f1(self) -> float:
        return self._metrics.macro_f1

    @property
    def metrics(self) -> Metrics:
        return self._metrics

    def __len__(self):
        return len(self.records)

    def correct_ids(self) -> list[InstanceId]:
        return [r.id for r in self.records if r.correct]

    @classmethod
    def from_records(cls, classes, records, config=None) -> "EvalReport":
        classes = tuple(classes)
        index = {c: i for i, c in enumerate(classes)}
        cm = np.zeros((len(classes), len(classes)), dtype=np.int64)
        for r in records:
            cm[index[r.true], index[r.pred]] += 1
        return cls(classes, cm, list(records), dict(config or {}))

    # -- serialisation -----------------------------------------------------

    def confusion_csv(self) -> str:
        lines = ["true\\pred," + ",".join(c.value for c in self.classes)]
        for c, row in zip(self.classes, self.confusion):
            lines.append(c.value + "," + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"

    def predictions_tsv(self) -> str:
        lines = ["id\ttrue\tpred\tfold"]
        for r in self.records:
            lines.append(f"{r.id}\t{r.true.value}\t{r.pred.value}\t{r.fold}")
        return "\n".join(lines) + "\n"

    def summary_md(self, title: str = "Evaluation") -> str:
        m = self.metrics
        out = [f"# {title}", "", "## Configuration", "", "```"]
        out += [f"{k} = {v}" for k, v in self.config.items()]
        out += ["```", "", "## Metrics", "", "| metric | value |", "|---|---|"]
        out += [
            f"| instances | {len(self.records)} |",
            f"| accuracy | {m.accuracy:.6f} |",
            f"| micro_f1 | {m.micro_f1:.6f} |",
            f"| macro_f1 | {m.macro_f1:.6f} |",
        ]
        out += ["", "| class | precision | recall | f1 |", "|---|---|---|---|"]
        for c, p, r, f in zip(self.classes, m.precision, m.recall, m.f1):
            out.append(f"| {c.value} | {p:.6f} | {r:.6f} | {f:.6f} |")
        return "\n".join(out) + "\n"

    def write(self, directory, title: str = "Evaluation") -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "confusion.csv").write_text(self.confusion_csv(), encoding="utf-8")
        (d / "predictions.tsv").write_text(self.predictions_tsv(), encoding="utf-8")
        (d / "summary.md").write_text(self.summary_md(title), encoding="utf-8")


def parse_instance_id(text: str) -> InstanceId:
    case_id, line_no, code, variant = text.rsplit(":", 3)
    return InstanceId(case_id, int(line_no), Code.parse(code), variant)


def read_predictions(path) -> list[Record]:
    """Inverse of :meth:`EvalReport.predictions_tsv`."""
    records = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != "id\ttrue\tpred\tfold":
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            iid, true, pred, fold = line.rstrip("\n").split("\t")
            records.append(Record(parse_instance_id(iid), Code.parse(true), Code.parse(pred), int(fold)))
    return records


# A trainer turns (training dataset, seed) into a fitted model; strings name
# the built-in algorithms.
Trainer = Callable[[Dataset, int], Model]
Algorithm = Union[str, Trainer]


@dataclass(frozen=True)
class PipelineConfig:
    """Everything between coded lines and predictions that a run depends on."""

    preprocess: PreprocessConfig = PreprocessConfig()
    k_per_class: int = DEFAULT_K_PER_CLASS
    params: Mapping[str, object] = field(default_factory=lambda: dict(DEFAULT_PARAMS))

    def echo(self) -> dict:
        out = {f"preprocess.{k}": v for k, v in self.preprocess.as_dict().items()}
        out["features.k_per_class"] = self.k_per_class
        out["features.selection"] = "chi-square, per-class top-k, union"
        out["features.tf"] = "raw count"
        out["features.idf"] = "ln((N+1)/(df+1)) + 1"
        out["features.normalization"] = "L2"
        for alg in sorted(self.params):
            for k, v in dataclasses.asdict(self.params[alg]).items():
                if k != "seed":
                    out[f"{alg}.{k}"] = v
        return out


def fit_fold(
    train_instances: Sequence[Instance],
    classes: Sequence[Code],
    k_per_class: int,
):
    """Vocabulary and feature set from the training fold only."""
    vocab = build_vocabulary(train_instances)
    fs = select_features(train_instances, k_per_class, vocab, classes)
    return vocab, fs


def _make_model(algorithm: Algorithm, dataset: Dataset, pipeline: PipelineConfig, seed: int) -> Model:
    if callable(algorithm):
        return algorithm(dataset, seed)
    params = pipeline.params.get(algorithm, DEFAULT_PARAMS.get(algorithm))
    if params is None:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if hasattr(params, "seed"):
        params = dataclasses.replace(params, seed=seed)
    return train(algorithm, dataset, params)


def _prepare(lines, pipeline, k, seed, variant, classes, plan):
    instances = [preprocess_line(cl, variant, pipeline.preprocess) for cl in lines]
    if classes is None:
        classes = sort_codes(inst.label for inst in instances)
    classes = tuple(sort_codes(classes))
    line_ids = [inst.id.line for inst in instances]
    if len(set(line_ids)) != len(line_ids):
        raise ValueError("duplicate coded lines in cross-validation input")
    if plan is None:
        plan = stratified_folds(list(zip(line_ids, (i.label for i in instances))), k, seed)
    fold_of = plan.fold_of()
    fold_idx = np.array([fold_of[i] for i in line_ids])
    return instances, classes, plan, fold_idx


def _folds(instances, classes, plan, fold_idx, k_per_class):
    """Yield (fold, train instances, test instances, vocabulary, feature set)."""
    for f in range(plan.k):
        test_rows = np.flatnonzero(fold_idx == f)
        if len(test_rows) == 0:
            continue
        train_inst = [instances[i] for i in np.flatnonzero(fold_idx != f)]
        test_inst = [instances[i] for i in test_rows]
        vocab, fs = fit_fold(train_inst, classes, k_per_class)
        yield f, train_inst, test_inst, vocab, fs


def fold_feature_sets(
    lines: Sequence[CodedLine],
    pipeline: PipelineConfig = PipelineConfig(),
    k: int = 10,
    seed: int = 0,
    variant: str = SINGLE,
    classes: Sequence[Code] | None = None,
    plan: FoldPlan | None = None,
) -> dict:
    """The feature set each fold of :func:`cross_validate` trains with, keyed by fold."""
    prepared = _prepare(lines, pipeline, k, seed, variant, classes, plan)
    return {f: fs for f, _, _, _, fs in _folds(*prepared, pipeline.k_per_class)}


def cross_validate(
    algorithm: Algorithm,
    lines: Sequence[CodedLine],
    pipeline: PipelineConfig = PipelineConfig(),
    k: int = 10,
    seed: int = 0,
    variant: str = SINGLE,
    classes: Sequence[Code] | None = None,
    plan: FoldPlan | None = None,
) -> EvalReport:
    """Stratified k-fold CV with feature selection refitted inside every fold.

    Folds are built on line identities (ignoring ``variant``), so the same
    lines with and without context get identical plans for the same seed.
    """
    instances, classes, plan, fold_idx = _prepare(lines, pipeline, k, seed, variant, classes, plan)
    records: list[Record] = []
    for f, train_inst, test_inst, vocab, fs in _folds(instances, classes, plan, fold_idx, pipeline.k_per_class):
        train_ds = Dataset.from_labels(
            vectorize_many(train_inst, vocab, fs), [i.label for i in train_inst],
            [i.id for i in train_inst], classes,
        )
        test_ds = Dataset.from_labels(
            vectorize_many(test_inst, vocab, fs), [i.label for i in test_inst],
            [i.id for i in test_inst], classes,
        )
        model = _make_model(algorithm, train_ds, pipeline, derive_seed(seed, "fold", f))
        predicted = model.predict_dataset(test_ds)
        for inst, pred in zip(test_inst, predicted):
            records.append(Record(inst.id, inst.label, pred, f))
    records.sort(key=lambda r: (r.fold, _line_key(r.id)))
    config = {
        "algorithm": algorithm if isinstance(algorithm, str) else getattr(algorithm, "__name__", "custom"),
        "variant": variant,
        "k": plan.k,
        "seed": seed,
        "classes": " ".join(c.value for c in classes),
    }
    config.update(pipeline.echo())
    return EvalReport.from_records(classes, records, config)
