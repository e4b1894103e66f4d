"""Drivers for the three experiments.

* Exp1 compares the algorithms on balanced samples drawn from three
  word-count groups (A: >= 1, B: >= 3, C: >= 5 terms).
* Exp2 takes the lines each algorithm got right in a group-C run and checks
  whether they stay correct after being mixed with group-A or group-B lines.
* Exp3 compares coded lines alone against the same lines with their
  preceding same-speaker lines, with NotCoded left out.

Every cell of a grid is an independent job keyed by its coordinates, so the
outputs do not depend on how many worker processes ran them.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .classifiers import ALGORITHMS
from .corpus import EXPERIMENT_CODES, RARE_CODES, SEVEN_CLASSES, Code, CodedLine, InstancePool, sort_codes
from .evaluation import (
    Algorithm,
    EvalReport,
    PipelineConfig,
    balanced_sample,
    cross_validate,
    derive_seed,
    read_predictions,
)
from .preprocess import SINGLE, WITH_CONTEXT, InstanceId

log = logging.getLogger(__name__)

GROUPS: Mapping[str, int] = {"A": 1, "B": 3, "C": 5}


def algorithm_name(algorithm: Algorithm) -> str:
    return algorithm if isinstance(algorithm, str) else getattr(algorithm, "__name__", "custom")


def _check_common(n_per_class, resamples, k, classes):
    if n_per_class < 1 or resamples < 1:
        raise ValueError("n_per_class and resamples must be positive")
    if k < 2:
        raise ValueError("k must be at least 2")
    if len(set(classes)) < 2:
        raise ValueError("need at least two classes")


@dataclass(frozen=True)
class Exp1Config:
    groups: Mapping[str, int] = field(default_factory=lambda: dict(GROUPS))
    classes: tuple[Code, ...] = SEVEN_CLASSES
    n_per_class: int = 190
    algorithms: tuple[Algorithm, ...] = ALGORITHMS
    resamples: int = 4
    k: int = 10
    seed: int = 0
    pipeline: PipelineConfig = PipelineConfig()

    def __post_init__(self):
        _check_common(self.n_per_class, self.resamples, self.k, self.classes)
        thresholds = list(self.groups.values())
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])) or thresholds[0] < 1:
            raise ValueError("group thresholds must be positive and strictly increasing")
        if any(c in RARE_CODES for c in self.classes):
            raise ValueError("rare codes cannot be experiment classes")

    def echo(self) -> dict:
        out = {
            "experiment": "exp1",
            "seed": self.seed,
            "groups": " ".join(f"{g}>={t}" for g, t in self.groups.items()),
            "classes": " ".join(c.value for c in self.classes),
            "n_per_class": self.n_per_class,
            "algorithms": " ".join(algorithm_name(a) for a in self.algorithms),
            "resamples": self.resamples,
            "k": self.k,
        }
        out.update(self.pipeline.echo())
        return out


@dataclass(frozen=True)
class Exp2Config:
    exp1: Exp1Config = Exp1Config()
    source_group: str = "C"
    target_groups: tuple[str, ...] = ("A", "B")

    def __post_init__(self):
        for g in (self.source_group, *self.target_groups):
            if g not in self.exp1.groups:
                raise ValueError(f"unknown group {g!r}")

    @property
    def seed(self) -> int:
        return self.exp1.seed

    def echo(self) -> dict:
        out = self.exp1.echo()
        out["experiment"] = "exp2"
        out["source_group"] = self.source_group
        out["target_groups"] = " ".join(self.target_groups)
        out["fill"] = "seeded random from target group, tracked lines excluded"
        out["folds"] = "fresh stratified plan per reconstructed dataset"
        return out


@dataclass(frozen=True)
class Exp3Config:
    classes: tuple[Code, ...] = EXPERIMENT_CODES
    min_words: int = 5
    n_per_class: int = 190
    algorithms: tuple[Algorithm, ...] = ALGORITHMS
    resamples: int = 4
    k: int = 10
    seed: int = 0
    pipeline: PipelineConfig = PipelineConfig()
    conditions: tuple[str, ...] = (SINGLE, WITH_CONTEXT)

    def __post_init__(self):
        _check_common(self.n_per_class, self.resamples, self.k, self.classes)
        if Code.NotCoded in self.classes:
            raise ValueError("exp3 excludes NotCoded")
        if set(self.conditions) - {SINGLE, WITH_CONTEXT}:
            raise ValueError(f"unknown condition in {self.conditions}")

    def echo(self) -> dict:
        out = {
            "experiment": "exp3",
            "seed": self.seed,
            "classes": " ".join(c.value for c in self.classes),
            "min_words": self.min_words,
            "n_per_class": self.n_per_class,
            "algorithms": " ".join(algorithm_name(a) for a in self.algorithms),
            "resamples": self.resamples,
            "k": self.k,
            "conditions": " ".join(self.conditions),
        }
        out.update(self.pipeline.echo())
        return out


# ---------------------------------------------------------------------------
# results


@dataclass
class Cell:
    """One cross-validation run. ``axis`` is the group (Exp1/2) or condition (Exp3)."""

    axis: str
    algorithm: str
    resample: int
    report: EvalReport | None
    tracked: int | None = None
    tracked_correct: int | None = None
    note: str = ""

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.axis, self.algorithm, self.resample)

    @property
    def tracked_rate(self) -> float | None:
        if not self.tracked:
            return None
        return self.tracked_correct / self.tracked

    @property
    def dirname(self) -> str:
        return f"{self.axis}_{self.algorithm}_r{self.resample}"


@dataclass(frozen=True)
class Aggregate:
    mean: float
    min: float
    max: float
    n: int

    @classmethod
    def of(cls, values: Sequence[float]) -> "Aggregate | None":
        if not values:
            return None
        return cls(float(np.mean(values)), float(min(values)), float(max(values)), len(values))


@dataclass
class ExperimentReport:
    name: str
    axis_name: str  # "group" or "condition"
    config: dict
    cells: dict[tuple[str, str, int], Cell]

    def axes(self) -> list[str]:
        return list(dict.fromkeys(k[0] for k in self.cells))

    def algorithms(self) -> list[str]:
        return list(dict.fromkeys(k[1] for k in self.cells))

    def _values(self, axis, algorithm, metric) -> list[float]:
        out = []
        for (a, alg, _), cell in sorted(self.cells.items()):
            if a != axis or alg != algorithm:
                continue
            if metric == "tracked_rate":
                if cell.tracked_rate is not None:
                    out.append(cell.tracked_rate)
            elif cell.report is not None:
                out.append(getattr(cell.report, metric))
        return out

    def aggregate(self, axis: str, algorithm: str, metric: str = "accuracy") -> Aggregate | None:
        return Aggregate.of(self._values(axis, algorithm, metric))

    def mean(self, axis: str, algorithm: str, metric: str = "accuracy") -> float:
        agg = self.aggregate(axis, algorithm, metric)
        if agg is None:
            raise KeyError(f"no {metric} values for {axis}/{algorithm}")
        return agg.mean

    def pooled_accuracy(self, axis: str, algorithm: str) -> float:
        """Accuracy over all resamples' predictions taken together."""
        correct = total = 0
        for (a, alg, _), cell in self.cells.items():
            if a == axis and alg == algorithm and cell.report is not None:
                correct += int(np.trace(cell.report.confusion))
                total += int(cell.report.confusion.sum())
        return correct / total

    def deltas(self, base: str = SINGLE, other: str = WITH_CONTEXT) -> dict[str, float]:
        """Mean accuracy of ``other`` minus ``base`` per algorithm (paired resamples)."""
        return {alg: self.mean(other, alg) - self.mean(base, alg) for alg in self.algorithms()}

    # -- output ------------------------------------------------------------

    def _header(self) -> list[str]:
        return [f"# {k} = {v}" for k, v in self.config.items()]

    def grid_csv(self) -> str:
        buf = io.StringIO()
        for line in self._header():
            buf.write(line + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([self.axis_name, "algorithm", "resample", "n", "accuracy", "micro_f1", "macro_f1",
                    "tracked", "tracked_correct", "tracked_rate", "cell"])
        for key in sorted(self.cells, key=self._sort_key):
            c = self.cells[key]
            r = c.report
            w.writerow([
                c.axis, c.algorithm, c.resample,
                len(r) if r else 0,
                _fmt(r.accuracy if r else None),
                _fmt(r.micro_f1 if r else None),
                _fmt(r.macro_f1 if r else None),
                "" if c.tracked is None else c.tracked,
                "" if c.tracked_correct is None else c.tracked_correct,
                _fmt(c.tracked_rate),
                c.dirname if r else "",
            ])
        return buf.getvalue()

    def _sort_key(self, key):
        axes = self.axes()
        algs = self.algorithms()
        return (axes.index(key[0]), algs.index(key[1]), key[2])

    def summary_md(self) -> str:
        out = [f"# {self.name}", "", "## Configuration", "", "```"]
        out += [f"{k} = {v}" for k, v in self.config.items()]
        out += ["```", ""]
        metrics = ["accuracy", "micro_f1", "macro_f1"]
        if any(c.tracked is not None for c in self.cells.values()):
            metrics.append("tracked_rate")
        for metric in metrics:
            out += [f"## {metric} (mean / min / max over resamples)", ""]
            out.append(f"| {self.axis_name} | " + " | ".join(self.algorithms()) + " |")
            out.append("|---" * (len(self.algorithms()) + 1) + "|")
            for axis in self.axes():
                row = []
                for alg in self.algorithms():
                    agg = self.aggregate(axis, alg, metric)
                    row.append("n/a" if agg is None else f"{agg.mean:.4f} / {agg.min:.4f} / {agg.max:.4f}")
                out.append(f"| {axis} | " + " | ".join(row) + " |")
            out.append("")
        if self.name == "exp3" and {SINGLE, WITH_CONTEXT} <= set(self.axes()):
            out += ["## accuracy delta (with_context - single)", "", "| algorithm | delta |", "|---|---|"]
            for alg, d in self.deltas().items():
                out.append(f"| {alg} | {d:+.4f} |")
            out.append("")
        notes = [f"- {c.dirname}: {c.note}" for _, c in sorted(self.cells.items()) if c.note]
        if notes:
            out += ["## Notes", ""] + notes + [""]
        return "\n".join(out)

    def write(self, directory) -> Path:
        d = Path(directory)
        (d / "cells").mkdir(parents=True, exist_ok=True)
        (d / "summary.md").write_text(self.summary_md(), encoding="utf-8")
        (d / "grid.csv").write_text(self.grid_csv(), encoding="utf-8")
        for cell in self.cells.values():
            if cell.report is not None:
                cell.report.write(d / "cells" / cell.dirname, title=f"{self.name} {cell.dirname}")
        return d


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.6f}"


# ---------------------------------------------------------------------------
# job execution

# A job is (function, kwargs); the pool lives in a module global so workers
# receive it once through the initializer rather than once per job.
_POOL: InstancePool | None = None


def _init_worker(pool: InstancePool) -> None:
    global _POOL
    _POOL = pool


def _run_jobs(pool: InstancePool, jobs: list[tuple[Callable, dict]], n_jobs: int) -> list:
    if n_jobs <= 1 or len(jobs) <= 1:
        _init_worker(pool)
        return [fn(**kw) for fn, kw in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs, initializer=_init_worker, initargs=(pool,)) as ex:
        futures = [ex.submit(fn, **kw) for fn, kw in jobs]
        return [f.result() for f in futures]


def default_jobs() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def _cv_cell(axis, algorithm, resample, lines, pipeline, k, seed, variant, classes, tracked=None):
    report = cross_validate(algorithm, lines, pipeline, k=k, seed=seed, variant=variant, classes=classes)
    name = algorithm_name(algorithm)
    log.info("%s %s r%d: accuracy %.4f", axis, name, resample, report.accuracy)
    cell = Cell(axis, name, resample, report)
    if tracked is not None:
        correct = set(r.id.line for r in report.records if r.correct)
        cell.tracked = len(tracked)
        cell.tracked_correct = sum(1 for t in tracked if t in correct)
    return cell


def _exp1_cell(config: Exp1Config, group: str, algorithm: Algorithm, resample: int) -> Cell:
    lines = balanced_sample(
        _POOL, config.classes, config.n_per_class, config.groups[group],
        exp1_sample_seed(config.seed, group, resample), config.pipeline.preprocess,
    )
    return _cv_cell(group, algorithm, resample, lines, config.pipeline, config.k,
                    derive_seed(config.seed, "exp1", group, resample, "cv"), SINGLE, config.classes)


def exp1_sample_seed(seed: int, group: str, resample: int) -> int:
    # shared by all algorithms so they see the same datasets
    return derive_seed(seed, "exp1", group, resample)


def run_exp1(pool: InstancePool, config: Exp1Config = Exp1Config(), jobs: int = 1) -> ExperimentReport:
    tasks = [
        (_exp1_cell, dict(config=config, group=g, algorithm=a, resample=r))
        for g in config.groups
        for a in config.algorithms
        for r in range(config.resamples)
    ]
    cells = _run_jobs(pool, tasks, jobs)
    return ExperimentReport("exp1", "group", config.echo(), {c.key: c for c in cells})


# ---------------------------------------------------------------------------
# Exp2


def tracked_sets(exp1: ExperimentReport | Mapping, source_group: str = "C") -> dict[tuple[str, int], list[InstanceId]]:
    """Correctly classified line ids per (algorithm, resample) of the source-group runs.

    Accepts an Exp1 report or a mapping ``(algorithm, resample) -> records``.
    """
    if isinstance(exp1, ExperimentReport):
        records = {
            (alg, r): cell.report.records
            for (g, alg, r), cell in exp1.cells.items()
            if g == source_group and cell.report is not None
        }
    else:
        records = dict(exp1)
    out = {}
    for key, recs in records.items():
        ids = {rec.id.line for rec in recs if rec.correct}
        out[key] = sorted(ids, key=lambda i: (i.case_id, i.line_no, i.code.order))
    return out


def reconstruct(
    pool: InstancePool,
    tracked: Sequence[InstanceId],
    classes: Sequence[Code],
    n_per_class: int,
    min_words: int,
    seed: int,
    preprocess=None,
) -> tuple[list[CodedLine], list[InstanceId]]:
    """Tracked lines (capped per class in canonical order) topped up with random fills.

    Returns the dataset and the tracked ids that made it in.
    """
    kwargs = {} if preprocess is None else {"config": preprocess}
    by_key = {(cl.case_id, cl.line_no, cl.code): cl for code in classes for cl in pool[code]}
    excluded = [(t.case_id, t.line_no, t.code) for t in tracked]
    lines: list[CodedLine] = []
    kept: list[InstanceId] = []
    for code in sort_codes(classes):
        mine = [t for t in tracked if t.code is code][:n_per_class]
        kept += mine
        lines += [by_key[(t.case_id, t.line_no, t.code)] for t in mine]
        need = n_per_class - len(mine)
        if need:
            lines += balanced_sample(pool, [code], need, min_words, seed, exclude=excluded, **kwargs)
    lines.sort(key=lambda cl: cl.sort_key)
    return lines, kept


def _exp2_cell(config: Exp2Config, group: str, algorithm: Algorithm, resample: int, tracked) -> Cell:
    e1 = config.exp1
    name = algorithm_name(algorithm)
    lines, kept = reconstruct(
        _POOL, tracked, e1.classes, e1.n_per_class, e1.groups[group],
        derive_seed(e1.seed, "exp2", name, group, resample), e1.pipeline.preprocess,
    )
    cell = _cv_cell(group, algorithm, resample, lines, e1.pipeline, e1.k,
                    derive_seed(e1.seed, "exp2", name, group, resample, "cv"), SINGLE, e1.classes,
                    tracked=kept)
    missing = [c.value for c in e1.classes if not any(t.code is c for t in kept)]
    if missing:
        cell.note = "no tracked lines for " + ", ".join(missing)
    return cell


def _exp1_source_cells(pool, config: Exp2Config, jobs) -> ExperimentReport:
    e1 = config.exp1
    only_source = Exp1Config(
        {config.source_group: e1.groups[config.source_group]}, e1.classes, e1.n_per_class,
        e1.algorithms, e1.resamples, e1.k, e1.seed, e1.pipeline,
    )
    return run_exp1(pool, only_source, jobs)


def run_exp2(
    pool: InstancePool,
    config: Exp2Config = Exp2Config(),
    exp1: ExperimentReport | Mapping | None = None,
    jobs: int = 1,
) -> ExperimentReport:
    """``exp1`` supplies the source-group predictions; when omitted those cells are re-run."""
    if exp1 is None:
        exp1 = _exp1_source_cells(pool, config, jobs)
    tracked = tracked_sets(exp1, config.source_group)
    tasks = []
    for g in config.target_groups:
        for a in config.exp1.algorithms:
            for r in range(config.exp1.resamples):
                key = (algorithm_name(a), r)
                if key not in tracked:
                    raise KeyError(f"no {config.source_group}-group predictions for {key[0]} resample {r}")
                tasks.append((_exp2_cell, dict(config=config, group=g, algorithm=a, resample=r,
                                               tracked=tracked[key])))
    cells = _run_jobs(pool, tasks, jobs)
    return ExperimentReport("exp2", "group", config.echo(), {c.key: c for c in cells})


def load_exp1_records(
    directory, config: Exp2Config, echo: Mapping | None = None
) -> dict[tuple[str, int], list] | None:
    """Source-group records from an Exp1 output directory whose header matches ``echo``.

    ``echo`` defaults to ``config.exp1.echo()``. Returns None when the
    directory is missing, incomplete or was produced with other settings.
    """
    d = Path(directory)
    grid = d / "grid.csv"
    if not grid.exists():
        return None
    echo = config.exp1.echo() if echo is None else echo
    expected = [f"# {k} = {v}" for k, v in echo.items()]
    header = [ln for ln in grid.read_text(encoding="utf-8").splitlines() if ln.startswith("# ")]
    if header != expected:
        return None
    out = {}
    for a in config.exp1.algorithms:
        for r in range(config.exp1.resamples):
            name = algorithm_name(a)
            path = d / "cells" / f"{config.source_group}_{name}_r{r}" / "predictions.tsv"
            if not path.exists():
                return None
            out[(name, r)] = read_predictions(path)
    return out


# ---------------------------------------------------------------------------
# Exp3


def _exp3_cell(config: Exp3Config, condition: str, algorithm: Algorithm, resample: int) -> Cell:
    # ids, folds and classifier seeds depend only on the resample, never on the condition
    lines = balanced_sample(
        _POOL, config.classes, config.n_per_class, config.min_words,
        derive_seed(config.seed, "exp3", resample), config.pipeline.preprocess,
    )
    return _cv_cell(condition, algorithm, resample, lines, config.pipeline, config.k,
                    derive_seed(config.seed, "exp3", resample, "cv"), condition, config.classes)


def run_exp3(pool: InstancePool, config: Exp3Config = Exp3Config(), jobs: int = 1) -> ExperimentReport:
    if not pool.has_context and WITH_CONTEXT in config.conditions:
        raise ValueError("exp3 needs a pool with context attached")
    tasks = [
        (_exp3_cell, dict(config=config, condition=cond, algorithm=a, resample=r))
        for cond in config.conditions
        for a in config.algorithms
        for r in range(config.resamples)
    ]
    cells = _run_jobs(pool, tasks, jobs)
    return ExperimentReport("exp3", "condition", config.echo(), {c.key: c for c in cells})
