"""Flat ``section.key = value`` run configuration.

Lines are ``key = value``; blank lines and lines starting with ``#`` are
ignored. Every key must be known; values are parsed by the key's type.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .classifiers import ALGORITHMS, NBParams, RFParams, SVMParams
from .corpus import EXPERIMENT_CODES, RARE_CODES, SEVEN_CLASSES, Code, ContextMode, Scope
from .evaluation import PipelineConfig
from .experiments import Exp1Config, Exp2Config, Exp3Config
from .preprocess import SINGLE, PreprocessConfig
from .synth import GenConfig


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_int(text: str):
    return None if text.lower() in ("none", "auto") else int(text)


def _range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition("-")
    lo, hi = int(lo), int(hi or lo)
    return (lo, hi)


def _words(text: str) -> tuple[str, ...]:
    return tuple(text.replace(",", " ").split())


def _algorithms(text: str) -> tuple[str, ...]:
    algs = _words(text)
    bad = [a for a in algs if a not in ALGORITHMS]
    if bad or not algs:
        raise ValueError(f"algorithms must be drawn from {' '.join(ALGORITHMS)}")
    return algs


def _codes(text: str) -> tuple[Code, ...]:
    return tuple(Code.parse(w) for w in _words(text))


def _groups(text: str) -> dict[str, int]:
    out = {}
    for item in _words(text):
        name, _, threshold = item.partition(":")
        out[name] = int(threshold)
    return out


def _choice(*options) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, tuple) and len(value) == 2 and all(isinstance(v, int) for v in value):
        return f"{value[0]}-{value[1]}"
    if isinstance(value, tuple):
        return " ".join(v.value if isinstance(v, Code) else str(v) for v in value)
    if isinstance(value, dict):
        return " ".join(f"{k}:{v}" for k, v in value.items())
    return "none" if value is None else str(value)


# key -> (parser, default)
KEYS: dict[str, tuple[Callable[[str], object], object]] = {
    "seed": (int, 42),
    "paths.corpus": (str, None),
    "paths.out": (str, None),
    "corpus.scope": (_choice("physician", "all"), "physician"),
    "corpus.majority": (_bool, False),
    "corpus.context_mode": (_choice("same_speaker", "other_speaker"), "same_speaker"),
    "preprocess.pos_filter_enabled": (_bool, True),
    "preprocess.stopword_list_id": (str, PreprocessConfig().stopword_list_id),
    "preprocess.tagger": (_choice("lexicon", "none"), "lexicon"),
    "preprocess.drop_numeric": (_bool, True),
    "preprocess.word_count_basis": (_choice("terms", "tokens"), "terms"),
    "features.k_per_class": (int, 100),
    "nb.alpha": (float, NBParams().alpha),
    "rf.n_trees": (int, RFParams().n_trees),
    "rf.features_per_split": (_optional_int, None),
    "rf.bootstrap": (_bool, True),
    "rf.max_depth": (_optional_int, None),
    "rf.min_leaf": (int, 1),
    "svm.C": (float, SVMParams().C),
    "svm.max_epochs": (int, SVMParams().max_epochs),
    "svm.tol": (float, SVMParams().tol),
    "gen.n_cases": (int, GenConfig().n_cases),
    "gen.lines_per_case": (_range, GenConfig().lines_per_case),
    "gen.coders_per_case": (_range, GenConfig().coders_per_case),
    "gen.target_experiment": (int, 600),
    "gen.target_rare": (int, 15),
    "gen.disagreement_rate": (float, GenConfig().disagreement_rate),
    "gen.context_signal_rate": (float, GenConfig().context_signal_rate),
    "gen.signal_share": (float, GenConfig().signal_share),
    "eval.algorithm": (_choice(*ALGORITHMS), "NB"),
    "eval.classes": (_codes, SEVEN_CLASSES),
    "eval.n_per_class": (int, 190),
    "eval.min_words": (int, 1),
    "eval.k": (int, 10),
    "eval.variant": (_choice("single", "with_context"), SINGLE),
    "audit.n_per_class": (int, 190),
    "exp1.groups": (_groups, {"A": 1, "B": 3, "C": 5}),
    "exp1.classes": (_codes, SEVEN_CLASSES),
    "exp1.n_per_class": (int, 190),
    "exp1.algorithms": (_algorithms, ALGORITHMS),
    "exp1.resamples": (int, 4),
    "exp1.k": (int, 10),
    "exp2.source_group": (str, "C"),
    "exp2.target_groups": (_words, ("A", "B")),
    "exp3.classes": (_codes, EXPERIMENT_CODES),
    "exp3.min_words": (int, 5),
    "exp3.n_per_class": (int, 190),
    "exp3.algorithms": (_algorithms, ALGORITHMS),
    "exp3.resamples": (int, 4),
    "exp3.k": (int, 10),
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {k: d for k, (_, d) in KEYS.items()})

    def __getitem__(self, key):
        return self.values[key]

    def set(self, key: str, text: str) -> None:
        if key not in KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        parser, _ = KEYS[key]
        try:
            self.values[key] = parser(text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None

    @classmethod
    def parse(cls, text: str, source: str = "<config>") -> "RunConfig":
        cfg = cls()
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{source}: line {n}: expected 'key = value'")
            try:
                cfg.set(key.strip(), value.strip())
            except ConfigError as exc:
                raise ConfigError(f"{source}: line {n}: {exc}") from None
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.parse(Path(path).read_text(encoding="utf-8"), str(path))

    def dumps(self) -> str:
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.values.items() if v is not None)

    # -- builders ----------------------------------------------------------

    @property
    def seed(self) -> int:
        return self["seed"]

    def scope(self) -> Scope:
        return Scope(self["corpus.scope"])

    def context_mode(self) -> ContextMode:
        return ContextMode(self["corpus.context_mode"])

    def preprocess(self) -> PreprocessConfig:
        return PreprocessConfig(
            pos_filter_enabled=self["preprocess.pos_filter_enabled"],
            stopword_list_id=self["preprocess.stopword_list_id"],
            tagger=self["preprocess.tagger"],
            drop_numeric=self["preprocess.drop_numeric"],
            word_count_basis=self["preprocess.word_count_basis"],
        )

    def pipeline(self) -> PipelineConfig:
        params = {
            "NB": NBParams(alpha=self["nb.alpha"]),
            "RF": RFParams(
                n_trees=self["rf.n_trees"],
                features_per_split=self["rf.features_per_split"],
                bootstrap=self["rf.bootstrap"],
                max_depth=self["rf.max_depth"],
                min_leaf=self["rf.min_leaf"],
            ),
            "SVM": SVMParams(C=self["svm.C"], max_epochs=self["svm.max_epochs"], tol=self["svm.tol"]),
        }
        return PipelineConfig(self.preprocess(), self["features.k_per_class"], params)

    def gen(self) -> GenConfig:
        targets = {c: self["gen.target_experiment"] for c in EXPERIMENT_CODES}
        targets.update({c: self["gen.target_rare"] for c in RARE_CODES})
        return GenConfig(
            n_cases=self["gen.n_cases"],
            lines_per_case=self["gen.lines_per_case"],
            coders_per_case=self["gen.coders_per_case"],
            per_code_target=targets,
            disagreement_rate=self["gen.disagreement_rate"],
            context_signal_rate=self["gen.context_signal_rate"],
            signal_share=self["gen.signal_share"],
            seed=self.seed,
        )

    def exp1(self) -> Exp1Config:
        return Exp1Config(
            groups=dict(self["exp1.groups"]),
            classes=tuple(self["exp1.classes"]),
            n_per_class=self["exp1.n_per_class"],
            algorithms=tuple(self["exp1.algorithms"]),
            resamples=self["exp1.resamples"],
            k=self["exp1.k"],
            seed=self.seed,
            pipeline=self.pipeline(),
        )

    def exp2(self) -> Exp2Config:
        return Exp2Config(self.exp1(), self["exp2.source_group"], tuple(self["exp2.target_groups"]))

    def exp3(self) -> Exp3Config:
        return Exp3Config(
            classes=tuple(self["exp3.classes"]),
            min_words=self["exp3.min_words"],
            n_per_class=self["exp3.n_per_class"],
            algorithms=tuple(self["exp3.algorithms"]),
            resamples=self["exp3.resamples"],
            k=self["exp3.k"],
            seed=self.seed,
            pipeline=self.pipeline(),
        )

    def with_seed(self, seed: int) -> "RunConfig":
        values = dict(self.values)
        values["seed"] = seed
        return dataclasses.replace(self, values=values)
