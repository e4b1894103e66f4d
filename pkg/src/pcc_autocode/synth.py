"""Seeded synthetic transcripts with planted per-code lexical signal.

Each coded physician line mixes words from its code's lexicon with shared
filler words. Lexicons are built around the manual's example sentences (for
instance SurvTime <- "Christmas", "year"; Curability <- "cure", "rid"), and
neighbouring codes share a few terms so the task is not trivially separable.
Uncoded lines are filler only.

Coded lines are planted in runs: a patient line followed by one to four
consecutive physician lines carrying the same code. A run longer than one
line happens with probability ``context_signal_rate``; its later lines then
have same-speaker context drawn from their own code's lexicon. Lead-in lines
are coded too, which keeps the NotCoded class free of code vocabulary. A
fraction of coded lines gets a second, conflicting code from another coder.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .corpus import (
    EXPERIMENT_CODES,
    RARE_CODES,
    SEVEN_CLASSES,
    Annotation,
    Code,
    InstancePool,
    Speaker,
    Utterance,
    write_annotations,
    write_coders,
    write_transcripts,
)
from .preprocess import PreprocessConfig, preprocess_text

LEXICONS: dict[Code, tuple[str, ...]] = {
    Code.CancKnowl: (
        "understand", "cancer", "knowledge", "disease", "state", "stage", "explain",
        "aware", "picture", "tell", "situation", "diagnosis",
    ),
    Code.OpenDoor: (
        "future", "holds", "know", "questions", "prognosis", "curious", "wonder",
        "ask", "want", "information", "details", "people",
    ),
    Code.UnderSProg: (
        "prognosis", "understanding", "outlook", "expect", "sense", "told",
        "understand", "heard", "impression", "means",
    ),
    Code.ChgforWorse: (
        "progressing", "disease", "chemo", "worse", "growing", "tumor", "markers",
        "elevated", "spread", "scan", "worsening", "types", "liver", "nodes",
    ),
    Code.FurQol: (
        "road", "energy", "socialize", "tired", "activities", "strength", "independence",
        "daily", "walking", "hobbies", "quality", "future", "friends", "travel",
    ),
    Code.PallCare: (
        "comfort", "quality", "stopping", "focusing", "hospice", "palliative", "symptoms",
        "pain", "relief", "considering", "chemo", "life", "peaceful", "nausea",
    ),
    Code.AdvDirect: (
        "family", "life", "support", "attorney", "power", "directive", "wishes",
        "ventilator", "resuscitate", "discussed", "paperwork", "decisions", "proxy", "issues",
    ),
    Code.Curability: (
        "cure", "cured", "rid", "completely", "treatments", "curable", "remission",
        "eliminate", "permanently", "gone", "cancer", "longer", "control", "chronic",
    ),
    Code.SurvTime: (
        "christmas", "year", "months", "survive", "weeks", "time", "expectancy",
        "birthday", "estimate", "summer", "longer", "remaining", "spring", "timeline",
    ),
    Code.BestWorstCase: (
        "best", "worst", "case", "scenario", "better", "range", "patients", "survive",
    ),
    Code.DoubFram: (
        "research", "percent", "relapse", "shows", "chance", "odds", "statistics", "cured",
    ),
}

FILLER = (
    "appointment", "morning", "nurse", "blood", "test", "result", "medicine", "dose",
    "pill", "weekend", "drive", "clinic", "office", "schedule", "insurance", "pharmacy",
    "weather", "sleep", "appetite", "weight", "breakfast", "kids", "work", "job", "home",
    "car", "phone", "call", "paper", "form", "room", "minute", "visit", "today", "fine",
    "good", "great", "okay", "yeah", "really", "sure", "thing", "lot", "bit",
    "check", "look", "come", "back", "next", "week", "doctor", "hospital", "labs", "number",
    "count", "fluid", "water", "drink", "eat", "food", "lunch", "dinner", "night", "day",
    "question", "answer", "write", "note", "chart", "bed", "chair", "wait", "parking",
    "traffic", "daughter", "son", "husband", "wife", "brother", "sister", "dog", "garden",
    "house", "church", "television", "book", "news", "coffee", "tea", "shower", "walk",
    "stairs", "bathroom", "kitchen", "floor", "window", "door", "cold", "warm", "hot",
    "rain", "snow", "sunny", "busy", "quiet", "early", "late", "quick", "slow", "easy",
    "hard", "simple", "plan", "list", "refill", "prescription", "vitamin", "exercise",
    "arm", "leg", "stomach", "headache", "cough", "fever", "rash", "swelling",
    "bruise", "needle", "port", "line", "bag", "cup", "bottle", "card", "email", "mail",
)

PATIENT_WORDS = (
    "worried", "scared", "hope", "okay", "thanks", "yeah", "tired", "feel", "husband",
    "wife", "kids", "sleep", "eat", "pain", "question", "medicine", "appointment",
)

# Function words sprinkled between content words; all are removed by preprocessing.
GLUE = (
    "the", "you", "we", "and", "of", "to", "is", "that", "it", "about", "your", "so",
    "with", "for", "in", "this", "are", "be", "have", "what", "if", "a", "on", "just",
)

DEFAULT_LENGTH_MIXTURE = ((1, 2, 0.3), (3, 4, 0.3), (5, 9, 0.4))


def _default_targets() -> dict[Code, int]:
    targets = {c: 600 for c in EXPERIMENT_CODES}
    targets.update({c: 15 for c in RARE_CODES})
    return targets


class InfeasibleConfig(ValueError):
    pass


@dataclass(frozen=True)
class GenConfig:
    n_cases: int = 400
    lines_per_case: tuple[int, int] = (36, 56)
    coders_per_case: tuple[int, int] = (1, 4)
    per_code_target: Mapping[Code, int] = field(default_factory=_default_targets)
    disagreement_rate: float = 0.1
    context_signal_rate: float = 0.6
    # share of a coded line's content words drawn from its code's lexicon
    signal_share: float = 0.3
    # (min words, max words, weight) after preprocessing
    length_mixture: tuple[tuple[int, int, float], ...] = DEFAULT_LENGTH_MIXTURE
    seed: int = 42

    def __post_init__(self):
        if self.n_cases < 1:
            raise ValueError("n_cases must be positive")
        for name in ("lines_per_case", "coders_per_case"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                raise ValueError(f"{name} must be a range 1 <= lo <= hi")
        for name in ("disagreement_rate", "context_signal_rate", "signal_share"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not self.length_mixture or any(lo < 1 or hi < lo or w < 0 for lo, hi, w in self.length_mixture):
            raise ValueError("length_mixture entries must be (lo >= 1, hi >= lo, weight >= 0)")
        if sum(w for *_, w in self.length_mixture) <= 0:
            raise ValueError("length_mixture weights must not all be zero")
        if any(n < 0 for n in self.per_code_target.values()):
            raise ValueError("per_code_target counts must be non-negative")
        if Code.NotCoded in self.per_code_target:
            raise ValueError("NotCoded lines are not planted; they are every uncoded line")


@dataclass
class GeneratedCorpus:
    utterances: list[Utterance]
    annotations: list[Annotation]
    coders: dict[str, int]
    config: GenConfig

    def transcripts_tsv(self) -> str:
        buf = io.StringIO()
        write_transcripts(self.utterances, buf)
        return buf.getvalue()

    def annotations_tsv(self) -> str:
        buf = io.StringIO()
        write_annotations(self.annotations, buf)
        return buf.getvalue()

    def coders_tsv(self) -> str:
        buf = io.StringIO()
        write_coders(self.coders, buf)
        return buf.getvalue()

    def write(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for name, text in (
            ("transcripts.tsv", self.transcripts_tsv()),
            ("annotations.tsv", self.annotations_tsv()),
            ("coders.tsv", self.coders_tsv()),
        ):
            with open(d / name, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return d


class _Writer:
    """Sentence builder around one seeded generator."""

    def __init__(self, rng: np.random.Generator, config: GenConfig):
        self.rng = rng
        self.lengths = [(lo, hi) for lo, hi, _ in config.length_mixture]
        w = np.array([w for *_, w in config.length_mixture], dtype=float)
        self.length_p = w / w.sum()

    def n_words(self) -> int:
        lo, hi = self.lengths[self.rng.choice(len(self.lengths), p=self.length_p)]
        return int(self.rng.integers(lo, hi + 1))

    def pick(self, words) -> str:
        return words[int(self.rng.integers(len(words)))]

    def sentence(self, content: list[str]) -> str:
        out = []
        for word in content:
            if self.rng.random() < 0.6:
                out.append(self.pick(GLUE))
            out.append(word)
        if self.rng.random() < 0.5:
            out.append(self.pick(GLUE))
        text = " ".join(out)
        return text[0].upper() + text[1:] + self.pick((".", ".", "?", "!"))

    def line(self, lexicon, share: float) -> str:
        words = []
        for _ in range(self.n_words()):
            if lexicon and self.rng.random() < share:
                words.append(self.pick(lexicon))
            else:
                words.append(self.pick(FILLER))
        return self.sentence(words)

    def patient_line(self) -> str:
        k = int(self.rng.integers(1, 5))
        return self.sentence([self.pick(PATIENT_WORDS) for _ in range(k)])


def generate(config: GenConfig = GenConfig()) -> GeneratedCorpus:
    """Generate a corpus; identical config (seed included) gives identical output."""
    rng = np.random.default_rng(config.seed)
    writer = _Writer(rng, config)

    # planted runs, as (code, number of coded lines); targets count coded lines
    planted = []
    for code in Code:
        remaining = config.per_code_target.get(code, 0)
        while remaining > 0:
            size = 1
            if rng.random() < config.context_signal_rate:
                size += int(rng.integers(1, 4))
            size = min(size, remaining)
            planted.append((code, size))
            remaining -= size
    order = rng.permutation(len(planted))
    planted = [planted[i] for i in order]

    lo, hi = config.lines_per_case
    capacity = rng.integers(lo, hi + 1, size=config.n_cases)
    # a run also needs the patient line in front of it
    need = sum(1 + size for _, size in planted)
    if need > int(capacity.sum()):
        raise InfeasibleConfig(
            f"planted runs need {need} lines but {config.n_cases} cases hold only {int(capacity.sum())}"
        )
    assigned: list[list] = [[] for _ in range(config.n_cases)]
    remaining_room = capacity.copy()
    for item in planted:
        case = int(np.argmax(remaining_room))  # first case with the most room
        if remaining_room[case] < 1 + item[1]:
            raise InfeasibleConfig("planted runs do not fit into the configured cases")
        assigned[case].append(item)
        remaining_room[case] -= 1 + item[1]

    utterances: list[Utterance] = []
    annotations: list[Annotation] = []
    coders: dict[str, int] = {}
    width = len(str(config.n_cases))
    for ci in range(config.n_cases):
        case_id = f"case{ci + 1:0{width}d}"
        n_coders = int(rng.integers(config.coders_per_case[0], config.coders_per_case[1] + 1))
        coders[case_id] = n_coders
        coder_ids = [f"coder{j + 1}" for j in range(n_coders)]

        segments = [("planted", item) for item in assigned[ci]]
        free = int(remaining_room[ci])
        while free > 0:
            size = min(free, int(rng.integers(1, 4)))
            segments.append(("filler", size))
            free -= size
        seg_order = rng.permutation(len(segments))

        line_no = 0

        def emit(speaker: Speaker, text: str) -> Utterance:
            nonlocal line_no
            line_no += 1
            u = Utterance(case_id, line_no, speaker, text)
            utterances.append(u)
            return u

        for si in seg_order:
            kind, payload = segments[si]
            emit(Speaker.PATIENT, writer.patient_line())
            if kind == "filler":
                for _ in range(payload - 1):
                    emit(Speaker.DOCTOR, writer.line((), 0.0))
                continue
            code, size = payload
            for _ in range(size):
                target = emit(Speaker.DOCTOR, writer.line(LEXICONS[code], config.signal_share))
                annotations += _annotate(rng, case_id, target.line_no, code, coder_ids, config.disagreement_rate)
    annotations.sort(key=lambda a: (a.case_id, a.line_no, a.coder_id, a.code.order))
    return GeneratedCorpus(utterances, annotations, coders, config)


def _annotate(rng, case_id, line_no, code, coder_ids, disagreement_rate) -> list[Annotation]:
    tagged = [c for c in coder_ids if rng.random() < 0.7]
    if not tagged:
        tagged = [coder_ids[int(rng.integers(len(coder_ids)))]]
    out = [Annotation(case_id, line_no, c, code) for c in tagged]
    if rng.random() < disagreement_rate:
        alternatives = [c for c in EXPERIMENT_CODES if c is not code]
        second = alternatives[int(rng.integers(len(alternatives)))]
        untagged = [c for c in coder_ids if c not in tagged]
        out.append(Annotation(case_id, line_no, untagged[0] if untagged else tagged[-1], second))
    return out


# ---------------------------------------------------------------------------
# audit

GROUPS = (("A", 1), ("B", 3), ("C", 5))


@dataclass
class AuditReport:
    class_counts: dict[Code, int]
    group_counts: dict[str, dict[Code, int]]
    context_rate: float
    n_per_class: int
    failures: list[str]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_text(self) -> str:
        lines = [f"n_per_class = {self.n_per_class}", "", "class\ttotal\t" + "\t".join(g for g, _ in GROUPS)]
        for code in Code:
            row = [code.value, str(self.class_counts.get(code, 0))]
            row += [str(self.group_counts[g].get(code, 0)) for g, _ in GROUPS]
            lines.append("\t".join(row))
        lines.append("")
        lines.append(f"context_availability = {self.context_rate:.6f}")
        lines.append("status = " + ("PASS" if self.passed else "FAIL"))
        lines += [f"failure: {f}" for f in self.failures]
        return "\n".join(lines) + "\n"


def audit(
    pool: InstancePool,
    config: GenConfig | None = None,
    n_per_class: int = 190,
    preprocess: PreprocessConfig = PreprocessConfig(),
    classes=SEVEN_CLASSES,
) -> AuditReport:
    """Check that every experiment class has ``n_per_class`` lines in every word-count group.

    ``context_rate`` is the share of coded (non-NotCoded) lines with a
    non-empty attached context.
    """
    class_counts = pool.counts()
    group_counts = {g: {} for g, _ in GROUPS}
    for code in Code:
        lengths = []
        for cl in pool[code]:
            terms, raw = preprocess_text(cl.utterance.text, preprocess)
            lengths.append(len(terms) if preprocess.word_count_basis == "terms" else raw)
        for g, threshold in GROUPS:
            group_counts[g][code] = sum(1 for n in lengths if n >= threshold and n >= 1)
    coded = [cl for code in Code if code is not Code.NotCoded for cl in pool[code]]
    with_ctx = sum(1 for cl in coded if cl.context)
    context_rate = with_ctx / len(coded) if coded else 0.0
    failures = []
    for g, threshold in GROUPS:
        for code in classes:
            n = group_counts[g][code]
            if n < n_per_class:
                failures.append(f"group {g} (>= {threshold} words): {code.value} has {n} < {n_per_class}")
    return AuditReport(class_counts, group_counts, context_rate, n_per_class, failures)
